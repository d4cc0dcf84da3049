"""
renege-ldp - Command Line Entry Point
Large-deviations experiments for the queue with reneging
"""
import os
import sys
import argparse
import logging
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logs go to stderr; stdout carries the JSON result
log_level = os.getenv('LOG_LEVEL', 'INFO').upper()
log_handlers = [logging.StreamHandler(sys.stderr)]

log_file = os.getenv('LOG_FILE')
if log_file:
    try:
        log_handlers.append(logging.FileHandler(log_file))
    except PermissionError:
        # Console logging only
        pass

logging.basicConfig(
    level=getattr(logging, log_level, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=log_handlers
)
logger = logging.getLogger(__name__)

from config.settings import APP_VERSION
from core.errors import RenegeLDPError
from handlers import analysis_handler, simulation_handler
from handlers.run_config import common_arguments, build_run_config
from storage.artifact_manager import artifact_manager


class RenegeLDPCli:
    """
    Parses a subcommand, runs its pipeline and prints the JSON result

    Exit status is 0 on success, 2 for configuration errors and 3 for
    numerical failures; errors are printed as JSON on stdout.
    """

    def __init__(self):
        self.parser = self.build_parser()

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="renege-ldp",
            description="Large deviations of reneging in the M/M/1+M queue",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
        subparsers = parser.add_subparsers(dest="command", required=True)
        parent = common_arguments()
        analysis_handler.register(subparsers, parent)
        simulation_handler.register(subparsers, parent)
        return parser

    def execute(self, argv: Optional[List[str]] = None) -> Dict[str, Any]:
        """Run one command and return its rendered-ready payload"""
        args = vars(self.parser.parse_args(argv))
        command = args["command"]
        handler = args["handler"]
        config = build_run_config(command, args)
        artifact_manager.configure(config.output_dir)
        logger.info(f"Running {command}")
        payload = handler(config)
        return {"command": command, "payload": payload, "config": config.echo()}

    def run(self, argv: Optional[List[str]] = None) -> int:
        try:
            result = self.execute(argv)
        except RenegeLDPError as e:
            logger.error(f"❌ {e.code}: {e.message}")
            print(artifact_manager.render_json(e.to_dict(), "error", {"argv": argv if argv is not None else sys.argv[1:]}))
            return e.exit_status
        print(artifact_manager.render_json(result["payload"], result["command"], result["config"]))
        return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    return RenegeLDPCli().run(argv)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        sys.exit(130)
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        sys.exit(1)
