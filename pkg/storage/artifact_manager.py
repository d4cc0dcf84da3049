"""
Artifact Manager
Deterministic CSV / JSON output of trajectories, sample paths and tables
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config.settings import OUTPUT_CONFIG, APP_VERSION
from core.models import Trajectory, SamplePath

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Convert numpy / pydantic values to JSON-ready Python values"""
    if hasattr(value, "model_dump"):
        return _plain(value.model_dump(mode="python", by_alias=True))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return _plain(value.item())
    if hasattr(value, "value") and not isinstance(value, (int, float, str, bool)):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        # JSON has no inf / nan
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def sample_path_columns(path: SamplePath) -> Dict[str, np.ndarray]:
    return {
        "t": path.jump_times,
        "x_bar": path.x_bar,
        "y_bar": path.y_bar,
        "event_type": path.event_types,
    }


class ArtifactManager:
    """
    Writes experiment artifacts under one output directory

    Identical inputs produce byte-identical files: floats use %.17g, JSON keys
    are sorted and nothing time-dependent is written.
    """

    def __init__(self):
        self.output_dir = Path(OUTPUT_CONFIG['output_dir'])
        self.float_format = OUTPUT_CONFIG['float_format']

    def configure(self, output_dir: Optional[str] = None):
        """Point the manager at another directory"""
        if output_dir:
            self.output_dir = Path(output_dir)

    def output_path(self, name: str) -> Path:
        """Path of an artifact, creating the directory on first use"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name

    def _write_columns(self, name: str, columns: Dict[str, np.ndarray]) -> Path:
        path = self.output_path(name)
        data = np.column_stack([np.asarray(col, dtype=float) for col in columns.values()])
        try:
            with open(path, "w", newline="\n", encoding="utf-8") as fh:
                np.savetxt(fh, data, fmt=self.float_format, delimiter=",",
                           header=",".join(columns.keys()), comments="", newline="\n")
        except OSError as e:
            logger.error(f"❌ Could not write {path}: {e}", exc_info=True)
            raise
        logger.info(f"Wrote {data.shape[0]} rows to {path}")
        return path

    def save_trajectory(self, traj: Trajectory, name: str = "trajectory.csv") -> Path:
        """CSV with header t,xi,zeta[,phi1,phi2,phi3]"""
        return self._write_columns(name, traj.columns())

    def save_sample_path(self, path: SamplePath, name: str = "sample_path.csv") -> Path:
        """CSV with header t,x_bar,y_bar,event_type"""
        return self._write_columns(name, sample_path_columns(path))

    def save_table(self, rows: List[Dict[str, Any]], name: str,
                   columns: Optional[Sequence[str]] = None) -> Path:
        """CSV of a list of uniform rows (empty tables keep the header)"""
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        path = self.output_path(name)
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(self.float_format % float(row[col]) for col in columns))
        try:
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"❌ Could not write {path}: {e}", exc_info=True)
            raise
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def render_json(self, payload: Dict[str, Any], command: str, config: Dict[str, Any]) -> str:
        """JSON text with a provenance block echoing the full configuration"""
        document = dict(_plain(payload))
        document["provenance"] = {
            "command": command,
            "config": _plain(config),
            "version": APP_VERSION,
        }
        return json.dumps(document, sort_keys=True, indent=2)

    def save_json(self, payload: Dict[str, Any], name: str, command: str,
                  config: Dict[str, Any]) -> Path:
        path = self.output_path(name)
        try:
            path.write_text(self.render_json(payload, command, config) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"❌ Could not write {path}: {e}", exc_info=True)
            raise
        logger.info(f"Wrote report to {path}")
        return path


# Global artifact manager instance
artifact_manager = ArtifactManager()
