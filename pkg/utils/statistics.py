"""
Monte Carlo aggregation helpers
Running moments with pairwise merge, normal confidence intervals and
importance-weight effective sample size
"""
import logging
import math
from typing import Tuple

from scipy.stats import norm

logger = logging.getLogger(__name__)


class RunningMoments:
    """
    Streaming mean / variance (Welford) that merges chunk summaries

    Merging is exact up to rounding, so replication chunks can be summarized
    independently and combined in any fixed order.
    """

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, value: float):
        """Add a single observation"""
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        """Fold another summary into this one (in place) and return self"""
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / total
        self.m2 += other.m2 + delta * delta * self.count * other.count / total
        self.count = total
        return self

    @property
    def variance(self) -> float:
        """Unbiased sample variance (0 for fewer than two observations)"""
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def std_error(self) -> float:
        if self.count == 0:
            return 0.0
        return math.sqrt(self.variance / self.count)

    @property
    def sum(self) -> float:
        return self.count * self.mean

    @property
    def sum_squares(self) -> float:
        return self.m2 + self.count * self.mean * self.mean

    @property
    def ess(self) -> float:
        """(sum w)^2 / sum w^2 of the observations read as weights"""
        squares = self.sum_squares
        if squares <= 0:
            logger.debug("All importance weights are zero")
            return 0.0
        return min(float(self.count), self.sum * self.sum / squares)


def normal_ci(std_error: float, level: float = 0.95) -> float:
    """
    Half-width of a two-sided normal-approximation confidence interval

    Args:
        std_error: Standard error of the estimate
        level: Coverage probability

    Returns:
        z_{(1+level)/2} * std_error
    """
    return float(norm.ppf(0.5 + level / 2.0)) * std_error


def interval(mean: float, half_width: float) -> Tuple[float, float]:
    return mean - half_width, mean + half_width


def intervals_overlap(first: Tuple[float, float], second: Tuple[float, float]) -> bool:
    """True when two closed intervals intersect"""
    return first[0] <= second[1] and second[0] <= first[1]

