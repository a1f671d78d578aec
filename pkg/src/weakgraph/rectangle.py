from dataclasses import dataclass, field

import numpy as np

METHODS = ("delta", "bootstrap", "super_accurate", "finite_sample", "appendix_union")


@dataclass(frozen=True)
class ConfidenceRectangle:
    """A simultaneous confidence set given as a product of intervals.

    For max-norm rectangles ``half_width`` is a scalar ``Z_alpha / sqrt(n)``;
    for studentized rectangles it is a vector.  Mapped sets (the
    super-accurate bootstrap) are not symmetric about the centre, so the
    bounds are always stored explicitly in ``lower`` and ``upper``.
    """

    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    method: str
    n: int
    half_width: object = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.method not in METHODS:
            raise ValueError(f"unknown rectangle method {self.method!r}")
        for name in ("center", "lower", "upper"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.center.shape == self.lower.shape == self.upper.shape):
            raise ValueError("center and bounds must have equal length")
        if np.any(self.lower > self.center) or np.any(self.upper < self.center):
            raise ValueError("rectangle must contain its center")

    @classmethod
    def from_half_width(cls, center, half_width, alpha, method, n, info=None):
        center = np.asarray(center, dtype=float).reshape(-1)
        hw = np.asarray(half_width, dtype=float)
        if np.any(hw < 0):
            raise ValueError("half widths must be non-negative")
        stored = float(hw) if hw.ndim == 0 else hw.copy()
        return cls(
            center=center,
            lower=center - hw,
            upper=center + hw,
            alpha=float(alpha),
            method=method,
            n=int(n),
            half_width=stored,
            info=dict(info or {}),
        )

    def __len__(self):
        return self.center.shape[0]

    @property
    def widths(self):
        return self.upper - self.lower

    def contains(self, theta, atol=0.0):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return bool(
            np.all(theta >= self.lower - atol) and np.all(theta <= self.upper + atol)
        )

    def excludes(self, lo, hi):
        """Boolean mask of coordinates whose interval misses ``[lo, hi]``."""
        return (self.lower > hi) | (self.upper < lo)
