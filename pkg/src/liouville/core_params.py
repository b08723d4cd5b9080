"""Global parameters and the closed-form constants built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

__all__ = [
    "DiskParams",
    "ceil_alpha",
    "solution_count",
    "polygon_radius",
    "polygon_config",
    "check_peak_count",
]


@dataclass(frozen=True)
class DiskParams:
    """Singularity strength ``alpha`` and the optional coupling ``lam``.

    ``beta`` is derived (``alpha + 1``) and never passed in.
    """

    alpha: float
    lam: float | None = None
    beta: float = field(init=False)

    def __post_init__(self):
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", alpha + 1.0)
        if self.lam is not None:
            lam = float(self.lam)
            if not math.isfinite(lam) or lam < 0:
                raise DomainError(f"lambda must be nonnegative, got {self.lam!r}")
            object.__setattr__(self, "lam", lam)

    def with_lambda(self, lam: float) -> DiskParams:
        return DiskParams(self.alpha, lam)

    def require_lambda(self) -> float:
        if self.lam is None:
            raise DomainError("this computation needs lambda")
        return self.lam


def _params(p) -> DiskParams:
    return p if isinstance(p, DiskParams) else DiskParams(p)


def check_peak_count(m) -> int:
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise DomainError(f"peak count must be a positive integer, got {m!r}")
    return int(m)


def ceil_alpha(p) -> int:
    return math.ceil(_params(p).alpha)


def solution_count(p) -> int:
    """Number of solutions modulo rotation for small lambda: ceil(alpha) + 2."""
    return ceil_alpha(p) + 2


def polygon_radius(p, m) -> float:
    """Common radius ((beta - m)/(beta + m))^(1/(2m)) of the critical polygon."""
    p = _params(p)
    m = check_peak_count(m)
    if m >= p.beta:
        raise DomainError(
            f"no critical configuration for m={m} >= alpha+1={p.beta:g}"
        )
    return ((p.beta - m) / (p.beta + m)) ** (1.0 / (2 * m))


def polygon_config(p, m, theta0: float = 0.0) -> np.ndarray:
    """Vertices r e^{i(theta0 + 2 pi j/m)}, j = 0..m-1, as a complex array."""
    r = polygon_radius(p, m)
    m = int(m)
    return r * np.exp(1j * (theta0 + 2.0 * np.pi * np.arange(m) / m))
