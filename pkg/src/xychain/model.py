"""Shared types, parameters, and errors for the XY-chain package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

SYMMETRIC = "symmetric"
BROKEN = "broken"
STATE_KINDS = (SYMMETRIC, BROKEN)

# positive-semidefiniteness tolerance used everywhere a spectrum is checked
PSD_TOL = 1e-10


class ParameterDomainError(ValueError):
    """Inputs outside the supported (gamma, lambda) domain."""


class InconsistentCorrelatorsError(ArithmeticError):
    """No positive-semidefinite two-spin state exists for the given correlators.

    Signals an upstream numerical fault rather than a physics statement.
    """


class NonPositiveStateError(ValueError):
    """A matrix handed to an entanglement measure is not PSD within tolerance."""


class FitRejectedError(RuntimeError):
    """A decay-length fit showed non-exponential residual structure."""


class ConfigError(ValueError):
    """Malformed sweep configuration."""


class Interval(NamedTuple):
    """Closed interval [lo, hi]; degenerate (lo == hi) for point values."""

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    @classmethod
    def point(cls, x: float) -> "Interval":
        x = float(x)
        return cls(x, x)


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the transverse-field XY chain.

    The field h is normalized to 1 internally so that J = lam and the single
    tuning parameter is lam = J/h. gamma in (0, 1] is the anisotropy; gamma = 1
    is the transverse-field Ising chain.
    """

    gamma: float
    lam: float

    def __post_init__(self):
        g, l = self.gamma, self.lam
        if not (isinstance(g, (int, float)) and math.isfinite(g) and 0.0 < g <= 1.0):
            raise ParameterDomainError(f"gamma must lie in (0, 1], got {g!r}")
        if not (isinstance(l, (int, float)) and math.isfinite(l) and l >= 0.0):
            raise ParameterDomainError(f"lambda must be finite and >= 0, got {l!r}")

    @property
    def J(self) -> float:
        return self.lam

    @property
    def h(self) -> float:
        return 1.0

    @property
    def lambda1(self) -> float:
        """Symmetry-breaking critical point."""
        return 1.0

    @property
    def lambda2(self) -> float:
        """Disorder point 1/sqrt(1 - gamma^2); infinite for gamma = 1."""
        if self.gamma >= 1.0:
            return math.inf
        return 1.0 / math.sqrt(1.0 - self.gamma**2)

    @classmethod
    def from_couplings(cls, J: float, h: float, gamma: float) -> "ModelParams":
        if h <= 0:
            raise ParameterDomainError(f"h must be positive, got {h!r}")
        return cls(gamma=gamma, lam=J / h)


def check_state_kind(state_kind: str) -> str:
    if state_kind not in STATE_KINDS:
        raise ParameterDomainError(
            f"state_kind must be one of {STATE_KINDS}, got {state_kind!r}"
        )
    return state_kind
