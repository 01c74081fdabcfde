"""
Serializable function families for Hurst functions, domain deformations and
noise levels. Every family is a frozen dataclass whose ``__call__`` is
vectorized over numpy arrays, so one object serves simulation, oracles and
config round trips. Hurst families also give their partial derivatives, and
Hurst and noise families a range check.
"""

from dataclasses import dataclass
from typing import Dict, Any, Tuple

import numpy as np

from core.field_model import Deformation, finite_nonnegative, in_unit_interval


# --- Hurst functions eta(u1, u2) ---

@dataclass(frozen=True)
class ConstantHurst:
    """eta(u) = value"""
    value: float

    def __call__(self, u1, u2):
        return np.full(np.broadcast(np.asarray(u1), np.asarray(u2)).shape, float(self.value))

    def gradient(self, u1, u2) -> Tuple[np.ndarray, np.ndarray]:
        zero = np.zeros(np.broadcast(np.asarray(u1), np.asarray(u2)).shape)
        return zero, zero.copy()

    def in_range(self, u1, u2) -> bool:
        return in_unit_interval(self(u1, u2))

    def describe(self) -> Dict[str, Any]:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class LinearHurst:
    """eta(u) = intercept + slope1*u1 + slope2*u2"""
    intercept: float
    slope1: float = 0.0
    slope2: float = 0.0

    def __call__(self, u1, u2):
        return self.intercept + self.slope1 * np.asarray(u1, dtype=float) + self.slope2 * np.asarray(u2, dtype=float)

    def gradient(self, u1, u2) -> Tuple[np.ndarray, np.ndarray]:
        shape = np.broadcast(np.asarray(u1), np.asarray(u2)).shape
        return np.full(shape, float(self.slope1)), np.full(shape, float(self.slope2))

    def in_range(self, u1, u2) -> bool:
        return in_unit_interval(self(u1, u2))

    def describe(self) -> Dict[str, Any]:
        return {"kind": "linear", "intercept": self.intercept, "slope1": self.slope1, "slope2": self.slope2}


@dataclass(frozen=True)
class LogisticHurst:
    """Smooth transition between ``low`` and ``high`` across the line w.u = center."""
    low: float
    high: float
    weight1: float = 1.0
    weight2: float = 0.0
    center: float = 0.0

    def _logit(self, u1, u2):
        return self.weight1 * np.asarray(u1, dtype=float) + self.weight2 * np.asarray(u2, dtype=float) - self.center

    def __call__(self, u1, u2):
        return self.low + (self.high - self.low) / (1.0 + np.exp(-self._logit(u1, u2)))

    def gradient(self, u1, u2) -> Tuple[np.ndarray, np.ndarray]:
        s = 1.0 / (1.0 + np.exp(-self._logit(u1, u2)))
        slope = (self.high - self.low) * s * (1.0 - s)
        return self.weight1 * slope, self.weight2 * slope

    def in_range(self, u1, u2) -> bool:
        return in_unit_interval(self(u1, u2))

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": "logistic", "low": self.low, "high": self.high,
            "weight1": self.weight1, "weight2": self.weight2, "center": self.center,
        }


# --- Noise levels sigma(t, x) ---

@dataclass(frozen=True)
class ConstantNoise:
    """sigma(t, x) = value"""
    value: float = 0.0

    def __call__(self, t, x):
        return np.full(np.shape(x), float(self.value))

    def in_range(self, t, x) -> bool:
        return finite_nonnegative(self(t, x))

    def describe(self) -> Dict[str, Any]:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class ProportionalNoise:
    """sigma(t, x) = base + slope*|x|, heteroscedastic in the signal level"""
    base: float
    slope: float

    def __call__(self, t, x):
        return self.base + self.slope * np.abs(np.asarray(x, dtype=float))

    def in_range(self, t, x) -> bool:
        return finite_nonnegative(self(t, x))

    def describe(self) -> Dict[str, Any]:
        return {"kind": "proportional", "base": self.base, "slope": self.slope}


# --- Deformations A: T -> U ---

def identity_deformation() -> Deformation:
    """A(t) = t"""
    one = lambda t1, t2: np.ones(np.broadcast(np.asarray(t1), np.asarray(t2)).shape)
    zero = lambda t1, t2: np.zeros(np.broadcast(np.asarray(t1), np.asarray(t2)).shape)
    return Deformation(
        a1=lambda t1, t2: np.asarray(t1, dtype=float) + 0.0 * np.asarray(t2, dtype=float),
        a2=lambda t1, t2: np.asarray(t2, dtype=float) + 0.0 * np.asarray(t1, dtype=float),
        da1_dt1=one, da1_dt2=zero, da2_dt1=zero, da2_dt2=one,
        description={"kind": "identity"},
    )


def power_deformation(scale: Tuple[float, float] = (1.0, 1.0),
                      power: Tuple[float, float] = (1.0, 1.0)) -> Deformation:
    """A_k(t) = scale_k * t_k ** power_k, e.g. A(t) = (t1**2, t2)"""
    c1, c2 = (float(v) for v in scale)
    p1, p2 = (float(v) for v in power)
    zero = lambda t1, t2: np.zeros(np.broadcast(np.asarray(t1), np.asarray(t2)).shape)
    return Deformation(
        a1=lambda t1, t2: c1 * np.asarray(t1, dtype=float) ** p1 + 0.0 * np.asarray(t2, dtype=float),
        a2=lambda t1, t2: c2 * np.asarray(t2, dtype=float) ** p2 + 0.0 * np.asarray(t1, dtype=float),
        da1_dt1=lambda t1, t2: c1 * p1 * np.asarray(t1, dtype=float) ** (p1 - 1.0) + 0.0 * np.asarray(t2, dtype=float),
        da1_dt2=zero,
        da2_dt1=zero,
        da2_dt2=lambda t1, t2: c2 * p2 * np.asarray(t2, dtype=float) ** (p2 - 1.0) + 0.0 * np.asarray(t1, dtype=float),
        description={"kind": "power", "scale": [c1, c2], "power": [p1, p2]},
    )


def affine_deformation(matrix, offset=(0.0, 0.0)) -> Deformation:
    """A(t) = matrix @ t + offset with nonnegative entries."""
    m = np.asarray(matrix, dtype=float).reshape(2, 2)
    b = np.asarray(offset, dtype=float).reshape(2)

    def const(v):
        return lambda t1, t2: np.full(np.broadcast(np.asarray(t1), np.asarray(t2)).shape, float(v))

    return Deformation(
        a1=lambda t1, t2: m[0, 0] * np.asarray(t1, dtype=float) + m[0, 1] * np.asarray(t2, dtype=float) + b[0],
        a2=lambda t1, t2: m[1, 0] * np.asarray(t1, dtype=float) + m[1, 1] * np.asarray(t2, dtype=float) + b[1],
        da1_dt1=const(m[0, 0]), da1_dt2=const(m[0, 1]),
        da2_dt1=const(m[1, 0]), da2_dt2=const(m[1, 1]),
        description={"kind": "affine", "matrix": m.tolist(), "offset": b.tolist()},
    )

