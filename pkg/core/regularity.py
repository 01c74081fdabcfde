"""
Local regularity estimation from a sample of sheets.

Increment moments theta^(i)(Delta) are averaged over sheets; log-ratios of
their sums give the pooled exponent. The moments of the smoother axis,
rescaled by the pooled exponent at Delta and 2 Delta, give the gap statistic
that is thresholded to decide local anisotropy. Once anisotropy is detected
the exponents are read per axis. Holder constants follow by plugging the
exponents back into the increment moments.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from core.errors import BoundaryViolation, ConfigError, EmptyDataset
from core.field_model import SurfaceDataset, interior_margin
from core.mfbs_sim import resolve_threads
from core.surface_approx import ApproxPolicy, SurfaceApproximator

logger = logging.getLogger(__name__)

LOG4 = 2.0 * math.log(2.0)
ALPHA_TIE_RTOL = 1e-14
AXES = (1, 2)


@dataclass(frozen=True)
class RegParams:
    """Tuning of the regularity estimators"""
    delta: float
    tau: float
    beta_low: float = 0.05
    beta_high_L: float = 100.0
    v_floor: float = 1e-6
    policy: ApproxPolicy = field(default_factory=ApproxPolicy)

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta must be > 0")
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0,1)")
        if not 0 < self.beta_low < 1:
            raise ConfigError("beta_low must lie in (0,1)")
        if not self.beta_high_L > 0:
            raise ConfigError("beta_high_L must be > 0")
        if not self.v_floor > 0:
            raise ConfigError("v_floor must be > 0")


@dataclass(frozen=True)
class RegularityEstimate:
    t: Tuple[float, float]
    h_low: float
    d_hat: float
    anisotropic: bool
    h_high: float
    h1_hat: float
    h2_hat: float
    l1: Tuple[float, float]
    l2: Tuple[float, float]
    gamma_values: Tuple[float, float]
    theta_values: Tuple[Tuple[float, float], Tuple[float, float]]
    degenerate_flags: FrozenSet[str]
    gamma_4d: float = float("nan")
    alpha_values: Tuple[float, float] = (float("nan"), float("nan"))
    axis_h: Tuple[float, float] = (float("nan"), float("nan"))
    v_hat: float = float("nan")
    low_axis: int = 1
    gap_statistic: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "t1": self.t[0], "t2": self.t[1],
            "h_low": self.h_low, "d_hat": self.d_hat, "gap_statistic": self.gap_statistic,
            "anisotropic": self.anisotropic,
            "h_high": self.h_high, "h1_hat": self.h1_hat, "h2_hat": self.h2_hat,
            "l1_axis1": self.l1[0], "l1_axis2": self.l1[1],
            "l2_axis1": self.l2[0], "l2_axis2": self.l2[1],
            "gamma_d": self.gamma_values[0], "gamma_2d": self.gamma_values[1], "gamma_4d": self.gamma_4d,
            "theta1_d": self.theta_values[0][0], "theta1_2d": self.theta_values[0][1],
            "theta2_d": self.theta_values[1][0], "theta2_2d": self.theta_values[1][1],
            "alpha_d": self.alpha_values[0], "alpha_2d": self.alpha_values[1],
            "axis_h1": self.axis_h[0], "axis_h2": self.axis_h[1],
            "v_hat": self.v_hat, "low_axis": self.low_axis,
            "degenerate_flags": sorted(self.degenerate_flags),
        }


# --- Scalar estimating equations ---

def h_low_hat(gamma_d: float, gamma_2d: float, beta_low: float = 0.05) -> Tuple[float, bool]:
    """Lower exponent from gamma(Delta), gamma(2 Delta); (1, True) unless both are positive."""
    if not (gamma_d > 0 and gamma_2d > 0):
        return 1.0, True
    h = (math.log(gamma_2d) - math.log(gamma_d)) / LOG4
    return min(max(h, beta_low), 1.0), False


def axis_exponent_hat(theta_d: float, theta_2d: float, beta_low: float = 0.05) -> float:
    """Single-axis exponent from theta^(i)(Delta), theta^(i)(2 Delta)"""
    h, _ = h_low_hat(theta_d, theta_2d, beta_low)
    return h


def alpha_hat(gamma_d: float, gamma_2d: float, h_low: float, delta: float) -> Tuple[float, bool]:
    """|gamma(2D)/(2D)^(2H) - gamma(D)/D^(2H)|, or (1, True) when the two tie."""
    if not delta > 0:
        raise ConfigError("delta must be > 0")
    r2 = gamma_2d / (2.0 * delta) ** (2.0 * h_low)
    r1 = gamma_d / delta ** (2.0 * h_low)
    diff = abs(r2 - r1)
    if diff <= ALPHA_TIE_RTOL * max(abs(r1), abs(r2)):
        return 1.0, True
    return diff, False


def d_hat_and_detect(alpha_d: Tuple[float, bool], alpha_2d: Tuple[float, bool],
                     tau: float) -> Tuple[float, bool]:
    """Exponent gap estimate and the anisotropy decision gap >= tau."""
    if not tau > 0:
        raise ConfigError("tau must be > 0")
    (a1, deg1), (a2, deg2) = alpha_d, alpha_2d
    if deg1 or deg2 or not (a1 > 0 and a2 > 0):
        return 0.0, False
    d = (math.log(a2) - math.log(a1)) / LOG4
    if d <= 0:
        return 0.0, False
    return d, d >= tau


def gap_moments(theta_d: float, theta_2d: float, h_low: float,
                delta: float) -> Tuple[Tuple[float, bool], Tuple[float, bool]]:
    """theta(Delta)/Delta^(2H) and theta(2 Delta)/(2 Delta)^(2H), flagged when not positive.

    Their log-ratio over log 4 is the excess of the axis exponent over H.
    """
    if not delta > 0:
        raise ConfigError("delta must be > 0")
    r1 = theta_d / delta ** (2.0 * h_low)
    r2 = theta_2d / (2.0 * delta) ** (2.0 * h_low)
    return (r1, not r1 > 0), (r2, not r2 > 0)


def l1_hat(theta_d: float, h_low: float, delta: float, beta_high_L: float) -> float:
    """theta^(i)(Delta) / Delta^(2 H_low), truncated at beta_high_L"""
    if not delta > 0:
        raise ConfigError("delta must be > 0")
    value = max(theta_d, 0.0) / delta ** (2.0 * h_low)
    return min(value, beta_high_L)


def l2_hat(theta_d: float, theta_2d: float, h_low: float, d_raw: float, delta: float) -> float:
    """Constant of the higher exponent; 0 when no gap was detected."""
    if not delta > 0:
        raise ConfigError("delta must be > 0")
    if d_raw <= 0:
        return 0.0
    num, tie = alpha_hat(theta_d, theta_2d, h_low, delta)
    if tie:
        return 0.0
    return num / ((2.0 ** (2.0 * d_raw) - 1.0) * delta ** (2.0 * d_raw))


# --- Sample quantities ---

def estimation_stencil(points, delta: float) -> np.ndarray:
    """Every location any estimator evaluates around ``points``, deduplicated."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    offsets = [np.zeros(2)]
    for step in (0.5 * delta, delta, 2.0 * delta):
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = step
            offsets.extend([e, -e])
    stencil = np.vstack([pts + off for off in offsets])
    return np.unique(np.round(stencil, 12), axis=0)


def default_delta(dataset: SurfaceDataset, max_sheets: int = 50) -> float:
    """Twice the median nearest-neighbour spacing, floored at (domain side)/50."""
    spacings: List[np.ndarray] = []
    sheets = dataset.sheets if dataset.shared_points() is None else dataset.sheets[:1]
    for sheet in sheets[:max_sheets]:
        if sheet.size < 2:
            continue
        dist, _ = cKDTree(sheet.points).query(sheet.points, k=2)
        spacings.append(dist[:, 1])
    floor = dataset.domain.min_side / 50.0
    if not spacings:
        return floor
    return max(2.0 * float(np.median(np.concatenate(spacings))), floor)


def default_tau(delta: float) -> float:
    return max(0.05, math.sqrt(delta))


class RegularityEstimator:
    """Estimators bound to one dataset; the approximation index is built once."""

    def __init__(self, dataset: SurfaceDataset, policy: Optional[ApproxPolicy] = None):
        if dataset.n_sheets == 0:
            raise EmptyDataset("dataset has no sheets")
        self.dataset = dataset
        self.policy = policy or ApproxPolicy()
        self.approximator = SurfaceApproximator(dataset, self.policy)

    def _require_margin(self, t, delta: float):
        if not interior_margin(self.dataset.domain, t, delta):
            raise BoundaryViolation(t, delta)

    def theta(self, t, delta: float, axis: int) -> float:
        """Mean over sheets of the squared increment across t -/+ (delta/2) e_axis."""
        if axis not in AXES:
            raise ConfigError(f"axis must be 1 or 2, got {axis}")
        e = np.zeros(2)
        e[axis - 1] = 0.5 * delta
        tt = np.asarray(t, dtype=float)
        diff = self.approximator.values_at(tt - e) - self.approximator.values_at(tt + e)
        return float(np.mean(diff * diff))

    def gamma(self, t, delta: float) -> float:
        return self.theta(t, delta, 1) + self.theta(t, delta, 2)

    def v(self, t, v_floor: float) -> float:
        x = self.approximator.values_at(np.asarray(t, dtype=float))
        return max(v_floor, float(np.mean(x * x)))

    def estimate(self, t, params: RegParams) -> RegularityEstimate:
        delta = params.delta
        self._require_margin(t, delta)
        theta = {
            (axis, k): self.theta(t, k * delta, axis)
            for axis in AXES for k in (1, 2, 4)
        }
        g1 = theta[(1, 1)] + theta[(2, 1)]
        g2 = theta[(1, 2)] + theta[(2, 2)]
        g4 = theta[(1, 4)] + theta[(2, 4)]
        flags = set()

        h_gamma, degenerate = h_low_hat(g1, g2, params.beta_low)
        if degenerate:
            flags.add("gamma_nonpositive")
        axis_h = tuple(axis_exponent_hat(theta[(axis, 1)], theta[(axis, 2)], params.beta_low) for axis in AXES)

        # smoother axis: larger exponent, ties go to the smaller increment
        smooth = max(AXES, key=lambda a: (axis_h[a - 1], -theta[(a, 1)]))
        rough = 3 - smooth
        gap = gap_moments(theta[(smooth, 1)], theta[(smooth, 2)], h_gamma, delta)
        if gap[0][1] or gap[1][1]:
            flags.add("alpha_degenerate")
        gap_stat, anisotropic = d_hat_and_detect(*gap, params.tau)
        if gap_stat == 0.0:
            flags.add("dhat_zero")

        if anisotropic and axis_h[smooth - 1] > axis_h[rough - 1]:
            h_low, h_high = axis_h[rough - 1], axis_h[smooth - 1]
            d_raw = h_high - h_low
            low_axis = rough
        else:
            # isotropic, or both axis exponents clamped to one bound
            anisotropic = False
            h_low = h_high = h_gamma
            d_raw = gap_stat
            # labels are a convention: the dominant increment carries H1
            low_axis = 1 if theta[(1, 1)] >= theta[(2, 1)] else 2
        h1_hat, h2_hat = (h_low, h_high) if low_axis == 1 else (h_high, h_low)

        d_used = d_raw if anisotropic else 0.0
        l2 = tuple(l2_hat(theta[(axis, 1)], theta[(axis, 2)], h_low, d_used, delta) for axis in AXES)
        # the second term of the increment moment leaks into the first constant
        leak = delta ** (2.0 * d_used) if anisotropic else 0.0
        l1 = tuple(
            max(l1_hat(theta[(axis, 1)], h_low, delta, params.beta_high_L) - l2[axis - 1] * leak, 0.0)
            for axis in AXES
        )

        if flags:
            logger.debug("degenerate estimator paths at %s: %s", tuple(t), sorted(flags))

        return RegularityEstimate(
            t=(float(t[0]), float(t[1])),
            h_low=h_low, d_hat=d_raw, anisotropic=anisotropic, h_high=h_high,
            h1_hat=h1_hat, h2_hat=h2_hat,
            l1=l1, l2=l2,
            gamma_values=(g1, g2),
            theta_values=((theta[(1, 1)], theta[(1, 2)]), (theta[(2, 1)], theta[(2, 2)])),
            degenerate_flags=frozenset(flags),
            gamma_4d=g4,
            alpha_values=(gap[0][0], gap[1][0]),
            axis_h=axis_h,
            v_hat=self.v(t, params.v_floor),
            low_axis=low_axis,
            gap_statistic=gap_stat,
        )


def theta_hat(dataset: SurfaceDataset, t, delta: float, axis: int,
              policy: Optional[ApproxPolicy] = None) -> float:
    """(1/N) sum_j [X~(t - delta/2 e_i) - X~(t + delta/2 e_i)]^2"""
    est = RegularityEstimator(dataset, policy)
    est._require_margin(t, delta)
    return est.theta(t, delta, axis)


def gamma_hat(dataset: SurfaceDataset, t, delta: float, policy: Optional[ApproxPolicy] = None) -> float:
    est = RegularityEstimator(dataset, policy)
    est._require_margin(t, delta)
    return est.gamma(t, delta)


def v_hat(dataset: SurfaceDataset, t, policy: Optional[ApproxPolicy], v_floor: float) -> float:
    """max(v_floor, mean_j X~^(j)(t)^2)"""
    return RegularityEstimator(dataset, policy).v(t, v_floor)


def estimate_regularity(dataset: SurfaceDataset, t, params: RegParams) -> RegularityEstimate:
    return RegularityEstimator(dataset, params.policy).estimate(t, params)


def estimate_regularity_grid(dataset: SurfaceDataset, points, params: RegParams,
                             threads: int = 1) -> List[RegularityEstimate]:
    """estimate_regularity at every row of ``points``, in input order."""
    est = RegularityEstimator(dataset, params.policy)
    pts = [tuple(p) for p in np.atleast_2d(np.asarray(points, dtype=float))]
    workers = resolve_threads(threads)
    if workers == 1 or len(pts) < 2:
        return [est.estimate(p, params) for p in pts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: est.estimate(p, params), pts))
