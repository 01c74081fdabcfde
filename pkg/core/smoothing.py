"""
Nadaraya-Watson reconstruction of a new sheet with bandwidths adapted to the
estimated local regularity.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from core.errors import BoundaryViolation, ConfigError, DomainError, TooFewObservations
from core.field_model import Domain, Sheet, SurfaceDataset, interior_margin
from core.regularity import RegParams, RegularityEstimate, RegularityEstimator

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("boxcar", "biweight-product")
PLUGIN_KINDS = ("axis-labeled", "per-axis")
BIWEIGHT_NORM = (15.0 / 16.0) ** 2
# smallest admissible plug-in Holder constant, keeps Lambda_i finite
L_FLOOR = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Product kernel on [-1,1]^2 with kappa^-1 1_{B(0,r)} <= K <= kappa"""
    kind: str = "boxcar"
    kappa: float = 4.0
    inner_radius_r: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"Unknown kernel '{self.kind}', expected one of {KERNEL_KINDS}")
        if not (self.kappa > 0 and 0 < self.inner_radius_r <= 1):
            raise ConfigError("kernel needs kappa > 0 and r in (0,1]")

    @classmethod
    def boxcar(cls) -> "KernelSpec":
        return cls("boxcar", 4.0, 1.0)

    @classmethod
    def biweight(cls, inner_radius_r: float = 0.5) -> "KernelSpec":
        # the minimum over the disc of radius r sits on an axis
        floor = BIWEIGHT_NORM * (1.0 - inner_radius_r ** 2) ** 2
        return cls("biweight-product", 1.0 / floor, inner_radius_r)


def kernel_weights(spec: KernelSpec, offsets) -> np.ndarray:
    """K at each row of an (n, 2) array of scaled offsets"""
    u = np.atleast_2d(np.asarray(offsets, dtype=float))
    inside = (np.abs(u[:, 0]) <= 1.0) & (np.abs(u[:, 1]) <= 1.0)
    if spec.kind == "boxcar":
        return np.where(inside, 0.25, 0.0)
    w = BIWEIGHT_NORM * (1.0 - u[:, 0] ** 2) ** 2 * (1.0 - u[:, 1] ** 2) ** 2
    return np.where(inside, w, 0.0)


def kernel_eval(spec: KernelSpec, u) -> float:
    return float(kernel_weights(spec, np.asarray(u, dtype=float).reshape(1, 2))[0])


def nw_predict(obs: Sheet, t, h1: float, h2: float, kernel: KernelSpec) -> Tuple[float, int]:
    """Kernel-weighted average of the sheet around t; (0, 0) on an empty window."""
    if not (h1 > 0 and h2 > 0):
        raise DomainError(f"bandwidths must be > 0, got ({h1}, {h2})")
    if obs.size == 0:
        return 0.0, 0
    scaled = (obs.points - np.asarray(t, dtype=float)) / np.array([h1, h2])
    w = kernel_weights(kernel, scaled)
    positive = w > 0
    n_eff = int(positive.sum())
    if n_eff == 0:
        return 0.0, 0
    value = float(np.dot(w[positive], obs.values[positive]) / w[positive].sum())
    return value, n_eff


def nw_predict_many(obs: Sheet, targets, h1: float, h2: float,
                    kernel: KernelSpec) -> Tuple[np.ndarray, np.ndarray]:
    pts = np.atleast_2d(np.asarray(targets, dtype=float))
    values = np.zeros(len(pts))
    counts = np.zeros(len(pts), dtype=int)
    for i, t in enumerate(pts):
        values[i], counts[i] = nw_predict(obs, t, h1, h2, kernel)
    return values, counts


def effective_smoothness(h1_exp: float, h2_exp: float) -> float:
    """omega = H1 H2 / (H1 + H2)"""
    for h in (h1_exp, h2_exp):
        if not 0 < h <= 1:
            raise DomainError(f"exponents must lie in (0,1], got {h}")
    return h1_exp * h2_exp / (h1_exp + h2_exp)


@dataclass(frozen=True)
class BandwidthPlan:
    t: Tuple[float, float]
    h1: float
    h2: float
    omega: float
    lambda1: float
    lambda2: float
    sigma2: float
    c_density: float
    m0: int
    h_exps: Tuple[float, float] = (float("nan"), float("nan"))
    l_consts: Tuple[float, float] = (float("nan"), float("nan"))
    alpha1: float = float("nan")
    alpha2: float = float("nan")
    curly_h: float = float("nan")
    clipped: bool = False
    isotropic: bool = False

    @property
    def rate_exponent(self) -> float:
        """-2 omega / (2 omega + 1), the log-log slope of the risk in M0"""
        return -2.0 * self.omega / (2.0 * self.omega + 1.0)

    def to_dict(self) -> dict:
        return {
            "t1": self.t[0], "t2": self.t[1], "h1": self.h1, "h2": self.h2,
            "omega": self.omega, "lambda1": self.lambda1, "lambda2": self.lambda2,
            "sigma2": self.sigma2, "c_density": self.c_density, "m0": self.m0,
            "H1": self.h_exps[0], "H2": self.h_exps[1], "L1": self.l_consts[0], "L2": self.l_consts[1],
            "alpha1": self.alpha1, "alpha2": self.alpha2, "curly_h": self.curly_h,
            "clipped": self.clipped, "isotropic": self.isotropic,
        }


def optimal_bandwidths(t, h_exps: Tuple[float, float], l_consts: Tuple[float, float],
                       sigma2: float, c_density: float, kappa: float, m0: int,
                       max_bandwidths: Optional[Tuple[float, float]] = None) -> BandwidthPlan:
    """Minimizer of the variance plus bias terms of the pointwise risk bound."""
    h1e, h2e = (float(h) for h in h_exps)
    l1, l2 = (float(v) for v in l_consts)
    if not (l1 > 0 and l2 > 0):
        raise DomainError(f"Holder constants must be > 0, got ({l1}, {l2})")
    if not (sigma2 > 0 and c_density > 0 and kappa > 0):
        raise DomainError("sigma2, c_density and kappa must be > 0")
    if int(m0) < 1:
        raise DomainError(f"m0 must be >= 1, got {m0}")
    omega = effective_smoothness(h1e, h2e)
    curly_h = 2.0 * h1e * h2e + h1e + h2e
    alpha1 = omega / ((2.0 * omega + 1.0) * h1e)
    alpha2 = omega / ((2.0 * omega + 1.0) * h2e)
    base = kappa ** 2 * sigma2 / (4.0 * c_density * math.pi)
    lam1 = base / (h1e * l1)
    lam2 = base / (h2e * l2)
    h1 = m0 ** (-alpha1) * (lam1 ** (2.0 * h2e + 1.0) / lam2) ** (1.0 / (2.0 * curly_h))
    h2 = m0 ** (-alpha2) * (lam2 ** (2.0 * h1e + 1.0) / lam1) ** (1.0 / (2.0 * curly_h))
    clipped = False
    if max_bandwidths is not None:
        c1, c2 = min(h1, max_bandwidths[0]), min(h2, max_bandwidths[1])
        clipped = (c1, c2) != (h1, h2)
        h1, h2 = c1, c2
    return BandwidthPlan(
        t=(float(t[0]), float(t[1])), h1=h1, h2=h2, omega=omega,
        lambda1=lam1, lambda2=lam2, sigma2=float(sigma2), c_density=float(c_density), m0=int(m0),
        h_exps=(h1e, h2e), l_consts=(l1, l2), alpha1=alpha1, alpha2=alpha2,
        curly_h=curly_h, clipped=clipped,
    )


def _nearest_other(points: np.ndarray) -> np.ndarray:
    """Index of the nearest distinct observation of every point"""
    _, idx = cKDTree(points).query(points, k=2)
    own = np.arange(len(points))
    return np.where(idx[:, 0] != own, idx[:, 0], idx[:, 1])


def rice_sigma_hat(dataset: SurfaceDataset) -> float:
    """Half the pooled mean squared difference to the nearest in-sheet neighbour."""
    total, count = 0.0, 0
    for sheet in dataset.sheets:
        if sheet.size < 2:
            continue
        other = _nearest_other(sheet.points)
        diff = sheet.values - sheet.values[other]
        total += float(np.dot(diff, diff))
        count += sheet.size
    if count == 0:
        raise TooFewObservations("rice_sigma_hat needs a sheet with at least 2 observations")
    return max(0.5 * total / count, 0.0)


def learning_sigma2(learn: SurfaceDataset) -> float:
    """Known noise variance of the learning set, else its Rice estimate."""
    if learn.noise_known_sigma is not None:
        return learn.noise_known_sigma ** 2
    return rice_sigma_hat(learn)


def default_c_density(domain: Domain) -> float:
    return 1.0 / domain.area


def plugin_inputs(est: RegularityEstimate, params: RegParams, plugin: str = "axis-labeled",
                  force_isotropic: bool = True) -> Tuple[Tuple[float, float], Tuple[float, float], bool]:
    """(H1, H2), (L1, L2) for optimal_bandwidths from a regularity estimate."""
    if plugin not in PLUGIN_KINDS:
        raise ConfigError(f"Unknown plug-in rule '{plugin}', expected one of {PLUGIN_KINDS}")
    delta = params.delta
    isotropic = force_isotropic and not est.anisotropic
    if isotropic:
        h = (est.h_low, est.h_low)
        l_consts = est.l1
    elif plugin == "per-axis":
        h = est.axis_h
        l_consts = tuple(
            min(est.theta_values[i][0] / delta ** (2.0 * h[i]), params.beta_high_L) for i in range(2)
        )
    else:
        h = (est.h1_hat, est.h2_hat)
        low = est.low_axis - 1
        high = 1 - low
        l_consts = [0.0, 0.0]
        l_consts[low] = est.l1[low]
        l_consts[high] = est.l2[high]
    h = tuple(min(max(float(x), params.beta_low), 1.0) for x in h)
    l_consts = tuple(max(float(x), L_FLOOR) for x in l_consts)
    return h, l_consts, isotropic


def adaptive_predict(learn: SurfaceDataset, new_sheet: Sheet, t, params: RegParams,
                     kernel: Optional[KernelSpec] = None, c_density: Optional[float] = None,
                     plugin: str = "axis-labeled", force_isotropic: bool = True,
                     sigma2: Optional[float] = None,
                     estimator: Optional[RegularityEstimator] = None) -> Tuple[float, BandwidthPlan]:
    """Estimate regularity on ``learn``, plan bandwidths, smooth ``new_sheet`` at t.

    The noise variance is ``sigma2`` when given, else learning_sigma2(learn).
    Pass ``estimator`` and ``sigma2`` to reuse them across many targets.
    """
    kernel = kernel or KernelSpec.boxcar()
    domain = learn.domain
    if not interior_margin(domain, t, params.delta):
        raise BoundaryViolation(t, params.delta)
    estimator = estimator or RegularityEstimator(learn, params.policy)
    est = estimator.estimate(t, params)
    h_exps, l_consts, isotropic = plugin_inputs(est, params, plugin, force_isotropic)
    if sigma2 is None:
        sigma2 = learning_sigma2(learn)
    c = c_density if c_density is not None else default_c_density(domain)
    plan = optimal_bandwidths(t, h_exps, l_consts, sigma2, c, kernel.kappa,
                              max(1, new_sheet.size), max_bandwidths=domain.sides)
    if isotropic:
        plan = replace(plan, isotropic=True)
    value, n_eff = nw_predict(new_sheet, t, plan.h1, plan.h2, kernel)
    if n_eff == 0:
        logger.warning("empty smoothing window at %s (h1=%.3g, h2=%.3g)", tuple(t), plan.h1, plan.h2)
    return value, plan


def oracle_predict(new_sheet: Sheet, t, h_exps, l_consts, sigma2: float, domain: Domain,
                   kernel: Optional[KernelSpec] = None,
                   c_density: Optional[float] = None) -> Tuple[float, BandwidthPlan]:
    """optimal_bandwidths from known regularity followed by nw_predict."""
    kernel = kernel or KernelSpec.boxcar()
    c = c_density if c_density is not None else default_c_density(domain)
    plan = optimal_bandwidths(t, h_exps, l_consts, sigma2, c, kernel.kappa,
                              max(1, new_sheet.size), max_bandwidths=domain.sides)
    value, _ = nw_predict(new_sheet, t, plan.h1, plan.h2, kernel)
    return value, plan


def empirical_risk(predictions: Sequence[float], truths: Sequence[float]) -> float:
    """Mean squared error"""
    p = np.asarray(predictions, dtype=float)
    q = np.asarray(truths, dtype=float)
    if p.shape != q.shape or p.size == 0:
        raise ValueError(f"predictions and truths must be nonempty and aligned, got {p.shape} and {q.shape}")
    return float(np.mean((p - q) ** 2))


@dataclass(frozen=True)
class RiskTerms:
    variance: float
    bias1: float
    bias2: float

    @property
    def total(self) -> float:
        return self.variance + self.bias1 + self.bias2


def risk_bound_terms(plan: BandwidthPlan, h_exps, l_consts, kappa: float = 4.0) -> RiskTerms:
    """Dominant terms kappa^2 sigma^2/(c pi M0 h1 h2) + 2 L_i h_i^(2 H_i)"""
    variance = kappa ** 2 * plan.sigma2 / (plan.c_density * math.pi * plan.m0 * plan.h1 * plan.h2)
    return RiskTerms(
        variance=variance,
        bias1=2.0 * l_consts[0] * plan.h1 ** (2.0 * h_exps[0]),
        bias2=2.0 * l_consts[1] * plan.h2 ** (2.0 * h_exps[1]),
    )
