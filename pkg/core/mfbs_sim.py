"""
Exact Gaussian simulation of deformed multifractional Brownian sheets.

W is sampled at a finite point set by factorizing its closed-form covariance
matrix; X = W o A is then observed under a design law with additive,
possibly heteroscedastic noise.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from core.errors import ConfigError, DomainError, FactorizationFailed
from core.field_model import (
    Domain, FieldSpec, Sheet, SurfaceDataset, MAX_COMMON_POINTS, check_field_spec,
)

logger = logging.getLogger(__name__)

JITTER_RETRIES = 8
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class CovarianceFactor:
    """Lower-triangular factor of the covariance of W at ``points`` (in U)"""
    points: np.ndarray
    lower_factor: np.ndarray
    jitter_used: float = 0.0

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class SimConfig:
    field: FieldSpec
    domain: Domain
    n_sheets: int
    seed: int = 0
    jitter: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.n_sheets < 1:
            raise ConfigError("n_sheets must be >= 1")
        if self.jitter < 0:
            raise ConfigError("jitter must be >= 0")


def _check_open_unit(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0) or np.any(arr >= 1):
        raise DomainError(f"{name} must lie in (0,1), got {x}")
    return arr


def _log_c_norm(x: np.ndarray) -> np.ndarray:
    return 0.5 * (LOG_2PI - gammaln(2.0 * x + 1.0) - np.log(np.sin(np.pi * x)))


def c_norm(x):
    """C(x) = [2*pi / (Gamma(2x+1) sin(pi x))]^(1/2) for x in (0,1)."""
    arr = _check_open_unit(x)
    out = np.exp(_log_c_norm(arr))
    return float(out) if out.ndim == 0 else out


def d_factor(x, y):
    """D(x, y) = C((x+y)/2)^2 / (2 C(x) C(y)); exactly 1/2 on the diagonal."""
    ax = _check_open_unit(x, "x")
    ay = _check_open_unit(y, "y")
    log_d = 2.0 * _log_c_norm(0.5 * (ax + ay)) - np.log(2.0) - (_log_c_norm(ax) + _log_c_norm(ay))
    out = np.where(ax == ay, 0.5, np.exp(log_d))
    return float(out) if out.ndim == 0 else out


def _eta_values(eta, u: np.ndarray) -> np.ndarray:
    return np.asarray(eta(u[:, 0], u[:, 1]), dtype=float).reshape(-1)


def mfbs_covariance(u, v, eta1, eta2) -> float:
    """E[W(u) W(v)] for two points of (0, inf)^2."""
    pu = np.asarray(u, dtype=float).reshape(1, 2)
    pv = np.asarray(v, dtype=float).reshape(1, 2)
    if np.any(pu <= 0) or np.any(pv <= 0):
        raise DomainError(f"covariance needs strictly positive coordinates, got {u}, {v}")
    result = 1.0
    for k, eta in enumerate((eta1, eta2)):
        hu = float(_eta_values(eta, pu)[0])
        hv = float(_eta_values(eta, pv)[0])
        s = hu + hv
        a, b = float(pu[0, k]), float(pv[0, k])
        result *= d_factor(hu, hv) * (a ** s + b ** s - abs(a - b) ** s)
    return result


def cross_covariance(points_a, points_b, eta1, eta2) -> np.ndarray:
    """Matrix of mfbs_covariance between two point sets in U."""
    pa = np.atleast_2d(np.asarray(points_a, dtype=float))
    pb = np.atleast_2d(np.asarray(points_b, dtype=float))
    if np.any(pa <= 0) or np.any(pb <= 0):
        raise DomainError("covariance needs strictly positive coordinates")
    sigma = np.ones((len(pa), len(pb)))
    for k, eta in enumerate((eta1, eta2)):
        ha = _check_open_unit(_eta_values(eta, pa), f"eta{k + 1}")
        hb = _check_open_unit(_eta_values(eta, pb), f"eta{k + 1}")
        s = ha[:, None] + hb[None, :]
        ca, cb = pa[:, k], pb[:, k]
        term = ca[:, None] ** s + cb[None, :] ** s - np.abs(ca[:, None] - cb[None, :]) ** s
        sigma *= d_factor(ha[:, None], hb[None, :]) * term
    return sigma


def covariance_matrix(points, eta1, eta2) -> np.ndarray:
    """Symmetric matrix of mfbs_covariance over a point set in U."""
    sigma = cross_covariance(points, points, eta1, eta2)
    return 0.5 * (sigma + sigma.T)


def build_covariance_factor(points, eta1, eta2, jitter: float = 1e-10) -> CovarianceFactor:
    """Cholesky factor of the covariance at ``points``, with a doubling jitter ladder."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ConfigError("build_covariance_factor needs at least one point")
    lower, added = _cholesky_with_jitter(covariance_matrix(pts, eta1, eta2), jitter)
    lower.flags.writeable = False
    frozen_pts = pts.copy()
    frozen_pts.flags.writeable = False
    return CovarianceFactor(points=frozen_pts, lower_factor=lower, jitter_used=added)


def _cholesky_with_jitter(sigma: np.ndarray, jitter: float) -> Tuple[np.ndarray, float]:
    if not np.all(np.isfinite(sigma)):
        raise FactorizationFailed("covariance matrix has non-finite entries")
    n = len(sigma)
    attempts = [0.0] + ([jitter * 2.0 ** i for i in range(JITTER_RETRIES)] if jitter > 0 else [])
    for added in attempts:
        try:
            mat = sigma if added == 0.0 else sigma + added * np.eye(n)
            lower = linalg.cholesky(mat, lower=True, check_finite=False)
        except linalg.LinAlgError:
            logger.debug("cholesky failed with jitter %.3g on %d points", added, n)
            continue
        if added > 0:
            logger.info("covariance factorized with jitter %.3g on %d points", added, n)
        return lower, added

    raise FactorizationFailed(
        f"covariance of {n} points not factorizable after {JITTER_RETRIES} jitter retries "
        "(eta near 1 or duplicated points?)"
    )


def extend_sample(factor: CovarianceFactor, values: np.ndarray, new_points, eta1, eta2,
                  rng: np.random.Generator, jitter: float = 1e-10) -> np.ndarray:
    """Draw W at ``new_points`` (in U) conditionally on W = ``values`` at the factor's points."""
    new = np.atleast_2d(np.asarray(new_points, dtype=float))
    if new.size == 0:
        return np.zeros(0)
    cross = cross_covariance(factor.points, new, eta1, eta2)
    v = linalg.solve_triangular(factor.lower_factor, cross, lower=True, check_finite=False)
    w = linalg.solve_triangular(factor.lower_factor, np.asarray(values, dtype=float),
                                lower=True, check_finite=False)
    cond = covariance_matrix(new, eta1, eta2) - v.T @ v
    cond = 0.5 * (cond + cond.T)
    lower, _ = _cholesky_with_jitter(cond, jitter if jitter > 0 else 1e-10)
    return v.T @ w + lower @ rng.standard_normal(len(new))


def sample_sheets(factor: CovarianceFactor, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws of W at the factor's points (rows)."""
    if n < 1:
        raise ConfigError("sample_sheets needs n >= 1")
    z = rng.standard_normal((n, factor.size))
    return z @ factor.lower_factor.T


def sheet_stream(seed: int, sheet_id: int) -> np.random.Generator:
    """Deterministic per-sheet substream derived from (seed, sheet_id)"""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(sheet_id)])


def resolve_threads(threads: Optional[int]) -> int:
    if not threads:
        return os.cpu_count() or 1
    return max(1, int(threads))


def _add_noise(field: FieldSpec, points: np.ndarray, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    e = rng.standard_normal(x.shape[0])
    sigma = np.asarray(field.sigma_fn(points, x), dtype=float).reshape(-1)
    return x + sigma * e


def _design_points(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    design = config.field.design
    d = config.domain
    if design.kind == "independent-uniform":
        m = max(1, int(round(config.field.mean_points_m)))
    else:
        m = max(1, int(rng.poisson(config.field.mean_points_m)))
    t1 = rng.uniform(d.t1_min, d.t1_max, m)
    t2 = rng.uniform(d.t2_min, d.t2_max, m)
    return np.column_stack([t1, t2])


def common_design_points(config: SimConfig) -> np.ndarray:
    design = config.field.design
    if design.fixed_points is not None:
        pts = np.asarray(design.fixed_points, dtype=float)
        if not np.all(config.domain.contains(pts)):
            raise ConfigError("fixed design points must lie inside the domain")
        return pts
    n1, n2 = design.grid_shape
    return config.domain.grid(int(n1), int(n2))


def generate_dataset(config: SimConfig) -> SurfaceDataset:
    """Simulate N sheets Y = W(A(t)) + sigma(t, W(A(t))) e under the design law."""
    field = config.field
    problems = check_field_spec(field, config.domain)
    if problems:
        raise ConfigError("; ".join(problems))

    if field.design.is_common:
        points = common_design_points(config)
        if len(points) > MAX_COMMON_POINTS:
            raise ConfigError(f"common design has {len(points)} points, above {MAX_COMMON_POINTS}")
        points.flags.writeable = False
        factor = build_covariance_factor(
            field.deformation.apply(points), field.eta1, field.eta2, config.jitter)
        streams = [sheet_stream(config.seed, j) for j in range(config.n_sheets)]
        z = np.vstack([rng.standard_normal(factor.size) for rng in streams])
        x = z @ factor.lower_factor.T
        sheets = tuple(
            Sheet(j, points, _add_noise(field, points, x[j], streams[j]))
            for j in range(config.n_sheets)
        )
        logger.debug("simulated %d sheets on a common design of %d points", config.n_sheets, len(points))
        return SurfaceDataset(sheets=sheets, domain=config.domain)

    def one_sheet(j: int) -> Sheet:
        rng = sheet_stream(config.seed, j)
        pts = _design_points(config, rng)
        factor = build_covariance_factor(
            field.deformation.apply(pts), field.eta1, field.eta2, config.jitter)
        x = sample_sheets(factor, 1, rng)[0]
        return Sheet(j, pts, _add_noise(field, pts, x, rng))

    workers = resolve_threads(config.threads)
    if workers == 1:
        sheets = tuple(one_sheet(j) for j in range(config.n_sheets))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sheets = tuple(pool.map(one_sheet, range(config.n_sheets)))
    return SurfaceDataset(sheets=sheets, domain=config.domain)


# --- Closed-form truth of X = W o A ---

@dataclass(frozen=True)
class HolderTruth:
    """Exponents, Holder constants and variance of X at one point.

    ``l{k}_{i}`` is the coefficient of Delta^(2 H_k) along axis i.
    """
    h1: float
    h2: float
    l1_1: float
    l2_1: float
    l1_2: float
    l2_2: float
    variance: float


def true_variance(field: FieldSpec, points) -> np.ndarray:
    """v(t) = A1(t)^(2 H1(t)) A2(t)^(2 H2(t))"""
    u = field.deformation.apply(points)
    h1, h2 = field.hurst(points)
    return u[:, 0] ** (2.0 * h1) * u[:, 1] ** (2.0 * h2)


def true_holder_constants(field: FieldSpec, t) -> HolderTruth:
    """Holder constants of X = W o A from the first-order increment expansion."""
    pt = np.asarray(t, dtype=float).reshape(1, 2)
    u = field.deformation.apply(pt)[0]
    h1, h2 = (float(h[0]) for h in field.hurst(pt))
    jac = field.deformation.jacobian(pt[0])
    a1, a2 = float(u[0]), float(u[1])
    return HolderTruth(
        h1=h1, h2=h2,
        l1_1=a2 ** (2 * h2) * abs(jac[0, 0]) ** (2 * h1),
        l2_1=a1 ** (2 * h1) * abs(jac[1, 0]) ** (2 * h2),
        l1_2=a2 ** (2 * h2) * abs(jac[0, 1]) ** (2 * h1),
        l2_2=a1 ** (2 * h1) * abs(jac[1, 1]) ** (2 * h2),
        variance=a1 ** (2 * h1) * a2 ** (2 * h2),
    )


def true_theta(field: FieldSpec, t, s) -> float:
    """E[(X(t) - X(s))^2] from three covariance evaluations."""
    u = field.deformation.apply(np.vstack([np.asarray(t, float), np.asarray(s, float)]))
    ctt = mfbs_covariance(u[0], u[0], field.eta1, field.eta2)
    css = mfbs_covariance(u[1], u[1], field.eta1, field.eta2)
    cts = mfbs_covariance(u[0], u[1], field.eta1, field.eta2)
    return ctt + css - 2.0 * cts


def b_function(field: FieldSpec, t, s) -> float:
    """B(t, s) = 2 D(H1(t), H1(s)) D(H2(t), H2(s)); equals 1/2 when t = s."""
    h1, h2 = field.hurst(np.vstack([np.asarray(t, float), np.asarray(s, float)]))
    return 2.0 * d_factor(h1[0], h1[1]) * d_factor(h2[0], h2[1])


def a_function(field: FieldSpec, t, s) -> float:
    """a(t, s) = (|A1(t)|^(H1(t)-H1(s)) |A2(t)|^(H2(t)-H2(s)) - B(t, s)) / B(t, s)"""
    pts = np.vstack([np.asarray(t, float), np.asarray(s, float)])
    u = field.deformation.apply(pts)
    h1, h2 = field.hurst(pts)
    b = b_function(field, t, s)
    lead = abs(u[0, 0]) ** (h1[0] - h1[1]) * abs(u[0, 1]) ** (h2[0] - h2[1])
    return (lead - b) / b


def leading_theta(field: FieldSpec, t, s) -> float:
    """Leading terms of the small-increment expansion of theta(t, s)."""
    pt = np.asarray(t, dtype=float).reshape(1, 2)
    diff = pt[0] - np.asarray(s, dtype=float)
    u = field.deformation.apply(pt)[0]
    h1, h2 = (float(h[0]) for h in field.hurst(pt))
    jac = field.deformation.jacobian(pt[0])
    along_a2 = abs(jac[1, 0] * diff[0] + jac[1, 1] * diff[1])
    along_a1 = abs(jac[0, 0] * diff[0] + jac[0, 1] * diff[1])
    return abs(u[0]) ** (2 * h1) * along_a2 ** (2 * h2) + abs(u[1]) ** (2 * h2) * along_a1 ** (2 * h1)


def expansion_remainder_order(field: FieldSpec, t) -> float:
    """Exponent of the largest remainder term of the increment expansion at t."""
    h1, h2 = (float(h[0]) for h in field.hurst(np.asarray(t, float).reshape(1, 2)))
    low, high = min(h1, h2), max(h1, h2)
    return min(2.0, 2.0 * low + 1.0, 2.0 * low + 2.0 * high)
