"""
Monte Carlo harness: estimator concentration, anisotropy detection,
deformation recovery, adaptive-risk scaling and small-increment expansion
checks. Every run is a deterministic function of its configuration and base
seed; replicate r draws from the substream (base_seed, r).
"""

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import metadata as importlib_metadata
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from core.dataset_io import atomic_write_text
from core.deformation import (
    DEFAULT_NODES, DeformationAnchor, OracleNodeQuantities, estimate_deformation,
)
from core.errors import ConfigError
from core.field_model import DesignLaw, Domain, FieldSpec, Sheet, SurfaceDataset, check_simpl_a
from core.mfbs_sim import (
    SimConfig, a_function, b_function, build_covariance_factor, expansion_remainder_order,
    extend_sample, generate_dataset, leading_theta, resolve_threads, true_holder_constants,
    true_theta, true_variance,
)
from core.parametric import ConstantNoise
from core.regularity import (
    RegParams, RegularityEstimate, estimate_regularity, estimate_regularity_grid, estimation_stencil,
)
from core.smoothing import (
    KernelSpec, L_FLOOR, default_c_density, nw_predict, optimal_bandwidths, plugin_inputs,
    rice_sigma_hat,
)
from core.surface_approx import default_pilot_bandwidth

logger = logging.getLogger(__name__)

SCENARIOS = ("concentration", "anisotropy", "deformation", "risk-scaling", "expansion-checks")
DEFAULT_REPLICATES = {
    "concentration": 200,
    "anisotropy": 200,
    "deformation": 50,
    "risk-scaling": 200,
    "expansion-checks": 1,
}
DEFAULT_M0 = (250, 500, 1000, 2000, 4000)
BOUNDED_RATIO = 50.0
SEED_MASK = 0xFFFFFFFFFFFFFFFF

CONCENTRATION_SCHEMA = ("N", "epsilon", "phat_low", "phat_high",
                        "mean_h_low", "sd_h_low", "mean_h_high", "sd_h_high")
ANISOTROPY_SCHEMA = ("N", "tau", "truth_anisotropic", "detection_rate", "mean_rel_err_l_low")
DEFORMATION_SCHEMA = ("N", "mean_rel_err_a1", "mean_rel_err_a2")
RISK_SCHEMA = ("M0", "empirical_mse", "plan_h1", "plan_h2", "plugin_mse", "plugin_h1", "plugin_h2")
EXPANSION_SCHEMA = ("k", "distance", "ratio_b", "ratio_a", "ratio_theta", "residual_theta")


def package_version() -> str:
    try:
        return importlib_metadata.version("anisurf")
    except importlib_metadata.PackageNotFoundError:
        return "0.1.0+local"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    replicates: int
    sim: SimConfig
    reg: RegParams
    sweep: Dict[str, List[float]] = field(default_factory=dict)
    output_path: Optional[str] = None
    base_seed: int = 0
    threads: int = 1
    eval_grid: int = 7
    margin_factor: float = 3.0
    anchor: Optional[DeformationAnchor] = None
    n_nodes: int = DEFAULT_NODES
    oracle: bool = False
    plugin: str = "axis-labeled"
    target: Optional[Tuple[float, float]] = None
    direction: Tuple[float, float] = (1.0, 0.0)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    c_density: Optional[float] = None
    echo: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario '{self.scenario}', expected one of {SCENARIOS}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        for key, values in self.sweep.items():
            if not values:
                raise ConfigError(f"sweep '{key}' is empty")
            if any(not v > 0 for v in values):
                raise ConfigError(f"sweep '{key}' values must be positive")
        if self.eval_grid < 1:
            raise ConfigError("eval_grid must be >= 1")
        if float(np.hypot(*self.direction)) == 0.0:
            raise ConfigError("direction must be a nonzero vector")

    def sweep_values(self, key: str, default: Sequence[float]) -> List[float]:
        return list(self.sweep.get(key, default))

    def describe(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "sweep": self.sweep,
            "reg": {
                "delta": self.reg.delta, "tau": self.reg.tau, "beta_low": self.reg.beta_low,
                "beta_high_L": self.reg.beta_high_L, "v_floor": self.reg.v_floor,
                "approx": self.reg.policy.kind, "pilot_bandwidth": self.reg.policy.pilot_bandwidth,
            },
            "sim": describe_sim(self.sim),
            "eval_grid": self.eval_grid,
            "margin_factor": self.margin_factor,
            "n_nodes": self.n_nodes,
            "oracle": self.oracle,
            "plugin": self.plugin,
        }


@dataclass
class ResultTable:
    schema: Tuple[str, ...]
    rows: List[Tuple[Any, ...]]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.schema = tuple(self.schema)
        for row in self.rows:
            if len(row) != len(self.schema):
                raise ValueError(f"row {row} does not match schema {self.schema}")

    def column(self, name: str) -> List[Any]:
        i = self.schema.index(name)
        return [row[i] for row in self.rows]

    def data_rows(self) -> List[Tuple[Any, ...]]:
        """Rows whose first cell is a sweep value rather than a summary label"""
        return [row for row in self.rows if not isinstance(row[0], str)]

    def to_csv(self, deterministic: bool = True) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={json.dumps(self.metadata[key], sort_keys=True, default=str)}\n")
        if not deterministic:
            buf.write(f"# generated_at={datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(buf)
        writer.writerow(self.schema)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _describe(obj) -> Any:
    if hasattr(obj, "describe"):
        return obj.describe()
    return getattr(obj, "description", {"kind": "custom"})


def describe_sim(sim: SimConfig) -> Dict[str, Any]:
    f = sim.field
    design = {"kind": f.design.kind}
    if f.design.grid_shape is not None:
        design["grid_shape"] = list(f.design.grid_shape)
    if f.design.fixed_points is not None:
        design["fixed_points"] = len(f.design.fixed_points)
    return {
        "domain": sim.domain.describe(),
        "n_sheets": sim.n_sheets,
        "seed": sim.seed,
        "jitter": sim.jitter,
        "eta1": _describe(f.eta1),
        "eta2": _describe(f.eta2),
        "deformation": _describe(f.deformation),
        "sigma": _describe(f.sigma_fn),
        "design": design,
        "mean_points_m": f.mean_points_m,
    }


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Seed of replicate r, derived from the substream (base_seed, r)"""
    ss = np.random.SeedSequence([int(base_seed) & SEED_MASK, int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def evaluation_points(domain: Domain, delta: float, n: int = 7, margin_factor: float = 3.0) -> np.ndarray:
    """n x n lattice keeping a margin of margin_factor * delta to the boundary"""
    return domain.interior_lattice(n, margin_factor * delta)


def _map_replicates(fn: Callable[[int], Any], replicates: int, threads: int) -> List[Any]:
    workers = resolve_threads(threads)
    if workers == 1 or replicates == 1:
        return [fn(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(replicates)))


def _stencil_field(spec: FieldSpec, points: np.ndarray, delta: float) -> FieldSpec:
    """Common design holding only the points the estimators look at, unless scattered."""
    if not spec.design.is_common:
        return spec
    return replace(spec, design=DesignLaw("common-grid", fixed_points=estimation_stencil(points, delta)))


def _simulate(config: ExperimentConfig, spec: FieldSpec, n_sheets: int, replicate: int) -> SurfaceDataset:
    sim = replace(config.sim, field=spec, n_sheets=int(n_sheets),
                  seed=replicate_seed(config.base_seed, replicate), threads=1)
    return generate_dataset(sim)


def _metadata(config: ExperimentConfig, **extra) -> Dict[str, Any]:
    meta = {"config": config.describe(), "version": package_version()}
    if config.echo:
        meta["document"] = config.echo
    meta.update(extra)
    return meta


def pointwise_sd(values: np.ndarray) -> float:
    """Spread across replicates (rows) at each point (column), averaged over points"""
    if values.shape[0] < 2:
        return 0.0
    return float(np.mean(np.std(values, axis=0, ddof=1)))


# --- Concentration ---

def run_concentration(config: ExperimentConfig) -> ResultTable:
    _require(config, "concentration")
    points = evaluation_points(config.sim.domain, config.reg.delta, config.eval_grid, config.margin_factor)
    spec = _stencil_field(config.sim.field, points, config.reg.delta)
    h1, h2 = spec.hurst(points)
    truth_low, truth_high = np.minimum(h1, h2), np.maximum(h1, h2)
    rows = []
    for n in sorted(config.sweep_values("N", [config.sim.n_sheets])):
        def one(r: int, n=n) -> List[RegularityEstimate]:
            return estimate_regularity_grid(_simulate(config, spec, n, r), points, config.reg)

        estimates = _map_replicates(one, config.replicates, config.threads)
        low = np.array([[e.h_low for e in rep] for rep in estimates])
        high = np.array([[e.h_high for e in rep] for rep in estimates])
        err_low, err_high = low - truth_low, high - truth_high
        for eps in sorted(config.sweep_values("epsilon", [0.05])):
            rows.append((
                int(n), float(eps),
                float(np.mean(np.abs(err_low) >= eps)), float(np.mean(np.abs(err_high) >= eps)),
                float(low.mean()), pointwise_sd(low),
                float(high.mean()), pointwise_sd(high),
            ))
        logger.info("concentration N=%d: mean h_low %.4f", n, float(low.mean()))
    return ResultTable(CONCENTRATION_SCHEMA, rows, _metadata(config))


# --- Anisotropy detection ---

def _low_constant_truth(spec: FieldSpec, t) -> Tuple[float, int]:
    """Holder constant of the lower exponent and the axis where it is largest."""
    truth = true_holder_constants(spec, t)
    if abs(truth.h1 - truth.h2) <= 1e-12:
        per_axis = (truth.l1_1 + truth.l2_1, truth.l1_2 + truth.l2_2)
    elif truth.h1 < truth.h2:
        per_axis = (truth.l1_1, truth.l1_2)
    else:
        per_axis = (truth.l2_1, truth.l2_2)
    axis = int(np.argmax(per_axis))
    return per_axis[axis], axis


def run_anisotropy(config: ExperimentConfig) -> ResultTable:
    _require(config, "anisotropy")
    points = evaluation_points(config.sim.domain, config.reg.delta, config.eval_grid, config.margin_factor)
    spec = _stencil_field(config.sim.field, points, config.reg.delta)
    h1, h2 = spec.hurst(points)
    truth_aniso = np.abs(h1 - h2) > 1e-9
    low_truth = [_low_constant_truth(spec, p) for p in points]
    rows = []
    for n in sorted(config.sweep_values("N", [config.sim.n_sheets])):
        def one(r: int, n=n) -> List[RegularityEstimate]:
            return estimate_regularity_grid(_simulate(config, spec, n, r), points, config.reg)

        estimates = _map_replicates(one, config.replicates, config.threads)
        gap = np.array([[e.gap_statistic for e in rep] for rep in estimates])
        rel_err = np.array([
            [abs(e.l1[low_truth[i][1]] - low_truth[i][0]) / low_truth[i][0] if low_truth[i][0] > 0 else np.nan
             for i, e in enumerate(rep)]
            for rep in estimates
        ])
        for tau in sorted(config.sweep_values("tau", [config.reg.tau])):
            flagged = (gap > 0) & (gap >= tau)
            for truth in (False, True):
                cols = truth_aniso == truth
                if not cols.any():
                    continue
                errs = rel_err[:, cols]
                rows.append((
                    int(n), float(tau), truth,
                    float(flagged[:, cols].mean()),
                    float(np.nanmean(errs)) if np.isfinite(errs).any() else float("nan"),
                ))
    return ResultTable(ANISOTROPY_SCHEMA, rows, _metadata(config))


# --- Deformation recovery ---

def default_anchor(spec: FieldSpec, domain: Domain, delta: float, margin_factor: float = 3.0) -> DeformationAnchor:
    """Lower-left interior corner with the true deformation values there"""
    t0 = domain.t1_min + margin_factor * delta
    s0 = domain.t2_min + margin_factor * delta
    a = spec.deformation.apply((t0, s0))[0]
    return DeformationAnchor(t0, s0, float(a[0]), float(a[1]))


def _relative_errors(spec: FieldSpec, points: np.ndarray, estimates) -> Tuple[float, float]:
    truth = spec.deformation.apply(points)
    a1 = np.array([e.a1_hat for e in estimates])
    a2 = np.array([e.a2_hat for e in estimates])
    return (float(np.mean(np.abs(a1 - truth[:, 0]) / truth[:, 0])),
            float(np.mean(np.abs(a2 - truth[:, 1]) / truth[:, 1])))


def run_deformation(config: ExperimentConfig) -> ResultTable:
    _require(config, "deformation")
    spec = config.sim.field
    domain = config.sim.domain
    problems = check_simpl_a(spec.deformation, domain)
    if problems:
        raise ConfigError("deformation cannot be recovered: " + "; ".join(problems))
    points = evaluation_points(domain, config.reg.delta, config.eval_grid, config.margin_factor)
    anchor = config.anchor or default_anchor(spec, domain, config.reg.delta, config.margin_factor)
    rows = []
    if config.oracle:
        estimates = estimate_deformation(OracleNodeQuantities(spec), points, anchor, n_nodes=config.n_nodes)
        err1, err2 = _relative_errors(spec, points, estimates)
        for n in sorted(config.sweep_values("N", [config.sim.n_sheets])):
            rows.append((int(n), err1, err2))
        return ResultTable(DEFORMATION_SCHEMA, rows, _metadata(config, mode="oracle"))

    for n in sorted(config.sweep_values("N", [config.sim.n_sheets])):
        def one(r: int, n=n) -> Tuple[float, float]:
            dataset = _simulate(config, spec, n, r)
            estimates = estimate_deformation(dataset, points, anchor, config.reg, config.n_nodes)
            return _relative_errors(spec, points, estimates)

        errors = np.array(_map_replicates(one, config.replicates, config.threads))
        rows.append((int(n), float(errors[:, 0].mean()), float(errors[:, 1].mean())))
        logger.info("deformation N=%d: mean relative error %.4f / %.4f", n, rows[-1][1], rows[-1][2])
    return ResultTable(DEFORMATION_SCHEMA, rows, _metadata(config, mode="data"))


# --- Adaptive risk scaling ---

def _in_window(points: np.ndarray, t, h1: float, h2: float) -> np.ndarray:
    return (np.abs(points[:, 0] - t[0]) <= h1) & (np.abs(points[:, 1] - t[1]) <= h2)


def _risk_replicate(config: ExperimentConfig, r: int, m0_values: Sequence[int], t, oracle_inputs,
                    sigma2: float, c: float) -> List[Tuple[float, float, float, float]]:
    spec = config.sim.field
    domain = config.sim.domain
    learn_spec = replace(
        spec, sigma_fn=ConstantNoise(0.0),
        design=DesignLaw("common-grid", fixed_points=estimation_stencil([t], config.reg.delta)),
    )
    est = estimate_regularity(_simulate(config, learn_spec, config.sim.n_sheets, r), t, config.reg)
    h_est, l_est, _ = plugin_inputs(est, config.reg, config.plugin)
    h_or, l_or = oracle_inputs
    kappa = config.kernel.kappa
    out = []
    for m0 in m0_values:
        rng = np.random.default_rng([int(config.base_seed) & SEED_MASK, r, int(m0)])
        pts = np.column_stack([rng.uniform(domain.t1_min, domain.t1_max, m0),
                               rng.uniform(domain.t2_min, domain.t2_max, m0)])
        oracle = optimal_bandwidths(t, h_or, l_or, sigma2, c, kappa, m0, domain.sides)
        # only the points inside some kernel window are ever simulated
        b = 0.5 * default_pilot_bandwidth(domain, m0)
        first = _in_window(pts, t, max(oracle.h1, b), max(oracle.h2, b))
        obs = pts[first]
        factor = build_covariance_factor(
            spec.deformation.apply(np.vstack([np.asarray(t, float), obs])), spec.eta1, spec.eta2, config.sim.jitter)
        w = factor.lower_factor @ rng.standard_normal(factor.size)
        y = w[1:] + np.asarray(spec.sigma_fn(obs, w[1:]), float).reshape(-1) * rng.standard_normal(len(obs))
        local = SurfaceDataset((Sheet(0, obs, y),), domain)
        sigma2_hat = max(rice_sigma_hat(local), 1e-12) if len(obs) >= 2 else sigma2
        plugin = optimal_bandwidths(t, h_est, l_est, sigma2_hat, c, kappa, m0, domain.sides)

        extra = pts[_in_window(pts, t, plugin.h1, plugin.h2) & ~first]
        if len(extra):
            w_extra = extend_sample(factor, w, spec.deformation.apply(extra), spec.eta1, spec.eta2,
                                    rng, config.sim.jitter)
            y_extra = w_extra + np.asarray(spec.sigma_fn(extra, w_extra), float).reshape(-1) * rng.standard_normal(len(extra))
            sheet = Sheet(0, np.vstack([obs, extra]), np.concatenate([y, y_extra]))
        else:
            sheet = Sheet(0, obs, y)
        truth = w[0]
        pred_o, _ = nw_predict(sheet, t, oracle.h1, oracle.h2, config.kernel)
        pred_p, _ = nw_predict(sheet, t, plugin.h1, plugin.h2, config.kernel)
        out.append(((pred_o - truth) ** 2, (pred_p - truth) ** 2, plugin.h1, plugin.h2))
    return out


def run_risk_scaling(config: ExperimentConfig) -> ResultTable:
    _require(config, "risk-scaling")
    spec = config.sim.field
    domain = config.sim.domain
    t = tuple(config.target) if config.target is not None else (
        0.5 * (domain.t1_min + domain.t1_max), 0.5 * (domain.t2_min + domain.t2_max))
    m0_values = [int(m) for m in sorted(config.sweep_values("M0", DEFAULT_M0))]
    sigma2 = float(np.asarray(spec.sigma_fn(np.array([t]), np.zeros(1)), float).reshape(-1)[0]) ** 2
    if not sigma2 > 0:
        raise ConfigError("risk-scaling needs a noisy field (sigma > 0 at the target)")
    truth = true_holder_constants(spec, t)
    # per-axis constants follow the (L1, 0, 0, L2) structure
    oracle_inputs = ((truth.h1, truth.h2), (max(truth.l1_1, L_FLOOR), max(truth.l2_2, L_FLOOR)))
    c = config.c_density if config.c_density is not None else default_c_density(domain)

    results = _map_replicates(
        lambda r: _risk_replicate(config, r, m0_values, t, oracle_inputs, sigma2, c),
        config.replicates, config.threads)
    arr = np.array(results)  # replicates x M0 x 4
    rows: List[Tuple[Any, ...]] = []
    mse_o, mse_p = [], []
    for j, m0 in enumerate(m0_values):
        plan = optimal_bandwidths(t, *oracle_inputs, sigma2, c, config.kernel.kappa, m0, domain.sides)
        mse_o.append(float(arr[:, j, 0].mean()))
        mse_p.append(float(arr[:, j, 1].mean()))
        rows.append((m0, mse_o[-1], plan.h1, plan.h2, mse_p[-1],
                     float(arr[:, j, 2].mean()), float(arr[:, j, 3].mean())))

    extra = {"target": list(t), "rate_exponent": plan.rate_exponent}
    if len(m0_values) >= 3 and config.replicates >= 2 and min(mse_o + mse_p) > 0:
        logm = np.log(m0_values)
        slope_o = float(linregress(logm, np.log(mse_o)).slope)
        slope_p = float(linregress(logm, np.log(mse_p)).slope)
        rows.append(("slope", slope_o, "", "", slope_p, "", ""))
        logger.info("risk slope %.3f (oracle), %.3f (plug-in), rate %.3f", slope_o, slope_p, plan.rate_exponent)
    return ResultTable(RISK_SCHEMA, rows, _metadata(config, **extra))


# --- Small-increment expansion checks ---

def is_bounded(ratios: Sequence[float], max_ratio: float = BOUNDED_RATIO, atol: float = 1e-12) -> bool:
    """max/min <= max_ratio, or the whole sequence is numerically zero"""
    arr = np.abs(np.asarray(ratios, dtype=float))
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        return False
    if arr.max() <= atol:
        return True
    if arr.min() <= 0:
        return False
    return bool(arr.max() / arr.min() <= max_ratio)


def eta_slope(spec: FieldSpec, t, direction) -> Optional[List[float]]:
    """Directional derivatives of (H1, H2) = eta o A at t, None for custom eta."""
    pt = np.asarray(t, dtype=float)
    u = spec.deformation.apply(pt)[0]
    du = spec.deformation.jacobian(pt) @ np.asarray(direction, dtype=float)
    out = []
    for eta in (spec.eta1, spec.eta2):
        gradient = getattr(eta, "gradient", None)
        if gradient is None:
            return None
        g1, g2 = gradient(u[0], u[1])
        out.append(float(g1 * du[0] + g2 * du[1]))
    return out


def run_expansion_checks(config: ExperimentConfig) -> ResultTable:
    _require(config, "expansion-checks")
    spec = config.sim.field
    domain = config.sim.domain
    t = np.asarray(config.target if config.target is not None else (
        0.5 * (domain.t1_min + domain.t1_max), 0.5 * (domain.t2_min + domain.t2_max)), dtype=float)
    direction = np.asarray(config.direction, dtype=float)
    direction = direction / np.hypot(*direction)
    order = expansion_remainder_order(spec, t)
    eps = np.finfo(float).eps

    rows = []
    ratios = {"b": [], "a": [], "theta": []}
    for k in sorted(int(k) for k in config.sweep_values("k", range(2, 11))):
        dist = 2.0 ** (-k)
        s = t + dist * direction
        if not domain.contains(s)[0]:
            raise ConfigError(f"expansion point {tuple(s)} leaves the domain")
        ratio_b = abs(b_function(spec, t, s) - 0.5) / dist ** 2
        ratio_a = abs(a_function(spec, t, s) * a_function(spec, s, t) - 1.0) / dist ** 2
        residual = abs(true_theta(spec, t, s) - leading_theta(spec, t, s))
        # cancellation in theta leaves rounding noise of the size of the variances
        floor = 64.0 * eps * float(true_variance(spec, np.vstack([t, s])).sum())
        ratio_theta = (0.0 if residual <= floor else residual) / dist ** order
        ratios["b"].append(ratio_b)
        ratios["a"].append(ratio_a)
        ratios["theta"].append(ratio_theta)
        rows.append((k, dist, ratio_b, ratio_a, ratio_theta, residual))
    flags = {name: is_bounded(seq) for name, seq in ratios.items()}
    rows.append(("bounded", "", flags["b"], flags["a"], flags["theta"], ""))
    return ResultTable(EXPANSION_SCHEMA, rows, _metadata(config, remainder_order=order, target=t.tolist(),
                                                          eta_slope=eta_slope(spec, t, direction)))


def _require(config: ExperimentConfig, scenario: str):
    if config.scenario != scenario:
        raise ConfigError(f"expected scenario '{scenario}', got '{config.scenario}'")


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig], ResultTable]] = {
    "concentration": run_concentration,
    "anisotropy": run_anisotropy,
    "deformation": run_deformation,
    "risk-scaling": run_risk_scaling,
    "expansion-checks": run_expansion_checks,
}


def run_experiment(config: ExperimentConfig) -> ResultTable:
    logger.info("running %s with %d replicates", config.scenario, config.replicates)
    return EXPERIMENTS[config.scenario](config)


def write_result_table(table: ResultTable, path: str, deterministic: bool = True) -> str:
    atomic_write_text(path, table.to_csv(deterministic))
    return path
