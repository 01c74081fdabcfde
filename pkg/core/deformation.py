"""
Recovery of the deformation components A1, A2 from Holder constants and
variance, by integrating f = (L / v)^(1/(2H)) along an L-shaped path that
starts at a known anchor.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from core.errors import BoundaryViolation, ConfigError, DomainError, TooFewNodes
from core.field_model import Domain, FieldSpec, SurfaceDataset
from core.mfbs_sim import resolve_threads, true_holder_constants
from core.regularity import RegParams, RegularityEstimator

logger = logging.getLogger(__name__)

DEFAULT_NODES = 101


@dataclass(frozen=True)
class DeformationAnchor:
    """Known values lambda_k = A_k(t0, s0) at the anchor point"""
    t0: float
    s0: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ConfigError("anchor values lambda1, lambda2 must be > 0")

    def check_inside(self, domain: Domain):
        if not domain.contains((self.t0, self.s0))[0]:
            raise ConfigError(f"anchor ({self.t0}, {self.s0}) lies outside the domain")


@dataclass(frozen=True)
class DeformationEstimate:
    t: Tuple[float, float]
    a1_hat: Optional[float] = None
    a2_hat: Optional[float] = None
    quadrature_nodes: int = 0
    f_values: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    g_values: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    projected_nodes: int = 0

    def merge(self, other: "DeformationEstimate") -> "DeformationEstimate":
        return DeformationEstimate(
            t=self.t,
            a1_hat=self.a1_hat if self.a1_hat is not None else other.a1_hat,
            a2_hat=self.a2_hat if self.a2_hat is not None else other.a2_hat,
            quadrature_nodes=max(self.quadrature_nodes, other.quadrature_nodes),
            f_values={**self.f_values, **other.f_values},
            g_values={**self.g_values, **other.g_values},
            projected_nodes=self.projected_nodes + other.projected_nodes,
        )


@dataclass(frozen=True)
class NodeValues:
    """Quantities needed at one quadrature node.

    ``h1`` is the exponent carried by A1 and ``l1_i`` its constant along
    axis i; likewise ``h2``/``l2_i`` for A2.
    """
    h1: float
    h2: float
    l1_1: float
    l1_2: float
    l2_1: float
    l2_2: float
    v: float


class NodeQuantities(Protocol):
    def admissible(self, t: Tuple[float, float]) -> Tuple[float, float]:
        ...

    def at(self, t: Tuple[float, float]) -> NodeValues:
        ...


def _key(t) -> Tuple[float, float]:
    return (round(float(t[0]), 12), round(float(t[1]), 12))


class DataNodeQuantities:
    """Node values estimated from a dataset; estimates are cached per node.

    Where no anisotropy is detected the deformation is taken to be
    diagonal: A1 varies along t1 only and A2 along t2 only.
    """

    def __init__(self, dataset: SurfaceDataset, params: RegParams, threads: int = 1):
        self.dataset = dataset
        self.params = params
        self.threads = resolve_threads(threads)
        self.estimator = RegularityEstimator(dataset, params.policy)
        self._cache: Dict[Tuple[float, float], NodeValues] = {}
        self._lock = threading.Lock()

    def admissible(self, t) -> Tuple[float, float]:
        """Nearest point satisfying the interior margin."""
        d = self.dataset.domain
        reach = 2.0 * self.params.delta
        if d.t1_max - d.t1_min < 2 * reach or d.t2_max - d.t2_min < 2 * reach:
            raise BoundaryViolation(t, self.params.delta,
                                    f"BoundaryViolation: domain too small for delta={self.params.delta}")
        return (float(np.clip(t[0], d.t1_min + reach, d.t1_max - reach)),
                float(np.clip(t[1], d.t2_min + reach, d.t2_max - reach)))

    def at(self, t) -> NodeValues:
        key = _key(t)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        est = self.estimator.estimate(key, self.params)
        if est.anisotropic:
            values = NodeValues(
                h1=est.h_low, h2=est.h_high,
                l1_1=est.l1[0], l1_2=est.l1[1],
                l2_1=est.l2[0], l2_2=est.l2[1],
                v=est.v_hat,
            )
        else:
            # one exponent: axis i is attributed to A_i alone
            values = NodeValues(
                h1=est.h_low, h2=est.h_low,
                l1_1=est.l1[0], l1_2=0.0,
                l2_1=0.0, l2_2=est.l1[1],
                v=est.v_hat,
            )
        with self._lock:
            self._cache[key] = values
        return values

    def prefetch(self, nodes: Iterable[Tuple[float, float]]):
        """Estimate every node not yet cached, in parallel when threads > 1."""
        todo = sorted({_key(n) for n in nodes} - set(self._cache))
        if self.threads == 1 or len(todo) < 2:
            for n in todo:
                self.at(n)
            return
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            list(pool.map(self.at, todo))


class OracleNodeQuantities:
    """Node values from the closed-form truth of a field specification."""

    def __init__(self, field_spec: FieldSpec):
        self.field = field_spec

    def admissible(self, t) -> Tuple[float, float]:
        return (float(t[0]), float(t[1]))

    def at(self, t) -> NodeValues:
        truth = true_holder_constants(self.field, t)
        return NodeValues(
            h1=truth.h1, h2=truth.h2,
            l1_1=truth.l1_1, l1_2=truth.l1_2,
            l2_1=truth.l2_1, l2_2=truth.l2_2,
            v=truth.variance,
        )


def f_ratio(l_hat: float, v_hat: float, h_hat: float) -> float:
    """(l / v)^(1/(2h)), zero when l is zero."""
    if not v_hat > 0:
        raise DomainError(f"v_hat must be > 0, got {v_hat}")
    if not h_hat > 0:
        raise DomainError(f"h_hat must be > 0, got {h_hat}")
    if l_hat <= 0:
        return 0.0
    return (l_hat / v_hat) ** (1.0 / (2.0 * h_hat))


def trapezoid_integral(values: Sequence[float], step: float) -> float:
    if len(values) < 2:
        raise TooFewNodes(f"trapezoid rule needs at least 2 nodes, got {len(values)}")
    if not step > 0:
        raise DomainError(f"step must be > 0, got {step}")
    return float(trapezoid(np.asarray(values, dtype=float), dx=step))


def _path_integral(source: NodeQuantities, nodes: np.ndarray, start: float, end: float,
                   ratio) -> Tuple[float, Tuple[float, ...], int]:
    """Signed integral from start to end of ratio(node values) along ``nodes``."""
    if end == start:
        return 0.0, (), 0
    projected = 0
    values = []
    for node in nodes:
        p = source.admissible(node)
        if p != (float(node[0]), float(node[1])):
            projected += 1
        values.append(ratio(source.at(p)))
    step = abs(end - start) / (len(nodes) - 1)
    sign = 1.0 if end > start else -1.0
    return sign * trapezoid_integral(values, step), tuple(values), projected


def _paths(t, anchor: DeformationAnchor, n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    s_f = np.linspace(anchor.t0, t[0], n_nodes)
    s_g = np.linspace(anchor.s0, t[1], n_nodes)
    f_nodes = np.column_stack([s_f, np.full(n_nodes, float(t[1]))])
    g_nodes = np.column_stack([np.full(n_nodes, anchor.t0), s_g])
    return f_nodes, g_nodes


def _as_source(source: Union[SurfaceDataset, NodeQuantities], params: Optional[RegParams]) -> NodeQuantities:
    if isinstance(source, SurfaceDataset):
        if params is None:
            raise ConfigError("estimating from data needs RegParams")
        return DataNodeQuantities(source, params)
    return source


def _component(source, t, anchor: DeformationAnchor, params, n_nodes: int, which: str) -> DeformationEstimate:
    if n_nodes < 2:
        raise TooFewNodes(f"n_nodes must be >= 2, got {n_nodes}")
    provider = _as_source(source, params)
    if isinstance(source, SurfaceDataset):
        anchor.check_inside(source.domain)
    f_nodes, g_nodes = _paths(t, anchor, n_nodes)
    if hasattr(provider, "prefetch"):
        targets = []
        if t[0] != anchor.t0:
            targets.extend(provider.admissible(n) for n in f_nodes)
        if t[1] != anchor.s0:
            targets.extend(provider.admissible(n) for n in g_nodes)
        provider.prefetch(targets)

    if which == "a1":
        f_ratio_of = lambda q: f_ratio(q.l1_1, q.v, q.h1)
        g_ratio_of = lambda q: f_ratio(q.l1_2, q.v, q.h1)
        scale = anchor.lambda1
    else:
        f_ratio_of = lambda q: f_ratio(q.l2_1, q.v, q.h2)
        g_ratio_of = lambda q: f_ratio(q.l2_2, q.v, q.h2)
        scale = anchor.lambda2

    int_f, f_vals, proj_f = _path_integral(provider, f_nodes, anchor.t0, float(t[0]), f_ratio_of)
    int_g, g_vals, proj_g = _path_integral(provider, g_nodes, anchor.s0, float(t[1]), g_ratio_of)
    if proj_f + proj_g:
        logger.info("%s at %s: %d quadrature nodes projected inward", which, tuple(t), proj_f + proj_g)
    value = scale * math.exp(int_f + int_g)
    return DeformationEstimate(
        t=(float(t[0]), float(t[1])),
        a1_hat=value if which == "a1" else None,
        a2_hat=value if which == "a2" else None,
        quadrature_nodes=n_nodes,
        f_values={which: f_vals},
        g_values={which: g_vals},
        projected_nodes=proj_f + proj_g,
    )


def a1_hat(source: Union[SurfaceDataset, NodeQuantities], t, anchor: DeformationAnchor,
           params: Optional[RegParams] = None, n_nodes: int = DEFAULT_NODES) -> DeformationEstimate:
    """lambda1 * exp(int_{t0}^{t1} f1(s, t2) ds + int_{s0}^{t2} g1(t0, s) ds)"""
    return _component(source, t, anchor, params, n_nodes, "a1")


def a2_hat(source: Union[SurfaceDataset, NodeQuantities], t, anchor: DeformationAnchor,
           params: Optional[RegParams] = None, n_nodes: int = DEFAULT_NODES) -> DeformationEstimate:
    """Same path integral as a1_hat with the constants and exponent of A2."""
    return _component(source, t, anchor, params, n_nodes, "a2")


def estimate_deformation(source: Union[SurfaceDataset, NodeQuantities], points, anchor: DeformationAnchor,
                         params: Optional[RegParams] = None, n_nodes: int = DEFAULT_NODES,
                         threads: int = 1) -> Tuple[DeformationEstimate, ...]:
    """Both components at every row of ``points``; node estimates are shared."""
    provider = source
    if isinstance(source, SurfaceDataset):
        if params is None:
            raise ConfigError("estimating from data needs RegParams")
        anchor.check_inside(source.domain)
        provider = DataNodeQuantities(source, params, threads=threads)
    out = []
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        est = _component(provider, p, anchor, params, n_nodes, "a1")
        out.append(est.merge(_component(provider, p, anchor, params, n_nodes, "a2")))
    return tuple(out)
