"""
Observable approximation of a sheet at arbitrary points: nearest observed
value, or an unweighted pilot average over a sup-norm window.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.spatial import cKDTree

from core.errors import ConfigError, EmptyDataset, EmptySheet
from core.field_model import Domain, Sheet, SurfaceDataset

logger = logging.getLogger(__name__)

APPROX_KINDS = ("nearest-neighbor", "pilot-local-average")
# equidistant candidates examined for the lowest-index tie-break
TIE_CANDIDATES = 8


@dataclass(frozen=True)
class ApproxPolicy:
    """How X~(t) is built from a sheet.

    ``pilot_bandwidth=None`` with the pilot kind means the per-sheet default
    ``default_pilot_bandwidth(domain, M_j)``.
    """
    kind: str = "nearest-neighbor"
    pilot_bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.kind not in APPROX_KINDS:
            raise ConfigError(f"Unknown approximation kind '{self.kind}', expected one of {APPROX_KINDS}")
        if self.pilot_bandwidth is not None and not self.pilot_bandwidth > 0:
            raise ConfigError("pilot_bandwidth must be > 0")


def default_pilot_bandwidth(domain: Domain, m_j: int) -> float:
    """(domain side) * M_j^(-1/3)"""
    return domain.min_side * max(1, int(m_j)) ** (-1.0 / 3.0)


def _nearest_index(tree: cKDTree, n_points: int, t) -> int:
    k = min(TIE_CANDIDATES, n_points)
    dist, idx = tree.query(np.asarray(t, dtype=float), k=k)
    dist = np.atleast_1d(dist)
    idx = np.atleast_1d(idx)
    tied = idx[dist == dist[0]]
    return int(tied.min())


def _window_indices(tree: cKDTree, t, bandwidth: float) -> np.ndarray:
    return np.asarray(tree.query_ball_point(np.asarray(t, dtype=float), r=bandwidth, p=np.inf), dtype=int)


def approx_value(sheet: Sheet, t, policy: ApproxPolicy, domain: Optional[Domain] = None) -> float:
    """X~(t) for one sheet."""
    if sheet.size == 0:
        raise EmptySheet(f"Sheet {sheet.id} has no observations")
    tree = cKDTree(sheet.points)
    return _approx_with_tree(tree, sheet, t, policy, domain)


def _approx_with_tree(tree: cKDTree, sheet: Sheet, t, policy: ApproxPolicy,
                      domain: Optional[Domain]) -> float:
    if policy.kind == "pilot-local-average":
        b = policy.pilot_bandwidth
        if b is None:
            if domain is None:
                raise ConfigError("pilot average without a bandwidth needs the domain")
            b = default_pilot_bandwidth(domain, sheet.size)
        idx = _window_indices(tree, t, b)
        if idx.size:
            return float(sheet.values[idx].mean())
        logger.debug("empty pilot window on sheet %d at %s, using nearest neighbour", sheet.id, tuple(t))
    return float(sheet.values[_nearest_index(tree, sheet.size, t)])


class SurfaceApproximator:
    """Evaluates X~^(j)(t) for every sheet of a dataset.

    One spatial index is built per distinct point set, so a common design
    shares a single tree and a single value matrix.
    """

    def __init__(self, dataset: SurfaceDataset, policy: ApproxPolicy):
        if dataset.n_sheets == 0:
            raise EmptyDataset("dataset has no sheets")
        for sheet in dataset.sheets:
            if sheet.size == 0:
                raise EmptySheet(f"Sheet {sheet.id} has no observations")
        self.dataset = dataset
        self.policy = policy
        self.approximators = {
            "nearest-neighbor": self._nearest,
            "pilot-local-average": self._pilot,
        }
        self._shared = dataset.shared_points()
        self._trees: Dict[int, cKDTree] = {}
        self._values: Optional[np.ndarray] = None
        if self._shared is not None:
            self._values = dataset.value_matrix()
            self._trees[id(self._shared)] = cKDTree(self._shared)

    def _tree(self, sheet: Sheet) -> cKDTree:
        key = id(sheet.points)
        tree = self._trees.get(key)
        if tree is None:
            tree = cKDTree(sheet.points)
            self._trees[key] = tree
        return tree

    def values_at(self, t) -> np.ndarray:
        """Vector (N,) of X~^(j)(t)"""
        return self.approximators[self.policy.kind](t)

    def _nearest(self, t) -> np.ndarray:
        if self._shared is not None:
            idx = _nearest_index(self._trees[id(self._shared)], len(self._shared), t)
            return self._values[:, idx].copy()
        return np.array([
            float(s.values[_nearest_index(self._tree(s), s.size, t)]) for s in self.dataset.sheets
        ])

    def _pilot(self, t) -> np.ndarray:
        if self._shared is not None:
            b = self.policy.pilot_bandwidth
            if b is None:
                b = default_pilot_bandwidth(self.dataset.domain, len(self._shared))
            tree = self._trees[id(self._shared)]
            idx = _window_indices(tree, t, b)
            if idx.size:
                return self._values[:, idx].mean(axis=1)
            return self._nearest(t)
        return np.array([
            _approx_with_tree(self._tree(s), s, t, self.policy, self.dataset.domain)
            for s in self.dataset.sheets
        ])
