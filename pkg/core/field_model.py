"""
Domain, dataset and functional-parameter types shared by every module,
plus dataset validation and the interior-margin rule used by the estimators.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Any

import numpy as np

from core.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

Point = Tuple[float, float]
ScalarField = Callable[[Any, Any], Any]

DESIGN_KINDS = ("common-grid", "independent-uniform", "independent-poisson")
MAX_COMMON_POINTS = 5000


def _frozen_array(values, dtype=float, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle [t1_min, t1_max] x [t2_min, t2_max] inside (0, inf)^2"""
    t1_min: float
    t1_max: float
    t2_min: float
    t2_max: float

    def __post_init__(self):
        if not (self.t1_min < self.t1_max and self.t2_min < self.t2_max):
            raise ConfigError(f"Domain bounds must satisfy min < max, got {self}")
        if not (self.t1_min > 0 and self.t2_min > 0):
            raise ConfigError(f"Domain must lie in (0, inf)^2, got {self}")

    @property
    def sides(self) -> Tuple[float, float]:
        return (self.t1_max - self.t1_min, self.t2_max - self.t2_min)

    @property
    def area(self) -> float:
        s1, s2 = self.sides
        return s1 * s2

    @property
    def min_side(self) -> float:
        return min(self.sides)

    def contains(self, points) -> np.ndarray:
        """Boolean mask of points lying in the closed rectangle"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (pts[:, 0] >= self.t1_min) & (pts[:, 0] <= self.t1_max)
            & (pts[:, 1] >= self.t2_min) & (pts[:, 1] <= self.t2_max)
        )

    def grid(self, n1: int, n2: int) -> np.ndarray:
        """Regular n1 x n2 lattice covering the closed domain, row-major in t1"""
        g1 = np.linspace(self.t1_min, self.t1_max, n1)
        g2 = np.linspace(self.t2_min, self.t2_max, n2)
        u1, u2 = np.meshgrid(g1, g2, indexing="ij")
        return np.column_stack([u1.ravel(), u2.ravel()])

    def interior_lattice(self, n: int, margin: float) -> np.ndarray:
        """n x n lattice of the rectangle shrunk by ``margin`` on every side"""
        inner = Domain(self.t1_min + margin, self.t1_max - margin,
                       self.t2_min + margin, self.t2_max - margin)
        return inner.grid(n, n)

    def describe(self) -> Dict[str, float]:
        return {"t1_min": self.t1_min, "t1_max": self.t1_max,
                "t2_min": self.t2_min, "t2_max": self.t2_max}


@dataclass(frozen=True)
class Sheet:
    """One realization observed at ``points`` (M x 2) with values ``values`` (M,)"""
    id: int
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = self.points
        if not (isinstance(pts, np.ndarray) and not pts.flags.writeable):
            pts = _frozen_array(pts).reshape(-1, 2)
        vals = _frozen_array(self.values).reshape(-1)
        if pts.shape[0] != vals.shape[0]:
            raise ValueError(
                f"Sheet {self.id}: {pts.shape[0]} points but {vals.shape[0]} values"
            )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "id", int(self.id))

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class SurfaceDataset:
    """N sheets of scattered observations on a common domain"""
    sheets: Tuple[Sheet, ...]
    domain: Domain
    noise_known_sigma: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "sheets", tuple(self.sheets))
        if self.noise_known_sigma is not None and self.noise_known_sigma < 0:
            raise ConfigError("noise_known_sigma must be >= 0")

    @property
    def n_sheets(self) -> int:
        return len(self.sheets)

    @property
    def sheet_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.sheets], dtype=int)

    @property
    def mean_points(self) -> float:
        return float(self.sheet_sizes.mean()) if self.sheets else 0.0

    def shared_points(self) -> Optional[np.ndarray]:
        """The common design array if every sheet uses the same point set"""
        if not self.sheets:
            return None
        first = self.sheets[0].points
        for sheet in self.sheets[1:]:
            if sheet.points is first:
                continue
            if sheet.points.shape != first.shape or not np.array_equal(sheet.points, first):
                return None
        return first

    def value_matrix(self) -> np.ndarray:
        """N x M matrix of values; only defined for a common design"""
        if self.shared_points() is None:
            raise ValueError("value_matrix requires a common design")
        return np.vstack([s.values for s in self.sheets])

    def scaled(self, factor: float) -> "SurfaceDataset":
        """Copy with every observed value multiplied by ``factor``"""
        return SurfaceDataset(
            sheets=tuple(Sheet(s.id, s.points, s.values * factor) for s in self.sheets),
            domain=self.domain,
            noise_known_sigma=None if self.noise_known_sigma is None else abs(factor) * self.noise_known_sigma,
        )


@dataclass(frozen=True)
class Deformation:
    """Domain deformation A = (a1, a2) with its four partial derivatives"""
    a1: ScalarField
    a2: ScalarField
    da1_dt1: ScalarField
    da1_dt2: ScalarField
    da2_dt1: ScalarField
    da2_dt2: ScalarField
    description: Dict[str, Any] = field(default_factory=lambda: {"kind": "custom"})

    def apply(self, points) -> np.ndarray:
        """Map T-points (M x 2) to U-points (M x 2)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([
            np.asarray(self.a1(pts[:, 0], pts[:, 1]), dtype=float).reshape(-1),
            np.asarray(self.a2(pts[:, 0], pts[:, 1]), dtype=float).reshape(-1),
        ])

    def jacobian(self, t: Point) -> np.ndarray:
        """[[dA1/dt1, dA1/dt2], [dA2/dt1, dA2/dt2]] at t"""
        t1, t2 = float(t[0]), float(t[1])
        return np.array([
            [float(self.da1_dt1(t1, t2)), float(self.da1_dt2(t1, t2))],
            [float(self.da2_dt1(t1, t2)), float(self.da2_dt2(t1, t2))],
        ])


@dataclass(frozen=True)
class DesignLaw:
    """How observation points are drawn for each sheet"""
    kind: str
    grid_shape: Optional[Tuple[int, int]] = None
    density_lower_bound_c: float = 1.0
    fixed_points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ConfigError(f"Unknown design kind '{self.kind}', expected one of {DESIGN_KINDS}")
        if self.density_lower_bound_c <= 0:
            raise ConfigError("density_lower_bound_c must be > 0")
        if self.fixed_points is not None:
            object.__setattr__(self, "fixed_points", _frozen_array(self.fixed_points).reshape(-1, 2))
        if self.kind == "common-grid":
            if self.grid_shape is None and self.fixed_points is None:
                raise ConfigError("common-grid design requires grid_shape or fixed_points")
            n = (len(self.fixed_points) if self.fixed_points is not None
                 else int(self.grid_shape[0]) * int(self.grid_shape[1]))
            if n > MAX_COMMON_POINTS:
                raise ConfigError(f"common design has {n} points, above the cap of {MAX_COMMON_POINTS}")
            if self.grid_shape is not None and min(self.grid_shape) < 1:
                raise ConfigError("grid_shape entries must be >= 1")

    @property
    def is_common(self) -> bool:
        return self.kind == "common-grid"


@dataclass(frozen=True)
class FieldSpec:
    """Generative truth: X = W o A observed with noise under a design law"""
    eta1: ScalarField
    eta2: ScalarField
    deformation: Deformation
    sigma_fn: Callable[[Any, Any], Any]
    design: DesignLaw
    mean_points_m: float = 100.0

    def __post_init__(self):
        if self.mean_points_m <= 0:
            raise ConfigError("mean_points_m must be > 0")

    def hurst(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """(H1, H2) = (eta1 o A, eta2 o A) at T-points"""
        u = self.deformation.apply(points)
        return (np.asarray(self.eta1(u[:, 0], u[:, 1]), dtype=float).reshape(-1),
                np.asarray(self.eta2(u[:, 0], u[:, 1]), dtype=float).reshape(-1))


@dataclass
class Violation:
    code: str
    sheet_id: Optional[int] = None
    point_index: Optional[int] = None
    detail: str = ""

    def __str__(self) -> str:
        if self.code == "duplicate_id":
            return f"duplicate_id: {self.sheet_id}"
        where = f"sheet {self.sheet_id}" if self.sheet_id is not None else "dataset"
        if self.point_index is not None:
            where += f" point {self.point_index}"
        return f"{self.code}: {where}{(' ' + self.detail) if self.detail else ''}"


@dataclass
class ValidationReport:
    """Violations found by ``validate_dataset``; empty iff the dataset is valid"""
    violations: List[Violation] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> List[str]:
        return [v.code for v in self.violations]

    def messages(self) -> List[str]:
        return [str(v) for v in self.violations]

    def __len__(self) -> int:
        return len(self.violations)

    def __contains__(self, text: str) -> bool:
        return any(text in m for m in self.messages())


def validate_dataset(dataset: SurfaceDataset) -> ValidationReport:
    """List out-of-domain points, empty sheets and duplicate sheet ids."""
    report = ValidationReport()
    seen = set()
    reported_dupes = set()
    for sheet in dataset.sheets:
        if sheet.id in seen and sheet.id not in reported_dupes:
            report.violations.append(Violation("duplicate_id", sheet_id=sheet.id))
            reported_dupes.add(sheet.id)
        seen.add(sheet.id)
        if sheet.size == 0:
            report.violations.append(Violation("empty_sheet", sheet_id=sheet.id))
            continue
        inside = dataset.domain.contains(sheet.points)
        for idx in np.flatnonzero(~inside):
            p = sheet.points[idx]
            report.violations.append(Violation(
                "out_of_domain", sheet_id=sheet.id, point_index=int(idx),
                detail=f"({p[0]:.17g}, {p[1]:.17g})",
            ))
    return report


def interior_margin(domain: Domain, t, delta: float) -> bool:
    """True iff t +/- 2*delta*e_i lies in the closed domain for i = 1, 2."""
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    t1, t2 = float(t[0]), float(t[1])
    reach = 2.0 * delta
    tol = 1e-12 * max(1.0, abs(domain.t1_max), abs(domain.t2_max))
    return (
        t1 - reach >= domain.t1_min - tol and t1 + reach <= domain.t1_max + tol
        and t2 - reach >= domain.t2_min - tol and t2 + reach <= domain.t2_max + tol
    )


def in_unit_interval(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(v)) and np.all((v > 0) & (v < 1)))


def finite_nonnegative(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(v)) and np.all(v >= 0))


def check_field_spec(spec: FieldSpec, domain: Domain, resolution: int = 33) -> List[str]:
    """Range checks of eta and A on a lattice of the domain; empty list when valid."""
    problems: List[str] = []
    pts = domain.grid(resolution, resolution)
    try:
        u = spec.deformation.apply(pts)
    except Exception as e:
        return [f"deformation: evaluation failed ({e})"]
    if not np.all(np.isfinite(u)) or np.any(u <= 0):
        problems.append("deformation: A must be finite and strictly positive on the domain")
    for name, eta in (("eta1", spec.eta1), ("eta2", spec.eta2)):
        check = getattr(eta, "in_range", None)
        ok = check(u[:, 0], u[:, 1]) if check is not None else in_unit_interval(eta(u[:, 0], u[:, 1]))
        if not ok:
            problems.append(f"{name} must lie in (0,1) on the deformed domain")
    zeros = np.zeros(len(pts))
    check = getattr(spec.sigma_fn, "in_range", None)
    if not (check(pts, zeros) if check is not None else finite_nonnegative(spec.sigma_fn(pts, zeros))):
        problems.append("sigma must be finite and nonnegative on the domain")
    return problems


def check_simpl_a(deformation: Deformation, domain: Domain, resolution: int = 17) -> List[str]:
    """Positivity and monotonicity conditions required by deformation estimation."""
    problems: List[str] = []
    pts = domain.grid(resolution, resolution)
    u = deformation.apply(pts)
    if np.any(u <= 0):
        problems.append("A1 and A2 must be strictly positive")
    parts = {
        "dA1/dt1": deformation.da1_dt1, "dA1/dt2": deformation.da1_dt2,
        "dA2/dt1": deformation.da2_dt1, "dA2/dt2": deformation.da2_dt2,
    }
    values = {k: np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float).reshape(-1) for k, f in parts.items()}
    for k, v in values.items():
        if np.any(v < 0):
            problems.append(f"{k} must be nonnegative")
    for comp in ("A1", "A2"):
        total = values[f"d{comp}/dt1"] + values[f"d{comp}/dt2"]
        if np.any(total <= 0):
            problems.append(f"partials of {comp} must have a strictly positive sum")
    return problems
