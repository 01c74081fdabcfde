"""
JSON configuration documents.

One document drives every subcommand; sections a command does not use are
ignored by it. Parsing is strict: unknown keys and out-of-range values are
reported with their key path.
"""

import logging
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, model_validator

from core.dataset_io import read_json
from core.deformation import DEFAULT_NODES, DeformationAnchor
from core.errors import AnisurfError, ValidationError
from core.experiments import DEFAULT_REPLICATES, SCENARIOS, ExperimentConfig, default_anchor
from core.field_model import DESIGN_KINDS, DesignLaw, Domain, FieldSpec, SurfaceDataset, check_field_spec
from core.mfbs_sim import SimConfig
from core.parametric import (
    ConstantHurst, ConstantNoise, LinearHurst, LogisticHurst, ProportionalNoise,
    affine_deformation, identity_deformation, power_deformation,
)
from core.regularity import RegParams, default_delta, default_tau
from core.smoothing import KERNEL_KINDS, PLUGIN_KINDS, KernelSpec
from core.surface_approx import APPROX_KINDS, ApproxPolicy

logger = logging.getLogger(__name__)

# used when no dataset is at hand to derive the default
FALLBACK_DELTA = 0.05
U64 = 2 ** 64


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainModel(StrictModel):
    t1_min: float = Field(default=1.0, description="Lower bound of the first coordinate (> 0)")
    t1_max: float = Field(default=2.0, description="Upper bound of the first coordinate")
    t2_min: float = Field(default=1.0, description="Lower bound of the second coordinate (> 0)")
    t2_max: float = Field(default=2.0, description="Upper bound of the second coordinate")

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self) -> Domain:
        try:
            return Domain(self.t1_min, self.t1_max, self.t2_min, self.t2_max)
        except AnisurfError as e:
            raise ValueError(str(e))


# --- Hurst functions ---

class ConstantHurstModel(StrictModel):
    kind: Literal["constant"] = "constant"
    value: float = Field(description="Constant exponent in (0,1)")

    def build(self):
        return ConstantHurst(self.value)


class LinearHurstModel(StrictModel):
    kind: Literal["linear"]
    intercept: float = Field(description="Value at u = 0")
    slope1: float = Field(default=0.0, description="Slope along u1")
    slope2: float = Field(default=0.0, description="Slope along u2")

    def build(self):
        return LinearHurst(self.intercept, self.slope1, self.slope2)


class LogisticHurstModel(StrictModel):
    kind: Literal["logistic"]
    low: float = Field(description="Exponent far on the low side of the transition")
    high: float = Field(description="Exponent far on the high side of the transition")
    weight1: float = Field(default=1.0, description="Transition direction, u1 weight")
    weight2: float = Field(default=0.0, description="Transition direction, u2 weight")
    center: float = Field(default=0.0, description="Offset of the transition line")

    def build(self):
        return LogisticHurst(self.low, self.high, self.weight1, self.weight2, self.center)


HurstModel = Annotated[
    Union[ConstantHurstModel, LinearHurstModel, LogisticHurstModel], Field(discriminator="kind")
]


# --- Deformations ---

class IdentityModel(StrictModel):
    kind: Literal["identity"] = "identity"

    def build(self):
        return identity_deformation()


class PowerModel(StrictModel):
    kind: Literal["power"]
    scale: Tuple[float, float] = Field(default=(1.0, 1.0), description="Multipliers c_k > 0")
    power: Tuple[float, float] = Field(default=(1.0, 1.0), description="Exponents p_k > 0")

    @model_validator(mode="after")
    def _check(self):
        if min(self.scale) <= 0 or min(self.power) <= 0:
            raise ValueError("scale and power entries must be > 0")
        return self

    def build(self):
        return power_deformation(self.scale, self.power)


class AffineModel(StrictModel):
    kind: Literal["affine"]
    matrix: Tuple[Tuple[float, float], Tuple[float, float]] = Field(description="2x2 nonnegative matrix")
    offset: Tuple[float, float] = Field(default=(0.0, 0.0), description="Translation")

    @model_validator(mode="after")
    def _check(self):
        if min(min(r) for r in self.matrix) < 0:
            raise ValueError("matrix entries must be nonnegative")
        return self

    def build(self):
        return affine_deformation(self.matrix, self.offset)


DeformationModel = Annotated[Union[IdentityModel, PowerModel, AffineModel], Field(discriminator="kind")]


# --- Noise ---

class ConstantNoiseModel(StrictModel):
    kind: Literal["constant"] = "constant"
    value: float = Field(default=0.0, ge=0.0, description="Noise standard deviation")

    def build(self):
        return ConstantNoise(self.value)


class ProportionalNoiseModel(StrictModel):
    kind: Literal["proportional"]
    base: float = Field(ge=0.0, description="Standard deviation at x = 0")
    slope: float = Field(ge=0.0, description="Increase per unit |x|")

    def build(self):
        return ProportionalNoise(self.base, self.slope)


NoiseModel = Annotated[Union[ConstantNoiseModel, ProportionalNoiseModel], Field(discriminator="kind")]


class DesignModel(StrictModel):
    kind: Literal[DESIGN_KINDS] = Field(default="common-grid", description="Design law of observation points")
    grid_shape: Optional[Tuple[int, int]] = Field(default=(20, 20), description="Common grid size n1 x n2")
    density_lower_bound_c: float = Field(default=1.0, gt=0.0, description="Lower bound of the design density")

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self) -> DesignLaw:
        try:
            return DesignLaw(self.kind, self.grid_shape if self.kind == "common-grid" else None,
                             self.density_lower_bound_c)
        except AnisurfError as e:
            raise ValueError(str(e))


class FieldModel(StrictModel):
    eta1: HurstModel = Field(default_factory=lambda: ConstantHurstModel(value=0.5), description="First Hurst function")
    eta2: HurstModel = Field(default_factory=lambda: ConstantHurstModel(value=0.5), description="Second Hurst function")
    deformation: DeformationModel = Field(default_factory=IdentityModel, description="Domain deformation A")
    sigma: NoiseModel = Field(default_factory=ConstantNoiseModel, description="Noise level sigma(t, x)")
    design: DesignModel = Field(default_factory=DesignModel, description="Observation design")
    mean_points_m: float = Field(default=100.0, gt=0.0, description="Mean points per sheet for random designs")


class SimulationModel(StrictModel):
    n_sheets: int = Field(default=100, ge=1, description="Number of sheets N")
    seed: int = Field(default=0, ge=0, lt=U64, description="Base seed of the per-sheet substreams")
    jitter: float = Field(default=1e-10, ge=0.0, description="Initial diagonal jitter of the factorization ladder")
    threads: int = Field(default=1, ge=0, description="Worker threads, 0 = all cores")


class RegularityModel(StrictModel):
    delta: Optional[float] = Field(default=None, gt=0.0, description="Spacing Delta; default from the data")
    tau: Optional[float] = Field(default=None, gt=0.0, lt=1.0, description="Anisotropy threshold; default max(0.05, sqrt(Delta))")
    beta_low: float = Field(default=0.05, gt=0.0, lt=1.0, description="Lower clamp of exponent estimates")
    beta_high_L: float = Field(default=100.0, gt=0.0, description="Truncation of Holder constant estimates")
    v_floor: float = Field(default=1e-6, gt=0.0, description="Floor of the variance estimate")
    approx: Literal[APPROX_KINDS] = Field(default="nearest-neighbor", description="Observable approximation")
    pilot_bandwidth: Optional[float] = Field(default=None, gt=0.0, description="Pilot average window half-width")


class AnchorModel(StrictModel):
    t0: float = Field(description="Anchor first coordinate")
    s0: float = Field(description="Anchor second coordinate")
    lambda1: float = Field(gt=0.0, description="Known A1 at the anchor")
    lambda2: float = Field(gt=0.0, description="Known A2 at the anchor")


class DeformModel(StrictModel):
    anchor: Optional[AnchorModel] = Field(default=None, description="Anchor; default lower-left interior corner")
    n_nodes: int = Field(default=DEFAULT_NODES, ge=2, description="Quadrature nodes per integral")


class SmoothingModel(StrictModel):
    kernel: Literal[KERNEL_KINDS] = Field(default="boxcar", description="Smoothing kernel")
    c_density: Optional[float] = Field(default=None, gt=0.0, description="Design density lower bound; default 1/area")
    plugin: Literal[PLUGIN_KINDS] = Field(default="axis-labeled", description="How exponents map to axes")
    force_isotropic: bool = Field(default=True, description="Isotropic plan when no anisotropy is detected")


class ExperimentModel(StrictModel):
    scenario: Literal[SCENARIOS] = Field(description="Experiment to run")
    replicates: Optional[int] = Field(default=None, ge=1, description="Monte Carlo replicates")
    sweep: Dict[str, List[float]] = Field(default_factory=dict, description="Swept parameters, e.g. N, epsilon, tau, M0, k")
    base_seed: int = Field(default=0, ge=0, lt=U64, description="Base seed of the replicate substreams")
    eval_grid: int = Field(default=7, ge=1, description="Side of the evaluation lattice")
    margin_factor: float = Field(default=3.0, gt=0.0, description="Lattice margin in units of Delta")
    oracle: bool = Field(default=False, description="Deformation from closed-form truth")
    target: Optional[Tuple[float, float]] = Field(default=None, description="Evaluation point; default domain center")
    direction: Tuple[float, float] = Field(default=(1.0, 0.0), description="Direction of the expansion checks")

    @model_validator(mode="after")
    def _check(self):
        for key, values in self.sweep.items():
            if not values:
                raise ValueError(f"sweep.{key} must not be empty")
            if any(v <= 0 for v in values):
                raise ValueError(f"sweep.{key} values must be positive")
        return self


class PathsModel(StrictModel):
    dataset: Optional[str] = Field(default=None, description="Observation dataset file")
    points: Optional[str] = Field(default=None, description="Evaluation points file")
    new_sheet: Optional[str] = Field(default=None, description="New sheet to reconstruct")
    output: Optional[str] = Field(default=None, description="Output file")


class CliConfig(StrictModel):
    domain: DomainModel = Field(default_factory=DomainModel)
    field: FieldModel = Field(default_factory=FieldModel)
    simulation: SimulationModel = Field(default_factory=SimulationModel)
    regularity: RegularityModel = Field(default_factory=RegularityModel)
    deform: DeformModel = Field(default_factory=DeformModel)
    smoothing: SmoothingModel = Field(default_factory=SmoothingModel)
    experiment: Optional[ExperimentModel] = Field(default=None)
    paths: PathsModel = Field(default_factory=PathsModel)

    @model_validator(mode="after")
    def _check_field(self):
        problems = check_field_spec(self.build_field(), self.domain.build())
        if problems:
            raise ValueError("; ".join(problems))
        return self

    # --- builders ---

    def build_domain(self) -> Domain:
        return self.domain.build()

    def build_field(self) -> FieldSpec:
        f = self.field
        return FieldSpec(
            eta1=f.eta1.build(), eta2=f.eta2.build(), deformation=f.deformation.build(),
            sigma_fn=f.sigma.build(), design=f.design.build(), mean_points_m=f.mean_points_m,
        )

    def build_sim(self, seed: Optional[int] = None, threads: Optional[int] = None) -> SimConfig:
        s = self.simulation
        return SimConfig(
            field=self.build_field(), domain=self.build_domain(), n_sheets=s.n_sheets,
            seed=s.seed if seed is None else seed, jitter=s.jitter,
            threads=s.threads if threads is None else threads,
        )

    def build_reg(self, dataset: Optional[SurfaceDataset] = None) -> RegParams:
        r = self.regularity
        delta = r.delta
        if delta is None:
            delta = default_delta(dataset) if dataset is not None else FALLBACK_DELTA
            logger.info("using default delta %.4g", delta)
        tau = r.tau if r.tau is not None else default_tau(delta)
        return RegParams(
            delta=delta, tau=min(tau, 0.99), beta_low=r.beta_low, beta_high_L=r.beta_high_L,
            v_floor=r.v_floor, policy=ApproxPolicy(r.approx, r.pilot_bandwidth),
        )

    def build_anchor(self, delta: float) -> DeformationAnchor:
        a = self.deform.anchor
        if a is None:
            return default_anchor(self.build_field(), self.build_domain(), delta)
        return DeformationAnchor(a.t0, a.s0, a.lambda1, a.lambda2)

    def build_kernel(self) -> KernelSpec:
        return KernelSpec.boxcar() if self.smoothing.kernel == "boxcar" else KernelSpec.biweight()

    def build_experiment(self, seed: Optional[int] = None, threads: Optional[int] = None) -> ExperimentConfig:
        e = self.experiment
        if e is None:
            raise ValidationError(["experiment: section required for the experiment command"])
        reg = self.build_reg()
        return ExperimentConfig(
            scenario=e.scenario,
            replicates=e.replicates or DEFAULT_REPLICATES[e.scenario],
            sim=self.build_sim(threads=threads),
            reg=reg,
            sweep={k: list(v) for k, v in e.sweep.items()},
            output_path=self.paths.output,
            base_seed=e.base_seed if seed is None else seed,
            threads=self.simulation.threads if threads is None else threads,
            eval_grid=e.eval_grid,
            margin_factor=e.margin_factor,
            anchor=self.build_anchor(reg.delta) if self.deform.anchor is not None else None,
            n_nodes=self.deform.n_nodes,
            oracle=e.oracle,
            plugin=self.smoothing.plugin,
            target=e.target,
            direction=e.direction,
            kernel=self.build_kernel(),
            c_density=self.smoothing.c_density,
            echo=self.model_dump(mode="json"),
        )


def _format_error(err) -> str:
    loc = ".".join(str(p) for p in err.get("loc", ()))
    if err.get("type") == "extra_forbidden":
        return f"{loc}: unknown key"
    msg = err.get("msg", "invalid value")
    if msg.startswith("Value error, "):
        msg = msg[len("Value error, "):]
    return f"{loc}: {msg}" if loc else msg


def validate_config(data) -> CliConfig:
    if not isinstance(data, dict):
        raise ValidationError(["document must be a JSON object"])
    try:
        return CliConfig.model_validate(data)
    except PydanticValidationError as e:
        raise ValidationError([_format_error(err) for err in e.errors()])


def parse_config(path: str) -> CliConfig:
    """Load and validate a JSON configuration document."""
    if not Path(path).exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return validate_config(read_json(path))
