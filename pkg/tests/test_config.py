import json
import math

import numpy as np
import pytest

from core.config import FALLBACK_DELTA, parse_config, validate_config
from core.errors import ParseError, ValidationError
from core.experiments import DEFAULT_REPLICATES
from core.parametric import LinearHurst


def write_doc(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc, encoding="utf-8")
    return str(path)


def errors_of(doc):
    with pytest.raises(ValidationError) as info:
        validate_config(doc)
    return info.value.errors


def test_empty_document_uses_defaults():
    config = validate_config({})
    sim = config.build_sim()
    assert sim.n_sheets == 100 and sim.seed == 0 and sim.threads == 1
    assert sim.domain.sides == (1.0, 1.0)
    assert sim.field.design.grid_shape == (20, 20)
    reg = config.build_reg()
    assert reg.delta == FALLBACK_DELTA
    assert reg.tau == pytest.approx(math.sqrt(FALLBACK_DELTA))
    assert config.build_kernel().kind == "boxcar"


def test_overrides_take_precedence():
    sim = validate_config({"simulation": {"seed": 3, "threads": 2}}).build_sim(seed=9, threads=0)
    assert (sim.seed, sim.threads) == (9, 0)


def test_unknown_keys_are_reported_with_their_path():
    assert errors_of({"domian": {}}) == ["domian: unknown key"]
    assert "regularity.detla: unknown key" in errors_of({"regularity": {"detla": 0.1}})


def test_exponent_outside_unit_interval():
    errors = errors_of({"field": {"eta1": {"kind": "constant", "value": 1.2}}})
    assert any("eta1 must lie in (0,1)" in e for e in errors)


@pytest.mark.parametrize("doc, fragment", [
    ({"domain": {"t1_min": 2.0, "t1_max": 1.0}}, "min < max"),
    ({"domain": {"t1_min": 0.0}}, "(0, inf)^2"),
    ({"field": {"deformation": {"kind": "power", "power": [0.0, 1.0]}}}, "must be > 0"),
    ({"field": {"sigma": {"kind": "constant", "value": -1.0}}}, "field.sigma"),
    ({"simulation": {"n_sheets": 0}}, "simulation.n_sheets"),
    ({"simulation": {"seed": -1}}, "simulation.seed"),
    ({"regularity": {"tau": 1.5}}, "regularity.tau"),
    ({"experiment": {"scenario": "speedup"}}, "experiment.scenario"),
    ({"experiment": {"scenario": "concentration", "sweep": {"N": [-1]}}}, "sweep.N values must be positive"),
    ({"experiment": {"scenario": "concentration", "sweep": {"N": []}}}, "sweep.N must not be empty"),
])
def test_invalid_values(doc, fragment):
    assert any(fragment in e for e in errors_of(doc))


def test_linear_hurst_document():
    config = validate_config({"field": {"eta1": {"kind": "linear", "intercept": 0.3, "slope1": 0.05}}})
    eta1 = config.build_field().eta1
    assert isinstance(eta1, LinearHurst)
    assert eta1(1.0, 1.0) == pytest.approx(0.35)


def test_build_reg_from_dataset(domain, make_dataset):
    ds = make_dataset(domain.grid(20, 20), [np.zeros(400)])
    reg = validate_config({}).build_reg(ds)
    assert reg.delta == pytest.approx(2.0 / 19.0)
    assert reg.tau == pytest.approx(math.sqrt(2.0 / 19.0))
    explicit = validate_config({"regularity": {"delta": 0.02, "tau": 0.3, "approx": "pilot-local-average"}})
    reg = explicit.build_reg(ds)
    assert (reg.delta, reg.tau, reg.policy.kind) == (0.02, 0.3, "pilot-local-average")


def test_build_anchor():
    default = validate_config({}).build_anchor(0.05)
    assert (default.t0, default.s0) == (pytest.approx(1.15), pytest.approx(1.15))
    assert default.lambda1 == pytest.approx(1.15)
    doc = {"deform": {"anchor": {"t0": 1.2, "s0": 1.3, "lambda1": 2.0, "lambda2": 0.5}}}
    anchor = validate_config(doc).build_anchor(0.05)
    assert (anchor.t0, anchor.s0, anchor.lambda1, anchor.lambda2) == (1.2, 1.3, 2.0, 0.5)


def test_build_experiment():
    doc = {
        "experiment": {"scenario": "anisotropy", "sweep": {"tau": [0.1]}},
        "smoothing": {"kernel": "biweight-product"},
    }
    config = validate_config(doc)
    exp = config.build_experiment(seed=5, threads=2)
    assert exp.replicates == DEFAULT_REPLICATES["anisotropy"]
    assert (exp.base_seed, exp.threads) == (5, 2)
    assert exp.sweep == {"tau": [0.1]}
    assert exp.kernel.kind == "biweight-product"
    assert exp.echo == config.model_dump(mode="json")


def test_experiment_section_required():
    with pytest.raises(ValidationError, match="experiment"):
        validate_config({}).build_experiment()


def test_parse_config_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_config(str(tmp_path / "missing.json"))
    with pytest.raises(ParseError):
        parse_config(write_doc(tmp_path, "{not json"))
    with pytest.raises(ValidationError, match="JSON object"):
        parse_config(write_doc(tmp_path, [1, 2]))


def test_parse_config_file(tmp_path):
    path = write_doc(tmp_path, {"simulation": {"n_sheets": 7}, "paths": {"output": "out.csv"}})
    config = parse_config(path)
    assert config.simulation.n_sheets == 7
    assert config.paths.output == "out.csv"
