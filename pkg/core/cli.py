"""
Command-line front end.

    anisurf simulate   --config cfg.json --out data.csv
    anisurf estimate   --config cfg.json --dataset data.csv [--points pts.csv] --out est.jsonl
    anisurf deform     --config cfg.json --dataset data.csv --out deform.csv --format csv
    anisurf smooth     --config cfg.json --dataset learn.csv --new-sheet new.csv --points pts.csv
    anisurf experiment --config exp.json --out table.csv --deterministic
    anisurf validate   --dataset data.csv

Exit status is 0 on success, 1 on invalid input and 2 on runtime failures.
"""

import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

from core.config import U64, CliConfig, parse_config
from core.dataset_io import RECORD_FORMATS, read_dataset, read_points, write_dataset, write_records
from core.deformation import estimate_deformation
from core.errors import AnisurfError, ConfigError, ParseError, ValidationError
from core.experiments import evaluation_points, run_experiment, write_result_table
from core.field_model import validate_dataset
from core.mfbs_sim import generate_dataset
from core.regularity import RegularityEstimator, estimate_regularity_grid
from core.smoothing import adaptive_predict, learning_sigma2

logger = logging.getLogger(__name__)

THREADS_ENV = "ANISO_SURF_THREADS"
LOG_LEVEL_ENV = "ANISO_SURF_LOG_LEVEL"
USER_ERRORS = (ValidationError, ConfigError, ParseError, FileNotFoundError)


class Console:
    """Status lines on stdout, silenced by --quiet"""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def say(self, message: str):
        if not self.quiet:
            print(message)


def seed_type(value: str) -> int:
    """argparse type of --seed: an unsigned 64-bit integer"""
    try:
        seed = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got '{value}'")
    if not 0 <= seed < U64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2^64), got {seed}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration document")
    common.add_argument("--out", help="Output file (written atomically)")
    common.add_argument("--seed", type=seed_type, help="Seed overriding the configuration")
    common.add_argument("--deterministic", action="store_true", help="Omit timestamps from outputs")
    common.add_argument("--threads", type=int, help=f"Worker threads, 0 = auto (fallback: ${THREADS_ENV})")
    common.add_argument("--quiet", action="store_true", help="Only report errors")

    parser = argparse.ArgumentParser(
        prog="anisurf",
        description="Simulate deformed multifractional Brownian sheets, estimate their regularity and reconstruct them",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="Simulate a dataset from the configuration")

    p = sub.add_parser("estimate", parents=[common], help="Local regularity estimates at points")
    p.add_argument("--dataset", help="Observation dataset")
    p.add_argument("--points", help="Evaluation points (t1,t2 CSV or JSON)")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl", help="Output format")

    p = sub.add_parser("deform", parents=[common], help="Recover the deformation A1, A2")
    p.add_argument("--dataset", help="Observation dataset")
    p.add_argument("--points", help="Evaluation points")
    p.add_argument("--format", choices=("jsonl", "csv"), default="csv", help="Output format")

    p = sub.add_parser("smooth", parents=[common], help="Adaptive reconstruction of a new sheet")
    p.add_argument("--dataset", help="Learning dataset")
    p.add_argument("--new-sheet", dest="new_sheet", help="Dataset file holding the new sheet")
    p.add_argument("--points", help="Target points")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl", help="Output format")

    sub.add_parser("experiment", parents=[common], help="Run a Monte Carlo experiment")

    p = sub.add_parser("validate", parents=[common], help="Check a dataset file")
    p.add_argument("--dataset", help="Observation dataset")
    return parser


def resolve_cli_threads(value: Optional[int], config: CliConfig) -> int:
    if value is not None:
        return value
    env = os.getenv(THREADS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got '{env}'")
    return config.simulation.threads


def _load_config(args) -> CliConfig:
    if args.config:
        return parse_config(args.config)
    return CliConfig()


def _require_path(value: Optional[str], fallback: Optional[str], what: str) -> str:
    path = value or fallback
    if not path:
        raise ValidationError([f"{what}: no path given"])
    return path


def _emit(records: List[Dict], args, console: Console):
    if args.out:
        write_records(records, args.out, args.format)
        console.say(f"✅ Wrote {len(records)} records to {args.out}")
    else:
        sys.stdout.write(RECORD_FORMATS[args.format](records))


def _points(args, cfg: CliConfig, dataset, delta: float) -> np.ndarray:
    path = getattr(args, "points", None) or cfg.paths.points
    if path:
        return read_points(path)
    return evaluation_points(dataset.domain, delta)


def cmd_simulate(args, cfg: CliConfig, console: Console) -> int:
    out = _require_path(args.out, cfg.paths.output, "--out")
    sim = cfg.build_sim(seed=args.seed, threads=args.threads_resolved)
    console.say(f"🚀 Simulating {sim.n_sheets} sheets ({sim.field.design.kind})...")
    dataset = generate_dataset(sim)
    write_dataset(dataset, out)
    console.say(f"✅ Wrote {dataset.n_sheets} sheets to {out}")
    return 0


def cmd_estimate(args, cfg: CliConfig, console: Console) -> int:
    dataset = read_dataset(_require_path(args.dataset, cfg.paths.dataset, "--dataset"))
    reg = cfg.build_reg(dataset)
    points = _points(args, cfg, dataset, reg.delta)
    console.say(f"🔍 Estimating regularity at {len(points)} points (delta={reg.delta:g})...")
    estimates = estimate_regularity_grid(dataset, points, reg, threads=args.threads_resolved)
    records = [e.to_dict() for e in estimates]
    _emit(records, args, console)
    return 0


def cmd_deform(args, cfg: CliConfig, console: Console) -> int:
    dataset = read_dataset(_require_path(args.dataset, cfg.paths.dataset, "--dataset"))
    reg = cfg.build_reg(dataset)
    points = _points(args, cfg, dataset, reg.delta)
    anchor = cfg.build_anchor(reg.delta)
    console.say(f"🔍 Recovering the deformation at {len(points)} points...")
    estimates = estimate_deformation(dataset, points, anchor, reg, cfg.deform.n_nodes,
                                     threads=args.threads_resolved)
    records = [
        {"t1": e.t[0], "t2": e.t[1], "a1_hat": e.a1_hat, "a2_hat": e.a2_hat,
         "quadrature_nodes": e.quadrature_nodes, "projected_nodes": e.projected_nodes}
        for e in estimates
    ]
    _emit(records, args, console)
    return 0


def cmd_smooth(args, cfg: CliConfig, console: Console) -> int:
    learn = read_dataset(_require_path(args.dataset, cfg.paths.dataset, "--dataset"))
    new_data = read_dataset(_require_path(args.new_sheet, cfg.paths.new_sheet, "--new-sheet"), domain=learn.domain)
    if new_data.n_sheets != 1:
        logger.warning("new-sheet file holds %d sheets, using the first", new_data.n_sheets)
    new_sheet = new_data.sheets[0]
    reg = cfg.build_reg(learn)
    points = _points(args, cfg, learn, reg.delta)
    kernel = cfg.build_kernel()
    console.say(f"🔍 Reconstructing the new sheet at {len(points)} points...")
    estimator = RegularityEstimator(learn, reg.policy)
    sigma2 = learning_sigma2(learn)
    records = []
    for t in points:
        value, plan = adaptive_predict(
            learn, new_sheet, tuple(t), reg, kernel, cfg.smoothing.c_density,
            plugin=cfg.smoothing.plugin, force_isotropic=cfg.smoothing.force_isotropic,
            sigma2=sigma2, estimator=estimator,
        )
        records.append({"prediction": value, **plan.to_dict()})
    _emit(records, args, console)
    return 0


def cmd_experiment(args, cfg: CliConfig, console: Console) -> int:
    out = _require_path(args.out, cfg.paths.output, "--out")
    config = cfg.build_experiment(seed=args.seed, threads=args.threads_resolved)
    console.say(f"🚀 Running {config.scenario} with {config.replicates} replicates...")
    table = run_experiment(config)
    write_result_table(table, out, deterministic=args.deterministic)
    console.say(f"✅ Wrote {len(table.rows)} rows to {out}")
    return 0


def cmd_validate(args, cfg: CliConfig, console: Console) -> int:
    path = _require_path(args.dataset, cfg.paths.dataset, "--dataset")
    report = validate_dataset(read_dataset(path))
    if report.is_valid:
        console.say(f"✅ {path} is valid")
        return 0
    for message in report.messages():
        print(f"❌ {message}")
    return 1


COMMANDS: Dict[str, Callable] = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "deform": cmd_deform,
    "smooth": cmd_smooth,
    "experiment": cmd_experiment,
    "validate": cmd_validate,
}


def configure_logging():
    level = os.getenv(LOG_LEVEL_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _diagnostic(error: BaseException) -> str:
    name = type(error).__name__
    message = " ".join(str(error).split())
    return message if message.startswith(name) else f"{name}: {message}"


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    configure_logging()
    args = build_parser().parse_args(argv)
    console = Console(args.quiet)
    try:
        cfg = _load_config(args)
        args.threads_resolved = resolve_cli_threads(args.threads, cfg)
        return COMMANDS[args.command](args, cfg, console)
    except USER_ERRORS as e:
        print(f"❌ {_diagnostic(e)}", file=sys.stderr)
        return 1
    except AnisurfError as e:
        print(f"❌ {_diagnostic(e)}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        print(f"❌ {_diagnostic(e)}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
