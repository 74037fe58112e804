"""Command-line interface: ``fuzzcor count | polycor | simulate``.

Exit codes
    0  success
    2  malformed input (schema, JSON, shapes)
    3  category bank is not a valid fuzzy partition
    4  estimation failed (the pair is named on stderr)
    5  more than 10% of simulation replicates failed
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .counting import FORMAT, FuzzyFrequencyTable
from .dataset import DatasetFile, SchemaError
from .errors import (
    AllZeroMembership,
    EstimationFailed,
    FuzzcorError,
    InvalidFuzzyNumber,
    LengthMismatch,
    PartitionInvalid,
)
from .estimation import FitOptions, assemble_matrix
from .simulation import (
    DESIGN_I,
    DESIGN_RC,
    DESIGN_RHO,
    DESK_B,
    FULL_B,
    SimCondition,
    run_study,
)

EXIT_OK, EXIT_SCHEMA, EXIT_PARTITION, EXIT_ESTIMATION, EXIT_SIM_FAILURES = 0, 2, 3, 4, 5
FAILURE_LIMIT = 0.10

log = logging.getLogger("fuzzcor")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def dumps(obj) -> str:
    """Canonical JSON text used for every file the CLI writes."""
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"environment variable {name}={raw!r} is not an integer", EXIT_SCHEMA) from None


def _jobs(args) -> int:
    return args.jobs if args.jobs is not None else _env_int("FUZZCOR_JOBS", 1)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def parse_pairs(spec: str | None, data: DatasetFile) -> list[tuple[str, str]]:
    if not spec:
        return data.pairs()
    pairs = []
    for item in spec.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = [p.strip() for p in item.split(",")]
        if len(parts) != 2:
            raise CliError(f"bad pair {item!r}; expected 'j,k'", EXIT_SCHEMA)
        for p in parts:
            if p not in data.variables:
                raise CliError(f"unknown variable {p!r} in --pairs; have {data.names}", EXIT_SCHEMA)
        pairs.append((parts[0], parts[1]))
    return pairs


def _load_data(path: str, validate: bool) -> DatasetFile:
    data = DatasetFile.load(path)
    if validate:
        data.validate()
    return data


def count_tables(data: DatasetFile, pairs, normalize: bool = False, jobs: int = 1) -> dict:
    """Library-level equivalent of ``fuzzcor count``."""
    return {
        "format": FORMAT,
        "tables": [{"pair": [j, k], "table": data.table(j, k, normalize, jobs).to_dict()} for j, k in pairs],
    }


def cmd_count(args) -> int:
    data = _load_data(args.data, not args.no_validate)
    pairs = parse_pairs(args.pairs, data)
    bundle = count_tables(data, pairs, args.normalize, _jobs(args))
    _emit(dumps(bundle), args.out)
    if args.emit_long_csv:
        base = Path(args.out) if args.out else Path("fuzzcor_table.json")
        for entry in bundle["tables"]:
            j, k = entry["pair"]
            path = base.with_name(f"{base.stem}_{j}_{k}.csv")
            path.write_text(FuzzyFrequencyTable.from_dict(entry["table"]).to_long_csv())
    return EXIT_OK


def load_tables(paths) -> dict:
    """Read table files (single tables or ``count`` bundles) keyed by variable pair."""
    tables: dict = {}
    unlabeled = 0
    for path in paths:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from None
        entries = d["tables"] if isinstance(d, dict) and "tables" in d else [{"table": d}]
        for e in entries:
            try:
                tab = FuzzyFrequencyTable.from_dict(e["table"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: malformed table: {exc}") from None
            pair = e.get("pair") or tab.meta.get("pair")
            if pair is None:
                unlabeled += 1
                pair = [f"V{2 * unlabeled - 1}", f"V{2 * unlabeled}"]
            key = (str(pair[0]), str(pair[1]))
            if key in tables:
                raise SchemaError(f"pair {key} given twice")
            tables[key] = tab
    if not tables:
        raise SchemaError("no tables supplied")
    return tables


def cmd_polycor(args) -> int:
    opts = FitOptions(tol=args.tol, max_iter=args.max_iter, compat_eq8=args.compat_eq8)
    jobs = _jobs(args)
    if args.data:
        data = _load_data(args.data, not args.no_validate)
        tables = {(j, k): data.table(j, k, jobs=jobs) for j, k in data.pairs()}
        labels = data.names
    else:
        tables = load_tables(args.tables)
        labels = None
    result = assemble_matrix(tables, args.method, opts, labels, jobs)
    _emit(dumps(result.to_dict()), args.out)
    if args.out:
        Path(args.out).with_suffix(".csv").write_text(result.to_csv())
    if result.smoothed:
        log.warning("pairwise matrix was indefinite; eigenvalue smoothing applied")
    return EXIT_OK


def build_conditions(args) -> list[SimCondition]:
    seed = args.seed if args.seed is not None else _env_int("FUZZCOR_SEED", 0)
    B = args.B if args.B is not None else (FULL_B if args.full_scale else DESK_B)
    I_levels = args.I or (DESIGN_I if args.full_scale else None)
    rho_levels = args.rho0 or (DESIGN_RHO if args.full_scale else None)
    rc_levels = args.RC or (DESIGN_RC if args.full_scale else (4,))
    if I_levels is None or rho_levels is None:
        raise CliError("--I and --rho0 are required unless --full-scale is given", EXIT_SCHEMA)
    for rc in rc_levels:
        if rc not in (4, 6):
            raise CliError(f"--RC must be 4 or 6, got {rc}", EXIT_SCHEMA)
    for I in I_levels:
        if I < 1:
            raise CliError(f"--I must be positive, got {I}", EXIT_SCHEMA)
    for r in rho_levels:
        if not -1 < r < 1:
            raise CliError(f"--rho0 must lie in (-1, 1), got {r}", EXIT_SCHEMA)
    if B < 1:
        raise CliError("--B must be at least 1", EXIT_SCHEMA)
    return [SimCondition(I, rho, rc, B, seed) for rc in rc_levels for rho in rho_levels for I in I_levels]


def cmd_simulate(args) -> int:
    conds = build_conditions(args)
    report = run_study(conds, jobs=_jobs(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rho.csv").write_text(report.to_csv("rho"))
    (out / "tau.csv").write_text(report.to_csv("tau"))
    (out / "thresholds.csv").write_text(report.thresholds_csv())
    (out / "report.json").write_text(dumps(report.to_dict()))
    print(report.format_table())
    if report.failure_rate > FAILURE_LIMIT:
        print(f"error: {report.failure_rate:.1%} of replicates failed (limit {FAILURE_LIMIT:.0%})", file=sys.stderr)
        return EXIT_SIM_FAILURES
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fuzzcor", description="Polychoric correlation for fuzzy frequency data.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("count", help="build fuzzy frequency tables from a dataset")
    c.add_argument("--data", required=True)
    c.add_argument("--pairs", help="'j,k;j,k' (default: all pairs)")
    c.add_argument("--out")
    c.add_argument("--normalize", action="store_true", help="rescale each fuzzy count to unit height")
    c.add_argument("--emit-long-csv", action="store_true", help="also write (r,c,n,membership) CSV per pair")
    c.add_argument("--no-validate", action="store_true", help="skip the partition checks")
    c.add_argument("--jobs", type=int)
    c.set_defaults(func=cmd_count)

    q = sub.add_parser("polycor", help="estimate the correlation matrix")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--tables", nargs="+")
    src.add_argument("--data")
    q.add_argument("--method", choices=["fem", "dml-max", "dml-mean"], default="fem")
    q.add_argument("--out")
    q.add_argument("--compat-eq8", action="store_true", help="literal n-weighted E-step normalization")
    q.add_argument("--tol", type=float, default=1e-9)
    q.add_argument("--max-iter", type=int, default=500)
    q.add_argument("--no-validate", action="store_true")
    q.add_argument("--jobs", type=int)
    q.set_defaults(func=cmd_polycor)

    s = sub.add_parser("simulate", help="Monte Carlo study of the three estimators")
    s.add_argument("--I", type=int, nargs="+")
    s.add_argument("--rho0", type=float, nargs="+")
    s.add_argument("--RC", type=int, nargs="+")
    s.add_argument("--B", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--full-scale", action="store_true", help=f"full design grid, B={FULL_B}")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except PartitionInvalid as exc:
        print(f"partition error: {exc}", file=sys.stderr)
        return EXIT_PARTITION
    except EstimationFailed as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (SchemaError, LengthMismatch, InvalidFuzzyNumber, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (AllZeroMembership, FuzzcorError, ArithmeticError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
