"""Command-line interface: fit models from columnar files, test effects,
and run simulation matrices.

Input tables are delimited text (comma or tab, inferred from the header
line) with one named column per scalar or smoothed covariate; a
functional covariate named ``w`` observed at T grid points is supplied
as wide columns ``w[1] ... w[T]``.  Model declarations are JSON files
mirroring :class:`~vbam.design.ModelSpec`.  Structured outputs are
line-delimited JSON records.

Exit codes: 0 success, 2 user error (files, formats, unknown terms),
3 numerical or convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cavi import FitControl, extract_curve, fit_gaussian, fit_probit
from .design import (
    DesignBundle,
    FunctionalTerm,
    HyperParams,
    ModelSpec,
    SmoothTerm,
    assemble,
    center_smooth_blocks,
)
from .exceptions import VbamError
from .inference import default_eval_grid, global_effect_test
from .simulate import SimScenario, default_basis_size, run_scenario

EXIT_OK = 0
EXIT_USER = 2
EXIT_NUMERIC = 3


class CliError(Exception):
    """User-facing input problem; maps to exit code 2."""


@dataclass
class RunConfig:
    """Parsed invocation: one command plus its inputs and controls."""

    command: str
    data_path: Path | None = None
    model_path: Path | None = None
    scenarios_path: Path | None = None
    out_path: Path | None = None
    terms: list[str] = field(default_factory=list)
    knots: int | None = None
    control: FitControl = field(default_factory=FitControl)
    seed: int = 0
    alpha: float = 0.05
    standardize: bool = False


# ---------------------------------------------------------------------------
# input parsing


def load_table(path: Path) -> dict[str, np.ndarray]:
    """Read a delimited text table into named float columns.

    The delimiter is inferred from the header line; every row must be
    fully numeric, and errors name the offending row and column.
    """
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(f"cannot read data file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CliError(f"data file {path} is empty")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    if len(set(header)) != len(header):
        raise CliError(f"data file {path} has duplicate column names")
    columns: list[list[float]] = [[] for _ in header]
    for row_num, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise CliError(
                f"{path}: row {row_num} has {len(row)} fields, expected {len(header)}"
            )
        for j, cell in enumerate(row):
            try:
                columns[j].append(float(cell))
            except ValueError as exc:
                raise CliError(
                    f"{path}: row {row_num}, column {header[j]!r}: {cell!r} is not numeric"
                ) from exc
    return {name: np.asarray(col) for name, col in zip(header, columns)}


def _functional_block(columns: dict[str, np.ndarray], name: str, t_len: int) -> np.ndarray:
    cols = []
    for j in range(1, t_len + 1):
        key = f"{name}[{j}]"
        if key not in columns:
            raise CliError(f"functional term {name!r}: missing column {key!r}")
        cols.append(columns[key])
    return np.column_stack(cols)


def load_model(path: Path, knots_override: int | None = None) -> tuple[ModelSpec, str]:
    """Parse a JSON model declaration; returns the spec and response name."""
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise CliError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"model file {path} is not valid JSON: {exc}") from exc
    try:
        family = raw["family"]
        response = raw["response"]
    except KeyError as exc:
        raise CliError(f"model file {path} must declare {exc.args[0]!r}") from exc

    smooth = []
    for entry in raw.get("smooth", []):
        k = knots_override or entry.get("num_basis") or default_basis_size(family, "smooth", 10**9)
        smooth.append(SmoothTerm(entry["name"], int(k)))
    functional = []
    for entry in raw.get("functional", []):
        if "grid" in entry:
            grid = np.asarray(entry["grid"], dtype=float)
        elif "T" in entry:
            grid = np.linspace(0.0, 1.0, int(entry["T"]))
        else:
            raise CliError(f"functional term {entry.get('name')!r} needs 'grid' or 'T'")
        k = knots_override or entry.get("num_basis") or default_basis_size(family, "functional", 10**9)
        functional.append(FunctionalTerm(entry["name"], int(k), grid))

    hyper = HyperParams(**raw.get("hyper", {}))
    try:
        spec = ModelSpec(
            family=family,
            scalar_terms=tuple(raw.get("scalar", [])),
            smooth_terms=tuple(smooth),
            functional_terms=tuple(functional),
            hyper=hyper,
            degree=int(raw.get("degree", 3)),
            penalty_order=int(raw.get("penalty_order", 2)),
        )
    except (ValueError, KeyError) as exc:
        raise CliError(f"invalid model declaration: {exc}") from exc
    return spec, response


def _assemble_from_table(
    spec: ModelSpec, response: str, columns: dict[str, np.ndarray], standardize: bool
) -> tuple[DesignBundle, np.ndarray]:
    if response not in columns:
        raise CliError(f"response column {response!r} not found in the data file")
    y = columns[response]
    for name in spec.scalar_terms:
        if name not in columns:
            raise CliError(f"scalar term {name!r} not found in the data file")
    smooth_data = {}
    for term in spec.smooth_terms:
        if term.name not in columns:
            raise CliError(f"smoothed term {term.name!r} not found in the data file")
        smooth_data[term.name] = columns[term.name]
    functional_data = {
        term.name: _functional_block(columns, term.name, term.grid.size)
        for term in spec.functional_terms
    }
    bundle = assemble(
        spec,
        scalar_data={name: columns[name] for name in spec.scalar_terms} or None,
        smooth_data=smooth_data or None,
        functional_data=functional_data or None,
        standardize_scalars=standardize,
    )
    return center_smooth_blocks(bundle), y


def _fit(bundle: DesignBundle, y: np.ndarray, control: FitControl):
    if bundle.spec.family == "gaussian":
        return fit_gaussian(bundle, y, control)
    return fit_probit(bundle, y, control)


# ---------------------------------------------------------------------------
# record serialization


def _records_for_fit(fit, bundle: DesignBundle) -> list[dict]:
    records: list[dict] = [
        {
            "record": "meta",
            "family": fit.family,
            "n": bundle.n,
            "p_total": bundle.p_total,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "final_elbo": float(fit.elbo_trace[-1]),
            "diagnostic": fit.diagnostic,
        },
        {"record": "elbo_trace", "values": [float(v) for v in fit.elbo_trace]},
        {
            "record": "coefficients",
            "mu": [float(v) for v in fit.mu_theta],
            "sigma_diag": [float(v) for v in np.diag(fit.sigma_theta)],
            "blocks": {name: [sl.start, sl.stop] for name, sl in bundle.blocks.items()},
        },
        {
            "record": "scales",
            "b_sigma2": fit.b_sigma2,
            "b_omega": fit.b_omega,
            "b_eta": fit.b_eta,
        },
    ]
    for term in bundle.bases:
        grid = default_eval_grid(bundle, term)
        estimate, sd = extract_curve(fit, bundle, term, grid)
        records.append(
            {
                "record": "curve",
                "term": term,
                "grid": [float(v) for v in grid],
                "estimate": [float(v) for v in estimate],
                "sd": [float(v) for v in sd],
            }
        )
    return records


def write_records(records: list[dict], path: Path) -> None:
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_records(path: Path) -> list[dict]:
    with path.open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# commands


def cmd_fit(config: RunConfig) -> int:
    columns = load_table(config.data_path)
    spec, response = load_model(config.model_path, config.knots)
    bundle, y = _assemble_from_table(spec, response, columns, config.standardize)
    fit = _fit(bundle, y, config.control)
    if config.out_path is not None:
        write_records(_records_for_fit(fit, bundle), config.out_path)
    status = "converged" if fit.converged else "did NOT converge"
    print(
        f"{spec.family} model on n={bundle.n}: {status} after {fit.iterations} iterations "
        f"(final bound {fit.elbo_trace[-1]:.6f})"
    )
    return EXIT_OK if fit.converged else EXIT_NUMERIC


def cmd_test(config: RunConfig) -> int:
    columns = load_table(config.data_path)
    spec, response = load_model(config.model_path, config.knots)
    bundle, y = _assemble_from_table(spec, response, columns, config.standardize)
    penalized = list(bundle.bases)
    terms = config.terms or penalized
    for term in terms:
        if term not in penalized:
            raise CliError(f"term {term!r} is not a smoothed or functional term of the model")
    fit = _fit(bundle, y, config.control)
    results = [global_effect_test(fit, bundle, term, response=y) for term in terms]

    print(f"{'term':<16}{'statistic':>12}{'df':>8}{'p-value':>10}")
    for res in results:
        shown = f"{res.p_value:.3f}" if res.p_value >= 0.001 else "<0.001"
        print(f"{res.term:<16}{res.statistic / res.scale:>12.3f}{res.df:>8.2f}{shown:>10}")
    if config.out_path is not None:
        records = [
            {
                "record": "test",
                "term": res.term,
                "statistic": res.statistic,
                "scaled_statistic": res.statistic / res.scale,
                "scale": res.scale,
                "df": res.df,
                "p_value": res.p_value,
                "grid_size": res.grid_size,
            }
            for res in results
        ]
        write_records(records, config.out_path)
    return EXIT_OK


def _scenario_from_entry(entry: dict, index: int, config: RunConfig) -> SimScenario:
    entry = dict(entry)
    family = entry.pop("family")
    effect = entry.pop("effect")
    n = int(entry.pop("n"))
    t_len = entry.pop("t_len", None)
    t_len = int(t_len) if t_len is not None else None
    kind = "smooth" if effect.startswith("smooth") else "functional"
    knots = int(entry.pop("knots", 0)) or default_basis_size(family, kind, n, t_len)
    return SimScenario(
        family=family,
        effect=effect,
        n=n,
        xi_scale=float(entry.pop("xi_scale", 0.0)),
        knots=knots,
        replications=int(entry.pop("replications", 1000)),
        seed=int(entry.pop("seed", config.seed + index)),
        t_len=t_len,
        alpha_level=float(entry.pop("alpha_level", config.alpha)),
    )


def cmd_simulate(config: RunConfig) -> int:
    try:
        raw = json.loads(config.scenarios_path.read_text())
    except OSError as exc:
        raise CliError(f"cannot read scenario file {config.scenarios_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"scenario file is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise CliError("scenario file must contain a non-empty JSON list")
    try:
        scenarios = [_scenario_from_entry(entry, i, config) for i, entry in enumerate(raw)]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid scenario entry: {exc}") from exc

    header = [
        "family",
        "effect",
        "n",
        "t_len",
        "xi_scale",
        "knots",
        "replications",
        "seed",
        "alpha",
        "rejection_rate",
        "mc_stderr",
        "failures",
        "unstable",
    ]
    rows = []
    for sc in scenarios:
        report = run_scenario(sc, control=config.control)
        rows.append(
            [
                sc.family,
                sc.effect,
                sc.n,
                sc.t_len if sc.t_len is not None else "",
                f"{sc.xi_scale:g}",
                sc.knots,
                sc.replications,
                sc.seed,
                f"{sc.alpha_level:g}",
                f"{report.rejection_rate:.4f}",
                f"{report.mc_stderr:.4f}",
                report.failures,
                int(report.flagged_unstable),
            ]
        )
        print(
            f"{sc.family}/{sc.effect} n={sc.n} xi={sc.xi_scale:g} knots={sc.knots}: "
            f"rejection {report.rejection_rate:.3f} (se {report.mc_stderr:.3f}, "
            f"{report.failures} failures)"
        )
    if config.out_path is not None:
        lines = ["\t".join(header)]
        lines += ["\t".join(str(v) for v in row) for row in rows]
        config.out_path.write_text("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vbam",
        description="Variational additive models: fitting, global effect tests, simulation studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_data: bool) -> None:
        if with_data:
            p.add_argument("--data", required=True, type=Path, help="delimited data file")
            p.add_argument("--model", required=True, type=Path, help="JSON model declaration")
            p.add_argument("--knots", type=int, help="override basis size of every penalized term")
            p.add_argument(
                "--standardize-scalars",
                action="store_true",
                help="center and scale scalar covariates",
            )
        p.add_argument("--tol", type=float, default=1e-6, help="ELBO convergence tolerance")
        p.add_argument("--max-iter", type=int, default=500, help="iteration cap")
        p.add_argument("--out", type=Path, help="output file (JSONL for fit/test, TSV for simulate)")

    fit_p = sub.add_parser("fit", help="fit a model and write the fit artifact")
    add_common(fit_p, with_data=True)

    test_p = sub.add_parser("test", help="fit a model and test smoothed/functional terms")
    add_common(test_p, with_data=True)
    test_p.add_argument(
        "--term", action="append", default=[], help="term to test (repeatable; default: all)"
    )

    sim_p = sub.add_parser("simulate", help="run a scenario matrix and tabulate rejection rates")
    sim_p.add_argument("--scenarios", required=True, type=Path, help="JSON list of scenarios")
    sim_p.add_argument("--seed", type=int, default=0, help="base seed for scenarios without one")
    sim_p.add_argument("--alpha", type=float, default=0.05, help="test level for scenarios without one")
    add_common(sim_p, with_data=False)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        data_path=getattr(args, "data", None),
        model_path=getattr(args, "model", None),
        scenarios_path=getattr(args, "scenarios", None),
        out_path=args.out,
        terms=list(getattr(args, "term", [])),
        knots=getattr(args, "knots", None),
        control=FitControl(tol=args.tol, max_iter=args.max_iter),
        seed=getattr(args, "seed", 0),
        alpha=getattr(args, "alpha", 0.05),
        standardize=getattr(args, "standardize_scalars", False),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    handlers = {"fit": cmd_fit, "test": cmd_test, "simulate": cmd_simulate}
    try:
        return handlers[config.command](config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except VbamError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
