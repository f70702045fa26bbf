"""Command-line front end: CSV in, coefficient table out, optional JSON."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from ivqr.estimate import DEFAULT_SEED, fit
from ivqr.exceptions import EstimationError
from ivqr.model import build_problem

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


@dataclass
class CliConfig:
    data: str
    y: str
    endog: list[str]
    iv: list[str]
    quantile: float
    exog: list[str] = field(default_factory=list)
    weight: Optional[str] = None
    bandwidth: Optional[float] = None
    level: float = 95.0
    reps: int = 0
    seed: int = DEFAULT_SEED
    noconstant: bool = False
    nodots: bool = False
    log_iterations: bool = False
    initial: Optional[list[float]] = None
    json_path: Optional[str] = None

    def __post_init__(self):
        if not self.endog or not self.iv:
            raise ValueError(
                "at least one endogenous regressor and one excluded instrument are "
                "required (--endog and --iv)"
            )
        if not 0.0 < self.level < 100.0:
            raise ValueError(f"--level must lie strictly between 0 and 100, got {self.level}")
        if self.reps < 0:
            raise ValueError("--reps cannot be negative")
        if self.bandwidth is not None and (not np.isfinite(self.bandwidth) or self.bandwidth < 0):
            raise ValueError("--bandwidth must be a finite nonnegative number")
        overlap = set(self.exog) & set(self.endog)
        if overlap:
            raise ValueError(f"columns listed as both exogenous and endogenous: {sorted(overlap)}")
        bad_iv = set(self.iv) & set(self.endog)
        if bad_iv:
            raise ValueError(
                f"columns listed as both endogenous and instrument: {sorted(bad_iv)}"
            )
        # exogenous regressors instrument themselves, so listing one under
        # --iv as well is redundant but harmless
        self.iv = [c for c in self.iv if c not in set(self.exog)]
        if not self.iv:
            raise ValueError("every instrument duplicates an exogenous regressor")


def _comma_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",")]
    return [t for t in items if t]


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in _comma_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {exc}")


def parse_args(argv) -> CliConfig:
    parser = argparse.ArgumentParser(
        prog="ivqr",
        description="Instrumental-variables quantile regression via smoothed estimating equations.",
    )
    parser.add_argument("--data", required=True, help="input CSV file with a header row")
    parser.add_argument("--y", required=True, help="dependent-variable column")
    parser.add_argument("--exog", type=_comma_list, default=[], help="comma-separated exogenous regressor columns")
    parser.add_argument("--endog", type=_comma_list, default=[], help="comma-separated endogenous regressor columns")
    parser.add_argument("--iv", type=_comma_list, default=[], help="comma-separated excluded instrument columns")
    parser.add_argument("--weight", default=None, help="observation-weight column")
    parser.add_argument("--quantile", type=float, required=True,
                        help="quantile, either in (0,1) or as a percentile in [1,100)")
    parser.add_argument("--bandwidth", type=float, default=None,
                        help="manual smoothing bandwidth; 0 requests the smallest feasible one")
    parser.add_argument("--level", type=float, default=95.0, help="confidence level in percent")
    parser.add_argument("--reps", type=int, default=0,
                        help="Bayesian-bootstrap replications (0 = analytic standard errors)")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="bootstrap RNG seed")
    parser.add_argument("--noconstant", action="store_true", help="suppress the intercept")
    parser.add_argument("--nodots", action="store_true", help="suppress bootstrap progress dots")
    parser.add_argument("--log-iterations", action="store_true",
                        help="print one solver line per Newton step to stderr")
    parser.add_argument("--initial", type=_comma_floats, default=None,
                        help="comma-separated starting values for the coefficients")
    parser.add_argument("--json", dest="json_path", default=None,
                        help="write results as JSON to this path")
    ns = parser.parse_args(argv)
    return CliConfig(
        data=ns.data,
        y=ns.y,
        exog=ns.exog,
        endog=ns.endog,
        iv=ns.iv,
        weight=ns.weight,
        quantile=ns.quantile,
        bandwidth=ns.bandwidth,
        level=ns.level,
        reps=ns.reps,
        seed=ns.seed,
        noconstant=ns.noconstant,
        nodots=ns.nodots,
        log_iterations=ns.log_iterations,
        initial=ns.initial,
        json_path=ns.json_path,
    )


def ingest_csv(config: CliConfig):
    """Read the referenced columns; empty cells mark missing values.

    Returns (problem, coefficient names, number of dropped rows).  Rows with
    any missing cell among the referenced columns are dropped listwise by
    the problem builder; unparseable cells raise with their row and column.
    """
    cols = [config.y] + config.endog + config.exog + config.iv
    if config.weight:
        cols.append(config.weight)
    with open(config.data, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{config.data} is empty")
        header = [h.strip() for h in header]
        missing = [c for c in dict.fromkeys(cols) if c not in header]
        if missing:
            raise ValueError(f"columns not found in {config.data}: {missing}")
        idx = {c: header.index(c) for c in dict.fromkeys(cols)}
        parsed = {c: [] for c in idx}
        for i, row in enumerate(reader, start=2):  # line 1 is the header
            if not row or all(not cell.strip() for cell in row):
                continue
            for c, j in idx.items():
                cell = row[j].strip() if j < len(row) else ""
                if cell == "":
                    parsed[c].append(np.nan)
                    continue
                try:
                    parsed[c].append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"unparseable value {cell!r} at line {i}, column {c!r} of {config.data}"
                    )
    if not parsed[config.y]:
        raise ValueError(f"{config.data} has a header but no observations")
    arrays = {c: np.asarray(v, dtype=float) for c, v in parsed.items()}
    used = np.column_stack([arrays[c] for c in idx])
    n_dropped = int(np.isnan(used).any(axis=1).sum())
    stack = lambda names: np.column_stack([arrays[c] for c in names]) if names else None
    prob = build_problem(
        arrays[config.y],
        raw_exog=stack(config.exog),
        raw_endog=stack(config.endog),
        raw_instr=stack(config.iv),
        weights=arrays[config.weight] if config.weight else None,
        quantile=config.quantile,
        add_constant=not config.noconstant,
    )
    names = list(config.endog) + list(config.exog)
    if not config.noconstant:
        names.append("_cons")
    return prob, names, n_dropped


def _make_progress(out):
    """Bootstrap progress dots, fifty per line with a running count."""

    def dot(r):
        out.write(".")
        if (r + 1) % 50 == 0:
            out.write(f"    {r + 1}\n")
        out.flush()

    return dot


def render_table(result, tau, names, out):
    level_pct = result.level * 100.0
    out.write(
        f"smoothed IV quantile regression        quantile = {tau:.4g}        obs = {result.n_obs}\n"
    )
    out.write(
        f"bandwidth used = {result.bandwidth.h_used:.6g} "
        f"(requested {result.bandwidth.h_requested:.6g})\n"
    )
    vce = "Robust" if result.vcov_kind == "analytic" else "Bootstrap"
    out.write(f"vce: {vce}\n")
    if result.bandwidth.escalated_past_max:
        out.write(
            "warning: bandwidth escalated above the largest plug-in candidate "
            f"({result.bandwidth.h_used:.6g} > {result.bandwidth.h_max:.6g}); "
            "instruments may be weak - inspect the first stage\n"
        )
    out.write("\n")
    name_w = max(12, max(len(n) for n in names) + 1)
    out.write(
        f"{'':<{name_w}}{'coef':>12}{'std err':>12}{'z':>9}{'P>|z|':>9}"
        f"{f'[{level_pct:g}% conf. int.]':>26}\n"
    )
    out.write("-" * (name_w + 68) + "\n")
    for j, name in enumerate(names):
        b = result.beta[j]
        s = result.se[j]
        z = b / s if s > 0 else np.inf * np.sign(b)
        pval = 2.0 * (1.0 - norm.cdf(abs(z)))
        out.write(
            f"{name:<{name_w}}{b:>12.6g}{s:>12.6g}{z:>9.2f}{pval:>9.3f}"
            f"{result.ci[j, 0]:>13.6g}{result.ci[j, 1]:>13.6g}\n"
        )


def results_json(result, tau, names, config: CliConfig) -> dict:
    """JSON document mirroring the stored results (full float precision)."""
    bw = result.bandwidth
    return {
        "b": [float(b) for b in result.beta],
        "V": [[float(v) for v in row] for row in result.cov],
        "se": [float(s) for s in result.se],
        "ci": [[float(result.ci[j, 0]), float(result.ci[j, 1])] for j in range(len(names))],
        "names": names,
        "bwidth": float(bw.h_used),
        "bwidth_req": float(bw.h_requested),
        "bwidth_max": float(bw.h_max) if bw.h_max is not None else None,
        "N": int(result.n_obs),
        "reps": int(config.reps),
        "q": float(tau),
        "level": float(config.level),
        "vcetype": "Robust" if result.vcov_kind == "analytic" else "Bootstrap",
        "seed": int(config.seed),
    }


def run_estimation(config: CliConfig, out=None, err=None):
    """Full pipeline: ingest, estimate, render, optionally dump JSON."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    prob, names, n_dropped = ingest_csv(config)
    if n_dropped:
        out.write(f"note: dropped {n_dropped} row(s) with missing values\n")
    if config.initial is not None and len(config.initial) != prob.p:
        raise ValueError(
            f"--initial supplies {len(config.initial)} values but the model has {prob.p} coefficients"
        )
    log = (lambda line: err.write(line + "\n")) if config.log_iterations else None
    progress = None
    if config.reps > 0 and not config.nodots:
        progress = _make_progress(out)
    result = fit(
        prob,
        bandwidth=config.bandwidth,
        level=config.level / 100.0,
        reps=config.reps,
        seed=config.seed,
        beta_init=config.initial,
        iteration_log=log,
        progress=progress,
    )
    if progress is not None and config.reps % 50 != 0:
        out.write("\n")
    render_table(result, prob.tau, names, out)
    if config.json_path:
        doc = results_json(result, prob.tau, names, config)
        with open(config.json_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return result


def main(argv=None) -> int:
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        # argparse already printed a usage message
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    try:
        run_estimation(config)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except EstimationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
