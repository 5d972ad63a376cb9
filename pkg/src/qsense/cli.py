"""Command-line front end: run a scenario and write CSV or JSON results.

Exit codes: 0 success, 1 computation error, 2 usage or domain error,
3 I/O error. ``QSENSE_THREADS`` caps sweep parallelism (0 = all cores).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass
from typing import Optional

from . import scenarios
from .errors import QSenseError
from .estimation import crb_saturation
from .fisher import bernoulli_model, cramer_rao_bound, fisher_information, poisson_model
from .fock import phase_family, qfi_pure_overlap, qfi_pure_variance
from .gaussian import Su11Config

COMMANDS = ("fisher", "qfi", "mzi", "noon-loss", "su11", "sweep", "mc")
SWEEP_COLUMNS = (
    "n_in",
    "gamma",
    "n_measurements",
    "delta_gamma_eq8",
    "delta_gamma_qfi",
    "delta_gamma_standard",
    "adv_db_power",
    "adv_db_amplitude",
)


@dataclass
class RunConfig:
    command: str
    parameters: dict
    output_path: Optional[str] = None
    format: str = "json"
    seed: int = 0
    gnuplot: bool = False


class UsageError(Exception):
    pass


def _probability(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be a positive integer")
    return value


def _non_negative(text):
    value = float(text)
    if not (value >= 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"{text} must be finite and >= 0")
    return value


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a comma-separated list")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--output", "-o", dest="output_path", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=1234)
    common.add_argument("--n-measurements", type=_positive_int, default=1)

    parser = argparse.ArgumentParser(prog="qsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fisher", parents=[common], help="classical Fisher information and bound")
    p.add_argument("--family", choices=("bernoulli", "poisson"), default="bernoulli")
    p.add_argument("--x", type=float, required=True)

    p = sub.add_parser("qfi", parents=[common], help="pure-state QFI by both routes")
    p.add_argument("--probe", choices=scenarios.PROBES, required=True)
    p.add_argument("--photons", type=_non_negative, required=True)

    p = sub.add_parser("mzi", parents=[common], help="Mach-Zehnder phase bound")
    p.add_argument("--probe", choices=scenarios.PROBES, required=True)
    p.add_argument("--photons", type=_non_negative, required=True)

    p = sub.add_parser("noon-loss", parents=[common], help="NOON state under photon loss")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--gamma", type=_probability, required=True)

    p = sub.add_parser("su11", parents=[common], help="SU(1,1) absorption precision")
    p.add_argument("--n-in", type=_non_negative, required=True)
    p.add_argument("--gamma", type=_probability, required=True)

    p = sub.add_parser("sweep", parents=[common], help="SU(1,1) sweep over n_in or gamma")
    p.add_argument("--axis", choices=("n-in", "gamma"), required=True)
    p.add_argument("--points", type=_float_list, help="comma-separated values (default grid if omitted)")
    p.add_argument("--n-in", type=_non_negative, default=10.0)
    p.add_argument("--gamma", type=_probability, default=0.05)
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to the CSV")

    p = sub.add_parser("mc", parents=[common], help="Monte-Carlo Cramer-Rao saturation")
    p.add_argument("--family", choices=("bernoulli", "poisson"), default="bernoulli")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--trials", type=_positive_int, default=500)
    return parser


def parse_args(argv) -> RunConfig:
    """Validate ``argv`` into a :class:`RunConfig`; usage errors exit with code 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    params = {
        k: v
        for k, v in vars(ns).items()
        if k not in ("command", "format", "output_path", "seed", "gnuplot")
    }
    if ns.command in ("su11",) and not 0.0 < ns.gamma < 1.0:
        parser.error("argument --gamma: must lie strictly inside (0, 1)")
    if ns.command == "su11" and ns.n_in <= 0:
        parser.error("argument --n-in: must be positive")
    if ns.command == "noon-loss" and ns.gamma >= 1.0:
        parser.error("argument --gamma: must be below 1")
    if ns.command == "sweep":
        points = ns.points
        axis = ns.axis.replace("-", "_")
        if points is not None:
            bad = [p for p in points if (axis == "gamma" and not 0 < p < 1) or (axis == "n_in" and p <= 0)]
            if bad or not points:
                parser.error(f"argument --points: values out of range for axis {ns.axis}: {bad}")
        if ns.gnuplot and (ns.output_path is None or ns.format != "csv"):
            parser.error("argument --gnuplot: requires --output and --format csv")
    if ns.command == "mc" and ns.trials < 100:
        parser.error("argument --trials: at least 100 trials are required")
    return RunConfig(
        command=ns.command,
        parameters=params,
        output_path=ns.output_path,
        format=ns.format,
        seed=ns.seed,
        gnuplot=getattr(ns, "gnuplot", False),
    )


def _family(name):
    return bernoulli_model() if name == "bernoulli" else poisson_model()


def _workers():
    raw = os.environ.get("QSENSE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return (os.cpu_count() or 1) if n == 0 else max(n, 1)


def compute(config: RunConfig):
    """Run the command and return a list of flat records."""
    p = config.parameters
    cmd = config.command
    if cmd == "fisher":
        model = _family(p["family"])
        f = fisher_information(model, p["x"])
        bound = cramer_rao_bound(f, p["n_measurements"])
        return [{"family": p["family"], "x": p["x"], "fisher": f,
                 "n_measurements": bound.n_measurements, "bound": bound.bound}]
    if cmd == "qfi":
        state, generator, mean = scenarios.build_phase_probe(p["probe"], p["photons"])
        family = phase_family(state.modes, state.cutoff, mode=0)
        return [{"probe": p["probe"], "mean_photons": mean,
                 "qfi_variance": qfi_pure_variance(state, generator),
                 "qfi_overlap": qfi_pure_overlap(family, state, 0.0)}]
    if cmd == "mzi":
        return [asdict(scenarios.run_mzi_phase(p["probe"], p["photons"], p["n_measurements"]))]
    if cmd == "noon-loss":
        report = scenarios.run_noon_loss(p["n"], p["gamma"])
        row = {"n": report.n_photons, "gamma": report.gamma,
               "initial_entangled": report.initial_entangled,
               "one_loss_branches": len(report.one_loss_branches),
               "one_loss_weight_gap": report.one_loss_weight_gap,
               "one_loss_all_product": report.one_loss_all_product,
               "entanglement_destroyed": report.entanglement_destroyed}
        for b in report.one_loss_branches:
            tag = "lost_mode0" if b.losses[0] else "lost_mode1"
            row[f"{tag}_probability"] = b.probability
            row[f"{tag}_schmidt2"] = b.schmidt[1] if len(b.schmidt) > 1 else 0.0
        return [row]
    if cmd == "su11":
        cfg = Su11Config(p["n_in"], p["gamma"], p["n_measurements"])
        return [scenarios.run_su11(cfg).as_row()]
    if cmd == "sweep":
        axis = p["axis"].replace("-", "_")
        fixed = Su11Config(p["n_in"] if axis != "n_in" else 1.0,
                           p["gamma"] if axis != "gamma" else 0.5,
                           p["n_measurements"])
        reports = scenarios.sweep(axis, p["points"], fixed, workers=_workers())
        return [r.as_row() for r in reports]
    if cmd == "mc":
        report = crb_saturation(_family(p["family"]), p["x"], p["n"], p["trials"], config.seed)
        return [{"family": p["family"], "x_true": report.x_true, "n_samples": report.n_samples,
                 "trials": report.trials, "seed": report.seed,
                 "empirical_mean": report.empirical_mean,
                 "empirical_variance": report.empirical_variance,
                 "crb_variance": report.crb_variance, "ratio": report.ratio,
                 "bias_in_standard_errors": report.bias / report.standard_error,
                 "boundary_hits": report.boundary_hits,
                 "non_asymptotic": report.non_asymptotic}]
    raise UsageError(f"unknown command {cmd!r}")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _format_csv_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if not math.isfinite(value) else f"{value:.12g}"
    return str(value)


def render(rows, fmt, columns=None):
    if fmt == "json":
        payload = [{k: _clean(v) for k, v in row.items()} for row in rows]
        return json.dumps(payload[0] if len(payload) == 1 else payload, indent=2) + "\n"
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_csv_value(row[c]) for c in columns])
    return buf.getvalue()


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qsense-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def gnuplot_script(csv_path):
    name = os.path.basename(csv_path)
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set logscale xy\n"
        "set xlabel 'n_in'\n"
        "set ylabel 'delta gamma'\n"
        f"plot '{name}' using 1:4 with linespoints, \\\n"
        f"     '{name}' using 1:5 with lines, \\\n"
        f"     '{name}' using 1:6 with lines\n"
    )


def execute(config: RunConfig, stdout=None) -> int:
    """Run ``config`` and write its output; return the process exit code."""
    stdout = stdout or sys.stdout
    try:
        rows = compute(config)
    except QSenseError as exc:
        print(f"qsense: error: {exc}", file=sys.stderr)
        return 1
    columns = SWEEP_COLUMNS if config.command in ("sweep", "su11") else None
    text = render(rows, config.format, columns)
    try:
        if config.output_path is None:
            stdout.write(text)
        else:
            write_atomic(config.output_path, text)
            if config.gnuplot:
                write_atomic(os.path.splitext(config.output_path)[0] + ".gp",
                             gnuplot_script(config.output_path))
    except OSError as exc:
        print(f"qsense: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    config = parse_args(sys.argv[1:] if argv is None else argv)
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
