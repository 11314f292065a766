"""``nucqml`` command line: evolve, dataset, train, eval, scan, vqe, adapt.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence.
Settings come from built-in defaults, then ``--config FILE`` (flat
``key = value``; a previous run's manifest also works), then explicit flags.
Every run writes ``<main output>.manifest`` recording the merged settings and
the digests of its outputs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .dynamics import SectorSimulator, correlation_series, default_times, parse_mode, probe_state
from .learn import (
    DatasetError,
    MLPPhaseClassifier,
    MlpModel,
    build_dataset,
    generate_lattice,
    split_indices,
)
from .models import (
    AGASSI_TERM_NAMES,
    SCAN_LINES,
    AgassiParams,
    PhaseLabel,
    agassi_couplings,
    agassi_groups,
    agassi_unit_terms,
    build_agassi,
    build_lmg,
    default_cuts,
    label_phase,
    line_points,
)
from .validation import StratificationError
from .variational import (
    adapt_vqe,
    build_pool,
    exact_ground_energy,
    expectation,
    lmg_fock_ansatz,
    vqe_minimize,
)
from .dynamics import StateVector

log = logging.getLogger("nucqml")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3
# sectors above this many modes are simulated in the particle-number sector
_SECTOR_MODES = 8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _version() -> str:
    from . import __version__

    return __version__


# -- argument helpers -------------------------------------------------------------


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _range(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    return vals


def _mode(text: str) -> str:
    try:
        parse_mode(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _nonneg(text: str) -> float:
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _common(p: argparse.ArgumentParser, out_name: str) -> None:
    p.add_argument("--config", help="flat key = value file (or a run manifest)")
    p.add_argument("--out", default=None, help=f"output path (default $" + io.OUTPUT_DIR_ENV + f"/{out_name})")
    p.add_argument("--force", action="store_true", help="replace existing outputs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_pos_int, default=os.cpu_count() or 1)
    p.add_argument("-q", "--quiet", action="store_true")


def _model_flags(p: argparse.ArgumentParser, j_default: int = 2) -> None:
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--chi", type=_nonneg, default=0.0)
    p.add_argument("--sigma", type=_nonneg, default=0.0)
    p.add_argument("--lambda", dest="lam", type=_nonneg, default=0.0)
    p.add_argument("--j", type=_pos_int, default=j_default)


def _time_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-samples", type=_pos_int, default=64)
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--mode", type=_mode, default="exact", help="exact or trotter:<n_T>")
    p.add_argument("--pair", type=_int_list, default=(0, 1), help="0-based sites of C_z")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nucqml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("evolve", help="C_z time series of the probe state")
    _common(p, "evolve.csv")
    _model_flags(p)
    _time_flags(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("dataset", help="labelled C_z dataset over a parameter lattice")
    _common(p, "dataset.csv")
    p.add_argument("--points-per-axis", type=_pos_int, default=21)
    p.add_argument("--range", type=_range, default=(0.0, 2.0), help="lo,hi for every axis")
    p.add_argument("--chi-range", type=_range, default=None)
    p.add_argument("--sigma-range", type=_range, default=None)
    p.add_argument("--lambda-range", type=_range, default=None)
    p.add_argument("--points", default=None, help="CSV of epsilon,chi,sigma,lambda,j rows")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--j", type=_pos_int, default=2)
    _time_flags(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="fit the phase classifier")
    _common(p, "model.json")
    p.add_argument("--dataset", required=False, default=None)
    p.add_argument("--log", default=None, help="training log CSV (default <out>.log.csv)")
    p.add_argument("--hidden", type=_int_list, default=(128, 128))
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=_pos_int, default=32)
    p.add_argument("--epochs", type=_pos_int, default=200)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy and confusion matrix of a model")
    _common(p, "eval.txt")
    p.add_argument("--dataset", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--rows", choices=("all", "train", "test"), default="all")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scan", help="phase probabilities along a line of the parameter cube")
    _common(p, "scan.csv")
    p.add_argument("--model", default=None)
    p.add_argument("--line", choices=sorted(SCAN_LINES), default=None)
    p.add_argument("--axis", choices=("chi", "sigma", "lambda"), default="chi")
    p.add_argument("--chi", type=_nonneg, default=0.5)
    p.add_argument("--sigma", type=_nonneg, default=0.5)
    p.add_argument("--lambda", dest="lam", type=_nonneg, default=0.5)
    p.add_argument("--n-points", type=_pos_int, default=21)
    p.add_argument("--range", type=_range, default=(0.0, 2.0))
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--j", type=_pos_int, default=2)
    _time_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("vqe", help="single-parameter LMG ansatz VQE")
    _common(p, "vqe.txt")
    p.add_argument("--lmg", action="store_true", help="LMG Hamiltonian (the only VQE family)")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--chi", type=_nonneg, default=0.0)
    p.add_argument("--theta0", type=float, default=0.0)
    p.set_defaults(func=cmd_vqe)

    p = sub.add_parser("adapt", help="ADAPT-VQE on the two-level pairing model")
    _common(p, "adapt.txt")
    _model_flags(p, j_default=1)
    p.add_argument("--pool", choices=("one", "two", "both"), default="two")
    p.add_argument("--filter", choices=("number", "agassi"), default="number")
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--trace", default=None, help="convergence CSV (default <out>.trace.csv)")
    p.set_defaults(func=cmd_adapt)
    return parser


# -- config merging -----------------------------------------------------------------


def _config_argv(sub: argparse.ArgumentParser, entries: dict[str, str]) -> list[str]:
    """Translate config entries into flags placed ahead of the explicit ones."""
    by_dest = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_dest.setdefault(action.dest, (opt, action))
                by_dest.setdefault(opt[2:].replace("-", "_"), (opt, action))
    argv = []
    for key, value in entries.items():
        key = key.replace("-", "_")
        if key in ("config", "command"):
            continue
        if key not in by_dest:
            raise UsageError(f"unknown config key {key!r}")
        opt, action = by_dest[key]
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(opt)
            elif value.lower() not in ("0", "false", "no", "off", ""):
                raise UsageError(f"config key {key!r} expects true/false")
        elif value != "":
            argv.append(f"{opt}={value}")
    return argv


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        entries = io.read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        argv = [argv[0], *_config_argv(sub, entries), *argv[1:]]
        args = parser.parse_args(argv)
    return args


def _settings(args) -> dict:
    skip = {"func", "config", "command", "quiet", "force", "jobs"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _out(args, default_name: str) -> Path:
    return Path(args.out) if args.out else io.output_dir() / default_name


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def _echo(args, text: str) -> None:
    if not args.quiet:
        sys.stdout.write(text)


class _Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, args, main_output: Path):
        self.args = args
        self.main = main_output
        self.manifest = io.RunManifest(
            args.command, _settings(args), args.seed, _version(), started=_now()
        )
        self.outputs: list[Path] = []
        for path in (main_output, _sibling(main_output, ".manifest")):
            if path.exists() and not args.force:
                raise io.OutputExistsError(f"{path} exists (use --force to replace it)")

    def write(self, path: Path, text: str) -> Path:
        io.write_text(path, text, self.args.force)
        self.outputs.append(path)
        return path

    def finish(self) -> None:
        for p in self.outputs:
            self.manifest.record(p)
        self.manifest.finished = _now()
        io.write_text(_sibling(self.main, ".manifest"), self.manifest.text(), force=True)


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


# -- simulation helpers ------------------------------------------------------------


def _params(args) -> AgassiParams:
    try:
        return AgassiParams(args.epsilon, args.chi, args.sigma, args.lam, args.j)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _pair(args, n_modes: int) -> tuple[int, int]:
    if len(args.pair) != 2 or args.pair[0] == args.pair[1]:
        raise UsageError("--pair needs two distinct sites")
    if not all(0 <= s < n_modes for s in args.pair):
        raise UsageError(f"--pair sites must lie in [0, {n_modes})")
    return tuple(args.pair)


def _times(args) -> np.ndarray:
    if args.t_max <= 0:
        raise UsageError("--t-max must be positive")
    return default_times(args.n_samples, args.t_max)


def _series_values(p: AgassiParams, times, pair, mode) -> np.ndarray:
    if p.n_modes >= _SECTOR_MODES:
        units = agassi_unit_terms(p.j)
        sim = SectorSimulator([units[k] for k in AGASSI_TERM_NAMES], n_particles=2 * p.j)
        c = agassi_couplings(p)
        sub0 = sim.restrict(probe_state(p.n_modes))
        return sim.series([c[k] for k in AGASSI_TERM_NAMES], sub0, times, pair, mode)
    return correlation_series(agassi_groups(p), probe_state(p.n_modes), pair, times, mode).values


# -- commands -----------------------------------------------------------------------


def cmd_evolve(args) -> int:
    p = _params(args)
    times, pair = _times(args), _pair(args, p.n_modes)
    out = _out(args, "evolve.csv")
    run = _Run(args, out)
    values = _series_values(p, times, pair, args.mode)
    run.write(out, io.csv_text(("t", "cz"), zip(times, values)))
    run.finish()
    log.info("wrote %d samples to %s", times.size, out)
    return EXIT_OK


def _lattice(args) -> list[AgassiParams]:
    if args.points:
        return io.read_points_csv(args.points)
    ranges = [
        args.chi_range or args.range,
        args.sigma_range or args.range,
        args.lambda_range or args.range,
    ]
    if args.points_per_axis < 2:
        raise UsageError("--points-per-axis must be >= 2")
    try:
        return generate_lattice(ranges, args.points_per_axis, args.epsilon, args.j)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_dataset(args) -> int:
    lattice = _lattice(args)
    times = _times(args)
    pair = _pair(args, lattice[0].n_modes)
    out = _out(args, "dataset.csv")
    run = _Run(args, out)
    cuts_by_model = {}
    writer = io.AtomicWriter(out, args.force)
    try:
        writer.write(",".join(io.dataset_header(times.size)) + "\n")
        block = max(64, 16 * args.jobs)
        counts = {lab.name: 0 for lab in PhaseLabel}
        for start in range(0, len(lattice), block):
            chunk = lattice[start : start + block]
            key = (chunk[0].j, chunk[0].epsilon)
            if any((q.j, q.epsilon) != key for q in chunk):
                raise io.DataError("all points of a dataset must share j and epsilon")
            if key not in cuts_by_model:
                cuts_by_model[key] = dict(default_cuts(*key))
            samples = build_dataset(chunk, args.mode, times, pair, cuts_by_model[key], args.jobs)
            writer.write(io.dataset_rows_csv(samples))
            writer.flush()
            for s in samples:
                counts[s.label.name] += 1
            log.info("dataset: %d / %d points", min(start + block, len(lattice)), len(lattice))
    except BaseException:
        writer.abandon()
        raise
    writer.commit()
    run.outputs.append(out)
    run.finish()
    log.info("label marginals: %s", counts)
    return EXIT_OK


def _need(args, name: str) -> str:
    value = getattr(args, name)
    if not value:
        raise UsageError(f"--{name} is required")
    return value


def cmd_train(args) -> int:
    table = io.read_dataset(_need(args, "dataset"))
    if not 0.0 <= args.test_fraction < 1.0:
        raise UsageError("--test-fraction must lie in [0, 1)")
    out = _out(args, "model.json")
    log_path = Path(args.log) if args.log else _sibling(out, ".log.csv")
    run = _Run(args, out)
    est = MLPPhaseClassifier(
        hidden_layer_sizes=tuple(args.hidden),
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        test_fraction=args.test_fraction,
        optimizer=args.optimizer,
        random_state=args.seed,
    ).fit(table.series, table.labels)
    run.write(out, est.model_.to_json() + "\n")
    run.write(log_path, io.training_log_csv(est.history_))
    run.finish()
    _echo(args, f"best held-out accuracy: {est.best_test_accuracy_:.6f}\n")
    return EXIT_OK


def _load_model(path) -> MLPPhaseClassifier:
    path = Path(path)
    if not path.is_file():
        raise io.DataError(f"{path}: no such model file")
    try:
        return MLPPhaseClassifier.from_model(MlpModel.from_json(path.read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError) as exc:
        raise io.DataError(f"{path}: {exc}") from None


def evaluation_report(y_true, y_pred) -> str:
    names = [lab.name for lab in PhaseLabel]
    conf = np.zeros((len(names), len(names)), dtype=int)
    for t, p in zip(y_true, y_pred):
        conf[t, p] += 1
    lines = [f"rows: {len(y_true)}", f"overall_accuracy: {np.mean(y_true == y_pred):.6f}", "per_class_accuracy:"]
    for k, name in enumerate(names):
        n = conf[k].sum()
        acc = f"{conf[k, k] / n:.6f}" if n else "n/a"
        lines.append(f"  {name}: {acc} ({n} rows)")
    lines.append("confusion_matrix (rows true, columns predicted): " + " ".join(names))
    for k, name in enumerate(names):
        lines.append(f"  {name}: " + " ".join(str(c) for c in conf[k]))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    table = io.read_dataset(_need(args, "dataset"))
    est = _load_model(_need(args, "model"))
    if table.series.shape[1] != est.n_features_in_:
        raise io.DataError(
            f"dataset has {table.series.shape[1]} samples per series, model expects {est.n_features_in_}"
        )
    rows = np.arange(len(table))
    if args.rows != "all":
        cfg = est.model_.config
        tr, te = split_indices(len(table), cfg.get("test_fraction", 0.1), cfg.get("random_state", 0))
        rows = te if args.rows == "test" else tr
    pred = est.predict(table.series[rows])
    report = evaluation_report(table.labels[rows], pred)
    out = _out(args, "eval.txt")
    run = _Run(args, out)
    run.write(out, report)
    run.finish()
    _echo(args, report)
    return EXIT_OK


def cmd_scan(args) -> int:
    est = _load_model(_need(args, "model"))
    lo, hi = args.range
    values = np.linspace(lo, hi, args.n_points)
    if args.line:
        pts = line_points(args.line, values)
    else:
        axis = ("chi", "sigma", "lambda").index(args.axis)
        base = [args.chi, args.sigma, args.lam]
        pts = []
        for v in values:
            q = list(base)
            q[axis] = float(v)
            pts.append(tuple(q))
    times = _times(args)
    if times.size != est.n_features_in_:
        raise UsageError(f"model expects {est.n_features_in_} samples per series, --n-samples is {times.size}")
    params = [AgassiParams(args.epsilon, *q, args.j) for q in pts]
    pair = _pair(args, params[0].n_modes)
    X = np.array([_series_values(p, times, pair, args.mode) for p in params])
    probs = est.predict_proba(X)
    header = ["chi", "sigma", "lambda", "label", *(f"p_{lab.name}" for lab in PhaseLabel), "predicted"]
    rows = []
    for p, pr in zip(params, probs):
        true = int(label_phase(p))
        rows.append([p.chi, p.sigma, p.lam, str(true), *pr, str(int(np.argmax(pr)))])
    out = _out(args, "scan.csv")
    run = _Run(args, out)
    run.write(out, io.csv_text(header, rows))
    run.finish()
    return EXIT_OK


def _report(fields: list[tuple[str, object]]) -> str:
    lines = []
    for k, v in fields:
        lines.append(f"{k}: {io.fmt(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def cmd_vqe(args) -> int:
    if not args.lmg:
        raise UsageError("vqe supports the LMG ansatz only; pass --lmg")
    H = build_lmg(args.epsilon, args.chi)
    res = vqe_minimize(H, lambda t: lmg_fock_ansatz(t), args.theta0)
    exact = exact_ground_energy(H)
    rel = abs(res.energy - exact) / max(abs(exact), 1e-300)
    report = _report(
        [
            ("model", "lmg"),
            ("epsilon", float(args.epsilon)),
            ("chi", float(args.chi)),
            ("energy", res.energy),
            ("exact_energy", exact),
            ("relative_error", rel),
            ("theta", float(res.thetas[0])),
            ("iterations", res.iterations),
            ("converged", str(res.converged).lower()),
        ]
    )
    out = _out(args, "vqe.txt")
    run = _Run(args, out)
    run.write(out, report)
    run.finish()
    _echo(args, report)
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_adapt(args) -> int:
    p = _params(args)
    if p.n_modes > 8:
        raise UsageError("adapt is limited to j <= 2")
    if args.max_iters < 0 or args.grad_tol <= 0:
        raise UsageError("--max-iters must be >= 0 and --grad-tol > 0")
    H = build_agassi(p)
    n_half = 2 * p.j
    # half filling: the lower level occupied
    reference = StateVector.from_bits([1] * n_half + [0] * n_half)
    pool = build_pool(p.n_modes, args.filter, body=args.pool, j=p.j)
    res = adapt_vqe(H, pool, reference, args.max_iters, args.grad_tol)
    exact = exact_ground_energy(H, n_particles=n_half)
    rel = abs(res.energy - exact) / max(abs(exact), 1e-300)
    fields = [
        ("model", "agassi"),
        ("epsilon", p.epsilon),
        ("chi", p.chi),
        ("sigma", p.sigma),
        ("lambda", p.lam),
        ("j", p.j),
        ("pool", f"{args.pool}-body/{args.filter} ({len(pool)} generators)"),
        ("reference_energy", expectation(H, reference)),
        ("energy", res.energy),
        ("exact_energy", exact),
        ("exact_energy_all_sectors", exact_ground_energy(H)),
        ("relative_error", rel),
        ("iterations", res.iterations),
        ("converged", str(res.converged).lower()),
    ]
    for k, (label, energy) in enumerate(zip(res.selected, res.energy_history[1:]), start=1):
        fields.append((f"iter.{k}", f"{label} grad={io.fmt(res.gradient_history[k - 1])} energy={io.fmt(energy)}"))
    report = _report(fields)
    trace_rows = [
        (str(k), g, e) for k, (g, e) in enumerate(zip(res.gradient_history, res.energy_history))
    ]
    out = _out(args, "adapt.txt")
    trace = Path(args.trace) if args.trace else _sibling(out, ".trace.csv")
    run = _Run(args, out)
    run.write(out, report)
    run.write(trace, io.csv_text(("iter", "grad_max", "energy"), trace_rows))
    run.finish()
    _echo(args, report)
    return EXIT_OK if res.converged else EXIT_NOCONV


# -- entry point ------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except (UsageError, io.OutputExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataError, DatasetError, StratificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
