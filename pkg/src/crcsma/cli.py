"""Command-line front end: ``roc``, ``solve``, ``simulate``, ``figure``, ``validate``.

Results go to CSV (``#`` metadata lines, a header row, then records) or, with
``--json``, to the same records as JSON. ``--config FILE`` reads ``key = value``
lines whose keys are long option names; flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
from pathlib import Path

from . import __version__
from .chain import MacParams, SpectrumParams, perceived_busy_prob
from .detection import (
    Fading,
    SensingParams,
    db_to_linear,
    default_threshold_range,
    pd_awgn,
    pf_awgn,
    roc_curve,
)
from .errors import (
    ContractError,
    DomainError,
    FixedPointError,
    NumericalInstabilityError,
    SolverError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .experiments import (
    SimSettings,
    figure_ids,
    parse_figure_id,
    pf_for_pd,
    preset,
    run_sweep,
    validate_all,
)
from .metrics import ThroughputMode, evaluate
from .simulator import SimConfig, binomial_se, simulate

OUTPUT_DIR_ENV = "CRCSMA_OUTPUT_DIR"
_RUNTIME_ERRORS = (ValidationError, DomainError, UnsupportedConfigurationError,
                   NumericalInstabilityError, SolverError, FixedPointError, ContractError)


class UsageError(Exception):
    pass


def _positive_int(text):
    value = _int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text):
    value = _int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _int(text):
    try:
        value = float(text) if any(ch in text for ch in ".eE") else int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"invalid integer value: {text!r}") from None
    if isinstance(value, float):
        if not value.is_integer():
            raise argparse.ArgumentTypeError(f"invalid integer value: {text!r}")
        value = int(value)
    return value


def _seed(text):
    value = _int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _finite(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"invalid float value: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return value


def _probability(text):
    value = _finite(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _positive(text):
    value = _finite(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


# --- output --------------------------------------------------------------

def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ";".join(_format(v) for v in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, tuple):
        return list(value)
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return value.value
    return value


def render(records, metadata, as_json=False) -> str:
    columns: list[str] = []
    for rec in records:
        for key in rec:
            if key not in columns:
                columns.append(key)
    if as_json:
        payload = {
            "metadata": {k: _jsonable(v) for k, v in metadata.items()},
            "columns": columns,
            "rows": [{c: _jsonable(rec.get(c)) for c in columns} for rec in records],
        }
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    for key, value in metadata.items():
        buf.write(f"# {key}={_format(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_format(rec.get(c, "")) for c in columns])
    return buf.getvalue()


def _emit(text, output):
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _metadata(command, args):
    meta = {"command": command, "version": __version__}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config", "output", "json", "command"):
            continue
        meta[key] = value
    return meta


# --- shared option groups -----------------------------------------------

def _add_output(p):
    p.add_argument("--output", "-o", help="write here instead of stdout "
                   f"(relative paths resolve under ${OUTPUT_DIR_ENV} when set)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--config", help="key = value file providing option defaults")


def _add_sensing(p, snr_default=-15.0):
    p.add_argument("--snr-db", type=_finite, default=snr_default, help="sensed SNR in dB")
    p.add_argument("--tau-ms", type=_positive, default=2.0, help="sensing time in ms")
    p.add_argument("--fs-mhz", type=_positive, default=6.0, help="sampling frequency in MHz")


def _add_mac_spectrum(p):
    p.add_argument("--n", type=_positive_int, help="number of stations (required)")
    p.add_argument("--m", type=_nonneg_int, help="maximum backoff stage (required)")
    p.add_argument("--w", type=_positive_int, help="minimum contention window (required)")
    p.add_argument("--c", type=_positive_int, default=1, help="sensed channels")
    p.add_argument("--alpha", type=_probability, help="PU activity (required)")
    p.add_argument("--pd", type=_probability, help="detection probability")
    p.add_argument("--pf", type=_probability,
                   help="false-alarm probability (default: tied to --pd at the sensing point)")
    p.add_argument("--eta", type=_finite,
                   help="AWGN threshold; derives --pd and --pf from the sensing options")
    _add_sensing(p)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _mac_spectrum_from(args):
    _require(args, "n", "m", "w", "alpha")
    fs = args.fs_mhz * 1e6
    tau_s = args.tau_ms * 1e-3
    snr = db_to_linear(args.snr_db)
    if args.eta is not None:
        if args.pd is not None:
            raise UsageError("give either --pd or --eta, not both")
        sensing = SensingParams(snr=snr, threshold=args.eta, sensing_time=tau_s,
                                sampling_freq=fs)
        p_d, p_f = pd_awgn(sensing), pf_awgn(sensing)
    else:
        _require(args, "pd")
        p_d = args.pd
        p_f = args.pf if args.pf is not None else pf_for_pd(p_d, snr, tau_s * fs)
    mac = MacParams(n=args.n, m=args.m, w=args.w)
    spectrum = SpectrumParams(c=args.c, alpha=args.alpha, p_d=p_d, p_f=p_f)
    return mac, spectrum


# --- subcommands ---------------------------------------------------------

def cmd_roc(args) -> int:
    fading = Fading(args.fading)
    fs = args.fs_mhz * 1e6
    tau_s = args.samples / fs if args.samples is not None else args.tau_ms * 1e-3
    sensing = SensingParams(snr=db_to_linear(args.snr_db), threshold=0.0, sensing_time=tau_s,
                            sampling_freq=fs, noise_variance=args.noise_var,
                            rayleigh_beta=args.beta, rayleigh_sigma2=args.sigma2,
                            fading=fading)
    lo, hi = default_threshold_range(sensing)
    eta_min = lo if args.eta_min is None else args.eta_min
    eta_max = hi if args.eta_max is None else args.eta_max
    if args.points == 1 and args.eta_min is None:
        eta_min = sensing.noise_variance if fading is Fading.AWGN else lo
    points = roc_curve(sensing, eta_min, eta_max, args.points)
    records = [{"eta": pt.eta, "p_f": pt.p_f, "p_md": pt.p_md} for pt in points]
    meta = _metadata("roc", args)
    meta.update(samples_n=sensing.samples, eta_min=eta_min, eta_max=eta_max)
    _emit(render(records, meta, args.json), args.output)
    return 0


def cmd_solve(args) -> int:
    mac, spectrum = _mac_spectrum_from(args)
    metrics = evaluate(mac, spectrum, rho=args.rho, mode=args.mode)
    record = {
        "n": mac.n, "m": mac.m, "w": mac.w, "c": spectrum.c, "alpha": spectrum.alpha,
        "p_d": spectrum.p_d, "p_f": spectrum.p_f, "q": perceived_busy_prob(spectrum),
        "tau": metrics.tau, "p_c": metrics.p_c, "p_c_oneshot": metrics.p_c_oneshot,
        "p_tr": metrics.p_tr, "p_fr": metrics.p_fr, "p_coll_slot": metrics.p_coll_slot,
        "throughput": metrics.throughput, "mode": metrics.mode, "rho": metrics.rho,
        "iterations": metrics.iterations, "residual": metrics.residual,
    }
    _emit(render([record], _metadata("solve", args), args.json), args.output)
    return 0


def cmd_simulate(args) -> int:
    mac, spectrum = _mac_spectrum_from(args)
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed={args.seed}", file=sys.stderr)
    config = SimConfig(mac, spectrum, slots=args.slots, seed=args.seed,
                       warmup_slots=args.warmup, shared_pu=args.pu_view == "shared")
    stats = simulate(config)
    p_c = stats.collisions / stats.attempts if stats.attempts else float("nan")
    tau = stats.attempt_rate
    s = stats.successes / stats.measured_slots
    record = {
        "n": mac.n, "m": mac.m, "w": mac.w, "c": spectrum.c, "alpha": spectrum.alpha,
        "p_d": spectrum.p_d, "p_f": spectrum.p_f,
        "slots": config.slots, "warmup_slots": config.warmup_slots, "seed": config.seed,
        "attempts": stats.attempts, "successes": stats.successes,
        "collisions": stats.collisions, "idle_slots": stats.idle_slots,
        "busy_blocked_slots": stats.busy_blocked_slots, "measured_slots": stats.measured_slots,
        "pu_overlaps": stats.pu_overlaps, "pu_occupancy": stats.pu_occupancy,
        "p_c": p_c, "p_c_se": binomial_se(p_c, stats.attempts) if stats.attempts else float("nan"),
        "tau": tau, "tau_se": binomial_se(tau, stats.measured_slots * mac.n),
        "throughput": s, "throughput_se": binomial_se(s, stats.measured_slots),
        "per_station_attempts": stats.per_station_attempts,
    }
    _emit(render([record], _metadata("simulate", args), args.json), args.output)
    return 0


def _parse_overrides(items):
    overrides = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        values = []
        for token in raw.split(","):
            token = token.strip()
            try:
                values.append(int(token))
            except ValueError:
                try:
                    values.append(float(token))
                except ValueError:
                    values.append(token)
        overrides[key] = values if len(values) > 1 else values[0]
    return overrides


def _sim_settings(args):
    return SimSettings(slots=args.slots, seed=args.seed, warmup_slots=args.warmup,
                       shared_pu=args.pu_view == "shared")


def cmd_figure(args) -> int:
    try:
        fid = parse_figure_id(args.figure_id)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    overrides = _parse_overrides(args.set)
    with_sim = False if (args.no_sim or fid.is_roc) else None
    spec = preset(fid, with_simulation=with_sim, **overrides)
    if spec.with_simulation:
        spec = preset(fid, with_simulation=True, sim=_sim_settings(args), **overrides)
    result = run_sweep(spec, jobs=args.jobs)
    records = result.records()
    status = 0 if not result.failed_rows else 1
    if args.tolerance is not None and spec.with_simulation:
        for rec in records:
            ok = rec.get("delta_p_c", math.nan) <= args.tolerance
            rec["passed"] = ok
            if not ok:
                status = 1
    meta = _metadata("figure", args)
    meta["figure"] = fid.value
    _emit(render(records, meta, args.json), args.output)
    return status


def cmd_validate(args) -> int:
    figures = [parse_figure_id(f) for f in args.figures.split(",")]
    overrides = _parse_overrides(args.set)
    metrics = tuple(m.strip() for m in args.metrics.split(","))
    report = validate_all(args.tolerance, sim=_sim_settings(args), figures=figures,
                          metrics=metrics, jobs=args.jobs, **overrides)
    records = []
    for fid, row, rep in report.checks:
        rec = {"figure": fid.value}
        for key in ("p_d", "m", "w", "c", "alpha", "n"):
            rec[key] = row.get(key, "")
        if rep is None:
            rec["status"] = row.get("status", "error")
            rec["passed"] = False
            records.append(rec)
            continue
        for entry in rep.entries:
            rec[f"{entry.name}_analytic"] = entry.analytic
            rec[f"{entry.name}_sim"] = entry.empirical
            rec[f"{entry.name}_se"] = entry.std_error
            rec[f"{entry.name}_delta"] = entry.delta
        rec["status"] = "ok"
        rec["passed"] = rep.passed
        records.append(rec)
    meta = _metadata("validate", args)
    meta["passed"] = report.passed
    _emit(render(records, meta, args.json), args.output)
    failures = len(report.failures)
    print(f"validate: {len(report.checks) - failures}/{len(report.checks)} comparisons within "
          f"{args.tolerance}", file=sys.stderr)
    return 0 if report.passed else 1


# --- parser --------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="crcsma", allow_abbrev=False,
        description="Cross-layer spectrum sensing / CSMA/CA analysis and simulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("roc", allow_abbrev=False, help="complementary ROC curve")
    p.add_argument("--fading", choices=[f.value for f in Fading], default="awgn")
    _add_sensing(p)
    p.add_argument("--samples", type=_positive_int,
                   help="sample count N (overrides --tau-ms)")
    p.add_argument("--points", type=_positive_int, default=100)
    p.add_argument("--eta-min", type=_finite)
    p.add_argument("--eta-max", type=_finite)
    p.add_argument("--noise-var", type=_positive, default=1.0)
    p.add_argument("--beta", type=_positive, default=2.0)
    p.add_argument("--sigma2", type=_positive)
    _add_output(p)
    p.set_defaults(func=cmd_roc)
    subs["roc"] = p

    p = sub.add_parser("solve", allow_abbrev=False, help="analytic fixed-point solution")
    _add_mac_spectrum(p)
    p.add_argument("--mode", choices=[m.value for m in ThroughputMode], default="eq20")
    p.add_argument("--rho", type=_positive, default=1.0)
    _add_output(p)
    p.set_defaults(func=cmd_solve)
    subs["solve"] = p

    p = sub.add_parser("simulate", allow_abbrev=False, help="Monte Carlo slot simulation")
    _add_mac_spectrum(p)
    _add_sim_options(p)
    _add_output(p)
    p.set_defaults(func=cmd_simulate, seed=None)
    subs["simulate"] = p

    p = sub.add_parser("figure", allow_abbrev=False, help="reproduce a figure sweep",
                       description=f"figure ids: {', '.join(figure_ids())}")
    p.add_argument("figure_id")
    p.add_argument("--no-sim", action="store_true", help="analytic columns only")
    p.add_argument("--tolerance", type=_finite,
                   help="fail when any |p_c analytic - p_c sim| exceeds this")
    p.add_argument("--set", action="append", metavar="KEY=VALUE[,VALUE...]",
                   help="override a fixed parameter or a varied grid")
    p.add_argument("--jobs", type=_positive_int, default=1)
    _add_sim_options(p)
    _add_output(p)
    p.set_defaults(func=cmd_figure)
    subs["figure"] = p

    p = sub.add_parser("validate", allow_abbrev=False, help="analytic vs simulation over the p_c presets")
    p.add_argument("--tolerance", type=_finite, default=0.02)
    p.add_argument("--figures", default="fig5,fig6,fig7")
    p.add_argument("--metrics", default="p_c", help="comma list from p_c,tau,throughput")
    p.add_argument("--set", action="append", metavar="KEY=VALUE[,VALUE...]")
    p.add_argument("--jobs", type=_positive_int, default=1)
    _add_sim_options(p)
    _add_output(p)
    p.set_defaults(func=cmd_validate)
    subs["validate"] = p
    return parser, subs


def _add_sim_options(p):
    p.add_argument("--slots", type=_positive_int, default=1_000_000)
    p.add_argument("--warmup", type=_nonneg_int,
                   help="discarded slots (default min(10000, slots/10))")
    p.add_argument("--seed", type=_seed, default=SimSettings().seed)
    p.add_argument("--pu-view", choices=("shared", "local"), default="shared",
                   help="one PU ground truth for all stations, or one per station")


def load_config(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(subparser, argv):
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = load_config(known.config)
    dests = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in values.items():
        action = dests.get(key)
        if action is None:
            raise UsageError(f"{known.config}: unknown option {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            # argparse converts string defaults through the option's type
            defaults[key] = value
    subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        if argv and argv[0] in subs:
            _apply_config(subs[argv[0]], argv[1:])
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.error(str(exc))
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")
    try:
        return args.func(args)
    except UsageError as exc:
        subs[args.command].error(str(exc))
    except _RUNTIME_ERRORS as exc:
        print(f"crcsma {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        residual = getattr(exc, "residual", None)
        if residual is not None:
            print(f"residual={residual!r}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
