"""Parameter sweeps for the ROC, collision-probability and throughput figures.

A sweep is the cross product of its ``varied`` entries, first entry outermost.
An entry whose name is a tuple of parameter names varies those parameters
together (its grid holds tuples), e.g. ``(("m", "w"), [(3, 32), (3, 64)])``.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from .chain import MacParams, SpectrumParams
from .detection import (
    Fading,
    SensingParams,
    db_to_linear,
    default_threshold_range,
    pf_from_pd,
    roc_curve,
)
from .errors import ValidationError
from .metrics import ThroughputMode, evaluate
from .simulator import SimConfig, compare, simulate

__all__ = [
    "FigureId",
    "SimSettings",
    "SweepSpec",
    "SweepResult",
    "ValidationReport",
    "PRESETS",
    "preset",
    "figure_ids",
    "pf_for_pd",
    "run_sweep",
    "validate_all",
    "trend_checks",
]

# Operating point used throughout the results: -15 dB, 2 ms, 6 MHz.
SNR_DB = -15.0
SENSING_TIME = 2e-3
SAMPLING_FREQ = 6e6
N_GRID = tuple(range(2, 11))
PD_GRID = tuple(round(0.1 * j, 1) for j in range(1, 11))
THROUGHPUT_N = (2, 5, 10)

_SEED_STRIDE = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class FigureId(str, enum.Enum):
    ROC_AWGN = "fig1"
    ROC_RAYLEIGH = "fig2"
    PC_VS_N_W = "fig5"
    PC_VS_N_M = "fig6"
    PC_VS_N_ALPHA_C = "fig7"
    S_VS_PD_W = "fig8"
    S_VS_PD_M = "fig9"
    S_VS_PD_C = "fig10"

    @property
    def is_roc(self) -> bool:
        return self in (FigureId.ROC_AWGN, FigureId.ROC_RAYLEIGH)


_ALIASES = {
    "roc_awgn": FigureId.ROC_AWGN,
    "roc_rayleigh": FigureId.ROC_RAYLEIGH,
    "pc_vs_n_w": FigureId.PC_VS_N_W,
    "pc_vs_n_m": FigureId.PC_VS_N_M,
    "pc_vs_n_alpha_c": FigureId.PC_VS_N_ALPHA_C,
    "s_vs_pd_w": FigureId.S_VS_PD_W,
    "s_vs_pd_m": FigureId.S_VS_PD_M,
    "s_vs_pd_c": FigureId.S_VS_PD_C,
}


def figure_ids() -> list[str]:
    return [f.value for f in FigureId]


def parse_figure_id(name: str) -> FigureId:
    key = name.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return FigureId(key)
    except ValueError:
        raise ValidationError(
            f"unknown figure id {name!r}; valid ids: {', '.join(figure_ids())}") from None


@dataclass(frozen=True)
class SimSettings:
    slots: int = 1_000_000
    seed: int = 20121001
    warmup_slots: int | None = None
    shared_pu: bool = True


@dataclass(frozen=True)
class SweepSpec:
    figure_id: FigureId
    fixed: dict[str, Any]
    varied: tuple[tuple[Any, tuple], ...]
    with_simulation: bool = False
    sim: SimSettings | None = None

    def __post_init__(self):
        object.__setattr__(self, "figure_id", FigureId(self.figure_id))
        names = list(self.fixed)
        varied = []
        for key, grid in self.varied:
            grid = tuple(grid)
            if not grid:
                raise ValidationError(f"grid for {key!r} is empty")
            keys = key if isinstance(key, tuple) else (key,)
            if isinstance(key, tuple) and any(len(v) != len(keys) for v in grid):
                raise ValidationError(f"grid values for {key!r} must be {len(keys)}-tuples")
            names.extend(keys)
            varied.append((key, grid))
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValidationError(f"parameters named more than once: {sorted(dupes)}")
        object.__setattr__(self, "varied", tuple(varied))
        if self.with_simulation and self.sim is None:
            object.__setattr__(self, "sim", SimSettings())

    def parameter_names(self) -> list[str]:
        names = []
        for key, _ in self.varied:
            names.extend(key if isinstance(key, tuple) else (key,))
        return names

    def grid_points(self) -> list[dict[str, Any]]:
        points = []
        for combo in itertools.product(*(grid for _, grid in self.varied)):
            point = {}
            for (key, _), value in zip(self.varied, combo):
                if isinstance(key, tuple):
                    point.update(zip(key, value))
                else:
                    point[key] = value
            points.append(point)
        return points

    def with_overrides(self, **overrides) -> "SweepSpec":
        """Replace fixed values or whole varied grids by parameter name."""
        fixed = dict(self.fixed)
        varied = list(self.varied)
        for name, value in overrides.items():
            values = tuple(value) if isinstance(value, (list, tuple)) else (value,)
            for j, (key, grid) in enumerate(varied):
                if key == name:
                    varied[j] = (key, values)
                    break
                if isinstance(key, tuple) and name in key:
                    # substitute one member of a zipped group, keeping first-seen order
                    pos = key.index(name)
                    combos = [combo[:pos] + (v,) + combo[pos + 1:] for combo in grid for v in values]
                    varied[j] = (key, tuple(dict.fromkeys(combos)))
                    break
            else:
                fixed[name] = value
        return SweepSpec(self.figure_id, fixed, tuple(varied), self.with_simulation, self.sim)


def pf_for_pd(p_d: float, snr: float, time_bandwidth: float) -> float:
    """False-alarm probability tied to ``p_d``, extended to its limits at 0 and 1."""
    if p_d >= 1.0:
        return 1.0
    if p_d <= 0.0:
        return 0.0
    return pf_from_pd(p_d, snr, time_bandwidth)


_SENSING_DEFAULTS = {"snr_db": SNR_DB, "sensing_time": SENSING_TIME,
                     "sampling_freq": SAMPLING_FREQ}


def _mac_spectrum(params: dict[str, Any]) -> tuple[MacParams, SpectrumParams]:
    p = {**_SENSING_DEFAULTS, **params}
    p_d = float(p["p_d"])
    if p.get("p_f") is None:
        p_f = pf_for_pd(p_d, db_to_linear(p["snr_db"]), p["sensing_time"] * p["sampling_freq"])
    else:
        p_f = float(p["p_f"])
    mac = MacParams(n=int(p["n"]), m=int(p["m"]), w=int(p["w"]))
    spectrum = SpectrumParams(c=int(p.get("c", 1)), alpha=float(p["alpha"]), p_d=p_d, p_f=p_f)
    return mac, spectrum


def _sensing(params: dict[str, Any]) -> SensingParams:
    p = {**_SENSING_DEFAULTS, **params}
    fs = p["sampling_freq"]
    sensing_time = p["samples"] / fs if "samples" in p else p["sensing_time"]
    return SensingParams(
        snr=db_to_linear(p["snr_db"]),
        threshold=0.0,
        sensing_time=sensing_time,
        sampling_freq=fs,
        noise_variance=p.get("noise_variance", 1.0),
        rayleigh_beta=p.get("beta", 2.0),
        rayleigh_sigma2=p.get("sigma2"),
        fading=Fading(p.get("fading", "awgn")),
    )


def _seed_for(base: int, index: int) -> int:
    return (base + index * _SEED_STRIDE) & _MASK64


def _analytic_row(point: dict[str, Any], spec: SweepSpec, index: int) -> list[dict[str, Any]]:
    params = {**spec.fixed, **point}
    mac, spectrum = _mac_spectrum(params)
    metrics = evaluate(mac, spectrum, rho=params.get("rho", 1.0),
                       mode=params.get("mode", ThroughputMode.EQ20))
    row = {
        **point,
        **spec.fixed,
        "p_f": spectrum.p_f,
        "tau": metrics.tau,
        "p_c": metrics.p_c,
        "p_c_oneshot": metrics.p_c_oneshot,
        "p_tr": metrics.p_tr,
        "p_fr": metrics.p_fr,
        "p_coll_slot": metrics.p_coll_slot,
        "throughput": metrics.throughput,
        "iterations": metrics.iterations,
        "residual": metrics.residual,
    }
    if spec.with_simulation:
        sim = spec.sim
        config = SimConfig(mac, spectrum, slots=sim.slots, seed=_seed_for(sim.seed, index),
                           warmup_slots=sim.warmup_slots, shared_pu=sim.shared_pu)
        stats = simulate(config)
        report = compare(metrics, stats, tolerance=math.inf)
        row.update({
            "sim_seed": config.seed,
            "sim_attempts": stats.attempts,
            "sim_p_c": report["p_c"].empirical,
            "sim_p_c_se": report["p_c"].std_error,
            "sim_tau": report["tau"].empirical,
            "sim_tau_se": report["tau"].std_error,
            "sim_throughput": report["throughput"].empirical,
            "sim_throughput_se": report["throughput"].std_error,
            "delta_p_c": report["p_c"].delta,
        })
        row["_pair"] = (metrics, stats)
    return [row]


def _roc_rows(point: dict[str, Any], spec: SweepSpec, index: int) -> list[dict[str, Any]]:
    params = {**spec.fixed, **point}
    sensing = _sensing(params)
    lo, hi = default_threshold_range(sensing)
    eta_min = params.get("eta_min", lo)
    eta_max = params.get("eta_max", hi)
    points = roc_curve(sensing, eta_min, eta_max, int(params.get("points", 100)))
    return [{**point, **spec.fixed, "eta": pt.eta, "p_f": pt.p_f, "p_md": pt.p_md} for pt in points]


@dataclass
class SweepResult:
    figure_id: FigureId
    parameters: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows:
            for key in row:
                if not key.startswith("_") and key not in cols:
                    cols.append(key)
        return cols

    @property
    def failed_rows(self) -> list[dict[str, Any]]:
        return [r for r in self.rows if r.get("status", "ok") != "ok"]

    def records(self) -> list[dict[str, Any]]:
        cols = self.columns
        return [{c: row.get(c, "") for c in cols} for row in self.rows]

    def select(self, **conditions) -> list[dict[str, Any]]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in conditions.items())]


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Evaluate every grid point; failures are recorded per row, not raised."""
    worker = _roc_rows if spec.figure_id.is_roc else _analytic_row
    points = spec.grid_points()

    def task(item):
        index, point = item
        try:
            rows = worker(point, spec, index)
        except Exception as exc:  # noqa: BLE001 - surfaced in the row status
            return [{**point, "status": f"error: {type(exc).__name__}: {exc}"}]
        for row in rows:
            row["status"] = "ok"
        return rows

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(task, enumerate(points)))
    else:
        chunks = [task(item) for item in enumerate(points)]
    result = SweepResult(spec.figure_id, spec.parameter_names())
    for chunk in chunks:
        result.rows.extend(chunk)
    return result


def _pc_fixed(c=1, alpha=0.5):
    return {"c": c, "alpha": alpha, **_SENSING_DEFAULTS}


PRESETS: dict[FigureId, SweepSpec] = {
    FigureId.ROC_AWGN: SweepSpec(
        FigureId.ROC_AWGN,
        {"fading": "awgn", "sampling_freq": SAMPLING_FREQ, "points": 100},
        ((("sensing_time", "snr_db"), ((2e-3, -15.0), (4e-3, -13.0))),),
    ),
    FigureId.ROC_RAYLEIGH: SweepSpec(
        FigureId.ROC_RAYLEIGH,
        {"fading": "rayleigh", "sampling_freq": SAMPLING_FREQ, "points": 100},
        (("snr_db", (10.0, 20.0)), ("samples", (6, 10))),
    ),
    FigureId.PC_VS_N_W: SweepSpec(
        FigureId.PC_VS_N_W, _pc_fixed(),
        (("p_d", (0.1, 0.9, 1.0)), (("m", "w"), ((3, 32), (3, 64))), ("n", N_GRID)),
        with_simulation=True,
    ),
    FigureId.PC_VS_N_M: SweepSpec(
        FigureId.PC_VS_N_M, _pc_fixed(),
        (("p_d", (0.1, 0.9, 1.0)), (("m", "w"), ((3, 32), (5, 32))), ("n", N_GRID)),
        with_simulation=True,
    ),
    FigureId.PC_VS_N_ALPHA_C: SweepSpec(
        FigureId.PC_VS_N_ALPHA_C, {"p_d": 0.5, "m": 3, "w": 32, **_SENSING_DEFAULTS},
        (("c", (1, 3, 6)), ("alpha", (0.0, 0.5, 0.8)), ("n", N_GRID)),
        with_simulation=True,
    ),
    FigureId.S_VS_PD_W: SweepSpec(
        FigureId.S_VS_PD_W, {"m": 3, **_pc_fixed()},
        (("w", (32, 64)), ("n", THROUGHPUT_N), ("p_d", PD_GRID)),
    ),
    FigureId.S_VS_PD_M: SweepSpec(
        FigureId.S_VS_PD_M, {"w": 32, **_pc_fixed()},
        (("m", (3, 5)), ("n", THROUGHPUT_N), ("p_d", PD_GRID)),
    ),
    FigureId.S_VS_PD_C: SweepSpec(
        FigureId.S_VS_PD_C, {"m": 3, "w": 32, "alpha": 0.5, **_SENSING_DEFAULTS},
        (("c", (1, 3, 6)), ("n", THROUGHPUT_N), ("p_d", PD_GRID)),
    ),
}


def preset(figure: str | FigureId, with_simulation: bool | None = None,
           sim: SimSettings | None = None, **overrides) -> SweepSpec:
    fid = figure if isinstance(figure, FigureId) else parse_figure_id(figure)
    spec = PRESETS[fid]
    if overrides:
        spec = spec.with_overrides(**overrides)
    flag = spec.with_simulation if with_simulation is None else with_simulation
    if fid.is_roc and flag:
        raise ValidationError(f"{fid.value} has no simulation path")
    return SweepSpec(spec.figure_id, spec.fixed, spec.varied, flag, sim if flag else None)


VALIDATION_FIGURES = (FigureId.PC_VS_N_W, FigureId.PC_VS_N_M, FigureId.PC_VS_N_ALPHA_C)


@dataclass
class ValidationReport:
    tolerance: float
    metrics: tuple[str, ...]
    results: dict[FigureId, SweepResult]
    checks: list[tuple[FigureId, dict[str, Any], Any]]

    @property
    def failures(self):
        return [(fid, row, rep) for fid, row, rep in self.checks
                if rep is None or not rep.passed]

    @property
    def passed(self) -> bool:
        failed_rows = any(r.failed_rows for r in self.results.values())
        return not failed_rows and not self.failures


def validate_all(tolerance: float = 0.02, sim: SimSettings | None = None,
                 figures: Sequence[FigureId] = VALIDATION_FIGURES,
                 metrics: tuple[str, ...] = ("p_c",), jobs: int = 1,
                 **overrides) -> ValidationReport:
    """Analytic-vs-simulation comparison over the collision-probability presets."""
    sim = sim or SimSettings()
    results = {}
    checks = []
    for fid in figures:
        spec = preset(fid, with_simulation=True, sim=sim, **overrides)
        result = run_sweep(spec, jobs=jobs)
        results[fid] = result
        for row in result.rows:
            pair = row.get("_pair")
            if pair is None:
                checks.append((fid, row, None))
                continue
            report = compare(pair[0], pair[1], tolerance, metrics=metrics)
            row["passed"] = report.passed
            checks.append((fid, row, report))
    return ValidationReport(tolerance, tuple(metrics), results, checks)


# --- trend assertions ----------------------------------------------------

_EPS = 1e-12


def _groups(rows, key_fields):
    out: dict[tuple, list] = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in key_fields), []).append(r)
    return out


def _monotone(rows, along, metric, key_fields, increasing):
    bad = []
    for key, group in _groups(rows, key_fields).items():
        seq = sorted(group, key=lambda r: r[along])
        for a, b in zip(seq, seq[1:]):
            step = b[metric] - a[metric]
            if (increasing and step < -_EPS) or (not increasing and step > _EPS):
                bad.append((key, a[along], b[along], a[metric], b[metric]))
    return bad


def trend_checks(results: dict[FigureId, SweepResult]) -> list[tuple[str, bool, str]]:
    """The seven qualitative trends, evaluated on analytic rows.

    ``results`` needs the fig5-fig10 sweeps. Returns ``(name, passed, detail)``.
    """
    f5 = results[FigureId.PC_VS_N_W].rows
    f6 = results[FigureId.PC_VS_N_M].rows
    f7 = results[FigureId.PC_VS_N_ALPHA_C].rows
    s_rows = [r for fid in (FigureId.S_VS_PD_W, FigureId.S_VS_PD_M, FigureId.S_VS_PD_C)
              for r in results[fid].rows]
    out = []

    bad = (_monotone(f5, "n", "p_c", ("p_d", "m", "w"), True)
           + _monotone(f6, "n", "p_c", ("p_d", "m", "w"), True)
           + _monotone(f7, "n", "p_c", ("c", "alpha"), True))
    out.append(("p_c nondecreasing in n", not bad, f"{len(bad)} violations"))

    def at(rows, **cond):
        return {(r["p_d"], r["n"]): r["p_c"] for r in rows
                if all(r[k] == v for k, v in cond.items())}

    base = at(f5, m=3, w=32)
    wide = at(f5, m=3, w=64)
    deep = at(f6, m=5, w=32)
    bad = [k for k in base if wide[k] > base[k] + _EPS]
    out.append(("p_c(W=64) <= p_c(W=32)", not bad, f"{len(bad)} violations"))

    bad = [k for k in base if deep[k] > base[k] + _EPS]
    # strict ordering of the two effects where collisions occur at all
    strict = [k for k in base if k[1] == 10 and base[k] > 0
              and not (base[k] - wide[k]) > (base[k] - deep[k])]
    out.append(("p_c(m=5) <= p_c(m=3), W effect > m effect at n=10",
                not bad and not strict,
                f"{len(bad)} ordering violations, {len(strict)} effect-size violations"))

    bad = (_monotone(f5, "p_d", "p_c", ("m", "w", "n"), False)
           + _monotone(f6, "p_d", "p_c", ("m", "w", "n"), False))
    out.append(("p_c nonincreasing in P_d", not bad, f"{len(bad)} violations"))

    bad = _monotone(f7, "alpha", "p_c", ("c", "n"), False)
    out.append(("p_c nonincreasing in alpha", not bad, f"{len(bad)} violations"))

    bad = _monotone(f7, "c", "p_c", ("alpha", "n"), True)
    out.append(("p_c nondecreasing in C", not bad, f"{len(bad)} violations"))

    keys = ("w", "m", "c", "n")
    bad = _monotone(s_rows, "p_d", "throughput", keys, False)
    out.append(("S nonincreasing in P_d", not bad, f"{len(bad)} violations"))
    return out
