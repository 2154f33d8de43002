"""Command-line front end: ``z2stator <command> [--config FILE] [--out DIR] ...``.

Every command writes ``<out>/<command>.csv`` with the columns
``sweep,value,observable,obs_value,direction,T,M,engine`` preceded by a
``# config_hash=...`` comment, prints a short summary (also saved as
``<command>.txt``) and logs to stderr and ``<command>.log``.

Exit codes: 0 success, 2 configuration error, 3 capacity error,
4 convergence error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import multiprocessing
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import svg
from .analysis import closest_approach, find_crossing, fit_slope
from .config import RunConfig, load_config
from .errors import CapacityError, ConfigError, ConvergenceError
from .gauge_dual import DENSE_CUTOFF, DualEngine, dual_map, dual_to_links, exact_ground_state, wilson_expectation_dual
from .lattice import LoopSpec
from .photonics import (
    GradientSpec,
    InteractionModel,
    canonical_nn_schedule,
    collision_report,
    control_control_unitary,
    effective_interaction,
    error_budget,
    gauge_violation_run,
    ideal_coupling,
    resonant_pairs,
    shortest_residual_pairs,
)
from .protocol import (
    Layout,
    Schedule,
    loop_string,
    measure_wilson_stator,
    prepare_magnetic_gs,
    run_adiabatic,
    select_engine,
)
from .statevec import QubitRegister, expectation_pauli, fidelity, z_expectations

log = logging.getLogger("z2stator")

FIELDS = ("sweep", "value", "observable", "obs_value", "direction", "T", "M", "engine")


@dataclass(frozen=True)
class CurveRecord:
    """One observable value at one sweep point."""

    sweep: str
    value: float
    observable: str
    obs_value: float
    direction: str = ""
    T: float | None = None
    M: int | None = None
    engine: str = ""

    def row(self) -> list[str]:
        return [self.sweep, _fmt(self.value), self.observable, _fmt(self.obs_value),
                self.direction, _fmt(self.T), _fmt(self.M), self.engine]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: str | Path, records, config_hash: str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELDS)
        for r in records:
            w.writerow(r.row())
    return path


def read_csv(path: str | Path) -> list[dict]:
    """Rows of a command CSV as dicts (numeric columns converted)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for row in csv.DictReader(lines):
        for k in ("value", "obs_value", "T"):
            row[k] = float(row[k]) if row[k] != "" else None
        row["M"] = int(row["M"]) if row["M"] != "" else None
        rows.append(row)
    return rows


@dataclass
class CommandResult:
    records: list[CurveRecord] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    charts: list[tuple[str, dict, dict]] = field(default_factory=list)
    extra_csv: dict[str, list[CurveRecord]] = field(default_factory=dict)


# ---------------------------------------------------------------- worker pool


def _pool_map(fn, tasks: list, threads: int) -> list:
    """Ordered map; a process pool is used only when ``threads > 1``."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks)), mp_context=ctx) as ex:
        return list(ex.map(fn, tasks))


_ENGINE_CACHE: dict = {}


def _cached_engine(Lx: int, Ly: int, kind: str):
    key = (Lx, Ly, kind)
    if key not in _ENGINE_CACHE:
        _ENGINE_CACHE.clear()
        from .lattice import build_lattice

        _ENGINE_CACHE[key] = select_engine(build_lattice(Lx, Ly), kind)
    return _ENGINE_CACHE[key]


def _resolve_engine(cfg: RunConfig) -> str:
    engine = select_engine(cfg.geom, cfg.engine)
    _ENGINE_CACHE.clear()
    _ENGINE_CACHE[(cfg.Lx, cfg.Ly, engine.kind)] = engine
    log.info("engine: %s (%d qubits) on %dx%d", engine.kind, engine.n_qubits, cfg.Lx, cfg.Ly)
    return engine.kind


def _couplings(ratio: float) -> tuple[float, float]:
    """``(lam_E, lam_B)`` for a final ``lam_B / lam_E``; infinity means ``lam_E = 0``."""
    return (0.0, 1.0) if math.isinf(ratio) else (1.0, ratio)


# Each ramp direction is only expected to track the ground state on its own
# side of the transition region.
ELECTRIC_SIDE = 2.0
MAGNETIC_SIDE = 4.0


def _on_own_side(direction: str, ratio: float) -> bool:
    return ratio <= ELECTRIC_SIDE if direction == "electric" else ratio >= MAGNETIC_SIDE


def _loop_name(loop: LoopSpec) -> str:
    return f"W[{loop.x},{loop.y},{loop.width}x{loop.height}]"


# ---------------------------------------------------------------- exact-gs


def _exact_point(task) -> list[CurveRecord]:
    cfg, ratio = task
    geom = cfg.geom
    H = dual_map(geom)
    lam_E, lam_B = _couplings(ratio)
    vec, energy = exact_ground_state(H.with_couplings(lam_E, lam_B))
    out = [CurveRecord("ratio_BE", ratio, _loop_name(loop), wilson_expectation_dual(geom, vec, loop),
                       "exact", engine="dual") for loop in cfg.loop_specs()]
    out.append(CurveRecord("ratio_BE", ratio, "energy", energy, "exact", engine="dual"))
    return out


def cmd_exact_gs(cfg: RunConfig) -> CommandResult:
    """Exact ground-state Wilson loops and energy across the ratio grid."""
    dual_map(cfg.geom)  # capacity check before dispatch
    log.info("engine: dual (exact ground states)")
    chunks = _pool_map(_exact_point, [(cfg, r) for r in cfg.ratios], cfg.threads)
    records = [r for chunk in chunks for r in chunk]
    res = CommandResult(records)
    for loop in cfg.loop_specs():
        name = _loop_name(loop)
        pts = [(r.value, r.obs_value) for r in records if r.observable == name]
        res.summary.append(f"{name}: " + ", ".join(f"{x:g}->{y:.4f}" for x, y in pts))
        res.charts.append((f"exact_gs_{loop.x}_{loop.y}_{loop.width}x{loop.height}.svg",
                           {"exact": tuple(zip(*pts))},
                           {"title": f"exact ground state {name}", "xlabel": "lambda_B/lambda_E",
                            "ylabel": "<W>"}))
    return res


# ---------------------------------------------------------------- adiabatic


def _adiabatic_point(task):
    cfg, kind, direction, T, M, ratio = task
    engine = _cached_engine(cfg.Lx, cfg.Ly, kind)
    # magnetic runs ramp lam_E from 0 up to lam_E / lam_B = 1 / ratio
    sched_ratio = ratio if direction == "electric" else (0.0 if math.isinf(ratio) else 1.0 / ratio)
    sched = Schedule(direction, T, M, sched_ratio, cfg.order, cfg.sampling)
    obs = ("wilson", "energy") if cfg.record_energy else ("wilson",)
    loops = cfg.loop_specs()
    traj = run_adiabatic(engine, sched, loops, obs, "all" if cfg.trajectories else "final")
    final = traj.final
    meta = dict(direction=direction, T=T, M=M, engine=kind)
    recs = [CurveRecord("ratio_BE", ratio, _loop_name(l), final[_loop_name(l)], **meta) for l in loops]
    if cfg.record_energy:
        recs.append(CurveRecord("ratio_BE", ratio, "energy", final["energy"], **meta))
    steps = []
    if cfg.trajectories:
        for rec in traj.records:
            for key, val in rec.items():
                if key.startswith("W[") or key == "energy":
                    steps.append(CurveRecord("t", rec["t"], f"{key}@ratio={ratio:.17g}", val, **meta))
    return recs, steps


def cmd_adiabatic(cfg: RunConfig) -> CommandResult:
    """Final Wilson loops of adiabatic ramps for every direction, duration and ratio."""
    kind = _resolve_engine(cfg)
    tasks = []
    for T, M in cfg.schedule_points():
        for direction in cfg.directions:
            for r in cfg.ratios:
                if direction == "electric" and math.isinf(r):
                    continue
                if direction == "magnetic" and r == 0:
                    continue
                tasks.append((cfg, kind, direction, T, M, r))
    out = _pool_map(_adiabatic_point, tasks, cfg.threads)
    res = CommandResult([r for recs, _ in out for r in recs])
    if cfg.trajectories:
        res.extra_csv["adiabatic_trajectories.csv"] = [s for _, steps in out for s in steps]
    exact = cmd_exact_gs(cfg).records if cfg.with_exact else []
    res.records += exact

    for loop in cfg.loop_specs():
        name = _loop_name(loop)

        def curve(pred):
            pts = sorted((r.value, r.obs_value) for r in res.records if r.observable == name and pred(r))
            return [p[0] for p in pts], [p[1] for p in pts]

        ex = curve(lambda r: r.direction == "exact")
        for T, M in cfg.schedule_points():
            series = {}
            for d in cfg.directions:
                series[d] = curve(lambda r, d=d: r.direction == d and r.T == T and r.M == M)
            if ex[0]:
                series["exact"] = ex
                for d in cfg.directions:
                    xs, ys = series[d]
                    ref = dict(zip(*ex))
                    dev = [(x, abs(y - ref[x])) for x, y in zip(xs, ys) if x in ref]
                    own = [e for x, e in dev if _on_own_side(d, x)]
                    if dev:
                        res.summary.append(
                            f"{name} T={T:g} M={M} {d}: max |W - W_exact| = {max(e for _, e in dev):.4g}"
                            + (f", on its own side {max(own):.4g}" if own else ""))
            if {"electric", "magnetic"} <= set(cfg.directions):
                e, m = series["electric"], series["magnetic"]
                fin = lambda c: ([x for x in c[0] if math.isfinite(x)], [y for x, y in zip(*c) if math.isfinite(x)])
                cross = find_crossing(*fin(e), *fin(m))
                if cross is not None:
                    res.summary.append(f"{name} T={T:g} M={M}: curves cross at ratio {cross:.4f} (finite-size, informational)")
                else:
                    try:
                        x, gap = closest_approach(*fin(e), *fin(m))
                        res.summary.append(
                            f"{name} T={T:g} M={M}: no crossing on the grid; closest approach "
                            f"electric - magnetic = {gap:.4g} at ratio {x:g}")
                    except ValueError:
                        res.summary.append(f"{name} T={T:g} M={M}: curves share no sweep points")
            res.charts.append((f"adiabatic_{loop.x}_{loop.y}_{loop.width}x{loop.height}_T{T:g}_M{M}.svg",
                               {k: (v[0], v[1]) for k, v in series.items()},
                               {"title": f"{name}, T={T:g}, M={M}", "xlabel": "lambda_B/lambda_E",
                                "ylabel": "<W>"}))
    return res


# ---------------------------------------------------------------- wilson


def cmd_wilson(cfg: RunConfig) -> CommandResult:
    """Stator readout against the direct loop expectation."""
    geom = cfg.geom
    layout = Layout.full(geom)
    layout.check_capacity()
    log.info("engine: full (%d qubits), stator readout", layout.n_qubits)
    if cfg.wilson_state == "random":
        rng = np.random.default_rng(cfg.seed)
        states = [layout.embed_links(QubitRegister.random(geom.n_links, rng)) for _ in range(cfg.wilson_states)]
    elif cfg.wilson_state == "magnetic":
        states = [prepare_magnetic_gs(geom, full_register=True)[0]]
    else:
        states = [layout.initial_state()]
    res = CommandResult()
    worst = 0.0
    for i, state in enumerate(states):
        for loop in cfg.loop_specs():
            stator = measure_wilson_stator(layout, state, loop)
            direct = expectation_pauli(state, loop_string(geom, loop))
            name = _loop_name(loop)
            meta = dict(direction=cfg.wilson_state, engine="full")
            res.records += [
                CurveRecord("state", i, f"{name}:stator", stator, **meta),
                CurveRecord("state", i, f"{name}:direct", direct, **meta),
                CurveRecord("state", i, f"{name}:diff", stator - direct, **meta),
            ]
            worst = max(worst, abs(stator - direct))
    res.summary.append(f"{len(states)} state(s), {len(cfg.loop_specs())} loop(s): max |stator - direct| = {worst:.3g}")
    return res


# ---------------------------------------------------------------- prep-magnetic


def cmd_prep_magnetic(cfg: RunConfig) -> CommandResult:
    """Post-selected magnetic ground-state preparation diagnostics."""
    geom = cfg.geom
    log.info("engine: full (%d qubits), magnetic preparation", geom.n_links + geom.n_plaquettes)
    links, prob = prepare_magnetic_gs(geom)
    layout = Layout.links_only(geom)
    ref = QubitRegister(dual_to_links(geom, DualEngine(geom).magnetic_vacuum()))
    np_ = geom.n_plaquettes
    fid = fidelity(links, ref)
    b_dev = max((abs(1.0 - expectation_pauli(links, B)) for B in layout.plaquettes), default=0.0)
    a_err = float(np.max(1.0 - z_expectations(links, layout.stars)))
    meta = dict(direction="magnetic", engine="full")
    values = {
        "success_probability": prob,
        "expected_probability": 2.0 ** -np_,
        "fidelity": fid,
        "max_plaquette_deviation": b_dev,
        "max_gauge_error": a_err,
    }
    res = CommandResult([CurveRecord("plaquettes", np_, k, v, **meta) for k, v in values.items()])
    res.summary.append(
        f"{geom.Lx}x{geom.Ly}: success probability {prob:.12g} (expected {2.0 ** -np_:.12g}), "
        f"fidelity {fid:.12g}, max |1 - <B>| {b_dev:.3g}")
    return res


# ---------------------------------------------------------------- noise-scan


_IDEAL_RUNS: dict = {}


def _noise_schedule(cfg: RunConfig) -> Schedule:
    return Schedule("electric", cfg.T, cfg.noise_M, cfg.noise_ratio, cfg.order, cfg.sampling)


def _ideal_run(cfg: RunConfig, initial=None):
    """Ideal-coupling reference run, cached per process for the default start."""
    geom, sched = cfg.geom, _noise_schedule(cfg)
    if initial is not None:
        return gauge_violation_run(geom, ideal_coupling(geom, cfg.J), sched, cfg.J, initial=initial)
    key = (cfg.Lx, cfg.Ly, cfg.J, sched)
    if key not in _IDEAL_RUNS:
        _IDEAL_RUNS.clear()
        _IDEAL_RUNS[key] = gauge_violation_run(geom, ideal_coupling(geom, cfg.J), sched, cfg.J)
    return _IDEAL_RUNS[key]


def _noise_point(task):
    cfg, kind, strength = task
    geom = cfg.geom
    sched = _noise_schedule(cfg)
    ideal = ideal_coupling(geom, cfg.J)
    cm = ideal.with_extra({p: strength for p in shortest_residual_pairs(ideal, kind)})
    run = gauge_violation_run(geom, cm, sched, cfg.J)
    ideal_state = _ideal_run(cfg).state
    if kind == "control-control":
        # the residual run equals the ideal one conjugated by U_CC
        Ucc = control_control_unitary(cm, cfg.J)
        start = Ucc.apply(Layout.full(geom).initial_state())
        ref = Ucc.dagger().apply(_ideal_run(cfg, initial=start).state)
    else:
        ref = ideal_state
    meta = dict(direction="electric", T=cfg.T, M=cfg.noise_M, engine="full")
    return [
        CurveRecord("strength", strength, f"{kind}:max_gauge_error", float(run.max_error.max()), **meta),
        CurveRecord("strength", strength, f"{kind}:deviation",
                    float(np.linalg.norm(run.state.amplitudes - ref.amplitudes)), **meta),
        CurveRecord("strength", strength, f"{kind}:raw_deviation",
                    float(np.linalg.norm(run.state.amplitudes - ideal_state.amplitudes)), **meta),
    ]


def _gradient_point(task):
    cfg, g = task
    geom = cfg.geom
    grad = GradientSpec(cfg.p, cfg.q, g)
    sched = _noise_schedule(cfg)
    drive = canonical_nn_schedule(grad, cfg.resolution * g)
    model = InteractionModel(cfg.kind, cfg.J, cfg.L, cfg.C)
    cm = effective_interaction(model, geom, grad, drive, cfg.resolution * g, cfg.residual_mode, cfg.cutoff)
    run = gauge_violation_run(geom, cm, sched, cfg.J)
    ideal = _ideal_run(cfg)
    meta = dict(direction="electric", T=cfg.T, M=cfg.noise_M, engine="full")
    return [
        CurveRecord("g", g, "max_gauge_error", float(run.max_error.max()), **meta),
        CurveRecord("g", g, "deviation", float(np.linalg.norm(run.state.amplitudes - ideal.state.amplitudes)), **meta),
    ]


def cmd_noise_scan(cfg: RunConfig) -> CommandResult:
    """Gauge error under injected residual couplings and under finite gradients."""
    Layout.full(cfg.geom).check_capacity()
    log.info("engine: full (%d qubits), residual-coupling scan", cfg.geom.n_links + cfg.geom.n_plaquettes)
    tasks = [(cfg, k, s) for k in cfg.noise_kinds for s in cfg.noise_strengths]
    res = CommandResult([r for chunk in _pool_map(_noise_point, tasks, cfg.threads) for r in chunk])
    if cfg.noise_gradients:
        chunks = _pool_map(_gradient_point, [(cfg, g) for g in cfg.noise_gradients], cfg.threads)
        res.records += [r for chunk in chunks for r in chunk]
    series = {}
    for k in cfg.noise_kinds:
        pts = [(r.value, r.obs_value) for r in res.records if r.observable == f"{k}:max_gauge_error"]
        dev = [r.obs_value for r in res.records if r.observable == f"{k}:deviation"]
        series[k] = tuple(zip(*pts))
        res.summary.append(f"{k}: max gauge error " + ", ".join(f"{x:g}->{y:.3g}" for x, y in pts)
                           + f"; max deviation {max(dev):.3g}")
    res.charts.append(("noise_scan.svg", series, {"title": "gauge error vs residual strength",
                                                  "xlabel": "strength / J", "ylabel": "max 1 - <A>"}))
    return res


# ---------------------------------------------------------------- schedule-check


def cmd_schedule_check(cfg: RunConfig) -> CommandResult:
    """Resonance selectivity of the canonical sideband drive on the configured lattice."""
    geom = cfg.geom
    grad = GradientSpec(cfg.p, cfg.q, cfg.g)
    res_abs = cfg.resolution * abs(cfg.g)
    drive = canonical_nn_schedule(grad, res_abs)
    report = collision_report(geom, grad, res_abs, cfg.search_limit)
    cm = resonant_pairs(geom, grad, drive, res_abs)
    nn = {tuple(sorted(p)) for p in Layout.full(geom).nn_pairs}
    resonant = cm.resonant_set()
    exact_nn = resonant == nn
    safe = math.inf if report.max_safe_size is None else report.max_safe_size
    values = {
        "resonant_pairs": len(resonant),
        "nn_pairs": len(nn),
        "resonant_equals_nn": float(exact_nn),
        "collisions": len(report.collisions),
        "min_gap": report.min_gap,
        "max_safe_size": safe,
    }
    res = CommandResult([CurveRecord("lattice", geom.Lx, k, v, engine="photonics") for k, v in values.items()])
    res.summary.append(report.summary())
    res.summary.append(f"resonant set: {len(resonant)} pairs; equals the {len(nn)} NN control-link pairs: {exact_nn}")
    out = Path(cfg.out_dir)
    report.to_csv(out / "collisions.csv")
    cm.to_csv(out / "couplings.csv")
    return res


# ---------------------------------------------------------------- budget


def cmd_budget(cfg: RunConfig) -> CommandResult:
    """Optimal step count, minimal error and reachable time versus cooperativity."""
    res = CommandResult()
    Ts = []
    for C in cfg.budget_C:
        b = error_budget(C, cfg.budget_T, cfg.budget_order, eps_cap=cfg.eps_cap, trotter_coef=cfg.trotter_coef,
                         gate_coef=cfg.gate_coef, gate_exponent=cfg.gate_exponent)
        Ts.append(b.T_max)
        for name in ("M", "eps_min", "eps_trotter", "eps_gate", "T_max"):
            res.records.append(CurveRecord("C", C, name, getattr(b, name), T=cfg.budget_T, engine="budget"))
    Cs = np.array(cfg.budget_C)
    ok = np.array(Ts) > 0
    if ok.sum() >= 3:
        fit = fit_slope(Cs[ok], np.array(Ts)[ok])
        res.summary.append(f"T_max ~ C^{fit.slope:.4f} (stderr {fit.stderr:.2g}); "
                           f"gate error per step ~ C^-{cfg.gate_exponent:g}, Trotter order {cfg.budget_order}")
    res.charts.append(("budget.svg", {"T_max": (list(Cs), Ts)},
                       {"title": "reachable time vs cooperativity", "xlabel": "C", "ylabel": "T_max",
                        "logx": True, "logy": True}))
    return res


# ---------------------------------------------------------------- trotter-scan


def cmd_trotter_scan(cfg: RunConfig) -> CommandResult:
    """Global Trotter error at fixed couplings against the dense propagator."""
    engine = DualEngine(cfg.geom)
    if engine.H.dim > DENSE_CUTOFF:
        raise CapacityError(f"trotter-scan needs a dense propagator; dimension {engine.H.dim} > {DENSE_CUTOFF}")
    log.info("engine: dual (%d plaquette spins), dense reference", engine.n_qubits)
    lam_E, lam_B = 1.0, cfg.trotter_ratio
    T = cfg.trotter_T
    psi0 = engine.magnetic_vacuum() if lam_B < lam_E else engine.electric_vacuum()
    exact = scipy.linalg.expm(-1j * T * engine.H.with_couplings(lam_E, lam_B).to_dense()) @ psi0
    res = CommandResult()
    series = {}
    for order in (1, 2):
        errs = []
        for M in cfg.trotter_M:
            M = int(M)
            state = psi0.copy()
            for _ in range(M):
                state = engine.step(state, lam_E, lam_B, T / M, order)
            err = float(np.linalg.norm(state - exact))
            errs.append(err)
            res.records.append(CurveRecord("M", M, f"error_order{order}", err, T=T, M=M, engine="dual"))
        series[f"order {order}"] = (list(cfg.trotter_M), errs)
        if len(errs) >= 3 and min(errs) > 0:
            fit = fit_slope(cfg.trotter_M, errs)
            res.summary.append(f"order {order}: error ~ M^{fit.slope:.4f} (stderr {fit.stderr:.2g})")
    res.charts.append(("trotter_scan.svg", series, {"title": "Trotter error", "xlabel": "M",
                                                    "ylabel": "|psi_M - psi_exact|", "logx": True, "logy": True}))
    return res


COMMANDS = {
    "exact-gs": cmd_exact_gs,
    "adiabatic": cmd_adiabatic,
    "wilson": cmd_wilson,
    "prep-magnetic": cmd_prep_magnetic,
    "noise-scan": cmd_noise_scan,
    "schedule-check": cmd_schedule_check,
    "budget": cmd_budget,
    "trotter-scan": cmd_trotter_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="z2stator", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--engine", choices=("auto", "full", "links", "dual"), help="simulation engine")
        p.add_argument("--threads", type=int, help="worker processes for sweeps")
        p.add_argument("--svg", action="store_true", help="also write SVG line charts")
    return parser


def run(command: str, cfg: RunConfig) -> CommandResult:
    """Execute ``command`` and write its outputs into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = COMMANDS[command](cfg)
    h = cfg.config_hash()
    stem = command.replace("-", "_")
    write_csv(out / f"{stem}.csv", result.records, h)
    for name, recs in result.extra_csv.items():
        write_csv(out / name, recs, h)
    (out / f"{stem}.txt").write_text("".join(line + "\n" for line in result.summary))
    if cfg.svg:
        for fname, series, kw in result.charts:
            svg.line_chart(series, out / fname, **kw)
    return result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    file_handler = None
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        if args.engine:
            cfg.engine = args.engine
        if args.threads is not None:
            cfg.threads = args.threads
        if args.svg:
            cfg.svg = True
        cfg.validate()
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(out / f"{args.command.replace('-', '_')}.log", mode="w")
        file_handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(file_handler)
        log.info("config_hash=%s", cfg.config_hash())
        result = run(args.command, cfg)
        for line in result.summary:
            print(line)
        return 0
    except CapacityError as exc:
        log.error("capacity error: %s", exc)
        return 3
    except ConvergenceError as exc:
        log.error("convergence error: %s", exc)
        return 4
    except (ConfigError, ValueError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    finally:
        log.removeHandler(handler)
        if file_handler is not None:
            log.removeHandler(file_handler)
            file_handler.close()


if __name__ == "__main__":
    sys.exit(main())
