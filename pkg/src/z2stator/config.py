"""Run configuration: flat ``key = value`` files with dotted keys.

Example::

    # 4x4 adiabatic sweep
    lattice.Lx = 4
    lattice.Ly = 4
    schedule.T = 1
    schedule.M = 80
    sweep.ratios = linspace(0, 10, 21), inf
    observables.loops = center

Lists are comma separated; ``linspace(a, b, n)`` and ``logspace(a, b, n)``
expand in place.  Numbers may be simple arithmetic with ``sqrt`` and ``pi``
(``photonics.q = sqrt(2)``).  Loops are ``x,y,WxH`` separated by ``;``, or
the words ``center`` and ``all``.  ``photonics.resolution`` is in units
of the gradient scale ``g``.
"""

from __future__ import annotations

import ast
import configparser
import dataclasses
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .lattice import LatticeGeometry, LoopSpec, build_lattice

__all__ = ["RunConfig", "load_config", "parse_config_text", "parse_number", "parse_loops"]

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt}


def parse_number(text: str) -> float:
    """Evaluate a numeric literal or small arithmetic expression."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"cannot parse number {text!r}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def _split_top(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_list(text: str) -> list[float]:
    out: list[float] = []
    for item in _split_top(text):
        for fn, gen in (("linspace", np.linspace), ("logspace", np.logspace)):
            if item.startswith(fn + "(") and item.endswith(")"):
                args = _split_top(item[len(fn) + 1:-1])
                if len(args) != 3:
                    raise ConfigError(f"{fn} needs 3 arguments: {item!r}")
                a, b, n = (parse_number(x) for x in args)
                if n != int(n) or n < 1:
                    raise ConfigError(f"{fn} point count must be a positive integer: {item!r}")
                out.extend(float(v) for v in gen(a, b, int(n)))
                break
        else:
            out.append(parse_number(item))
    return out


def parse_loops(text: str, geom: LatticeGeometry) -> list[LoopSpec]:
    loops: list[LoopSpec] = []
    for item in (s.strip() for s in text.split(";")):
        if not item:
            continue
        if item == "center":
            loops.append(LoopSpec((geom.Lx - 1) // 2, (geom.Ly - 1) // 2))
        elif item == "all":
            for y in range(geom.Ly):
                for x in range(geom.Lx):
                    for h in range(1, geom.Ly - y + 1):
                        for w in range(1, geom.Lx - x + 1):
                            loops.append(LoopSpec(x, y, w, h))
        else:
            try:
                x, y, size = (s.strip() for s in item.split(","))
                w, h = (int(v) for v in size.lower().split("x"))
                loops.append(LoopSpec(int(x), int(y), w, h))
            except ValueError as exc:
                raise ConfigError(f"bad loop {item!r}; expected x,y,WxH") from exc
    for loop in loops:
        try:
            geom.check_loop(loop)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return loops


def _parse_durations(text: str) -> list[tuple[float, int]]:
    out = []
    for item in _split_top(text):
        try:
            t, m = item.split(":")
            out.append((parse_number(t), int(m)))
        except ValueError as exc:
            raise ConfigError(f"bad duration {item!r}; expected T:M") from exc
    return out


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _words(text: str) -> list[str]:
    return [w.strip() for w in text.split(",") if w.strip()]


_PRESENTATION = ("out_dir", "threads", "svg")


@dataclass
class RunConfig:
    Lx: int = 2
    Ly: int = 2
    engine: str = "auto"
    seed: int = 0
    threads: int = 1
    # schedule
    T: float = 1.0
    M: int = 80
    order: int = 1
    sampling: str = "midpoint"
    directions: list[str] = field(default_factory=lambda: ["electric", "magnetic"])
    durations: list[tuple[float, int]] = field(default_factory=list)
    ratios: list[float] = field(default_factory=lambda: [float(v) for v in np.linspace(0, 10, 21)])
    loops: str = "center"
    record_energy: bool = False
    with_exact: bool = True
    trajectories: bool = False
    # outputs
    out_dir: str = "out"
    svg: bool = False
    # wilson
    wilson_state: str = "random"
    wilson_states: int = 20
    # photonics
    kind: str = "cavity"
    J: float = 1.0
    L: float = 1.0
    C: float = 100.0
    p: float = 1.0
    q: float = math.sqrt(2.0)
    g: float = 1.0
    resolution: float = 1e-6
    cutoff: float = 1e3
    residual_mode: str = "suppressed"
    search_limit: int = 12
    # noise scan
    noise_kinds: list[str] = field(default_factory=lambda: ["link-link", "control-control", "control-link"])
    noise_strengths: list[float] = field(default_factory=lambda: [0.0, 0.025, 0.05, 0.075, 0.1])
    noise_gradients: list[float] = field(default_factory=list)
    noise_ratio: float = 2.0
    noise_M: int = 10
    # budget
    budget_C: list[float] = field(default_factory=lambda: [float(v) for v in np.logspace(1, 4, 13)])
    budget_T: float = 1.0
    budget_order: int = 2
    eps_cap: float = 0.1
    gate_exponent: float = 1.0
    gate_coef: float = 1e-2
    trotter_coef: float = 1.0
    # trotter scan
    trotter_M: list[float] = field(default_factory=lambda: [10.0, 20.0, 40.0, 80.0, 160.0])
    trotter_T: float = 1.0
    trotter_ratio: float = 1.0

    @property
    def geom(self) -> LatticeGeometry:
        return build_lattice(self.Lx, self.Ly)

    def loop_specs(self) -> list[LoopSpec]:
        return parse_loops(self.loops, self.geom)

    def schedule_points(self) -> list[tuple[float, int]]:
        return self.durations or [(self.T, self.M)]

    def canonical(self) -> str:
        """Sorted JSON of every field that can change results (not paths or threads)."""
        data = dataclasses.asdict(self)
        for key in _PRESENTATION:
            data.pop(key)
        return json.dumps(data, sort_keys=True, default=repr)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        if self.Lx < 1 or self.Ly < 1:
            raise ConfigError("lattice dimensions must be positive")
        if self.engine not in ("auto", "full", "links", "dual"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        for d in self.directions:
            if d not in ("electric", "magnetic"):
                raise ConfigError(f"unknown direction {d!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for k in self.noise_kinds:
            if k not in ("link-link", "control-control", "control-link"):
                raise ConfigError(f"unknown residual kind {k!r}")
        if self.wilson_state not in ("random", "magnetic", "electric"):
            raise ConfigError(f"unknown wilson.state {self.wilson_state!r}")
        if any(r < 0 for r in self.ratios):
            raise ConfigError("sweep ratios must be non-negative")
        self.loop_specs()
        return self


# key -> (attribute, parser)
_KEYS = {
    "lattice.Lx": ("Lx", int),
    "lattice.Ly": ("Ly", int),
    "engine": ("engine", str.strip),
    "seed": ("seed", int),
    "threads": ("threads", int),
    "schedule.T": ("T", parse_number),
    "schedule.M": ("M", int),
    "schedule.order": ("order", int),
    "schedule.sampling": ("sampling", str.strip),
    "schedule.directions": ("directions", _words),
    "schedule.durations": ("durations", _parse_durations),
    "sweep.ratios": ("ratios", parse_list),
    "observables.loops": ("loops", str.strip),
    "observables.energy": ("record_energy", _bool),
    "observables.exact": ("with_exact", _bool),
    "output.dir": ("out_dir", str.strip),
    "output.svg": ("svg", _bool),
    "output.trajectories": ("trajectories", _bool),
    "wilson.state": ("wilson_state", str.strip),
    "wilson.states": ("wilson_states", int),
    "photonics.kind": ("kind", str.strip),
    "photonics.J": ("J", parse_number),
    "photonics.L": ("L", parse_number),
    "photonics.C": ("C", parse_number),
    "photonics.p": ("p", parse_number),
    "photonics.q": ("q", parse_number),
    "photonics.g": ("g", parse_number),
    "photonics.resolution": ("resolution", parse_number),
    "photonics.cutoff": ("cutoff", parse_number),
    "photonics.residual_mode": ("residual_mode", str.strip),
    "photonics.search_limit": ("search_limit", int),
    "noise.kinds": ("noise_kinds", _words),
    "noise.strengths": ("noise_strengths", parse_list),
    "noise.gradients": ("noise_gradients", parse_list),
    "noise.ratio": ("noise_ratio", parse_number),
    "noise.M": ("noise_M", int),
    "budget.C": ("budget_C", parse_list),
    "budget.T": ("budget_T", parse_number),
    "budget.order": ("budget_order", int),
    "budget.eps_cap": ("eps_cap", parse_number),
    "budget.gate_exponent": ("gate_exponent", parse_number),
    "budget.gate_coef": ("gate_coef", parse_number),
    "budget.trotter_coef": ("trotter_coef", parse_number),
    "trotter.M": ("trotter_M", parse_list),
    "trotter.T": ("trotter_T", parse_number),
    "trotter.ratio": ("trotter_ratio", parse_number),
}


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",),
        delimiters=("=",),
    )
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = RunConfig()
    for key, raw in parser["run"].items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        attr, conv = _KEYS[key]
        try:
            setattr(cfg, attr, conv(raw))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    return cfg.validate()


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)
