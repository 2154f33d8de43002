"""Stator-based Trotter protocol for the Z2 gauge theory.

Register layout: link ``l`` is qubit ``l``; the controls present in a
:class:`Layout` follow the links in plaquette order.  Every evolution
operator is ``exp(-i tau H)`` and every rotation primitive is
``exp(-i phi P)``, so single-body layers are ``V_i(phi) = exp(-i phi sum sigma_i)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import CapacityError, ProjectionError
from .gauge_dual import DualEngine
from .lattice import (
    LatticeGeometry,
    LoopSpec,
    distance_sets,
    loop_enclosed_plaquettes,
    loop_links,
    plaquette_links,
)
from .statevec import (
    MAX_QUBITS,
    PLUS,
    UP,
    PauliString,
    QubitRegister,
    apply_pauli_rotation,
    apply_pauli_string,
    apply_projector,
    expectation_pauli,
    init_product_state,
    z_expectations,
)

__all__ = [
    "Layout",
    "Rotation",
    "PauliGate",
    "Projector",
    "GateSeq",
    "Schedule",
    "Trajectory",
    "LinkEngine",
    "select_engine",
    "plaquette_string",
    "star_string",
    "loop_string",
    "controlled_plaquette_gate",
    "eq1_gate_product",
    "build_U",
    "stator_eigenoperator_check",
    "extract_links",
    "step_WE",
    "step_WB",
    "run_adiabatic",
    "prepare_magnetic_gs",
    "wilson_entangler",
    "measure_wilson_stator",
    "compose_loops",
    "odd_square_tiling",
]

log = logging.getLogger(__name__)

QUARTER = math.pi / 4


class Layout:
    """Qubit assignment for links plus an optional subset of controls."""

    def __init__(self, geom: LatticeGeometry, controls: Iterable[int] = ()):
        self.geom = geom
        self.controls = tuple(int(p) for p in controls)
        if len(set(self.controls)) != len(self.controls):
            raise ValueError("duplicate control plaquettes")
        for p in self.controls:
            geom._check_plaquette(p)
        self.n_links = geom.n_links
        self.n_qubits = self.n_links + len(self.controls)
        self._cq = {p: self.n_links + i for i, p in enumerate(self.controls)}

    @classmethod
    def full(cls, geom: LatticeGeometry) -> "Layout":
        return cls(geom, range(geom.n_plaquettes))

    @classmethod
    def links_only(cls, geom: LatticeGeometry) -> "Layout":
        return cls(geom)

    def __eq__(self, other):
        return isinstance(other, Layout) and (self.geom, self.controls) == (other.geom, other.controls)

    def __hash__(self):
        return hash((self.geom, self.controls))

    def __repr__(self):
        return f"Layout({self.geom!r}, controls={self.controls})"

    def control_qubit(self, p: int) -> int:
        try:
            return self._cq[p]
        except KeyError:
            raise ValueError(f"plaquette {p} has no control qubit in {self!r}") from None

    def has_control(self, p: int) -> bool:
        return p in self._cq

    @property
    def link_qubits(self) -> range:
        return range(self.n_links)

    @property
    def control_qubits(self) -> tuple[int, ...]:
        return tuple(self._cq[p] for p in self.controls)

    def check_capacity(self, limit: int = MAX_QUBITS) -> None:
        if self.n_qubits > limit:
            raise CapacityError(
                f"{self.n_qubits} qubits on {self.geom!r} exceeds the limit of {limit}; "
                "use the links-only or dual engine"
            )

    @cached_property
    def nn_pairs(self) -> tuple[tuple[int, int], ...]:
        """(link qubit, control qubit) for every control and its four links."""
        return tuple(
            (link, self._cq[p]) for p in self.controls for link in plaquette_links(self.geom, p)
        )

    @cached_property
    def stars(self) -> tuple[PauliString, ...]:
        return tuple(star_string(self.geom, s) for s in range(self.geom.n_sites))

    @cached_property
    def plaquettes(self) -> tuple[PauliString, ...]:
        return tuple(plaquette_string(self.geom, p) for p in range(self.geom.n_plaquettes))

    def initial_state(self, links: Sequence[np.ndarray] | None = None) -> QubitRegister:
        """Links in ``links`` (default all up), controls in ``|in> = |+>``."""
        self.check_capacity()
        links = [UP] * self.n_links if links is None else list(links)
        return init_product_state(links + [PLUS] * len(self.controls))

    def embed_links(self, link_state: QubitRegister) -> QubitRegister:
        """``|in>^controls (x) link_state``."""
        self.check_capacity()
        if link_state.n != self.n_links:
            raise ValueError("link state has the wrong number of qubits")
        ctrl = np.ones(1 << len(self.controls), dtype=complex) / np.sqrt(1 << len(self.controls))
        return QubitRegister(np.kron(ctrl, link_state.amplitudes), check=False)


def plaquette_string(geom: LatticeGeometry, p: int) -> PauliString:
    return PauliString.X(*plaquette_links(geom, p))


def star_string(geom: LatticeGeometry, s: int) -> PauliString:
    return PauliString.Z(*geom.star_table[s])


def loop_string(geom: LatticeGeometry, loop: LoopSpec) -> PauliString:
    return PauliString.X(*loop_links(geom, loop))


# ---------------------------------------------------------------- gates


@dataclass(frozen=True)
class Rotation:
    """Layer of mutually commuting rotations ``prod_j exp(-i phi_j P_j)``."""

    terms: tuple[tuple[PauliString, float], ...]
    label: str = ""

    def apply(self, state: QubitRegister) -> QubitRegister:
        for P, phi in self.terms:
            if phi:
                apply_pauli_rotation(state, P, phi)
        return state

    def dagger(self) -> "Rotation":
        return Rotation(tuple((P, -phi) for P, phi in self.terms), self.label + "^dag")

    @property
    def qubits(self) -> set[int]:
        return {q for P, _ in self.terms for q in P.qubits}


@dataclass(frozen=True)
class PauliGate:
    P: PauliString
    label: str = ""

    def apply(self, state: QubitRegister) -> QubitRegister:
        return apply_pauli_string(state, self.P)

    def dagger(self) -> "PauliGate":
        return PauliGate(PauliString(self.P.factors, np.conj(self.P.phase)), self.label)

    @property
    def qubits(self) -> set[int]:
        return set(self.P.qubits)


@dataclass(frozen=True)
class Projector:
    """``(1 + e P) / 2`` followed by renormalization."""

    P: PauliString
    eigenvalue: int = 1
    label: str = ""

    def apply(self, state: QubitRegister) -> QubitRegister:
        return apply_projector(state, self.P, self.eigenvalue)[0]

    def dagger(self) -> "Projector":
        raise ValueError("projectors are not invertible")

    @property
    def qubits(self) -> set[int]:
        return set(self.P.qubits)


def layer(axis: str, qubits: Iterable[int], phi: float, label: str = "") -> Rotation:
    """``exp(-i phi sum_q sigma_axis(q))``."""
    return Rotation(tuple((PauliString.uniform(axis, (q,)), phi) for q in qubits), label)


def pair_layer(pairs: Mapping[tuple[int, int], float], label: str = "V_I") -> Rotation:
    """``exp(-i sum_pairs phi_mn sigma_x(m) sigma_x(n))``."""
    return Rotation(tuple((PauliString.X(a, b), phi) for (a, b), phi in pairs.items()), label)


class GateSeq:
    """Ordered gates; ``gates[0]`` acts first."""

    def __init__(self, gates: Iterable = ()):
        self.gates = tuple(gates)

    def __iter__(self):
        return iter(self.gates)

    def __len__(self):
        return len(self.gates)

    def __add__(self, other: "GateSeq") -> "GateSeq":
        return GateSeq(self.gates + tuple(other))

    def __repr__(self):
        return "GateSeq(" + ", ".join(g.label or type(g).__name__ for g in self.gates) + ")"

    def apply(self, state: QubitRegister) -> QubitRegister:
        for gate in self.gates:
            gate.apply(state)
        return state

    def dagger(self) -> "GateSeq":
        return GateSeq(g.dagger() for g in reversed(self.gates))

    @property
    def qubits(self) -> set[int]:
        return set().union(*(g.qubits for g in self.gates)) if self.gates else set()

    def to_matrix(self, n: int) -> np.ndarray:
        """Dense matrix on ``n`` qubits, column by column (small ``n`` only)."""
        if n > 12:
            raise CapacityError("to_matrix is limited to 12 qubits")
        cols = []
        for b in range(1 << n):
            amps = np.zeros(1 << n, dtype=complex)
            amps[b] = 1.0
            cols.append(self.apply(QubitRegister(amps, check=False)).amplitudes)
        return np.column_stack(cols)


def controlled_plaquette_gate(layout: Layout, p: int, link: int) -> GateSeq:
    """Control-up-flips-link gate between plaquette ``p``'s control and ``link``.

    Realized as ``exp(-i pi/4 Zc Xl) exp(-i pi/4 Xl) exp(+i pi/4 Zc)``, equal to
    ``|dn><dn| + |up><up| (x) X`` up to the global phase ``exp(-i pi/4)``.
    """
    if link not in plaquette_links(layout.geom, p):
        raise ValueError(f"link {link} is not on plaquette {p}")
    c = layout.control_qubit(p)
    return GateSeq([
        Rotation(((PauliString.Z(c), -QUARTER),), "Zc"),
        Rotation(((PauliString.X(link), QUARTER),), "Xl"),
        Rotation(((PauliString.from_map({c: "Z", link: "X"}), QUARTER),), "ZcXl"),
    ])


def eq1_gate_product(layout: Layout) -> GateSeq:
    """All controlled gates applied one at a time (the unfused reference)."""
    gates: list = []
    for p in layout.controls:
        for link in plaquette_links(layout.geom, p):
            gates.extend(controlled_plaquette_gate(layout, p, link))
    return GateSeq(gates)


def build_U(
    layout: Layout,
    pair_angles: Mapping[tuple[int, int], float] | None = None,
    literal_vx: bool = False,
) -> GateSeq:
    """Four-layer stator unitary ``Vy(pi/4)^dag V_I Vy(pi/4) Vx``.

    ``pair_angles`` overrides the interaction layer; by default every
    nearest-neighbour control-link pair is rotated by pi/4.

    Each link's x-rotation is pi/4 times the number of controls it is paired
    with, so the result equals :func:`eq1_gate_product` up to a global phase
    (the per-link ``exp(-i pi/4 Zc)`` factors multiply to ``-1`` on each
    four-link control).  ``literal_vx=True`` rotates every link by pi/4 once;
    that differs from the gate product by x-rotations on shared links, which
    commute with every plaquette operator and so leave the stator intact.
    """
    layout.check_capacity()
    if pair_angles is None:
        pair_angles = {pair: QUARTER for pair in layout.nn_pairs}
    ctrl = layout.control_qubits
    if literal_vx:
        vx = layer("X", layout.link_qubits, QUARTER, "V_x")
    else:
        weight = [0] * layout.n_links
        for link, _ in layout.nn_pairs:
            weight[link] += 1
        vx = Rotation(
            tuple((PauliString.X(l), QUARTER * w) for l, w in enumerate(weight) if w), "V_x"
        )
    return GateSeq([
        vx,
        layer("Y", ctrl, QUARTER, "Vc_y"),
        pair_layer(pair_angles),
        layer("Y", ctrl, -QUARTER, "Vc_y^dag"),
    ])


def extract_links(layout: Layout, state: QubitRegister) -> tuple[QubitRegister, float]:
    """Project every control onto ``|in>``.

    Returns the normalized link state and the weight of that branch, which is
    the fidelity of the controls with ``|in>`` when they are disentangled.
    """
    nc = len(layout.controls)
    block = state.amplitudes.reshape(1 << nc, 1 << layout.n_links)
    links = block.sum(axis=0) / np.sqrt(1 << nc)
    weight = float(np.vdot(links, links).real)
    if weight < 1e-14:
        raise ProjectionError("controls have no overlap with |in>")
    return QubitRegister(links / np.sqrt(weight), check=False), weight


def stator_eigenoperator_check(
    layout: Layout,
    p: int,
    trials: int = 20,
    rng: np.random.Generator | None = None,
    operator: PauliString | None = None,
    U: GateSeq | None = None,
) -> float:
    """Max over random link states of ``|| Xc U(|in> psi) - U(|in> O psi) ||``.

    ``O`` defaults to the plaquette operator of ``p``; pass another string as
    a negative control.
    """
    rng = np.random.default_rng() if rng is None else rng
    U = build_U(layout) if U is None else U
    O = plaquette_string(layout.geom, p) if operator is None else operator
    xc = PauliString.X(layout.control_qubit(p))
    worst = 0.0
    for _ in range(trials):
        psi = QubitRegister.random(layout.n_links, rng)
        lhs = apply_pauli_string(U.apply(layout.embed_links(psi)), xc)
        rhs = U.apply(layout.embed_links(apply_pauli_string(psi.copy(), O)))
        worst = max(worst, float(np.linalg.norm(lhs.amplitudes - rhs.amplitudes)))
    return worst


# ---------------------------------------------------------------- steps


def step_WE(layout: Layout, state: QubitRegister, lam_E: float, tau: float) -> QubitRegister:
    """``exp(i tau lam_E sum_links sigma_z)`` as one diagonal phase pass."""
    if lam_E and tau:
        n = layout.n_links
        k = np.arange(n + 1)
        table = np.exp(1j * tau * lam_E * (n - 2 * k))
        _kernels.phase_by_popcount(state.amplitudes, np.uint64((1 << n) - 1), table)
    return state


def step_WB(
    layout: Layout,
    state: QubitRegister,
    lam_B: float,
    tau: float,
    mode: str = "stator",
    U: GateSeq | None = None,
) -> QubitRegister:
    """``exp(i tau lam_B sum_p B(p))`` on the links.

    ``stator`` conjugates a control x-rotation by ``U`` and needs every
    control present and in ``|in>``; ``ideal`` applies the four-body
    rotations directly.
    """
    if not (lam_B and tau):
        return state
    phi = -tau * lam_B
    if mode == "ideal":
        for B in layout.plaquettes:
            apply_pauli_rotation(state, B, phi)
    elif mode == "stator":
        if len(layout.controls) != layout.geom.n_plaquettes:
            raise CapacityError("stator mode needs every control in the register")
        U = build_U(layout) if U is None else U
        U.apply(state)
        layer("X", layout.control_qubits, phi, "Vc_x").apply(state)
        U.dagger().apply(state)
    else:
        raise ValueError(f"unknown W_B mode {mode!r}")
    return state


@dataclass(frozen=True)
class Schedule:
    """Linear ramp of one coupling; the other is held at 1.

    ``electric``: start in ``|0_E>``, ``lam_E = 1``, ``lam_B`` ramps 0 -> ratio.
    ``magnetic``: start in ``|0_B>``, ``lam_B = 1``, ``lam_E`` ramps 0 -> ratio.
    """

    direction: str
    T: float
    M: int
    ratio: float
    order: int = 1
    sampling: str = "midpoint"

    def __post_init__(self):
        if self.direction not in ("electric", "magnetic"):
            raise ValueError(f"direction must be 'electric' or 'magnetic', got {self.direction!r}")
        if not self.T >= 0:
            raise ValueError(f"total time must be >= 0, got {self.T}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"step count must be a positive integer, got {self.M}")
        if not self.ratio >= 0:
            raise ValueError(f"final ratio must be >= 0, got {self.ratio}")
        if self.order not in (1, 2):
            raise ValueError(f"Trotter order must be 1 or 2, got {self.order}")
        if self.sampling not in ("midpoint", "start"):
            raise ValueError(f"sampling must be 'midpoint' or 'start', got {self.sampling!r}")

    @property
    def tau(self) -> float:
        return self.T / self.M

    @property
    def final_ratio_BE(self) -> float:
        """Final ``lam_B / lam_E``."""
        if self.direction == "electric":
            return self.ratio
        return math.inf if self.ratio == 0 else 1.0 / self.ratio

    def couplings(self, t: float) -> tuple[float, float]:
        frac = t / self.T if self.T > 0 else 1.0
        ramp = self.ratio * frac
        return (1.0, ramp) if self.direction == "electric" else (ramp, 1.0)

    def step_couplings(self, k: int) -> tuple[float, float]:
        t0 = k * self.tau
        return self.couplings(t0 + 0.5 * self.tau if self.sampling == "midpoint" else t0)


class LinkEngine:
    """Link-basis engine: ``full`` carries every control, ``links`` none."""

    def __init__(self, geom: LatticeGeometry, with_controls: bool = False, wb_mode: str | None = None):
        self.geom = geom
        self.layout = Layout.full(geom) if with_controls else Layout.links_only(geom)
        self.layout.check_capacity()
        self.kind = "full" if with_controls else "links"
        self.wb_mode = wb_mode or ("stator" if with_controls else "ideal")
        self._U = build_U(self.layout) if self.wb_mode == "stator" else None

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def electric_vacuum(self) -> QubitRegister:
        return self.layout.initial_state()

    def magnetic_vacuum(self) -> QubitRegister:
        if self.kind == "full":
            return prepare_magnetic_gs(self.geom, full_register=True)[0]
        state = self.layout.initial_state()
        for B in self.layout.plaquettes:
            apply_projector(state, B, 1)
        return state

    def step(self, state: QubitRegister, lam_E, lam_B, tau, order=1) -> QubitRegister:
        if order == 1:
            step_WB(self.layout, state, lam_B, tau, self.wb_mode, self._U)
            step_WE(self.layout, state, lam_E, tau)
        elif order == 2:
            step_WE(self.layout, state, lam_E, 0.5 * tau)
            step_WB(self.layout, state, lam_B, tau, self.wb_mode, self._U)
            step_WE(self.layout, state, lam_E, 0.5 * tau)
        else:
            raise ValueError(f"Trotter order must be 1 or 2, got {order}")
        return state

    def wilson(self, state: QubitRegister, loop: LoopSpec) -> float:
        return expectation_pauli(state, loop_string(self.geom, loop))

    def energy(self, state: QubitRegister, lam_E, lam_B) -> float:
        zs = z_expectations(state, [PauliString.Z(l) for l in self.layout.link_qubits])
        bs = sum(expectation_pauli(state, B) for B in self.layout.plaquettes)
        return float(-lam_E * zs.sum() - lam_B * bs)

    def gauge_errors(self, state: QubitRegister) -> np.ndarray:
        return 1.0 - z_expectations(state, self.layout.stars)


def select_engine(geom: LatticeGeometry, engine: str = "auto", wb_mode: str | None = None):
    """Instantiate an engine; ``auto`` picks full, then links, then dual by capacity."""
    if engine == "auto":
        if geom.n_links + geom.n_plaquettes <= MAX_QUBITS:
            engine = "full"
        elif geom.n_links <= MAX_QUBITS:
            engine = "links"
        else:
            engine = "dual"
        log.info("engine auto-selected: %s for %r", engine, geom)
    if engine == "full":
        return LinkEngine(geom, with_controls=True, wb_mode=wb_mode)
    if engine == "links":
        return LinkEngine(geom, with_controls=False)
    if engine == "dual":
        return DualEngine(geom)
    raise ValueError(f"unknown engine {engine!r}")


@dataclass
class Trajectory:
    records: list[dict] = field(default_factory=list)
    state: object = None

    @property
    def final(self) -> dict:
        return self.records[-1]


def _loop_name(loop: LoopSpec) -> str:
    return f"W[{loop.x},{loop.y},{loop.width}x{loop.height}]"


def run_adiabatic(
    engine,
    schedule: Schedule,
    loops: Sequence[LoopSpec] = (),
    observables: Sequence[str] = ("wilson",),
    record: str = "final",
    initial=None,
) -> Trajectory:
    """Ramp the couplings over ``schedule.M`` Trotter steps.

    ``observables`` may contain ``wilson`` (every loop in ``loops``),
    ``energy`` and ``gauge``.  With ``record="all"`` a record is emitted
    before the first step and after every step; otherwise only after the last.
    """
    if record not in ("final", "all"):
        raise ValueError(f"record must be 'final' or 'all', got {record!r}")
    for loop in loops:
        engine.geom.check_loop(loop)
    if initial is None:
        state = engine.electric_vacuum() if schedule.direction == "electric" else engine.magnetic_vacuum()
    else:
        state = initial.copy() if hasattr(initial, "copy") else initial

    traj = Trajectory()

    def snapshot(step, t):
        lam_E, lam_B = schedule.couplings(t)
        rec = {"step": step, "t": t, "lam_E": lam_E, "lam_B": lam_B}
        if "wilson" in observables:
            for loop in loops:
                rec[_loop_name(loop)] = engine.wilson(state, loop)
        if "energy" in observables:
            rec["energy"] = engine.energy(state, lam_E, lam_B)
        if "gauge" in observables:
            rec["gauge_error"] = float(np.max(engine.gauge_errors(state)))
        traj.records.append(rec)

    if record == "all":
        snapshot(0, 0.0)
    for k in range(schedule.M):
        lam_E, lam_B = schedule.step_couplings(k)
        result = engine.step(state, lam_E, lam_B, schedule.tau, schedule.order)
        if result is not None:
            state = result
        if record == "all" or k == schedule.M - 1:
            snapshot(k + 1, (k + 1) * schedule.tau)
    traj.state = state
    return traj


# ---------------------------------------------------------------- ground state


def prepare_magnetic_gs(
    geom: LatticeGeometry, full_register: bool = False
) -> tuple[QubitRegister, float]:
    """Post-selected preparation of the magnetic ground state.

    Builds the stator on ``|in> (x) |0_E>`` and projects each control onto
    ``|in>``.  Returns the link state (or the whole register) and the total
    success probability.
    """
    layout = Layout.full(geom)
    state = build_U(layout).apply(layout.initial_state())
    prob = 1.0
    for q in layout.control_qubits:
        state, p = apply_projector(state, PauliString.X(q), 1)
        prob *= p
    if full_register:
        return state, prob
    links, _ = extract_links(layout, state)
    return links, prob


# ---------------------------------------------------------------- Wilson loops


def odd_square_tiling(loop: LoopSpec) -> list[LoopSpec]:
    """Tile a rectangle with odd squares, largest first (guillotine cuts)."""
    w, h = loop.width, loop.height
    k = min(w, h)
    if k % 2 == 0:
        k -= 1
    tiles = [LoopSpec(loop.x, loop.y, k, k)]
    if w > k:
        tiles += odd_square_tiling(LoopSpec(loop.x + k, loop.y, w - k, k))
    if h > k:
        tiles += odd_square_tiling(LoopSpec(loop.x, loop.y + k, w, h - k))
    return tiles


def compose_loops(geom: LatticeGeometry, loops: Sequence[LoopSpec]) -> tuple[LoopSpec, PauliString]:
    """Check that ``loops`` tile a rectangle exactly once; return it and the product string."""
    if not loops:
        raise ValueError("no loops to compose")
    covered: set[int] = set()
    product = PauliString()
    for loop in loops:
        cells = set(loop_enclosed_plaquettes(geom, loop))
        if covered & cells:
            raise ValueError("sub-loops overlap")
        covered |= cells
        product = product * loop_string(geom, loop)
    xs = [geom.plaquette_xy(p) for p in covered]
    x0, y0 = min(x for x, _ in xs), min(y for _, y in xs)
    outer = LoopSpec(x0, y0, max(x for x, _ in xs) - x0 + 1, max(y for _, y in xs) - y0 + 1)
    if len(covered) != outer.width * outer.height:
        raise ValueError("sub-loops leave gaps in the enclosing rectangle")
    return outer, product


def wilson_entangler(layout: Layout, loop: LoopSpec) -> GateSeq:
    """Entangle the loop's centre control with its links, one distance set at a time."""
    geom = layout.geom
    c_plaq = geom.plaquette_index(*loop.center_plaquette())
    c = layout.control_qubit(c_plaq)
    gates: list = []
    total = 0
    for dist, links in distance_sets(geom, loop, c_plaq):
        gates += [
            layer("X", links, QUARTER, f"V_x[d={dist:.3f}]"),
            layer("Y", (c,), QUARTER, "Vc_y"),
            pair_layer({(l, c): QUARTER for l in links}, f"V_I[d={dist:.3f}]"),
            layer("Y", (c,), -QUARTER, "Vc_y^dag"),
        ]
        total += len(links)
    if total % 4:
        gates.append(Rotation(((PauliString.Z(c), -QUARTER * (total % 4)),), "Zc-fix"))
    return GateSeq(gates)


def measure_wilson_stator(
    layout: Layout, state: QubitRegister, loop: LoopSpec, compose: bool = True
) -> float:
    """Wilson loop read out from the control(s) at the loop centre.

    Odd squares use their own central control.  Other rectangles are tiled
    by odd squares and read out as the product of the tile controls'
    ``sigma_x``.  The entangler is undone afterwards, so ``state`` is left as
    it was (up to rounding).
    """
    layout.geom.check_loop(loop)
    if loop.is_odd_square:
        tiles = [loop]
    elif compose:
        tiles = odd_square_tiling(loop)
    else:
        raise ValueError(f"{loop} is not an odd square; enable composition")
    seq = GateSeq()
    readout = PauliString()
    for tile in tiles:
        c = layout.control_qubit(layout.geom.plaquette_index(*tile.center_plaquette()))
        if expectation_pauli(state, PauliString.X(c)) < 1 - 1e-9:
            raise ValueError(f"control qubit {c} is not in |in>")
        seq = seq + wilson_entangler(layout, tile)
        readout = readout * PauliString.X(c)
    seq.apply(state)
    value = expectation_pauli(state, readout)
    seq.dagger().apply(state)
    return value
