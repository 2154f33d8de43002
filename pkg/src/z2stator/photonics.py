"""Physical interaction layer: coupling profiles, resonance selection, error budget.

Atoms are indexed like the qubits of a full register: links first, then one
control per plaquette.  Positions are in lattice units, so a control and
each of its four links are 1/2 apart and the closest control-link pair that
should not interact is sqrt(5)/2 apart.

An atom at ``(x, y)`` has Zeeman shift ``g (p x + q y)``.  The drive carries a
strong carrier at detuning 0 and weak sidebands; a pair ``(m, n)`` is
resonant when the shift difference matches a carrier-sideband beat note.
Sideband-sideband beats are second order in the weak amplitudes and are
ignored unless ``cross_terms=True``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .lattice import LatticeGeometry, build_lattice
from .protocol import Layout, QUARTER, Rotation, Schedule, build_U, step_WE
from .statevec import PauliString, QubitRegister, z_expectations

__all__ = [
    "InteractionModel",
    "GradientSpec",
    "SidebandSchedule",
    "CouplingMatrix",
    "CollisionReport",
    "BudgetResult",
    "GaugeRun",
    "coupling_profile",
    "zeeman_shift",
    "canonical_nn_schedule",
    "atom_positions",
    "resonant_pairs",
    "collision_report",
    "effective_interaction",
    "ideal_coupling",
    "shortest_residual_pairs",
    "control_control_unitary",
    "gauge_violation_run",
    "error_budget",
]

NN_DISTANCE = 0.5
DEFAULT_CUTOFF = 1e3


@dataclass(frozen=True)
class InteractionModel:
    kind: str = "cavity"
    J: float = 1.0
    L: float = 1.0
    C: float = 100.0

    def __post_init__(self):
        if self.kind not in ("cavity", "photonic-crystal"):
            raise ValueError(f"kind must be 'cavity' or 'photonic-crystal', got {self.kind!r}")
        if not self.J > 0:
            raise ValueError("J must be positive")
        if self.kind == "photonic-crystal" and not self.L > 0:
            raise ValueError("L must be positive for a photonic crystal")
        if not self.C > 0:
            raise ValueError("cooperativity must be positive")


@dataclass(frozen=True)
class GradientSpec:
    p: float
    q: float
    g: float = 1.0

    def __post_init__(self):
        if self.p == 0 and self.q == 0:
            raise ValueError("gradient direction (p, q) must be nonzero")
        if not self.g > 0:
            raise ValueError("gradient scale g must be positive")


@dataclass(frozen=True)
class SidebandSchedule:
    """Drive tones ``(amplitude, detuning)``; ``tones[0]`` is the carrier."""

    tones: tuple[tuple[float, float], ...]
    resolution: float = 0.0

    def __post_init__(self):
        dets = sorted(d for _, d in self.tones)
        for a, b in zip(dets, dets[1:]):
            if b - a <= self.resolution:
                raise ValueError(f"tone detunings {a} and {b} are not resolved")

    def beat_notes(self, cross_terms: bool = False) -> np.ndarray:
        """Positive frequency differences that drive a pair transition."""
        if not self.tones:
            return np.empty(0)
        dets = [d for _, d in self.tones]
        if cross_terms:
            pairs = itertools.combinations(dets, 2)
        else:
            pairs = ((dets[0], d) for d in dets[1:])
        return np.array(sorted(abs(a - b) for a, b in pairs))


def coupling_profile(model: InteractionModel, r: float, r_ref: float = 1.0) -> float:
    """``|f(r)|``: 1 in a cavity, ``exp(-r/L)/sqrt(r/L)`` normalized to 1 at ``r_ref`` in a crystal."""
    if model.kind == "cavity":
        if r < 0:
            raise ValueError("distance must be non-negative")
        return 1.0
    if r <= 0 or r_ref <= 0:
        raise ValueError("photonic-crystal profile is singular at r = 0")

    def raw(d):
        u = d / model.L
        return math.exp(-u) / math.sqrt(u)

    return raw(r) / raw(r_ref)


def zeeman_shift(grad: GradientSpec, position) -> float:
    x, y = position
    return grad.g * (grad.p * x + grad.q * y)


def canonical_nn_schedule(grad: GradientSpec, resolution: float = 0.0, amplitude: float = 0.1):
    """Carrier plus sidebands at the horizontal and vertical nearest-neighbour beats."""
    h = abs(grad.g * grad.p) * NN_DISTANCE
    v = abs(grad.g * grad.q) * NN_DISTANCE
    if abs(h - v) <= resolution:
        raise ValueError("p and q are indistinguishable: horizontal and vertical pairs collide")
    if min(h, v) <= resolution:
        raise ValueError("a zero gradient component puts a sideband on the carrier")
    return SidebandSchedule(((1.0, 0.0), (amplitude, h), (amplitude, v)), resolution)


def atom_positions(geom: LatticeGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Positions and kinds (0 link, 1 control) in full-register order."""
    pos = np.vstack([geom.link_positions, geom.control_positions])
    kind = np.r_[np.zeros(geom.n_links, dtype=int), np.ones(geom.n_controls, dtype=int)]
    return pos, kind


def _nn_mask(geom: LatticeGeometry) -> np.ndarray:
    n = geom.n_links + geom.n_controls
    mask = np.zeros((n, n), dtype=bool)
    for pair in Layout.full(geom).nn_pairs:
        mask[pair] = mask[pair[::-1]] = True
    return mask


_KIND_NAMES = ("link", "control")


@dataclass
class CouplingMatrix:
    """Pairwise couplings over links followed by controls.

    ``strength`` is symmetric with zero diagonal; ``resonant`` marks pairs
    matched by the drive and ``detuning`` holds the residual mismatch (the
    distance to the nearest beat note for off-resonant pairs).
    """

    geom: LatticeGeometry
    strength: np.ndarray
    resonant: np.ndarray
    detuning: np.ndarray
    distance: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.distance is None:
            pos, _ = atom_positions(self.geom)
            self.distance = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)

    @property
    def n_atoms(self) -> int:
        return self.strength.shape[0]

    @property
    def kinds(self) -> np.ndarray:
        return atom_positions(self.geom)[1]

    @property
    def nn_mask(self) -> np.ndarray:
        return _nn_mask(self.geom)

    def classification(self, i: int, j: int) -> str:
        return "desired-NN" if self.nn_mask[i, j] else "residual"

    def pair_kind(self, i: int, j: int) -> str:
        k = self.kinds
        return "-".join(sorted((_KIND_NAMES[k[i]], _KIND_NAMES[k[j]])))

    def nonzero_pairs(self):
        iu, ju = np.nonzero(np.triu(self.strength != 0, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    def residual_pairs(self, kind: str | None = None):
        nn = self.nn_mask
        out = [(i, j) for i, j in self.nonzero_pairs() if not nn[i, j]]
        if kind is not None:
            out = [(i, j) for i, j in out if self.pair_kind(i, j) == kind]
        return out

    def resonant_set(self) -> set[tuple[int, int]]:
        iu, ju = np.nonzero(np.triu(self.resonant, 1))
        return set(zip(iu.tolist(), ju.tolist()))

    def pair_angles(self, J: float) -> dict[tuple[int, int], float]:
        """V_I angles ``(pi/4) strength / J`` keyed by ``(qubit, qubit)``."""
        return {(i, j): QUARTER * self.strength[i, j] / J for i, j in self.nonzero_pairs()}

    def with_extra(self, pairs: dict[tuple[int, int], float]) -> "CouplingMatrix":
        """Copy with additional couplings (symmetrized), e.g. injected residuals."""
        s = self.strength.copy()
        for (i, j), v in pairs.items():
            if i == j:
                raise ValueError("self-coupling is not allowed")
            s[i, j] = s[j, i] = v
        return CouplingMatrix(self.geom, s, self.resonant.copy(), self.detuning.copy(), self.distance)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "pair_kind", "distance", "strength", "class", "resonant", "detuning"])
            for i, j in itertools.combinations(range(self.n_atoms), 2):
                w.writerow([
                    i, j, self.pair_kind(i, j), f"{self.distance[i, j]:.17g}",
                    f"{self.strength[i, j]:.17g}", self.classification(i, j),
                    int(self.resonant[i, j]), f"{self.detuning[i, j]:.17g}",
                ])


def _shift_differences(geom: LatticeGeometry, grad: GradientSpec) -> np.ndarray:
    pos, _ = atom_positions(geom)
    w = grad.g * (grad.p * pos[:, 0] + grad.q * pos[:, 1])
    return np.abs(w[:, None] - w[None, :])


def resonant_pairs(
    geom: LatticeGeometry,
    grad: GradientSpec,
    schedule: SidebandSchedule,
    resolution: float | None = None,
    cross_terms: bool = False,
) -> CouplingMatrix:
    """Classify every atom pair; strengths are 1 on resonant pairs, 0 elsewhere."""
    resolution = schedule.resolution if resolution is None else resolution
    diff = _shift_differences(geom, grad)
    beats = schedule.beat_notes(cross_terms)
    n = diff.shape[0]
    if beats.size:
        detuning = np.min(np.abs(diff[:, :, None] - beats[None, None, :]), axis=-1)
    else:
        detuning = np.full((n, n), np.inf)
    # rounding in the shift differences is far below any meaningful resolution
    tol = resolution + 1e-12 * grad.g * max(1.0, float(diff.max(initial=0.0)))
    resonant = detuning <= tol
    np.fill_diagonal(resonant, False)
    np.fill_diagonal(detuning, 0.0)
    return CouplingMatrix(geom, resonant.astype(float), resonant, detuning)


@dataclass
class CollisionReport:
    min_gap: float
    collisions: list[dict]
    max_safe_size: int | None
    search_limit: int

    @property
    def nn_only(self) -> bool:
        return not self.collisions

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "pair_kind", "distance", "frequency", "target", "mismatch"])
            for c in self.collisions:
                w.writerow([c["i"], c["j"], c["pair_kind"], f"{c['distance']:.17g}",
                            f"{c['frequency']:.17g}", f"{c['target']:.17g}", f"{c['mismatch']:.17g}"])

    def summary(self) -> str:
        safe = ("none found up to %d" % self.search_limit if self.max_safe_size is None
                else str(self.max_safe_size))
        verdict = "NN-only" if self.nn_only else f"{len(self.collisions)} collisions"
        return f"{verdict}; min gap {self.min_gap:.6g}; max safe size {safe}"


def _collisions(geom: LatticeGeometry, grad: GradientSpec, resolution: float):
    targets = np.array([abs(grad.g * grad.p), abs(grad.g * grad.q)]) * NN_DISTANCE
    diff = _shift_differences(geom, grad)
    nn = _nn_mask(geom)
    mism = np.abs(diff[:, :, None] - targets[None, None, :])
    best = mism.argmin(axis=-1)
    mism = mism.min(axis=-1)
    upper = np.triu(np.ones_like(nn), 1) & ~nn
    gap = float(mism[upper].min()) if upper.any() else math.inf
    tol = resolution + 1e-12 * grad.g * max(1.0, float(diff.max(initial=0.0)))
    return mism, best, targets, diff, upper & (mism <= tol), gap


def collision_report(
    geom: LatticeGeometry, grad: GradientSpec, resolution: float = 0.0, search_limit: int = 12
) -> CollisionReport:
    """Pairs other than the NN control-link pairs that hit a target beat note.

    ``max_safe_size`` is the largest ``L <= search_limit`` for which an
    ``L x L`` lattice is collision-free (0 if even 1x1 collides, ``None`` if
    no collision occurs up to the limit).
    """
    mism, best, targets, diff, hit, gap = _collisions(geom, grad, resolution)
    pos, kind = atom_positions(geom)
    collisions = []
    for i, j in zip(*np.nonzero(hit)):
        collisions.append({
            "i": int(i), "j": int(j),
            "pair_kind": "-".join(sorted((_KIND_NAMES[kind[i]], _KIND_NAMES[kind[j]]))),
            "distance": float(np.linalg.norm(pos[i] - pos[j])),
            "frequency": float(diff[i, j]),
            "target": float(targets[best[i, j]]),
            "mismatch": float(mism[i, j]),
        })
    max_safe = None
    for L in range(1, search_limit + 1):
        if _collisions(build_lattice(L, L), grad, resolution)[4].any():
            max_safe = L - 1
            break
    return CollisionReport(gap, collisions, max_safe, search_limit)


def effective_interaction(
    model: InteractionModel,
    geom: LatticeGeometry,
    grad: GradientSpec,
    schedule: SidebandSchedule,
    resolution: float | None = None,
    residual_mode: str = "suppressed",
    cutoff: float = DEFAULT_CUTOFF,
    cross_terms: bool = False,
) -> CouplingMatrix:
    """Pair strengths ``J f(r)`` on resonance; residuals off resonance.

    Off-resonant pairs with ``delta / (J f) > cutoff`` are dropped.  The rest
    keep ``J f`` (``bare``) or the second-order estimate ``(J f)^2 / delta``
    capped at ``J f`` (``suppressed``).
    """
    if residual_mode not in ("bare", "suppressed"):
        raise ValueError(f"residual_mode must be 'bare' or 'suppressed', got {residual_mode!r}")
    skel = resonant_pairs(geom, grad, schedule, resolution, cross_terms)
    n = skel.n_atoms
    strength = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        jf = model.J * coupling_profile(model, skel.distance[i, j], NN_DISTANCE)
        if skel.resonant[i, j]:
            s = jf
        else:
            delta = skel.detuning[i, j]
            if delta / jf > cutoff:
                s = 0.0
            elif residual_mode == "bare":
                s = jf
            else:
                s = min(jf, jf * jf / delta) if delta > 0 else jf
        strength[i, j] = strength[j, i] = s
    return CouplingMatrix(geom, strength, skel.resonant, skel.detuning, skel.distance)


def ideal_coupling(geom: LatticeGeometry, J: float = 1.0) -> CouplingMatrix:
    """Exactly ``J`` on the NN control-link pairs and nothing else."""
    nn = _nn_mask(geom)
    det = np.zeros(nn.shape)
    return CouplingMatrix(geom, J * nn.astype(float), nn.copy(), det)


def shortest_residual_pairs(coupling: CouplingMatrix, kind: str) -> list[tuple[int, int]]:
    """Non-NN pairs of ``kind`` (e.g. ``"control-link"``) at their minimal separation."""
    nn = coupling.nn_mask
    cands = [
        (i, j) for i, j in itertools.combinations(range(coupling.n_atoms), 2)
        if not nn[i, j] and coupling.pair_kind(i, j) == kind
    ]
    if not cands:
        return []
    d = min(coupling.distance[i, j] for i, j in cands)
    return [(i, j) for i, j in cands if coupling.distance[i, j] <= d + 1e-9]


def control_control_unitary(coupling: CouplingMatrix, J: float = 1.0) -> Rotation:
    """``exp(-i sum theta ZZ)`` over control-control residuals.

    Conjugating ``exp(-i theta X X)`` by the control y-layers of the stator
    unitary turns it into this diagonal factor ``U_CC``, which commutes with
    the ideal stator unitary and with ``W_E``.  A run with such residuals
    therefore equals ``U_CC^dag (ideal run) U_CC``.
    """
    terms = []
    for i, j in coupling.residual_pairs("control-control"):
        terms.append((PauliString.Z(i, j), QUARTER * coupling.strength[i, j] / J))
    return Rotation(tuple(terms), "U_CC")


@dataclass
class GaugeRun:
    errors: np.ndarray  # (M + 1, n_sites): 1 - <A(x)> before the first and after every step
    state: QubitRegister

    @property
    def max_error(self) -> np.ndarray:
        return self.errors.max(axis=1)


def gauge_violation_run(
    geom: LatticeGeometry,
    coupling: CouplingMatrix,
    schedule: Schedule,
    J: float = 1.0,
    initial: QubitRegister | None = None,
) -> GaugeRun:
    """Full-register run whose stator unitary uses the supplied couplings.

    Each step applies ``U^dag Vc_x(-tau lam_B) U`` then ``W_E``, with the
    interaction layer of ``U`` built from ``coupling`` (angle
    ``(pi/4) strength / J`` per pair).  Order-2 schedules split ``W_E``.
    """
    if coupling.geom != geom:
        raise ValueError("coupling matrix belongs to a different lattice")
    layout = Layout.full(geom)
    layout.check_capacity()
    U = build_U(layout, pair_angles=coupling.pair_angles(J))
    Ud = U.dagger()
    if initial is None:
        from .protocol import prepare_magnetic_gs

        state = (layout.initial_state() if schedule.direction == "electric"
                 else prepare_magnetic_gs(geom, full_register=True)[0])
    else:
        state = initial.copy()
    stars = layout.stars
    errors = [1.0 - z_expectations(state, stars)]
    ctrl = layout.control_qubits
    for k in range(schedule.M):
        lam_E, lam_B = schedule.step_couplings(k)
        tau = schedule.tau
        if schedule.order == 2:
            step_WE(layout, state, lam_E, 0.5 * tau)
        if lam_B and tau:
            U.apply(state)
            Rotation(tuple((PauliString.X(c), -tau * lam_B) for c in ctrl)).apply(state)
            Ud.apply(state)
        step_WE(layout, state, lam_E, tau if schedule.order == 1 else 0.5 * tau)
        errors.append(1.0 - z_expectations(state, stars))
    return GaugeRun(np.array(errors), state)


# ---------------------------------------------------------------- error budget


@dataclass(frozen=True)
class BudgetResult:
    M: int
    eps_min: float
    eps_trotter: float
    eps_gate: float
    T_max: float


def _budget_terms(T, C, order, trotter_coef, gate_coef, gate_exponent):
    a = trotter_coef * T ** (order + 1)
    b = gate_coef * C ** (-gate_exponent)
    return a, b


def _optimal_M(T, C, order, trotter_coef, gate_coef, gate_exponent, M_max):
    a, b = _budget_terms(T, C, order, trotter_coef, gate_coef, gate_exponent)
    if a == 0:
        return 1, 0.0, b
    m_star = (order * a / b) ** (1.0 / (order + 1)) if b > 0 else math.inf
    best = None
    for M in {max(1, min(M_max, math.floor(m_star))), max(1, min(M_max, math.ceil(m_star)))}:
        et, eg = a * M ** (-order), M * b
        if best is None or et + eg < best[1] + best[2]:
            best = (M, et, eg)
    return best


def error_budget(
    C: float,
    T_target: float,
    trotter_order: int = 2,
    *,
    eps_cap: float = 0.1,
    trotter_coef: float = 1.0,
    gate_coef: float = 1e-2,
    gate_exponent: float = 1.0,
    M_max: int = 10**7,
) -> BudgetResult:
    """Trotter-versus-gate error trade-off.

    ``eps(M) = trotter_coef T^(k+1) M^-k + M gate_coef C^-gate_exponent`` with
    ``k = trotter_order``, minimized over integer ``1 <= M <= M_max``.
    ``T_max`` solves ``eps_min(T) = eps_cap``.  Over continuous ``M`` this
    gives ``T_max ~ C^(gate_exponent k / (k + 1))``; the default per-step gate
    error ``~ 1/C`` with second-order steps yields the exponent 2/3, while the
    ``1/sqrt(C)`` infidelity law (``gate_exponent=0.5``) yields 1/3.
    """
    if not C > 0:
        raise ValueError("cooperativity must be positive")
    if trotter_order not in (1, 2):
        raise ValueError("Trotter order must be 1 or 2")
    if not T_target >= 0:
        raise ValueError("target time must be non-negative")
    knobs = (trotter_order, trotter_coef, gate_coef, gate_exponent)
    M, et, eg = _optimal_M(T_target, C, *knobs, M_max)

    def excess(T):
        _, a, b = _optimal_M(T, C, *knobs, M_max)
        return a + b - eps_cap

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            break
    lo = 0.0
    if excess(lo) >= 0:
        T_max = 0.0
    else:
        T_max = scipy.optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=1e-12)
    return BudgetResult(M, et + eg, et, eg, T_max)
