"""Exact engine for the gauge-invariant sector in plaquette-spin variables.

On an open lattice the sector with every star operator equal to +1 is spanned
by ``prod_{p in F} B(p) |0_E>`` for subsets ``F`` of plaquettes.  Giving each
plaquette a dual spin (bit ``p`` set means the plaquette has been flipped)
turns ``B(p)`` into ``tau_x(p)`` and the link ``sigma_z`` into ``tau_z tau_z``
for a link shared by two plaquettes, or a single ``tau_z`` on the boundary.
The resulting transverse-field Ising model has ``2**(Lx*Ly)`` states.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import CapacityError, ConvergenceError
from .lattice import LatticeGeometry, LoopSpec, loop_enclosed_plaquettes

__all__ = [
    "DUAL_CAP",
    "DualHamiltonian",
    "DualEngine",
    "dual_map",
    "exact_ground_state",
    "wilson_expectation_dual",
    "trotter_step_dual",
    "spectral_gap",
    "dual_to_links",
]

log = logging.getLogger(__name__)

DUAL_CAP = 25
DENSE_CUTOFF = 1 << 11


@dataclass(frozen=True, eq=False)
class DualHamiltonian:
    """``H = -lam_E [sum_pairs tau_z tau_z + sum_singles tau_z] - lam_B sum_p tau_x``."""

    geom: LatticeGeometry
    pairs: np.ndarray
    singles: np.ndarray
    lam_E: float = 1.0
    lam_B: float = 1.0
    _zdiag: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n_spins(self) -> int:
        return self.geom.n_plaquettes

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def with_couplings(self, lam_E: float, lam_B: float) -> "DualHamiltonian":
        return DualHamiltonian(self.geom, self.pairs, self.singles, lam_E, lam_B, self.zdiag)

    @property
    def zdiag(self) -> np.ndarray:
        """Eigenvalue of ``sum_links sigma_z`` on each dual basis state."""
        if self._zdiag is None:
            object.__setattr__(self, "_zdiag", _z_diagonal(self.n_spins, self.pairs, self.singles))
        return self._zdiag

    def norm_scale(self) -> float:
        return abs(self.lam_E) * self.geom.n_links + abs(self.lam_B) * self.n_spins

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = -self.lam_E * self.zdiag * v
        if self.lam_B:
            for p in range(self.n_spins):
                out -= self.lam_B * _flip(v, p)
        return out

    def to_dense(self) -> np.ndarray:
        return self.matvec_many(np.eye(self.dim, dtype=complex))

    def matvec_many(self, V: np.ndarray) -> np.ndarray:
        return np.column_stack([self.matvec(V[:, j]) for j in range(V.shape[1])])

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(
            (self.dim, self.dim), matvec=lambda v: self.matvec(np.ravel(v)), dtype=float
        )


def _spin_signs(n: int, p: int) -> np.ndarray:
    return 1 - 2 * ((np.arange(1 << n) >> p) & 1)


def _z_diagonal(n: int, pairs: np.ndarray, singles: np.ndarray) -> np.ndarray:
    diag = np.zeros(1 << n)
    signs = [_spin_signs(n, p) for p in range(n)]
    for p, q in pairs:
        diag += signs[p] * signs[q]
    for p in singles:
        diag += signs[p]
    diag.setflags(write=False)
    return diag


def _flip(v: np.ndarray, p: int) -> np.ndarray:
    """``tau_x(p) v`` as a new array."""
    half = 1 << p
    return v.reshape(-1, 2, half)[:, ::-1, :].reshape(v.shape)


def dual_map(geom: LatticeGeometry, lam_E: float = 1.0, lam_B: float = 1.0) -> DualHamiltonian:
    if geom.n_plaquettes > DUAL_CAP:
        raise CapacityError(
            f"{geom.n_plaquettes} dual spins exceeds the dual-engine limit of {DUAL_CAP}"
        )
    pairs, singles = [], []
    for link in range(geom.n_links):
        owners = geom.link_plaquettes(link)
        if len(owners) == 2:
            pairs.append(owners)
        else:
            singles.append(owners[0])
    return DualHamiltonian(
        geom,
        np.array(pairs, dtype=np.int64).reshape(-1, 2),
        np.array(singles, dtype=np.int64),
        float(lam_E),
        float(lam_B),
    )


def exact_ground_state(
    H: DualHamiltonian, tol: float = 1e-10, maxiter: int = 10_000, dense_cutoff: int = DENSE_CUTOFF
) -> tuple[np.ndarray, float]:
    """Lowest eigenpair; dense below ``dense_cutoff``, Lanczos (ARPACK) above.

    The returned vector is real, normalized and has a non-negative overlap
    with the uniform (all dual spins along +x) state.
    """
    if H.dim <= dense_cutoff:
        w, V = np.linalg.eigh(H.to_dense().real)
        vec, energy = V[:, 0], float(w[0])
    else:
        v0 = np.full(H.dim, 1.0 / np.sqrt(H.dim))
        v0 += 1e-3 * np.cos(np.arange(H.dim))
        try:
            w, V = spla.eigsh(
                H.as_linear_operator(), k=1, which="SA", tol=tol * 1e-2, maxiter=maxiter, v0=v0
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge after {maxiter} iterations") from exc
        vec, energy = V[:, 0], float(w[0])
    vec = vec / np.linalg.norm(vec)
    if vec.sum() < 0:
        vec = -vec
    residual = float(np.linalg.norm(H.matvec(vec) - energy * vec))
    if residual > tol * max(1.0, H.norm_scale()):
        raise ConvergenceError(f"ground-state residual {residual:.3e} above tolerance")
    return vec, energy


def spectral_gap(H: DualHamiltonian, dense_cutoff: int = DENSE_CUTOFF) -> float:
    if H.dim == 1:
        return 0.0
    if H.dim <= dense_cutoff:
        w = np.linalg.eigvalsh(H.to_dense().real)[:2]
    else:
        w = np.sort(spla.eigsh(H.as_linear_operator(), k=2, which="SA", tol=1e-12,
                               return_eigenvectors=False))
    gap = float(w[1] - w[0])
    if gap < 1e-10:
        warnings.warn(f"degenerate ground state (gap {gap:.2e})", RuntimeWarning, stacklevel=2)
    return gap


def _enclosed_mask(geom: LatticeGeometry, loop: LoopSpec) -> int:
    mask = 0
    for p in loop_enclosed_plaquettes(geom, loop):
        mask |= 1 << p
    return mask


def wilson_expectation_dual(geom: LatticeGeometry, state: np.ndarray, loop: LoopSpec) -> float:
    """``<prod_{p enclosed} tau_x(p)>``."""
    mask = _enclosed_mask(geom, loop)
    flipped = state[np.arange(state.size) ^ mask]
    return float(np.vdot(state, flipped).real)


def _apply_electric(state: np.ndarray, H: DualHamiltonian, angle: float) -> None:
    # exp(i angle sum sigma_z)
    state *= np.exp(1j * angle * H.zdiag)


def _apply_magnetic(state: np.ndarray, n: int, angle: float) -> np.ndarray:
    # exp(i angle sum_p tau_x(p)) in place; the factors commute
    c, s = np.cos(angle), -np.sin(angle)
    for p in range(n):
        _kernels.rotate_pauli(state, np.uint64(1 << p), np.uint64(0), 1.0 + 0j, c, s)
    return state


def trotter_step_dual(
    H: DualHamiltonian, state: np.ndarray, lam_E: float, lam_B: float, tau: float, order: int = 1
) -> np.ndarray:
    """One Trotter step of ``exp(-i tau H)``; returns the new state.

    Order 1 applies ``W_E W_B`` (magnetic factor first); order 2 applies
    ``W_E(tau/2) W_B(tau) W_E(tau/2)``.
    """
    state = np.array(state, dtype=complex)
    if order == 1:
        state = _apply_magnetic(state, H.n_spins, tau * lam_B)
        _apply_electric(state, H, tau * lam_E)
    elif order == 2:
        _apply_electric(state, H, 0.5 * tau * lam_E)
        state = _apply_magnetic(state, H.n_spins, tau * lam_B)
        _apply_electric(state, H, 0.5 * tau * lam_E)
    else:
        raise ValueError(f"Trotter order must be 1 or 2, got {order}")
    return state


def dual_to_links(geom: LatticeGeometry, state: np.ndarray) -> np.ndarray:
    """Embed a dual state into the link basis (bit ``l`` = link ``l`` down)."""
    from .statevec import check_capacity

    check_capacity(geom.n_links)
    n = geom.n_plaquettes
    masks = [0] * n
    for p in range(n):
        for link in geom.plaquette_table[p]:
            masks[p] |= 1 << int(link)
    idx = np.zeros(1 << n, dtype=np.int64)
    basis = np.arange(1 << n)
    for p in range(n):
        idx ^= ((basis >> p) & 1) * masks[p]
    out = np.zeros(1 << geom.n_links, dtype=complex)
    out[idx] = state
    return out


class DualEngine:
    """Adiabatic-run adapter for the plaquette-spin representation."""

    kind = "dual"

    def __init__(self, geom: LatticeGeometry):
        self.geom = geom
        self.H = dual_map(geom)

    @property
    def n_qubits(self) -> int:
        return self.geom.n_plaquettes

    def electric_vacuum(self) -> np.ndarray:
        state = np.zeros(self.H.dim, dtype=complex)
        state[0] = 1.0
        return state

    def magnetic_vacuum(self) -> np.ndarray:
        return np.full(self.H.dim, 1.0 / np.sqrt(self.H.dim), dtype=complex)

    def step(self, state, lam_E, lam_B, tau, order=1):
        return trotter_step_dual(self.H, state, lam_E, lam_B, tau, order)

    def wilson(self, state, loop: LoopSpec) -> float:
        return wilson_expectation_dual(self.geom, state, loop)

    def energy(self, state, lam_E, lam_B) -> float:
        return float(np.vdot(state, self.H.with_couplings(lam_E, lam_B).matvec(state)).real)

    def gauge_errors(self, state) -> np.ndarray:
        # the sector is built in
        return np.zeros(self.geom.n_sites)

    def ground_state(self, lam_E, lam_B):
        return exact_ground_state(self.H.with_couplings(lam_E, lam_B))
