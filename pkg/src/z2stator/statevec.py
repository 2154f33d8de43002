"""Dense state-vector engine.

Qubit ``q`` occupies bit ``q`` of the basis index, and the basis state with
bit value 0 is spin up (``sigma_z = +1``).  All arrays are complex128.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import CapacityError, ProjectionError

__all__ = [
    "MAX_QUBITS",
    "PauliString",
    "QubitRegister",
    "UP",
    "DOWN",
    "PLUS",
    "MINUS",
    "init_product_state",
    "apply_pauli_string",
    "apply_pauli_rotation",
    "expectation_pauli",
    "z_expectations",
    "apply_projector",
    "fidelity",
    "save_amplitudes",
    "load_amplitudes",
]

MAX_QUBITS = 26

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)

_PHASES = (1, -1, 1j, -1j)

# single-qubit products a*b = phase * c
_MUL = {
    ("X", "X"): (1, None), ("Y", "Y"): (1, None), ("Z", "Z"): (1, None),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


def _snap_phase(z: complex) -> complex:
    for ph in _PHASES:
        if abs(z - ph) < 1e-12:
            return ph
    raise ValueError(f"Pauli phase must be one of +-1, +-i; got {z}")


@dataclass(frozen=True)
class PauliString:
    """``phase * prod_q sigma_{axis_q}(q)`` over distinct qubits.

    An empty factor tuple is the identity (times ``phase``).
    """

    factors: tuple[tuple[int, str], ...] = ()
    phase: complex = 1

    def __post_init__(self):
        seen = set()
        for q, axis in self.factors:
            if axis not in ("X", "Y", "Z"):
                raise ValueError(f"unknown Pauli axis {axis!r}")
            if q < 0:
                raise ValueError(f"negative qubit index {q}")
            if q in seen:
                raise ValueError(f"qubit {q} appears twice")
            seen.add(q)
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))
        object.__setattr__(self, "phase", _snap_phase(complex(self.phase)))

    @classmethod
    def from_map(cls, mapping: Mapping[int, str], phase: complex = 1) -> "PauliString":
        return cls(tuple((int(q), a) for q, a in mapping.items()), phase)

    @classmethod
    def uniform(cls, axis: str, qubits: Iterable[int], phase: complex = 1) -> "PauliString":
        return cls(tuple((int(q), axis) for q in qubits), phase)

    @classmethod
    def X(cls, *qubits: int) -> "PauliString":
        return cls.uniform("X", qubits)

    @classmethod
    def Y(cls, *qubits: int) -> "PauliString":
        return cls.uniform("Y", qubits)

    @classmethod
    def Z(cls, *qubits: int) -> "PauliString":
        return cls.uniform("Z", qubits)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (1, -1)

    @property
    def max_qubit(self) -> int:
        return max(self.qubits, default=-1)

    def masks(self) -> tuple[np.uint64, np.uint64, complex]:
        """``(xmask, zmask, coef)`` with ``P = coef * X^xmask Z^zmask``."""
        x = z = 0
        ny = 0
        for q, axis in self.factors:
            if axis in ("X", "Y"):
                x |= 1 << q
            if axis in ("Z", "Y"):
                z |= 1 << q
            ny += axis == "Y"
        return np.uint64(x), np.uint64(z), complex(self.phase * (1j) ** ny)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if not isinstance(other, PauliString):
            return NotImplemented
        phase = self.phase * other.phase
        out = dict(self.factors)
        for q, b in other.factors:
            a = out.pop(q, None)
            if a is None:
                out[q] = b
                continue
            ph, c = _MUL[(a, b)]
            phase *= ph
            if c is not None:
                out[q] = c
        return PauliString.from_map(out, phase)

    def __neg__(self) -> "PauliString":
        return PauliString(self.factors, -self.phase)

    def commutes_with(self, other: "PauliString") -> bool:
        mine = dict(self.factors)
        anti = sum(1 for q, b in other.factors if q in mine and mine[q] != b)
        return anti % 2 == 0

    def __str__(self):
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[self.phase]
        body = " ".join(f"{a}{q}" for q, a in self.factors) or "I"
        return f"{sign}{body}"


class QubitRegister:
    """Normalized amplitudes over ``2**n`` basis states."""

    def __init__(self, amplitudes: np.ndarray, check: bool = True):
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size & (amps.size - 1) or amps.size < 1:
            raise ValueError("amplitude array length must be a power of two")
        n = amps.size.bit_length() - 1
        if n > MAX_QUBITS:
            raise CapacityError(
                f"{n} qubits exceeds the state-vector limit of {MAX_QUBITS}; use the dual engine"
            )
        if check and abs(_kernels.norm_squared(amps) - 1.0) > 1e-10:
            raise ValueError("state is not normalized")
        self.n = n
        self.amplitudes = amps

    @classmethod
    def zeros(cls, n: int) -> "QubitRegister":
        check_capacity(n)
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, check=False)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "QubitRegister":
        check_capacity(n)
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(amps / np.linalg.norm(amps))

    def copy(self) -> "QubitRegister":
        return QubitRegister(self.amplitudes.copy(), check=False)

    def norm(self) -> float:
        return float(np.sqrt(_kernels.norm_squared(self.amplitudes)))

    def __len__(self):
        return self.amplitudes.size

    def __repr__(self):
        return f"QubitRegister(n={self.n})"


def check_capacity(n: int, limit: int = MAX_QUBITS) -> None:
    if n > limit:
        raise CapacityError(
            f"{n} qubits exceeds the state-vector limit of {limit}; use the dual engine"
        )


def init_product_state(assignments: Sequence[np.ndarray]) -> QubitRegister:
    """Product state with ``assignments[q]`` on qubit ``q``."""
    check_capacity(len(assignments))
    amps = np.ones(1, dtype=np.complex128)
    for q, single in enumerate(assignments):
        single = np.asarray(single, dtype=np.complex128)
        if single.shape != (2,):
            raise ValueError(f"qubit {q}: single-qubit state must have 2 amplitudes")
        if abs(np.vdot(single, single).real - 1.0) > 1e-12:
            raise ValueError(f"qubit {q}: single-qubit state is not normalized")
        # qubit q is bit q, so later qubits vary slowest
        amps = np.kron(single, amps)
    return QubitRegister(amps, check=False)


def _check_qubits(state: QubitRegister, P: PauliString) -> None:
    if P.max_qubit >= state.n:
        raise IndexError(f"{P} acts on qubit {P.max_qubit} but register has {state.n}")


def apply_pauli_string(state: QubitRegister, P: PauliString) -> QubitRegister:
    _check_qubits(state, P)
    x, z, coef = P.masks()
    _kernels.apply_pauli(state.amplitudes, x, z, coef)
    return state


def apply_pauli_rotation(state: QubitRegister, P: PauliString, phi: float) -> QubitRegister:
    """``state <- exp(-i phi P) state`` for a Hermitian Pauli string."""
    if not P.is_hermitian:
        raise ValueError(f"rotation generator {P} is not Hermitian")
    _check_qubits(state, P)
    x, z, coef = P.masks()
    _kernels.rotate_pauli(state.amplitudes, x, z, coef, np.cos(phi), np.sin(phi))
    return state


def expectation_pauli(state: QubitRegister, P: PauliString) -> float:
    if not P.is_hermitian:
        raise ValueError(f"{P} is not Hermitian")
    _check_qubits(state, P)
    x, z, coef = P.masks()
    value = _kernels.expectation_pauli(state.amplitudes, x, z, coef)
    if abs(value.imag) > 1e-8:
        raise ValueError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def z_expectations(state: QubitRegister, strings: Sequence[PauliString]) -> np.ndarray:
    """Expectations of several Z-only strings in one pass over the amplitudes."""
    masks = np.empty(len(strings), dtype=np.uint64)
    signs = np.empty(len(strings))
    for i, P in enumerate(strings):
        x, z, coef = P.masks()
        if x or coef.imag:
            raise ValueError(f"{P} is not a Hermitian Z-string")
        _check_qubits(state, P)
        masks[i] = z
        signs[i] = coef.real
    return signs * _kernels.z_expectations(state.amplitudes, masks)


def apply_projector(
    state: QubitRegister, P: PauliString, eigenvalue: int = 1
) -> tuple[QubitRegister, float]:
    """Project onto the ``eigenvalue`` eigenspace of ``P`` and renormalize.

    Returns the state and the probability of the outcome.
    """
    if eigenvalue not in (1, -1):
        raise ValueError("eigenvalue must be +1 or -1")
    if not P.is_hermitian:
        raise ValueError(f"{P} is not Hermitian")
    _check_qubits(state, P)
    flipped = state.amplitudes.copy()
    x, z, coef = P.masks()
    _kernels.apply_pauli(flipped, x, z, coef)
    amps = state.amplitudes
    amps += eigenvalue * flipped
    amps *= 0.5
    prob = float(_kernels.norm_squared(amps))
    if prob < 1e-14:
        raise ProjectionError(f"projection onto {P} = {eigenvalue:+d} annihilates the state")
    amps /= np.sqrt(prob)
    return state, prob


def fidelity(s1: QubitRegister, s2: QubitRegister) -> float:
    if s1.n != s2.n:
        raise ValueError(f"register sizes differ: {s1.n} vs {s2.n}")
    return float(abs(np.vdot(s1.amplitudes, s2.amplitudes)) ** 2)


_HEADER = struct.Struct("<4sIII")
_MAGIC = b"Z2SV"
_VERSION = 1


def save_amplitudes(state: QubitRegister, path) -> None:
    """Write a 16-byte header then ``2**n`` little-endian complex doubles."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, state.n, 0))
        fh.write(state.amplitudes.astype("<c16").tobytes())


def load_amplitudes(path) -> QubitRegister:
    with open(path, "rb") as fh:
        magic, version, n, _ = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an amplitude dump")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        check_capacity(n)
        amps = np.frombuffer(fh.read(16 << n), dtype="<c16")
    if amps.size != 1 << n:
        raise ValueError(f"{path}: truncated amplitude data")
    return QubitRegister(amps.astype(np.complex128))
