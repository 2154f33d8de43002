import itertools
import warnings

import numpy as np
import pytest
import scipy.linalg

from oracles import sector_hamiltonian
from z2stator.errors import CapacityError, ConvergenceError
from z2stator.gauge_dual import (
    DualEngine,
    dual_map,
    dual_to_links,
    exact_ground_state,
    spectral_gap,
    trotter_step_dual,
    wilson_expectation_dual,
)
from z2stator.lattice import LoopSpec, build_lattice
from z2stator.protocol import loop_string
from z2stator.statevec import QubitRegister, expectation_pauli


def _all_loops(g):
    for x, y in itertools.product(range(g.Lx), range(g.Ly)):
        for w, h in itertools.product(range(1, g.Lx - x + 1), range(1, g.Ly - y + 1)):
            yield LoopSpec(x, y, w, h)


@pytest.mark.parametrize("Lx,Ly", [(1, 1), (2, 2), (2, 3), (3, 2)])
def test_sector_dimension_matches_dual(Lx, Ly):
    g = build_lattice(Lx, Ly)
    basis, _ = sector_hamiltonian(g, 1.0, 1.0)
    assert basis.size == 2**g.n_plaquettes


@pytest.mark.parametrize("Lx,Ly", [(1, 1), (2, 2), (2, 3)])
@pytest.mark.parametrize("lam_E,lam_B", [(1.0, 1.0), (1.0, 0.3), (0.2, 1.0), (0.7, 2.5)])
def test_spectrum_matches_sector_oracle(Lx, Ly, lam_E, lam_B):
    g = build_lattice(Lx, Ly)
    _, Hs = sector_hamiltonian(g, lam_E, lam_B)
    ref = np.linalg.eigvalsh(Hs)
    got = np.linalg.eigvalsh(dual_map(g, lam_E, lam_B).to_dense().real)
    assert got == pytest.approx(ref, abs=1e-10)


def test_single_plaquette_closed_form():
    # four boundary links: H = -4 lam_E tau_z - lam_B tau_x
    g = build_lattice(1, 1)
    for lam_E, lam_B in [(1, 1), (0.3, 2)]:
        _, e = exact_ground_state(dual_map(g, lam_E, lam_B))
        assert e == pytest.approx(-np.hypot(4 * lam_E, lam_B), abs=1e-12)


def test_map_structure():
    g = build_lattice(2, 2)
    H = dual_map(g)
    assert len(H.pairs) == 4 and len(H.singles) == 8
    assert H.zdiag[0] == g.n_links


@pytest.mark.parametrize("Lx,Ly", [(1, 1), (2, 2), (2, 3)])
def test_wilson_matches_link_basis(Lx, Ly):
    g = build_lattice(Lx, Ly)
    basis, Hs = sector_hamiltonian(g, 1.0, 0.8)
    w, V = np.linalg.eigh(Hs)
    link_vec = np.zeros(1 << g.n_links, dtype=complex)
    link_vec[basis] = V[:, 0]
    link_reg = QubitRegister(link_vec)

    dual_vec, energy = exact_ground_state(dual_map(g, 1.0, 0.8))
    assert energy == pytest.approx(w[0], abs=1e-10)
    embedded = QubitRegister(dual_to_links(g, dual_vec))
    assert abs(np.vdot(embedded.amplitudes, link_vec)) == pytest.approx(1.0, abs=1e-10)
    for loop in _all_loops(g):
        ref = expectation_pauli(link_reg, loop_string(g, loop))
        assert wilson_expectation_dual(g, dual_vec, loop) == pytest.approx(ref, abs=1e-10)


def test_lanczos_matches_dense():
    g = build_lattice(3, 4)
    H = dual_map(g, 1.0, 1.3)
    v_dense, e_dense = exact_ground_state(H)
    v_lz, e_lz = exact_ground_state(H, dense_cutoff=0)
    assert e_lz == pytest.approx(e_dense, abs=1e-10)
    assert abs(np.vdot(v_lz, v_dense)) == pytest.approx(1.0, abs=1e-9)


def test_lanczos_nonconvergence_raises():
    H = dual_map(build_lattice(3, 4), 1.0, 1.0)
    with pytest.raises(ConvergenceError):
        exact_ground_state(H, dense_cutoff=0, maxiter=1)


def test_ground_state_limits():
    g = build_lattice(2, 2)
    vec, _ = exact_ground_state(dual_map(g, 1.0, 0.0))
    assert abs(vec[0]) == pytest.approx(1.0, abs=1e-12)
    vec, _ = exact_ground_state(dual_map(g, 0.0, 1.0))
    assert vec == pytest.approx(np.full(16, 0.25), abs=1e-12)
    assert wilson_expectation_dual(g, vec, LoopSpec(0, 0, 2, 2)) == pytest.approx(1.0, abs=1e-12)


def test_gap_and_degeneracy_warning():
    g = build_lattice(2, 2)
    assert spectral_gap(dual_map(g, 1.0, 1.0)) > 0.1
    with pytest.warns(RuntimeWarning):
        # lam_E = lam_B = 0: every state is degenerate
        spectral_gap(dual_map(g, 0.0, 0.0))


def test_capacity():
    with pytest.raises(CapacityError):
        dual_map(build_lattice(6, 5))


@pytest.mark.parametrize("order", [1, 2])
def test_trotter_step_matches_split_exponentials(order):
    g = build_lattice(2, 2)
    H = dual_map(g)
    HE = np.diag(-H.zdiag).astype(complex)
    HB = dual_map(g, 0.0, 1.0).to_dense()
    lam_E, lam_B, tau = 0.7, 1.3, 0.11
    rng = np.random.default_rng(5)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    v /= np.linalg.norm(v)
    WE = lambda t: scipy.linalg.expm(-1j * t * lam_E * HE)
    WB = scipy.linalg.expm(-1j * tau * lam_B * HB)
    ref = WE(tau) @ WB @ v if order == 1 else WE(tau / 2) @ WB @ WE(tau / 2) @ v
    assert trotter_step_dual(H, v, lam_E, lam_B, tau, order) == pytest.approx(ref, abs=1e-13)
    with pytest.raises(ValueError):
        trotter_step_dual(H, v, lam_E, lam_B, tau, 3)


@pytest.mark.parametrize("order,slope", [(1, -1.0), (2, -2.0)])
def test_trotter_error_slope(order, slope):
    g = build_lattice(2, 2)
    H = dual_map(g, 1.0, 1.0)
    U = scipy.linalg.expm(-1j * 1.0 * H.to_dense())
    v0 = np.full(16, 0.25, dtype=complex)
    Ms = np.array([20, 40, 80, 160])
    errs = []
    for M in Ms:
        v = v0.copy()
        for _ in range(M):
            v = trotter_step_dual(H, v, 1.0, 1.0, 1.0 / M, order)
        errs.append(np.linalg.norm(v - U @ v0))
    fit = np.polyfit(np.log(Ms), np.log(errs), 1)[0]
    assert fit == pytest.approx(slope, abs=0.1)


def test_engine_adapter():
    g = build_lattice(2, 2)
    eng = DualEngine(g)
    assert eng.kind == "dual" and eng.n_qubits == 4
    vac = eng.electric_vacuum()
    assert eng.energy(vac, 1.0, 0.0) == pytest.approx(-g.n_links)
    assert eng.wilson(vac, LoopSpec(0, 0)) == pytest.approx(0.0, abs=1e-15)
    assert eng.wilson(eng.magnetic_vacuum(), LoopSpec(0, 0, 2, 1)) == pytest.approx(1.0)
    assert not eng.gauge_errors(vac).any()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        vec, e = eng.ground_state(1.0, 1.0)
    assert eng.energy(vec, 1.0, 1.0) == pytest.approx(e, abs=1e-10)
