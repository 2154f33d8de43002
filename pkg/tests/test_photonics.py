import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from z2stator.lattice import build_lattice
from z2stator.photonics import (
    GradientSpec,
    InteractionModel,
    SidebandSchedule,
    atom_positions,
    canonical_nn_schedule,
    collision_report,
    control_control_unitary,
    coupling_profile,
    effective_interaction,
    error_budget,
    gauge_violation_run,
    ideal_coupling,
    resonant_pairs,
    zeeman_shift,
)
from z2stator.protocol import Layout, Schedule

SQRT2 = math.sqrt(2)
GOLDEN = (1 + math.sqrt(5)) / 2


def _nn_set(geom):
    """Independent NN set: control-link pairs at distance exactly 1/2."""
    pos, kind = atom_positions(geom)
    out = set()
    for i, j in itertools.combinations(range(len(pos)), 2):
        if kind[i] != kind[j] and abs(np.linalg.norm(pos[i] - pos[j]) - 0.5) < 1e-12:
            out.add((i, j))
    return out


# ---------------------------------------------------------------- profile and shifts


def test_cavity_profile_is_flat():
    assert coupling_profile(InteractionModel("cavity"), 7.3) == 1.0
    assert coupling_profile(InteractionModel("cavity"), 0.0) == 1.0


def test_crystal_profile():
    m = InteractionModel("photonic-crystal", L=2.0)
    # r = L before normalization is e^-1; normalizing at r_ref = L leaves 1
    assert coupling_profile(m, 2.0, r_ref=2.0) == pytest.approx(1.0)
    assert coupling_profile(m, 2.0, r_ref=1.0) * (math.exp(-0.5) / math.sqrt(0.5)) == pytest.approx(
        math.exp(-1.0)
    )
    one = InteractionModel("photonic-crystal", L=1.0)
    ratio = coupling_profile(one, math.sqrt(5))
    assert ratio == pytest.approx(math.exp(-(math.sqrt(5) - 1)) / 5**0.25, rel=1e-12)
    assert ratio == pytest.approx(0.193, abs=2e-3)  # quoted value is rounded; exact is 0.1943
    with pytest.raises(ValueError):
        coupling_profile(one, 0.0)


def test_crystal_profile_decreasing():
    m = InteractionModel("photonic-crystal", L=0.5)
    vals = [coupling_profile(m, r, 0.5) for r in np.linspace(0.2, 5, 30)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize(
    "kwargs", [dict(kind="laser"), dict(J=0.0), dict(kind="photonic-crystal", L=0.0), dict(C=-1.0)]
)
def test_model_validation(kwargs):
    with pytest.raises(ValueError):
        InteractionModel(**kwargs)


def test_zeeman_shift():
    grad = GradientSpec(1.0, SQRT2, g=1.0)
    assert zeeman_shift(grad, (0, 0)) == 0
    assert zeeman_shift(grad, (1, 0)) == pytest.approx(1.0)
    g3 = GradientSpec(0.7, 1.9, g=2.5)
    for x, y in [(0, 0), (1.5, 2.0), (-3, 0.5)]:
        assert zeeman_shift(g3, (x + 1, y)) - zeeman_shift(g3, (x, y)) == pytest.approx(2.5 * 0.7)
    with pytest.raises(ValueError):
        GradientSpec(0, 0)
    with pytest.raises(ValueError):
        GradientSpec(1, 1, g=0)


# ---------------------------------------------------------------- schedules


def test_canonical_schedule():
    s = canonical_nn_schedule(GradientSpec(1.0, SQRT2))
    assert s.beat_notes() == pytest.approx([0.5, SQRT2 / 2])
    assert len(s.beat_notes(cross_terms=True)) == 3
    with pytest.raises(ValueError):
        canonical_nn_schedule(GradientSpec(1.0, 1.0))
    with pytest.raises(ValueError):
        canonical_nn_schedule(GradientSpec(1.0, 0.0))
    with pytest.raises(ValueError):
        SidebandSchedule(((1.0, 0.0), (0.1, 1e-9)), resolution=1e-6)


@pytest.mark.parametrize("L", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("q", [SQRT2, GOLDEN])
def test_irrational_gradient_selects_nn(L, q):
    g = build_lattice(L, L)
    grad = GradientSpec(1.0, q)
    cm = resonant_pairs(g, grad, canonical_nn_schedule(grad))
    assert cm.resonant_set() == _nn_set(g)


def test_selection_with_resolution_four_by_four():
    g = build_lattice(4, 4)
    grad = GradientSpec(1.0, SQRT2)
    cm = resonant_pairs(g, grad, canonical_nn_schedule(grad, 1e-6), 1e-6)
    assert cm.resonant_set() == _nn_set(g)
    assert len(cm.resonant_set()) == 64


def test_resonance_symmetric_and_translation_invariant():
    g = build_lattice(3, 2)
    grad = GradientSpec(0.8, 1.7, g=1.3)
    a = resonant_pairs(g, grad, canonical_nn_schedule(grad))
    assert np.array_equal(a.resonant, a.resonant.T)
    assert np.allclose(a.detuning, a.detuning.T)
    # a shifted origin adds a constant to every shift and cancels in differences
    pos, _ = atom_positions(g)
    w = np.array([zeeman_shift(grad, p) for p in pos])
    w2 = np.array([zeeman_shift(grad, p + np.array([3.0, -2.0])) for p in pos])
    assert np.allclose(w[:, None] - w[None, :], w2[:, None] - w2[None, :])


def test_cross_terms_add_spurious_pairs():
    g = build_lattice(2, 2)
    grad = GradientSpec(1.0, SQRT2)
    s = canonical_nn_schedule(grad)
    plain = resonant_pairs(g, grad, s).resonant_set()
    cross = resonant_pairs(g, grad, s, cross_terms=True).resonant_set()
    assert plain < cross
    pos, kind = atom_positions(g)
    for i, j in cross - plain:
        d = pos[i] - pos[j]
        # (q - p)/2 beat matches (dx, dy) = +-(-1/2, 1/2): diagonal link neighbours
        assert kind[i] == kind[j] == 0 and abs(d[0]) == abs(d[1]) == 0.5


def test_empty_schedule():
    g = build_lattice(2, 2)
    cm = resonant_pairs(g, GradientSpec(1.0, SQRT2), SidebandSchedule(()))
    assert not cm.resonant_set()


def test_large_resolution_spurious_resonances():
    g = build_lattice(3, 3)
    grad = GradientSpec(1.0, SQRT2)
    s = canonical_nn_schedule(grad)
    gap = collision_report(g, grad).min_gap
    cm = resonant_pairs(g, grad, s, resolution=1.01 * gap)
    extra = cm.resonant_set() - _nn_set(g)
    assert extra
    rep = collision_report(g, grad, 1.01 * gap)
    assert {(c["i"], c["j"]) for c in rep.collisions} == extra
    assert all(c["distance"] > 0.5 for c in rep.collisions)


# ---------------------------------------------------------------- collisions


def _exact_collisions(L, p, q):
    """Rational enumeration: non-NN pairs whose p dx + q dy equals +-p/2 or +-q/2."""
    g = build_lattice(L, L)
    pos, _ = atom_positions(g)
    pos = [(Fraction(x).limit_denominator(2), Fraction(y).limit_denominator(2)) for x, y in pos]
    nn = _nn_set(g)
    targets = {abs(Fraction(p, 2)), abs(Fraction(q, 2))}
    hits = set()
    for i, j in itertools.combinations(range(len(pos)), 2):
        f = abs(p * (pos[i][0] - pos[j][0]) + q * (pos[i][1] - pos[j][1]))
        if f in targets and (i, j) not in nn:
            hits.add((i, j))
    return hits


@pytest.mark.parametrize("p,q", [(1, 2), (3, 5), (1, 3)])
def test_rational_collisions_match_exact_enumeration(p, q):
    g = build_lattice(3, 3)
    rep = collision_report(g, GradientSpec(p, q))
    assert {(c["i"], c["j"]) for c in rep.collisions} == _exact_collisions(3, p, q)
    assert rep.min_gap == 0.0


def test_rational_max_safe_size():
    rep = collision_report(build_lattice(4, 4), GradientSpec(3, 5))
    assert rep.max_safe_size == 2
    assert rep.collisions and not rep.nn_only
    # the safe size is consistent with direct enumeration
    assert not _exact_collisions(2, 3, 5) and _exact_collisions(3, 3, 5)
    assert collision_report(build_lattice(2, 2), GradientSpec(1, 2)).max_safe_size == 0


def test_irrational_no_collisions():
    rep = collision_report(build_lattice(4, 4), GradientSpec(1.0, SQRT2), 0.0)
    assert rep.nn_only and rep.max_safe_size is None and rep.min_gap > 0.01
    assert "NN-only" in rep.summary()


def test_huge_resolution_everything_collides():
    rep = collision_report(build_lattice(2, 2), GradientSpec(1.0, SQRT2), 1e9)
    n = build_lattice(2, 2).n_links + 4
    assert len(rep.collisions) == n * (n - 1) // 2 - 16
    assert rep.max_safe_size == 0


# ---------------------------------------------------------------- effective interaction


def _canon(geom, g=1.0):
    grad = GradientSpec(1.0, SQRT2, g=g)
    return grad, canonical_nn_schedule(grad)


def test_effective_interaction_cavity():
    geom = build_lattice(2, 2)
    grad, s = _canon(geom, g=20.0)
    cm = effective_interaction(InteractionModel(J=1.0), geom, grad, s, residual_mode="suppressed")
    nn = cm.nn_mask
    assert np.all(cm.strength[nn] == 1.0)
    off = ~nn & ~np.eye(cm.n_atoms, dtype=bool)
    expected = np.minimum(1.0, 1.0 / cm.detuning[off])
    assert cm.strength[off] == pytest.approx(expected)
    assert np.allclose(cm.strength, cm.strength.T) and not cm.strength.diagonal().any()
    bare = effective_interaction(InteractionModel(J=1.0), geom, grad, s, residual_mode="bare")
    assert np.all(bare.strength >= cm.strength - 1e-15)
    with pytest.raises(ValueError):
        effective_interaction(InteractionModel(), geom, grad, s, residual_mode="worst")


def test_effective_interaction_crystal_damps_residuals():
    geom = build_lattice(2, 2)
    grad, s = _canon(geom, g=5.0)
    cav = effective_interaction(InteractionModel("cavity"), geom, grad, s)
    cry = effective_interaction(InteractionModel("photonic-crystal", L=0.5), geom, grad, s)
    nn = cav.nn_mask
    assert np.allclose(cry.strength[nn], 1.0)
    off = ~nn
    assert np.all(cry.strength[off] <= cav.strength[off] + 1e-15)
    assert np.any(cry.strength[off] < cav.strength[off])


def test_effective_interaction_scaling_g():
    geom = build_lattice(2, 2)
    m = InteractionModel("photonic-crystal", L=1.0)
    grad, s = _canon(geom, g=3.0)
    grad10, s10 = _canon(geom, g=30.0)
    a = effective_interaction(m, geom, grad, s)
    b = effective_interaction(m, geom, grad10, s10)
    assert np.all(b.strength <= a.strength + 1e-15)
    assert np.array_equal(a.strength[a.nn_mask], b.strength[b.nn_mask])


def test_effective_interaction_infinite_gradient_is_ideal():
    geom = build_lattice(2, 2)
    grad, s = _canon(geom, g=1e9)
    cm = effective_interaction(InteractionModel(J=2.0), geom, grad, s)
    assert np.array_equal(cm.strength, ideal_coupling(geom, 2.0).strength)


def test_coupling_csv(tmp_path):
    geom = build_lattice(1, 1)
    cm = ideal_coupling(geom)
    path = tmp_path / "c.csv"
    cm.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0].startswith("i,j,pair_kind")
    assert len(rows) == 1 + 10
    assert sum("desired-NN" in r for r in rows) == 4
    rep = collision_report(geom, GradientSpec(1, 2))
    rep.to_csv(tmp_path / "r.csv")
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 1 + len(rep.collisions)


# ---------------------------------------------------------------- undesired interactions


SCHED = Schedule("electric", T=1.0, M=6, ratio=2.0)


def _shortest_control_link(cm):
    d = cm.distance
    nl = cm.geom.n_links
    return [
        (i, j) for i in range(nl) for j in range(nl, cm.n_atoms)
        if abs(d[i, j] - math.sqrt(5) / 2) < 1e-9
    ]


def test_ideal_run_preserves_gauge():
    g = build_lattice(2, 2)
    run = gauge_violation_run(g, ideal_coupling(g), SCHED)
    assert run.errors.shape == (SCHED.M + 1, g.n_sites)
    assert run.max_error.max() < 1e-10


def test_link_link_residuals_cancel():
    g = build_lattice(2, 2)
    ideal = gauge_violation_run(g, ideal_coupling(g), SCHED).state
    noisy = ideal_coupling(g).with_extra({(0, 3): 0.3, (1, 5): 0.2, (2, 11): 0.05})
    out = gauge_violation_run(g, noisy, SCHED).state
    assert np.linalg.norm(out.amplitudes - ideal.amplitudes) < 1e-12


def test_control_control_residuals_conjugate():
    g = build_lattice(2, 2)
    lay = Layout.full(g)
    ideal_cm = ideal_coupling(g)
    noisy = ideal_cm.with_extra({(12, 15): 0.25, (13, 14): 0.1, (12, 13): 0.05})
    Ucc = control_control_unitary(noisy)
    assert len(Ucc.terms) == 3
    got = gauge_violation_run(g, noisy, SCHED).state
    start = Ucc.apply(lay.initial_state())
    ref = Ucc.dagger().apply(gauge_violation_run(g, ideal_cm, SCHED, initial=start).state)
    assert np.linalg.norm(got.amplitudes - ref.amplitudes) < 1e-10
    ideal = gauge_violation_run(g, ideal_cm, SCHED).state
    assert np.linalg.norm(got.amplitudes - ideal.amplitudes) > 1e-3


def test_control_link_residuals_break_gauge():
    g = build_lattice(2, 2)
    cm = ideal_coupling(g)
    pairs = _shortest_control_link(cm)
    assert len(pairs) == 16
    worst = []
    for s in [0.02, 0.04, 0.06, 0.08, 0.1]:
        run = gauge_violation_run(g, cm.with_extra({p: s for p in pairs}), SCHED)
        worst.append(run.max_error.max())
    assert worst[0] > 0
    assert all(a < b for a, b in zip(worst, worst[1:]))


def test_gauge_run_rejects_other_lattice():
    with pytest.raises(ValueError):
        gauge_violation_run(build_lattice(2, 2), ideal_coupling(build_lattice(2, 1)), SCHED)


# ---------------------------------------------------------------- budget


def test_budget_exponent_default():
    Cs = np.logspace(1, 4, 13)
    T = [error_budget(C, 1.0).T_max for C in Cs]
    slope = np.polyfit(np.log(Cs), np.log(T), 1)[0]
    assert slope == pytest.approx(2 / 3, abs=0.05)


@pytest.mark.parametrize("order,kappa", [(1, 1.0), (2, 0.5), (1, 0.5)])
def test_budget_exponent_knob(order, kappa):
    Cs = np.logspace(2, 5, 10)
    T = [error_budget(C, 1.0, order, gate_exponent=kappa, gate_coef=1e-3).T_max for C in Cs]
    slope = np.polyfit(np.log(Cs), np.log(T), 1)[0]
    assert slope == pytest.approx(kappa * order / (order + 1), abs=0.02)


def test_budget_limits():
    big = error_budget(1e30, 1.0, M_max=1000)
    assert big.M == 1000
    assert big.eps_trotter == pytest.approx(1e-6)
    assert big.eps_min == pytest.approx(big.eps_trotter, rel=1e-12)
    r = error_budget(100.0, 2.0)
    assert r.eps_min == pytest.approx(r.eps_trotter + r.eps_gate)
    # M -> 2M: the second-order term falls by 4
    r2 = error_budget(1e30, 2.0, M_max=2 * r.M)
    r1 = error_budget(1e30, 2.0, M_max=r.M)
    assert r1.eps_trotter / r2.eps_trotter == pytest.approx(4.0)
    with pytest.raises(ValueError):
        error_budget(0.0, 1.0)


def test_budget_optimum_is_minimal():
    r = error_budget(500.0, 3.0)
    a, b = 27.0, 1e-2 / 500.0
    eps = lambda M: a / M**2 + M * b
    assert r.eps_min == pytest.approx(eps(r.M))
    assert eps(r.M) <= eps(r.M - 1) and eps(r.M) <= eps(r.M + 1)
