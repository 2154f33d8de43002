import itertools
import math
from collections import Counter

import numpy as np
import pytest

from z2stator.lattice import (
    LoopSpec,
    build_lattice,
    distance_sets,
    loop_enclosed_plaquettes,
    loop_links,
    plaquette_links,
    star_links,
)
from z2stator.protocol import loop_string, plaquette_string
from z2stator.statevec import PauliString

SIZES = [(1, 1), (1, 3), (2, 2), (2, 3), (3, 2), (3, 3), (4, 4)]


def _edges(Lx, Ly):
    """Independent edge enumeration: unordered pairs of adjacent grid points."""
    pts = [(x, y) for x in range(Lx + 1) for y in range(Ly + 1)]
    return {
        frozenset((a, b))
        for a, b in itertools.combinations(pts, 2)
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
    }


@pytest.mark.parametrize("Lx,Ly", SIZES)
def test_counts_match_edge_enumeration(Lx, Ly):
    g = build_lattice(Lx, Ly)
    assert g.n_links == len(_edges(Lx, Ly))
    assert g.n_plaquettes == Lx * Ly
    assert g.n_sites == (Lx + 1) * (Ly + 1)


def test_reference_sizes():
    g = build_lattice(1, 1)
    assert (g.n_links, g.n_plaquettes, g.n_sites, g.n_controls) == (4, 1, 4, 1)
    g = build_lattice(4, 4)
    assert (g.n_links, g.n_plaquettes, g.n_sites) == (40, 16, 25)
    g = build_lattice(2, 2)
    assert g.n_links + g.n_controls == 16


@pytest.mark.parametrize("Lx,Ly", [(0, 1), (1, 0), (-1, 2)])
def test_rejects_bad_dimensions(Lx, Ly):
    with pytest.raises(ValueError):
        build_lattice(Lx, Ly)


def test_indexing_is_row_major_and_stable():
    g = build_lattice(2, 1)
    assert [g.link_key(i) for i in range(g.n_links)] == [
        (0, 0, 1), (0, 0, 2), (1, 0, 1), (1, 0, 2), (2, 0, 2), (0, 1, 1), (1, 1, 1),
    ]
    h = build_lattice(2, 1)
    assert np.array_equal(g.plaquette_table, h.plaquette_table)
    assert g == h and hash(g) == hash(h)


def test_positions():
    g = build_lattice(2, 2)
    assert tuple(g.link_positions[g.link_index(1, 0, 1)]) == (1.5, 0.0)
    assert tuple(g.link_positions[g.link_index(1, 0, 2)]) == (1.0, 0.5)
    assert tuple(g.control_positions[g.plaquette_index(1, 1)]) == (1.5, 1.5)


@pytest.mark.parametrize("Lx,Ly", SIZES)
def test_plaquette_incidence(Lx, Ly):
    g = build_lattice(Lx, Ly)
    counts = Counter(l for p in range(g.n_plaquettes) for l in plaquette_links(g, p))
    assert sum(counts.values()) == 4 * Lx * Ly
    for link in range(g.n_links):
        x, y, k = g.link_key(link)
        on_edge = (k == 1 and y in (0, Ly)) or (k == 2 and x in (0, Lx))
        assert counts[link] == (1 if on_edge else 2)
        assert g.is_boundary_link(link) == on_edge


def test_plaquette_order_counter_clockwise():
    g = build_lattice(2, 2)
    p = g.plaquette_index(1, 0)
    assert plaquette_links(g, p) == (
        g.link_index(1, 0, 1), g.link_index(2, 0, 2), g.link_index(1, 1, 1), g.link_index(1, 0, 2)
    )
    single = build_lattice(1, 1)
    assert sorted(plaquette_links(single, 0)) == [0, 1, 2, 3]


def test_plaquette_order_irrelevant_for_product():
    g = build_lattice(2, 2)
    links = plaquette_links(g, 3)
    strings = [PauliString.X(l) for l in links]
    ref = strings[0] * strings[1] * strings[2] * strings[3]
    for perm in itertools.permutations(strings):
        assert perm[0] * perm[1] * perm[2] * perm[3] == ref


def test_out_of_range_plaquette_and_site():
    g = build_lattice(2, 2)
    with pytest.raises(IndexError):
        plaquette_links(g, 4)
    with pytest.raises(IndexError):
        star_links(g, 9)


@pytest.mark.parametrize("Lx,Ly", SIZES)
def test_star_links(Lx, Ly):
    g = build_lattice(Lx, Ly)
    counts = Counter(l for s in range(g.n_sites) for l in star_links(g, s))
    assert all(counts[l] == 2 for l in range(g.n_links))
    assert len(star_links(g, g.site_index(0, 0))) == 2
    assert len(star_links(g, g.site_index(Lx, Ly))) == 2
    if Lx >= 2 and Ly >= 2:
        assert len(star_links(g, g.site_index(1, 1))) == 4
    if Lx >= 2:
        assert len(star_links(g, g.site_index(1, 0))) == 3


def test_star_commutes_with_plaquettes():
    g = build_lattice(3, 3)
    for s in range(g.n_sites):
        A = PauliString.Z(*star_links(g, s))
        for p in range(g.n_plaquettes):
            assert A.commutes_with(plaquette_string(g, p))


@pytest.mark.parametrize("w,h,count", [(1, 1, 4), (3, 3, 12), (2, 1, 6), (1, 2, 6), (2, 2, 8)])
def test_loop_links_perimeter(w, h, count):
    g = build_lattice(3, 3)
    links = loop_links(g, LoopSpec(0, 0, w, h))
    assert len(links) == len(set(links)) == count == 2 * (w + h)


def test_unit_loop_is_plaquette():
    g = build_lattice(2, 2)
    assert set(loop_links(g, LoopSpec(1, 1))) == set(plaquette_links(g, 3))


def test_loop_bounds():
    g = build_lattice(2, 2)
    with pytest.raises(ValueError):
        loop_links(g, LoopSpec(1, 1, 2, 1))
    with pytest.raises(ValueError):
        LoopSpec(0, 0, 0, 1)


@pytest.mark.parametrize("Lx,Ly", [(1, 1), (2, 2), (2, 3), (3, 3), (4, 4)])
def test_enclosed_plaquette_product_equals_loop(Lx, Ly):
    # exhaustive over all rectangles on the lattice
    g = build_lattice(Lx, Ly)
    for x, y in itertools.product(range(Lx), range(Ly)):
        for w, h in itertools.product(range(1, Lx - x + 1), range(1, Ly - y + 1)):
            loop = LoopSpec(x, y, w, h)
            cells = loop_enclosed_plaquettes(g, loop)
            assert len(cells) == w * h
            prod = PauliString()
            for p in cells:
                prod = prod * plaquette_string(g, p)
            assert prod == loop_string(g, loop)


def test_distance_sets_three_by_three():
    g = build_lattice(3, 3)
    loop = LoopSpec(0, 0, 3, 3)
    sets = distance_sets(g, loop, g.plaquette_index(1, 1))
    assert [len(links) for _, links in sets] == [4, 8]
    assert sets[0][0] == pytest.approx(1.5, abs=1e-12)
    assert sets[1][0] == pytest.approx(math.sqrt(3.25), abs=1e-12)
    flat = [l for _, links in sets for l in links]
    assert sorted(flat) == sorted(loop_links(g, loop))


def test_distance_sets_unit_loop_and_partition():
    g = build_lattice(3, 3)
    sets = distance_sets(g, LoopSpec(2, 1), g.plaquette_index(2, 1))
    assert len(sets) == 1 and len(sets[0][1]) == 4
    for loop, ctrl in [(LoopSpec(0, 0, 2, 3), 0), (LoopSpec(0, 0, 3, 2), 4)]:
        sets = distance_sets(g, loop, ctrl)
        flat = [l for _, links in sets for l in links]
        assert len(flat) == len(set(flat)) == 2 * (loop.width + loop.height)
        c = g.control_positions[ctrl]
        for d, links in sets:
            for l in links:
                assert math.dist(g.link_positions[l], c) == pytest.approx(d, abs=1e-9)
