"""Open-boundary square lattice of plaquettes.

Sites sit on integer grid points ``(x, y)`` with ``0 <= x <= Lx`` and
``0 <= y <= Ly``.  A link is labelled by its starting site and direction
``k`` (1 = +x, 2 = +y).  Links are numbered row-major over sites, with the
direction-1 link of a site before its direction-2 link.  Plaquettes (and the
control that sits at each plaquette centre) are numbered row-major by their
lower-left corner.  All coordinates are in units of the lattice constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "LatticeGeometry",
    "LoopSpec",
    "build_lattice",
    "plaquette_links",
    "star_links",
    "loop_links",
    "loop_enclosed_plaquettes",
    "distance_sets",
]


@dataclass(frozen=True)
class LoopSpec:
    """Rectangular contour given by its lower-left plaquette and its size."""

    x: int
    y: int
    width: int = 1
    height: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"loop size must be >= 1, got {self.width}x{self.height}")

    @property
    def is_odd_square(self) -> bool:
        return self.width == self.height and self.width % 2 == 1

    def center_plaquette(self) -> tuple[int, int]:
        """Plaquette whose centre is the loop centre (odd squares only)."""
        if not self.is_odd_square:
            raise ValueError(f"{self} has no central plaquette")
        half = self.width // 2
        return self.x + half, self.y + half


class LatticeGeometry:
    """Index tables and coordinates for an ``Lx`` x ``Ly`` plaquette lattice.

    Instances are read-only after construction.
    """

    def __init__(self, Lx: int, Ly: int):
        if Lx < 1 or Ly < 1:
            raise ValueError(f"lattice dimensions must be >= 1, got {Lx}x{Ly}")
        self.Lx = int(Lx)
        self.Ly = int(Ly)

        keys = []
        for y in range(self.Ly + 1):
            for x in range(self.Lx + 1):
                if x < self.Lx:
                    keys.append((x, y, 1))
                if y < self.Ly:
                    keys.append((x, y, 2))
        self._link_keys = tuple(keys)
        self._link_index = {key: i for i, key in enumerate(keys)}

        plaq = np.empty((self.n_plaquettes, 4), dtype=np.int64)
        for p in range(self.n_plaquettes):
            x, y = self.plaquette_xy(p)
            plaq[p] = (
                self._link_index[(x, y, 1)],
                self._link_index[(x + 1, y, 2)],
                self._link_index[(x, y + 1, 1)],
                self._link_index[(x, y, 2)],
            )
        plaq.setflags(write=False)
        self.plaquette_table = plaq

        owners: list[list[int]] = [[] for _ in keys]
        for p, row in enumerate(plaq):
            for link in row:
                owners[link].append(p)
        self._link_plaquettes = tuple(tuple(o) for o in owners)

        pos = np.array(
            [(x + 0.5, y) if k == 1 else (x, y + 0.5) for x, y, k in keys], dtype=float
        )
        pos.setflags(write=False)
        self.link_positions = pos
        ctrl = np.array(
            [(p % self.Lx + 0.5, p // self.Lx + 0.5) for p in range(self.n_plaquettes)],
            dtype=float,
        )
        ctrl.setflags(write=False)
        self.control_positions = ctrl

    def __repr__(self):
        return f"LatticeGeometry({self.Lx}, {self.Ly})"

    def __eq__(self, other):
        return isinstance(other, LatticeGeometry) and (self.Lx, self.Ly) == (other.Lx, other.Ly)

    def __hash__(self):
        return hash((self.Lx, self.Ly))

    @property
    def n_links(self) -> int:
        return self.Lx * (self.Ly + 1) + (self.Lx + 1) * self.Ly

    @property
    def n_plaquettes(self) -> int:
        return self.Lx * self.Ly

    n_controls = n_plaquettes

    @property
    def n_sites(self) -> int:
        return (self.Lx + 1) * (self.Ly + 1)

    def link_index(self, x: int, y: int, k: int) -> int:
        try:
            return self._link_index[(x, y, k)]
        except KeyError:
            raise IndexError(f"no link ({x}, {y}, {k}) on {self!r}") from None

    def has_link(self, x: int, y: int, k: int) -> bool:
        return (x, y, k) in self._link_index

    def link_key(self, link: int) -> tuple[int, int, int]:
        return self._link_keys[link]

    def site_index(self, x: int, y: int) -> int:
        if not (0 <= x <= self.Lx and 0 <= y <= self.Ly):
            raise IndexError(f"no site ({x}, {y}) on {self!r}")
        return y * (self.Lx + 1) + x

    def site_xy(self, s: int) -> tuple[int, int]:
        self._check_site(s)
        return s % (self.Lx + 1), s // (self.Lx + 1)

    def plaquette_index(self, x: int, y: int) -> int:
        if not (0 <= x < self.Lx and 0 <= y < self.Ly):
            raise IndexError(f"no plaquette ({x}, {y}) on {self!r}")
        return y * self.Lx + x

    def plaquette_xy(self, p: int) -> tuple[int, int]:
        self._check_plaquette(p)
        return p % self.Lx, p // self.Lx

    def link_plaquettes(self, link: int) -> tuple[int, ...]:
        """Plaquettes bordering ``link``: two in the bulk, one on the boundary."""
        return self._link_plaquettes[link]

    def is_boundary_link(self, link: int) -> bool:
        return len(self._link_plaquettes[link]) == 1

    @cached_property
    def star_table(self) -> tuple[tuple[int, ...], ...]:
        return tuple(star_links(self, s) for s in range(self.n_sites))

    def _check_site(self, s):
        if not 0 <= s < self.n_sites:
            raise IndexError(f"site {s} out of range for {self!r}")

    def _check_plaquette(self, p):
        if not 0 <= p < self.n_plaquettes:
            raise IndexError(f"plaquette {p} out of range for {self!r}")

    def check_loop(self, loop: LoopSpec) -> None:
        if loop.x < 0 or loop.y < 0 or loop.x + loop.width > self.Lx or loop.y + loop.height > self.Ly:
            raise ValueError(f"{loop} does not fit inside {self!r}")


def build_lattice(Lx: int, Ly: int) -> LatticeGeometry:
    return LatticeGeometry(Lx, Ly)


def plaquette_links(geom: LatticeGeometry, p: int) -> tuple[int, int, int, int]:
    """Links of plaquette ``p`` counter-clockwise from its lower-left corner:
    bottom (x,1), right (x+1,2), top (x+2,1), left (x,2)."""
    geom._check_plaquette(p)
    return tuple(int(v) for v in geom.plaquette_table[p])


def star_links(geom: LatticeGeometry, s: int) -> tuple[int, ...]:
    """Links touching site ``s``; boundary sites give truncated stars."""
    x, y = geom.site_xy(s)
    candidates = [(x, y, 1), (x, y, 2), (x - 1, y, 1), (x, y - 1, 2)]
    return tuple(geom.link_index(*c) for c in candidates if geom.has_link(*c))


def loop_links(geom: LatticeGeometry, loop: LoopSpec) -> tuple[int, ...]:
    """Perimeter links of a rectangular loop (bottom, right, top, left)."""
    geom.check_loop(loop)
    x0, y0, w, h = loop.x, loop.y, loop.width, loop.height
    links = [geom.link_index(x0 + i, y0, 1) for i in range(w)]
    links += [geom.link_index(x0 + w, y0 + j, 2) for j in range(h)]
    links += [geom.link_index(x0 + i, y0 + h, 1) for i in range(w)]
    links += [geom.link_index(x0, y0 + j, 2) for j in range(h)]
    return tuple(links)


def loop_enclosed_plaquettes(geom: LatticeGeometry, loop: LoopSpec) -> tuple[int, ...]:
    geom.check_loop(loop)
    return tuple(
        geom.plaquette_index(loop.x + i, loop.y + j)
        for j in range(loop.height)
        for i in range(loop.width)
    )


def distance_sets(
    geom: LatticeGeometry, loop: LoopSpec, control: int, tol: float = 1e-9
) -> list[tuple[float, tuple[int, ...]]]:
    """Partition the loop's links by their distance to ``control``.

    Returns ``(distance, links)`` groups sorted by increasing distance.
    """
    links = loop_links(geom, loop)
    geom._check_plaquette(control)
    c = geom.control_positions[control]
    dist = [math.dist(geom.link_positions[l], c) for l in links]
    order = sorted(range(len(links)), key=lambda i: dist[i])
    groups: list[tuple[float, list[int]]] = []
    for i in order:
        if groups and abs(dist[i] - groups[-1][0]) <= tol:
            groups[-1][1].append(links[i])
        else:
            groups.append((dist[i], [links[i]]))
    return [(d, tuple(ls)) for d, ls in groups]
