"""Hex grid math on odd-row offset coordinates.

Tiles live in a width x height grid, row-major (`tile = row * width + col`),
with odd rows shifted a half-tile to the right. All geometry goes through
axial/cube coordinates, which make distance, discs, and lines parity-free.

The canonical disc ordering defined here (sorted by ring, then axial dq,
then dr) is a wire-format contract: unit move sub-action indices map to
disc slots in exactly this order.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Cube-space neighbor directions, fixed order (E, NE, NW, W, SW, SE).
CUBE_DIRS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


def offset_to_axial(col: int, row: int) -> tuple[int, int]:
    q = col - ((row - (row & 1)) >> 1)
    return q, row


def axial_to_offset(q: int, r: int) -> tuple[int, int]:
    col = q + ((r - (r & 1)) >> 1)
    return col, r


def hex_distance(col_a: int, row_a: int, col_b: int, row_b: int) -> int:
    aq, ar = offset_to_axial(col_a, row_a)
    bq, br = offset_to_axial(col_b, row_b)
    dq, dr = aq - bq, ar - br
    return max(abs(dq), abs(dr), abs(dq + dr))


@lru_cache(maxsize=None)
def disc_offsets(radius: int) -> list[tuple[int, int]]:
    """Axial offsets within `radius`, in canonical order.

    Index 0 is always the center. Radius 2 yields 19 entries, radius 3
    yields 37.
    """
    offs = []
    for dq in range(-radius, radius + 1):
        for dr in range(-radius, radius + 1):
            d = max(abs(dq), abs(dr), abs(dq + dr))
            if d <= radius:
                offs.append((d, dq, dr))
    offs.sort()
    return [(dq, dr) for (_, dq, dr) in offs]


@lru_cache(maxsize=None)
def ring_offsets(radius: int) -> list[tuple[int, int]]:
    return [o for o in disc_offsets(radius)
            if max(abs(o[0]), abs(o[1]), abs(o[0] + o[1])) == radius]


def axial_line(aq: int, ar: int, bq: int, br: int) -> list[tuple[int, int]]:
    """Hexes on the line from a to b inclusive, via cube interpolation.

    A fixed epsilon nudge breaks midpoint ties the same way everywhere, so
    lines (and therefore line-of-sight) are deterministic.
    """
    n = max(abs(aq - bq), abs(ar - br), abs((aq + ar) - (bq + br)))
    if n == 0:
        return [(aq, ar)]
    ax, az = float(aq), float(ar)
    bx, bz = float(bq), float(br)
    ay, by = -ax - az, -bx - bz
    out = []
    for i in range(n + 1):
        t = i / n
        x = ax + (bx - ax) * t + 1e-6
        y = ay + (by - ay) * t + 2e-6
        z = az + (bz - az) * t - 3e-6
        rx, ry, rz = round(x), round(y), round(z)
        dx, dy, dz = abs(rx - x), abs(ry - y), abs(rz - z)
        if dx > dy and dx > dz:
            rx = -ry - rz
        elif dy > dz:
            ry = -rx - rz
        else:
            rz = -rx - ry
        out.append((int(rx), int(rz)))
    return out


class HexGrid:
    """Geometry helpers bound to one map size, with precomputed tables."""

    def __init__(self, width: int, height: int) -> None:
        self.width = width
        self.height = height
        self.n_tiles = width * height
        self.neighbors = self._build_neighbors()
        self._disc_cache: dict[tuple[int, int], list[int]] = {}
        self._disc_slots_cache: dict[tuple[int, int], list[int]] = {}
        self._sight_cache: dict[tuple[int, int], list] = {}

    def _build_neighbors(self) -> np.ndarray:
        nbr = np.full((self.n_tiles, 6), -1, dtype=np.int32)
        for row in range(self.height):
            for col in range(self.width):
                t = row * self.width + col
                q, r = offset_to_axial(col, row)
                for k, (dq, dr) in enumerate(CUBE_DIRS):
                    nc, nr = axial_to_offset(q + dq, r + dr)
                    if 0 <= nc < self.width and 0 <= nr < self.height:
                        nbr[t, k] = nr * self.width + nc
        return nbr

    def tile_id(self, col: int, row: int) -> int:
        return row * self.width + col

    def col_row(self, tile: int) -> tuple[int, int]:
        return tile % self.width, tile // self.width

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def distance(self, a: int, b: int) -> int:
        ac, ar = self.col_row(a)
        bc, br = self.col_row(b)
        return hex_distance(ac, ar, bc, br)

    def neighbors_of(self, tile: int) -> list[int]:
        return [int(t) for t in self.neighbors[tile] if t >= 0]

    def disc(self, center: int, radius: int) -> list[int]:
        """Tile ids within `radius` of center (canonical order, in bounds)."""
        key = (center, radius)
        cached = self._disc_cache.get(key)
        if cached is None:
            c, r = self.col_row(center)
            q0, r0 = offset_to_axial(c, r)
            cached = []
            for dq, dr in disc_offsets(radius):
                nc, nr = axial_to_offset(q0 + dq, r0 + dr)
                if self.in_bounds(nc, nr):
                    cached.append(nr * self.width + nc)
            self._disc_cache[key] = cached
        return cached

    def disc_slots(self, center: int, radius: int) -> list[int]:
        """Like disc(), but keeps one slot per canonical offset: out-of-bounds
        offsets yield -1 so slot indices stay aligned across positions."""
        key = (center, radius)
        cached = self._disc_slots_cache.get(key)
        if cached is None:
            c, r = self.col_row(center)
            q0, r0 = offset_to_axial(c, r)
            cached = []
            for dq, dr in disc_offsets(radius):
                nc, nr = axial_to_offset(q0 + dq, r0 + dr)
                cached.append(nr * self.width + nc if self.in_bounds(nc, nr) else -1)
            self._disc_slots_cache[key] = cached
        return cached

    def sight_lines(self, origin: int, radius: int) -> list:
        """(target, intermediate tiles) pairs for every disc tile; the
        geometry is static per grid, so it is computed once per origin."""
        key = (origin, radius)
        cached = self._sight_cache.get(key)
        if cached is None:
            cached = []
            for target in self.disc(origin, radius):
                if target == origin:
                    continue
                line = self.line(origin, target)
                cached.append((target, tuple(line[1:-1])))
            self._sight_cache[key] = cached
        return cached

    def ring(self, center: int, radius: int) -> list[int]:
        c, r = self.col_row(center)
        q0, r0 = offset_to_axial(c, r)
        out = []
        for dq, dr in ring_offsets(radius):
            nc, nr = axial_to_offset(q0 + dq, r0 + dr)
            if self.in_bounds(nc, nr):
                out.append(nr * self.width + nc)
        return out

    def line(self, a: int, b: int) -> list[int]:
        """Tiles on the hex line a..b inclusive; off-map tiles are skipped."""
        ac, ar = self.col_row(a)
        bc, br = self.col_row(b)
        out = []
        for q, r in axial_line(*offset_to_axial(ac, ar), *offset_to_axial(bc, br)):
            nc, nr = axial_to_offset(q, r)
            if self.in_bounds(nc, nr):
                out.append(nr * self.width + nc)
        return out


_GRID_CACHE: dict[tuple[int, int], HexGrid] = {}


def grid_for(width: int, height: int) -> HexGrid:
    """Shared immutable grid instance per map size."""
    key = (width, height)
    g = _GRID_CACHE.get(key)
    if g is None:
        g = _GRID_CACHE[key] = HexGrid(width, height)
    return g
