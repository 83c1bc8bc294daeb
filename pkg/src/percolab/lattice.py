"""Square-lattice geometry: vertices, adjacencies, rectangles, parity.

Vertices are plain (x, y) integer tuples.  Rectangles are inclusive
vertex ranges: Rect(0, 0, n, m) contains (n+1)(m+1) vertices.
"""

import enum
from dataclasses import dataclass

Vertex = tuple  # (x, y) with integer entries


class Adjacency(enum.Enum):
    ORDINARY = "ordinary"  # 4-neighbour (L1 distance 1)
    STAR = "star"          # 8-neighbour (Linf distance 1)


# Deterministic neighbour order: E, N, W, S, then NE, NW, SW, SE.
ORDINARY_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))
DIAGONAL_STEPS = ((1, 1), (-1, 1), (-1, -1), (1, -1))
STAR_STEPS = ORDINARY_STEPS + DIAGONAL_STEPS


def neighbors(v: Vertex, adj: Adjacency = Adjacency.ORDINARY) -> list:
    x, y = v
    steps = ORDINARY_STEPS if adj is Adjacency.ORDINARY else STAR_STEPS
    return [(x + dx, y + dy) for dx, dy in steps]


def parity(v: Vertex) -> int:
    """0 for even vertices (x+y even), 1 for odd."""
    return (v[0] + v[1]) & 1


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"degenerate Rect {self}")

    @property
    def nx(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def ny(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def contains(self, v: Vertex) -> bool:
        return self.x0 <= v[0] <= self.x1 and self.y0 <= v[1] <= self.y1

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and other.x1 <= self.x1
                and self.y0 <= other.y0 and other.y1 <= self.y1)

    def vertices(self):
        for x in range(self.x0, self.x1 + 1):
            for y in range(self.y0, self.y1 + 1):
                yield (x, y)

    def dilate(self, r: int) -> "Rect":
        return Rect(self.x0 - r, self.y0 - r, self.x1 + r, self.y1 + r)


def box(n: int) -> Rect:
    """B(n) = [-n, n]^2."""
    return Rect(-n, -n, n, n)


def boundary(r: Rect) -> list:
    """Vertices at L1-distance 1 outside r, no duplicates.

    The L1 halo has no diagonal corners, so the four sides are disjoint.
    """
    out = []
    for x in range(r.x0, r.x1 + 1):
        out.append((x, r.y1 + 1))
        out.append((x, r.y0 - 1))
    for y in range(r.y0, r.y1 + 1):
        out.append((r.x0 - 1, y))
        out.append((r.x1 + 1, y))
    return out
