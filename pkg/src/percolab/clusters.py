"""Cluster decomposition, crossing events and their star duals, tail fits.

Crossing paths are confined to the queried rectangle; in any box exactly
one of {horizontal + crossing (ordinary), vertical - crossing (star)}
occurs, and the audit asserts this per configuration.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, stats

from .errors import DualityViolation, InsufficientData
from .lattice import Adjacency, Rect, Vertex

_STRUCT = {
    Adjacency.ORDINARY: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    Adjacency.STAR: np.ones((3, 3), dtype=bool),
}


@dataclass
class SpinField:
    """Finite window of spins; spins[i, j] is the spin at
    (rect.x0 + i, rect.y0 + j)."""

    rect: Rect
    spins: np.ndarray  # int8 array in {-1, +1}, shape (rect.nx, rect.ny)
    model: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.shape != (self.rect.nx, self.rect.ny):
            raise ValueError("spins shape does not match rect")

    def spin_at(self, v: Vertex) -> int:
        if not self.rect.contains(v):
            raise ValueError(f"{v} outside {self.rect}")
        return int(self.spins[v[0] - self.rect.x0, v[1] - self.rect.y0])

    def subwindow(self, rect: Rect) -> np.ndarray:
        if not self.rect.contains_rect(rect):
            raise ValueError("rect exceeds field window")
        i0 = rect.x0 - self.rect.x0
        j0 = rect.y0 - self.rect.y0
        return self.spins[i0:i0 + rect.nx, j0:j0 + rect.ny]


class UnionFind:
    """Array union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


@dataclass
class ClusterLabeling:
    target_spin: int
    adjacency: Adjacency
    labels: np.ndarray      # component id per vertex (-1 off-target), field shape
    sizes: dict             # component id -> size
    rect: Rect

    def label_at(self, v: Vertex) -> int:
        return int(self.labels[v[0] - self.rect.x0, v[1] - self.rect.y0])


def label_clusters(fld: SpinField, s: int, adj: Adjacency) -> ClusterLabeling:
    """Union-find component labeling of the spin-s vertices within the window."""
    mask = fld.spins == s
    nx, ny = mask.shape
    uf = UnionFind(nx * ny)
    diag = adj is Adjacency.STAR
    for i in range(nx):
        row = mask[i]
        for j in range(ny):
            if not row[j]:
                continue
            a = i * ny + j
            if j + 1 < ny and row[j + 1]:
                uf.union(a, a + 1)
            if i + 1 < nx:
                below = mask[i + 1]
                if below[j]:
                    uf.union(a, a + ny)
                if diag:
                    if j + 1 < ny and below[j + 1]:
                        uf.union(a, a + ny + 1)
                    if j - 1 >= 0 and below[j - 1]:
                        uf.union(a, a + ny - 1)
    labels = np.full((nx, ny), -1, dtype=np.int64)
    sizes: dict = {}
    for i in range(nx):
        for j in range(ny):
            if mask[i, j]:
                r = uf.find(i * ny + j)
                labels[i, j] = r
                sizes[r] = sizes.get(r, 0) + 1
    return ClusterLabeling(s, adj, labels, sizes, fld.rect)


def cluster_size_at(fld: SpinField, v: Vertex, s: int, adj: Adjacency):
    """Size of v's spin-s component (0 if sigma_v != s), plus a truncation
    flag set when the component touches the window boundary."""
    if not fld.rect.contains(v):
        raise ValueError(f"{v} outside field window {fld.rect}")
    if fld.spin_at(v) != s:
        return 0, False
    lab = label_clusters(fld, s, adj)
    cid = lab.label_at(v)
    size = lab.sizes[cid]
    edge = np.concatenate([lab.labels[0, :], lab.labels[-1, :],
                           lab.labels[:, 0], lab.labels[:, -1]])
    truncated = bool(np.any(edge == cid))
    return size, truncated


def _component_labels(mask: np.ndarray, adj: Adjacency) -> np.ndarray:
    labels, _ = ndimage.label(mask, structure=_STRUCT[adj])
    return labels


def has_crossing(fld: SpinField, rect: Rect, direction: str, s: int,
                 adj: Adjacency) -> bool:
    """True iff a spin-s path inside rect under adj joins the left and right
    columns (horizontal) or the bottom and top rows (vertical)."""
    sub = fld.subwindow(rect)
    return crossing_from_spins(sub, direction, s, adj)


def crossing_from_spins(spins: np.ndarray, direction: str, s: int,
                        adj: Adjacency) -> bool:
    mask = spins == s
    if direction == "horizontal":
        first, last = mask[0, :], mask[-1, :]
    elif direction == "vertical":
        first, last = mask[:, 0], mask[:, -1]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if not (first.any() and last.any()):
        return False
    labels = _component_labels(mask, adj)
    if direction == "horizontal":
        a, b = labels[0, :], labels[-1, :]
    else:
        a, b = labels[:, 0], labels[:, -1]
    return bool(np.intersect1d(a[a > 0], b[b > 0]).size)


@dataclass(frozen=True)
class CrossingReport:
    H: bool
    V: bool
    H_star_minus: bool
    V_star_minus: bool


def duality_audit(fld: SpinField, rect: Rect = None) -> CrossingReport:
    """All four crossing indicators plus the exact dichotomy checks:
    H XOR V*- and V XOR H*-.  A violation is a bug, never data."""
    rect = rect or fld.rect
    sub = fld.subwindow(rect)
    rep = CrossingReport(
        H=crossing_from_spins(sub, "horizontal", +1, Adjacency.ORDINARY),
        V=crossing_from_spins(sub, "vertical", +1, Adjacency.ORDINARY),
        H_star_minus=crossing_from_spins(sub, "horizontal", -1, Adjacency.STAR),
        V_star_minus=crossing_from_spins(sub, "vertical", -1, Adjacency.STAR),
    )
    if rep.H == rep.V_star_minus or rep.V == rep.H_star_minus:
        raise DualityViolation(f"{rep} on {rect}")
    return rep


@dataclass(frozen=True)
class TailFit:
    rate: float       # lambda = -slope of log-survival
    intercept: float
    r_squared: float
    s_min: int
    s_max: int
    n_points: int


def survival_from_hist(hist: dict) -> dict:
    """Map size -> P(|C| >= size) over the histogram's support."""
    total = sum(hist.values())
    if total == 0:
        raise InsufficientData("empty histogram")
    out = {}
    acc = 0
    for s in sorted(hist, reverse=True):
        acc += hist[s]
        out[s] = acc / total
    return out


def fit_exponential_tail(hist: dict, fit_range) -> TailFit:
    """Least-squares line through (s, log survival) over the given size range.

    hist maps cluster size -> count; sizes with zero survival inside the
    range are skipped (log undefined); needs >= 5 support points.
    """
    s_min, s_max = fit_range
    surv = survival_from_hist(hist)
    pts = [(s, p) for s, p in surv.items() if s_min <= s <= s_max and p > 0]
    if len(pts) < 5:
        raise InsufficientData(
            f"only {len(pts)} tail points in [{s_min}, {s_max}]")
    xs = np.array([s for s, _ in pts], dtype=float)
    ys = np.log([p for _, p in pts])
    res = stats.linregress(xs, ys)
    return TailFit(rate=-res.slope, intercept=res.intercept,
                   r_squared=res.rvalue ** 2, s_min=s_min, s_max=s_max,
                   n_points=len(pts))


def hist_to_csv_rows(hist: dict):
    """CSV export rows: size,count,survival."""
    surv = survival_from_hist(hist)
    return [(s, hist[s], surv[s]) for s in sorted(hist)]
