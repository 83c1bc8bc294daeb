"""Explicitly i.i.d.-representable spin models: Bernoulli site percolation
and the windowed-majority field.

Both use I = Z^2 with k = 1 underlying levels and the logistic family
p = exp(h)/(exp(h)+exp(-h)).  The majority window convention:
the "2n x 2n square centered at v" is [v_x-n, v_x+n-1] x [v_y-n, v_y+n-1]
(contains v, side exactly 2n).
"""

import math

import numpy as np

from .clusters import SpinField
from .errors import ScanCapExceeded
from .lattice import Rect, Vertex
from .representation import (LevelDistribution, RealizationStore,
                             RepresentationProfile, logistic_family)


def bernoulli_p(h: float) -> float:
    """p = exp(h)/(exp(h)+exp(-h)) = 1/(1+exp(-2h))."""
    return 1.0 / (1.0 + math.exp(-2.0 * h))


def h_from_p(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    return 0.5 * math.log(p / (1.0 - p))


def _ring_cells(v: Vertex, r: int):
    """Cells at Linf distance exactly r from v, lexicographic order."""
    x, y = v
    cells = []
    for a in range(x - r, x + r + 1):
        for b in range(y - r, y + r + 1):
            if max(abs(a - x), abs(b - y)) == r:
                cells.append((a, b))
    return cells


class BernoulliModel:
    """sigma_v = 2 X_v - 1 with X_v ~ Bernoulli(p(h))."""

    name = "bernoulli"
    family: LevelDistribution = logistic_family()
    profile = RepresentationProfile(C0=1.0, gamma=1.0, alpha=0.25)

    def sigma(self, v: Vertex, store: RealizationStore, h: float) -> int:
        return 1 if store.uniform_vertex(v) < bernoulli_p(h) else -1

    def sample_field(self, rect: Rect, store: RealizationStore,
                     h: float) -> SpinField:
        us = store.uniform_vertex_grid(np.arange(rect.x0, rect.x1 + 1),
                                       np.arange(rect.y0, rect.y1 + 1))
        spins = np.where(us < bernoulli_p(h), 1, -1).astype(np.int8)
        return SpinField(rect, spins, model=self.name, params={"h": h})

    # determination sequence: v itself, then Linf rings (never needed)
    def determination_index(self, v: Vertex, m: int) -> Vertex:
        if m < 1:
            raise ValueError("m >= 1 required")
        if m == 1:
            return v
        r = 1
        while (2 * r + 1) ** 2 < m:
            r += 1
        return _ring_cells(v, r)[m - (2 * r - 1) ** 2 - 1]

    def rank_of(self, v: Vertex, j: Vertex) -> float:
        d = max(abs(j[0] - v[0]), abs(j[1] - v[1]))
        if d == 0:
            return 1
        base = (2 * d - 1) ** 2
        return base + _ring_cells(v, d).index(j) + 1

    def is_determined(self, v: Vertex, m: int, store: RealizationStore,
                      h: float) -> bool:
        return m >= 1


def bernoulli_field(rect: Rect, store: RealizationStore, h: float) -> SpinField:
    return BernoulliModel().sample_field(rect, store, h)


class MajorityWindowModel:
    """sigma_v = sign of (#1s - #0s) over the first window W_n(v) where the
    difference exceeds the threshold in absolute value."""

    name = "majority"
    family: LevelDistribution = logistic_family()
    profile = RepresentationProfile(C0=2.0, gamma=1.0, alpha=0.2)

    def __init__(self, threshold: int = 5, scan_cap: int = 2 ** 14):
        if threshold < 1:
            raise ValueError("threshold must be >= 1")
        self.threshold = threshold
        self.scan_cap = scan_cap

    # window shells -----------------------------------------------------
    def window(self, v: Vertex, n: int) -> Rect:
        x, y = v
        return Rect(x - n, y - n, x + n - 1, y + n - 1)

    def shell_cells(self, v: Vertex, n: int):
        """W_n(v) \\ W_{n-1}(v) in lexicographic order."""
        inner = self.window(v, n - 1) if n > 1 else None
        return [c for c in self.window(v, n).vertices()
                if inner is None or not inner.contains(c)]

    def determination_index(self, v: Vertex, m: int) -> Vertex:
        if m < 1:
            raise ValueError("m >= 1 required")
        n = 1
        while 4 * n * n < m:
            n += 1
        return self.shell_cells(v, n)[m - 4 * (n - 1) ** 2 - 1]

    def rank_of(self, v: Vertex, j: Vertex) -> float:
        n = max(v[0] - j[0], j[0] - v[0] + 1, v[1] - j[1], j[1] - v[1] + 1)
        base = 4 * (n - 1) ** 2
        return base + self.shell_cells(v, n).index(j) + 1

    # scan --------------------------------------------------------------
    def _scan(self, v: Vertex, store: RealizationStore, h: float,
              known: int, fill: int) -> int:
        """Majority scan where only the first `known` sequence indices are
        realized and every later cell takes the constant `fill` level.
        known = -1 means everything is realized."""
        p = bernoulli_p(h)
        diff = 0
        idx = 0
        for n in range(1, self.scan_cap + 1):
            for cell in self.shell_cells(v, n):
                if known < 0 or idx < known:
                    x = 1 if store.uniform_vertex(cell) < p else 0
                else:
                    x = fill
                diff += 2 * x - 1
                idx += 1
            if abs(diff) > self.threshold:
                return 1 if diff > 0 else -1
        raise ScanCapExceeded(f"no decision within n <= {self.scan_cap}")

    def sigma(self, v: Vertex, store: RealizationStore, h: float) -> int:
        return self._scan(v, store, h, known=-1, fill=0)

    def is_determined(self, v: Vertex, m: int, store: RealizationStore,
                      h: float) -> bool:
        """Exact via monotone extreme completions: the prefix determines
        sigma_v iff the all-0 and all-1 completions agree."""
        lo = self._scan(v, store, h, known=m, fill=0)
        hi = self._scan(v, store, h, known=m, fill=1)
        return lo == hi

    def sample_field(self, rect: Rect, store: RealizationStore,
                     h: float) -> SpinField:
        """Vectorized scan over the whole window via integral images,
        growing the realized margin until every vertex is decided."""
        p = bernoulli_p(h)
        margin = 8
        while margin <= self.scan_cap:
            xs = np.arange(rect.x0 - margin, rect.x1 + margin)
            ys = np.arange(rect.y0 - margin, rect.y1 + margin)
            levels = (store.uniform_vertex_grid(xs, ys) < p).astype(np.int64)
            S = np.zeros((len(xs) + 1, len(ys) + 1), dtype=np.int64)
            S[1:, 1:] = levels.cumsum(0).cumsum(1)
            spins = np.zeros((rect.nx, rect.ny), dtype=np.int8)
            undecided = np.ones_like(spins, dtype=bool)
            ai = np.arange(rect.nx) + margin  # array coords of vertices
            bj = np.arange(rect.ny) + margin
            A, B = np.meshgrid(ai, bj, indexing="ij")
            for n in range(1, margin + 1):
                ones = (S[A + n, B + n] - S[A - n, B + n]
                        - S[A + n, B - n] + S[A - n, B - n])
                diff = 2 * ones - 4 * n * n
                hit = undecided & (np.abs(diff) > self.threshold)
                spins[hit] = np.sign(diff[hit])
                undecided &= ~hit
                if not undecided.any():
                    return SpinField(rect, spins, model=self.name,
                                     params={"h": h,
                                             "threshold": self.threshold})
            margin *= 2
        raise ScanCapExceeded(
            f"field scan undecided within margin {self.scan_cap}")


def majority_sigma(v: Vertex, store: RealizationStore, h: float,
                   threshold: int = 5, scan_cap: int = 2 ** 14) -> int:
    return MajorityWindowModel(threshold, scan_cap).sigma(v, store, h)
