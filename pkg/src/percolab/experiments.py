"""Monte Carlo drivers and statistical diagnostics.

All estimates are reproducible bit-for-bit from (master_seed, config):
replica r always uses RealizationStore(master_seed, r), curves over a
parameter grid reuse the same replica seeds (common random numbers), and
aggregation is order-independent.
"""

import csv
import json
import math
import subprocess
import time
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np
from scipy import ndimage as _ndimage

from . import rng
from .clusters import (SpinField, crossing_from_spins, duality_audit,
                       fit_exponential_tail, survival_from_hist)
from .errors import BracketFailure
from .ising import (IsingModel, IsingParams, finite_box_gibbs_batch,
                    heat_bath_prob, sample_window_batch)
from .lattice import Adjacency, Rect, box, neighbors
from .models import BernoulliModel, MajorityWindowModel, bernoulli_p
from .representation import RealizationStore


def get_model(name: str, beta: float = 0.3, threshold: int = 5,
              scan_cap: int = 2 ** 14, t_max: int = 2 ** 10):
    if name == "bernoulli":
        return BernoulliModel()
    if name == "majority":
        return MajorityWindowModel(threshold=threshold, scan_cap=scan_cap)
    if name == "ising":
        return IsingModel(IsingParams(beta, 0.0), t_max=t_max)
    raise KeyError(f"unknown model {name!r}")


@dataclass
class ExperimentConfig:
    """Resolved run configuration (CLI flags over config-file values)."""

    model: str = "bernoulli"
    master_seed: int = 0
    replicas: int = 1000
    n: int = 32
    beta: float = 0.3
    h: float = 0.0
    t_max: int = 2 ** 10
    out: str = None
    format: str = "json"

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EstimateRow:
    param: float
    estimate: float
    stderr: float
    replicas: int
    wall_time: float

    @staticmethod
    def from_indicators(param, hits, wall_time=0.0):
        hits = np.asarray(hits, dtype=float)
        n = len(hits)
        p = float(hits.mean()) if n else float("nan")
        se = math.sqrt(p * (1.0 - p) / n) if n else float("nan")
        return EstimateRow(param=float(param), estimate=p, stderr=se,
                           replicas=n, wall_time=wall_time)


# -- field sampling -----------------------------------------------------------

_CHUNK = 4096


def sample_fields_batch(model, rect: Rect, h: float, seed: int,
                        replica_ids) -> np.ndarray:
    """Spin arrays (R, nx, ny); replica r bit-identical to
    model.sample_field(rect, RealizationStore(seed, r), h)."""
    replica_ids = np.asarray(list(replica_ids), dtype=np.int64)
    if isinstance(model, BernoulliModel):
        out = np.empty((len(replica_ids), rect.nx, rect.ny), dtype=np.int8)
        xs = np.arange(rect.x0, rect.x1 + 1)
        ys = np.arange(rect.y0, rect.y1 + 1)
        p = bernoulli_p(h)
        for lo in range(0, len(replica_ids), _CHUNK):
            reps = replica_ids[lo:lo + _CHUNK]
            u = rng.key_uniform_array(seed, rng.TAG_VERTEX,
                                      reps[:, None, None],
                                      xs[None, :, None], ys[None, None, :])
            out[lo:lo + len(reps)] = np.where(u < p, 1, -1)
        return out
    if isinstance(model, IsingModel):
        params = IsingParams(model.params.beta, h)
        out = np.empty((len(replica_ids), rect.nx, rect.ny), dtype=np.int8)
        for lo in range(0, len(replica_ids), _CHUNK):
            reps = replica_ids[lo:lo + _CHUNK]
            out[lo:lo + len(reps)] = sample_window_batch(
                rect, params, seed, reps, t_max=model.t_max)
        return out
    fields = [model.sample_field(rect, RealizationStore(seed, int(r)), h)
              for r in replica_ids]
    return np.stack([f.spins for f in fields])


class AuditCounter:
    """Zero-violation duality gate threaded through every experiment."""

    def __init__(self):
        self.checked = 0

    def audit(self, spins: np.ndarray, rect: Rect):
        duality_audit(SpinField(rect, spins))
        self.checked += 1


def crossing_indicators(model, rect: Rect, h: float, seed: int, replicas: int,
                        direction: str = "horizontal", s: int = 1,
                        adj: Adjacency = Adjacency.ORDINARY,
                        auditor: AuditCounter = None) -> np.ndarray:
    spins = sample_fields_batch(model, rect, h, seed, range(replicas))
    hits = np.empty(replicas, dtype=bool)
    for r in range(replicas):
        if auditor is not None:
            auditor.audit(spins[r], rect)
        hits[r] = crossing_from_spins(spins[r], direction, s, adj)
    return hits


# -- crossing curves and critical-point estimation ----------------------------

def crossing_curve(model, rect: Rect, h_grid, replicas: int, seed: int,
                   direction: str = "horizontal", s: int = 1,
                   adj: Adjacency = Adjacency.ORDINARY, audit: bool = True):
    """P^(h)(crossing) along h_grid with common random numbers.

    Returns (rows, monotone_violations): the per-seed indicator must be
    nondecreasing along the grid (exact, monotone coupling); violations
    are counted, never silently dropped.
    """
    h_grid = sorted(h_grid)
    auditor = AuditCounter() if audit else None
    rows = []
    prev = np.zeros(replicas, dtype=bool)
    violations = 0
    for h in h_grid:
        t0 = time.perf_counter()
        hits = crossing_indicators(model, rect, h, seed, replicas,
                                   direction, s, adj, auditor)
        violations += int(np.sum(prev & ~hits))
        prev = hits
        rows.append(EstimateRow.from_indicators(h, hits,
                                                time.perf_counter() - t0))
    return rows, violations


@dataclass
class CriticalEstimate:
    h_hat: float
    lo: float
    hi: float
    n: int
    target: float
    replicas: int
    probes: list = field(default_factory=list)
    low_confidence: bool = False


def estimate_critical(model, n: int, target: float = 0.5, tol: float = 1e-2,
                      replicas: int = 1000, seed: int = 0,
                      bracket=(-2.0, 2.0), s: int = 1,
                      adj: Adjacency = Adjacency.ORDINARY,
                      direction: str = "horizontal",
                      audit: bool = True) -> CriticalEstimate:
    """Bisection in h for P^(h)(H(n,n)) = target.

    Common random numbers across probes make the estimated curve exactly
    monotone in h, so bisection is coherent.  The bracket must straddle
    the target by at least 3 binomial standard errors.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    rect = Rect(0, 0, n, n)
    auditor = AuditCounter() if audit else None
    probes = []

    def probe(h):
        hits = crossing_indicators(model, rect, h, seed, replicas,
                                   direction, s, adj, auditor)
        row = EstimateRow.from_indicators(h, hits)
        probes.append(row)
        return row.estimate

    lo, hi = bracket
    p_lo, p_hi = probe(lo), probe(hi)
    margin = 3.0 * math.sqrt(target * (1 - target) / replicas)
    if not (p_lo < target - margin and p_hi > target + margin):
        raise BracketFailure(
            f"P({lo})={p_lo:.3f}, P({hi})={p_hi:.3f} do not straddle "
            f"{target} by {margin:.3f}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid) < target:
            lo = mid
        else:
            hi = mid
    low_conf = replicas < 100 or n < 8
    return CriticalEstimate(h_hat=0.5 * (lo + hi), lo=lo, hi=hi, n=n,
                            target=target, replicas=replicas, probes=probes,
                            low_confidence=low_conf)


def matching_relation_check(model, n: int, tol: float = 1e-2,
                            replicas: int = 1000, seed: int = 0,
                            bracket=(-2.0, 2.0), audit: bool = True) -> dict:
    """h_c from + ordinary crossings, h*_c from + star crossings; their sum
    estimates the matching relation (0 in h, and p_c + p*_c = 1 for the
    logistic k=1 models)."""
    est = estimate_critical(model, n, tol=tol, replicas=replicas, seed=seed,
                            bracket=bracket, adj=Adjacency.ORDINARY,
                            audit=audit)
    est_star = estimate_critical(model, n, tol=tol, replicas=replicas,
                                 seed=seed, bracket=bracket,
                                 adj=Adjacency.STAR, audit=audit)
    # statistical error of each h_hat: bracket half-width plus binomial
    # noise mapped through the local slope of the crossing curve
    se = _critical_se(est, tol)
    se_star = _critical_se(est_star, tol)
    out = {
        "n": n,
        "h_c": est.h_hat,
        "h_c_star": est_star.h_hat,
        "sum": est.h_hat + est_star.h_hat,
        "se_sum": math.hypot(se, se_star),
        "low_confidence": est.low_confidence or est_star.low_confidence,
    }
    if model.family.k == 1:
        out["p_c"] = bernoulli_p(est.h_hat)
        out["p_c_star"] = bernoulli_p(est_star.h_hat)
        out["p_sum"] = out["p_c"] + out["p_c_star"]
    return out


def _critical_se(est: CriticalEstimate, tol: float) -> float:
    pts = sorted({(r.param, r.estimate) for r in est.probes})
    slope = None
    for (h1, p1), (h2, p2) in zip(pts, pts[1:]):
        if h1 <= est.h_hat <= h2 and h2 > h1:
            slope = (p2 - p1) / (h2 - h1)
            break
    stat = est.probes[-1].stderr / slope if slope else 0.0
    return 0.5 * tol + abs(stat)


# -- cluster tails and the finite-size criterion -------------------------------

def _lazy_spin(model, store: RealizationStore, h: float, cache: dict, v):
    if v not in cache:
        cache[v] = model.sigma(v, store, h)
    return cache[v]


def origin_cluster_size(model, store: RealizationStore, h: float,
                        window: Rect, s: int, adj: Adjacency):
    """(size, truncated) of the origin's spin-s cluster, realizing spins
    lazily; truncated means the cluster touches the window border."""
    cache: dict = {}
    if _lazy_spin(model, store, h, cache, (0, 0)) != s:
        return 0, False
    seen = {(0, 0)}
    stack = [(0, 0)]
    truncated = False
    while stack:
        v = stack.pop()
        if (v[0] in (window.x0, window.x1)) or (v[1] in (window.y0, window.y1)):
            truncated = True
        for w in neighbors(v, adj):
            if w in seen or not window.contains(w):
                continue
            if _lazy_spin(model, store, h, cache, w) == s:
                seen.add(w)
                stack.append(w)
    return len(seen), truncated


_TAIL_TARGETS = {
    "plus": (1, Adjacency.ORDINARY),
    "minus_star": (-1, Adjacency.STAR),
}


def cluster_tail_experiment(model, h: float, window: Rect, replicas: int,
                            fit_range, seed: int,
                            targets=("plus", "minus_star")) -> dict:
    """Origin-cluster size histograms and exponential tail fits for the
    + ordinary cluster and/or the - star cluster.  Truncated clusters are
    discarded (biases the tail downward: conservative for decay detection).
    """
    # window rule: side >= 4 sqrt(s_max).  A subcritical cluster of s cells
    # has diameter on the order of sqrt(s); truncated clusters are discarded
    # regardless, so a too-small window costs statistics, not correctness.
    side = min(window.nx, window.ny)
    if side < 4 * math.sqrt(fit_range[1]):
        raise ValueError(
            f"window side {side} < 4 sqrt(s_max) = "
            f"{4 * math.sqrt(fit_range[1]):.1f}")
    out = {}
    for tgt in targets:
        s, adj = _TAIL_TARGETS[tgt]
        t0 = time.perf_counter()
        if isinstance(model, IsingModel):
            hist, discarded = _ising_tail_hist(model, h, window, replicas,
                                               seed, s, adj)
        else:
            hist, discarded = {}, 0
            for r in range(replicas):
                store = RealizationStore(seed, r)
                size, truncated = origin_cluster_size(model, store, h,
                                                      window, s, adj)
                if truncated:
                    discarded += 1
                    continue
                hist[size] = hist.get(size, 0) + 1
        fit = fit_exponential_tail(hist, fit_range)
        out[tgt] = {"hist": hist, "fit": fit, "discarded": discarded,
                    "wall_time": time.perf_counter() - t0}
    return out


_TAIL_STRUCT = {
    Adjacency.ORDINARY: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool),
    Adjacency.STAR: np.ones((3, 3), bool),
}


def _origin_cluster_from_spins(spins: np.ndarray, s: int, adj: Adjacency):
    """(size, touches_border) of the center cell's spin-s component."""
    c = spins.shape[0] // 2
    if spins[c, c] != s:
        return 0, False
    labels, _ = _ndimage.label(spins == s, structure=_TAIL_STRUCT[adj])
    cid = labels[c, c]
    edge = np.concatenate([labels[0, :], labels[-1, :],
                           labels[:, 0], labels[:, -1]])
    return int((labels == cid).sum()), bool(np.any(edge == cid))


def _ising_tail_hist(model, h: float, window: Rect, replicas: int, seed: int,
                     s: int, adj: Adjacency):
    """Origin-cluster histogram via staged batch window CFTP.

    Stage 0 samples sigma_0 alone (1x1 window) for every replica; only
    surviving replicas get real windows, with the window side doubling
    whenever the cluster touches its border.  All stages evaluate the same
    stationary configuration per replica, so the result is identical to
    growing the cluster with per-vertex CFTP over the full window.
    """
    params = IsingParams(model.params.beta, h)
    half = min(window.x1, -window.x0, window.y1, -window.y0)
    if half < 1:
        raise ValueError("tail window must be centered with positive radius")
    levels = [min(8, half)]
    while levels[-1] < half:
        levels.append(min(2 * levels[-1], half))
    hist: dict = {}
    discarded = 0
    alive = []
    for lo in range(0, replicas, _CHUNK):
        reps = np.arange(lo, min(lo + _CHUNK, replicas))
        spins0 = sample_window_batch(Rect(0, 0, 0, 0), params, seed, reps,
                                     model.t_max)[:, 0, 0]
        dead = int((spins0 != s).sum())
        hist[0] = hist.get(0, 0) + dead
        alive.extend(int(r) for r in reps[spins0 == s])
    for li, r in enumerate(levels):
        rect = box(r)
        final = li == len(levels) - 1
        escalate = []
        for lo in range(0, len(alive), _CHUNK):
            reps = alive[lo:lo + _CHUNK]
            spins = sample_window_batch(rect, params, seed, reps, model.t_max)
            for k, rep in enumerate(reps):
                size, touches = _origin_cluster_from_spins(spins[k], s, adj)
                if touches and not final:
                    escalate.append(rep)
                elif touches:
                    discarded += 1
                else:
                    hist[size] = hist.get(size, 0) + 1
        alive = escalate
        if not alive:
            break
    return hist, discarded


def finite_size_check(model, h: float, N: int, eps_hat: float = 0.01,
                      replicas: int = 2000, seed: int = 0,
                      tail_replicas: int = 20000) -> dict:
    """Estimate P^(h)(V(3N, N)); if below eps_hat, corroborate with a
    + cluster tail fit."""
    rect = Rect(0, 0, 3 * N, N)
    hits = crossing_indicators(model, rect, h, seed, replicas,
                               direction="vertical")
    row = EstimateRow.from_indicators(h, hits)
    fired = row.estimate < eps_hat
    out = {"N": N, "h": h, "eps_hat": eps_hat, "estimate": row.estimate,
           "stderr": row.stderr, "fired": fired}
    if fired and eps_hat > 0:
        s_max = max(4 * N, 40)
        window = box(2 * s_max)
        tail = cluster_tail_experiment(model, h, window, tail_replicas,
                                       (2, s_max), seed + 1,
                                       targets=("plus",))
        out["tail_fit"] = tail["plus"]["fit"]
    return out


def rsw_scan(model, h: float, rho_list, n_list, replicas: int,
             seed: int) -> dict:
    """P(H(ceil(rho n), n)) over the (rho, n) grid, with a descriptive flag
    for the all-or-nothing dichotomy trend."""
    grid = {}
    for rho in rho_list:
        for n in n_list:
            rect = Rect(0, 0, max(1, math.ceil(rho * n)), n)
            hits = crossing_indicators(model, rect, h, seed, replicas)
            grid[(rho, n)] = EstimateRow.from_indicators(h, hits)
    flags = {}
    ns = sorted(n_list)
    for rho in rho_list:
        vals = [grid[(rho, n)].estimate for n in ns]
        flags[rho] = ("toward_one" if vals[-1] > vals[0] and vals[-1] > 0.5
                      else "toward_zero" if vals[-1] < vals[0]
                      and vals[-1] < 0.5 else "flat")
    return {"grid": grid, "trend": flags}


# -- influence scans -----------------------------------------------------------

class ForcedStore(RealizationStore):
    """Store with one underlying uniform forced to 1.0, which drives the
    corresponding X level to 0 (all tails fail).  Used for pivotality:
    forcing a level down can only lower spins, so it never creates an
    increasing event."""

    def __init__(self, base: RealizationStore, index):
        super().__init__(base.master_seed, base.replica_id)
        self._index = index

    def uniform_vertex(self, v):
        if self._index == v:
            return 1.0
        return super().uniform_vertex(v)

    def uniform_spacetime(self, v, t):
        if self._index == (v, t):
            return 1.0
        return super().uniform_spacetime(v, t)

    def uniform_vertex_grid(self, xs, ys):
        u = super().uniform_vertex_grid(xs, ys)
        if isinstance(self._index[0], tuple):
            return u
        self._poke(u, np.asarray(xs), np.asarray(ys), self._index)
        return u

    def uniform_spacetime_grid(self, xs, ys, t):
        u = super().uniform_spacetime_grid(xs, ys, t)
        if not isinstance(self._index[0], tuple) or self._index[1] != t:
            return u
        self._poke(u, np.asarray(xs), np.asarray(ys), self._index[0])
        return u

    @staticmethod
    def _poke(u, xs, ys, v):
        i = np.flatnonzero(xs == v[0])
        j = np.flatnonzero(ys == v[1])
        if i.size and j.size:
            u[i[0], j[0]] = 1.0


def _pivotal_sites(mask: np.ndarray) -> set:
    """Open sites lying on every left-right open path of the box.

    mask is the boolean open array (nx, ny); assumes a crossing exists.
    Pivotal sites are the articulation points of the open subgraph
    (augmented with left/right terminals) separating the terminals.
    """
    nx_, ny_ = mask.shape
    G = nx.Graph()
    G.add_nodes_from(["L", "R"])
    for i in range(nx_):
        for j in range(ny_):
            if not mask[i, j]:
                continue
            G.add_node((i, j))
            if i + 1 < nx_ and mask[i + 1, j]:
                G.add_edge((i, j), (i + 1, j))
            if j + 1 < ny_ and mask[i, j + 1]:
                G.add_edge((i, j), (i, j + 1))
    for j in range(ny_):
        if mask[0, j]:
            G.add_edge("L", (0, j))
        if mask[nx_ - 1, j]:
            G.add_edge("R", (nx_ - 1, j))
    pivotal = set()
    for a in nx.articulation_points(G):
        if a in ("L", "R"):
            continue
        H = G.copy()
        H.remove_node(a)
        if not nx.has_path(H, "L", "R"):
            pivotal.add(a)
    return pivotal


def default_index_sample(model, rect: Rect, t_depth: int = 8,
                         spacing: int = None):
    """Index sampling strategy: every vertex for lattice-indexed (k=1)
    models; for space-time-indexed models, a coarse sublattice of the box
    at times -1..-t_depth (deep times have vanishing influence)."""
    if isinstance(model, IsingModel):
        step = spacing or max(1, min(rect.nx, rect.ny) // 4)
        return [((x, y), -t)
                for x in range(rect.x0, rect.x1 + 1, step)
                for y in range(rect.y0, rect.y1 + 1, step)
                for t in range(1, t_depth + 1)]
    return list(rect.vertices())


def influence_scan(model, n: int, h: float, replicas: int, seed: int,
                   index_sample=None) -> dict:
    """Monte Carlo estimates of P((H(3n,n))_j) per underlying index j.

    For the k=1 lattice-indexed models with index_sample=None, j internally
    pivotal means the configuration crosses but forcing X_j to 0 (closing
    site j) breaks the crossing; only open articulation sites qualify, so
    the per-replica cost is one labeling plus work on the rare crossing
    configurations.  With an explicit index_sample (mandatory route for
    space-time-indexed models) each sampled index is rechecked by a full
    forced recomputation.
    """
    rect = Rect(0, 0, 3 * n, n)
    if index_sample is not None or isinstance(model, IsingModel):
        if index_sample is None:
            index_sample = default_index_sample(model, rect)
        return _influence_forced(model, rect, n, h, replicas, seed,
                                 index_sample)
    spins = sample_fields_batch(model, rect, h, seed, range(replicas))
    counts: dict = {}
    crossings = 0
    for r in range(replicas):
        mask = spins[r] == 1
        if not crossing_from_spins(spins[r], "horizontal", 1,
                                   Adjacency.ORDINARY):
            continue
        crossings += 1
        for (i, j) in _pivotal_sites(mask):
            v = (rect.x0 + i, rect.y0 + j)
            counts[v] = counts.get(v, 0) + 1
    est = {v: c / replicas for v, c in counts.items()}
    eps = max(est.values()) if est else 0.0
    # one-sided 95% upper bound when nothing was observed (rule of three)
    eps_upper = (eps + 1.96 * math.sqrt(eps * (1 - eps) / replicas)
                 if est else 3.0 / replicas)
    return {"n": n, "h": h, "replicas": replicas,
            "crossing_rate": crossings / replicas,
            "per_index": est, "epsilon_n": eps, "epsilon_upper": eps_upper,
            "epsilon_lower": max(0.0, eps - 1.96 * math.sqrt(
                eps * (1 - eps) / replicas)) if est else 0.0}


def _influence_forced(model, rect: Rect, n: int, h: float, replicas: int,
                      seed: int, index_sample) -> dict:
    counts = {j: 0 for j in index_sample}
    crossings = 0
    for r in range(replicas):
        store = RealizationStore(seed, r)
        base = model.sample_field(rect, store, h)
        crossed = crossing_from_spins(base.spins, "horizontal", 1,
                                      Adjacency.ORDINARY)
        if crossed:
            crossings += 1
        for j in index_sample:
            forced = model.sample_field(rect, ForcedStore(store, j), h)
            now = crossing_from_spins(forced.spins, "horizontal", 1,
                                      Adjacency.ORDINARY)
            if now and not crossed:
                raise AssertionError(
                    f"forcing index {j} to 0 created a crossing")
            if crossed and not now:
                counts[j] += 1
    est = {j: c / replicas for j, c in counts.items() if c}
    eps = max(est.values()) if est else 0.0
    eps_upper = (eps + 1.96 * math.sqrt(eps * (1 - eps) / replicas)
                 if est else 3.0 / replicas)
    return {"n": n, "h": h, "replicas": replicas,
            "crossing_rate": crossings / replicas,
            "per_index": est, "epsilon_n": eps, "epsilon_upper": eps_upper,
            "epsilon_lower": max(0.0, eps - 1.96 * math.sqrt(
                eps * (1 - eps) / replicas)) if est else 0.0,
            "index_sample_size": len(index_sample)}


# -- DLR and mixing diagnostics -------------------------------------------------

def dlr_check(beta: float, h: float, window: Rect, samples: int,
              seed: int, min_count: int = 200, t_max: int = 2 ** 10) -> dict:
    """Bin window samples by the number of plus neighbours of each interior
    vertex and compare the empirical conditional P(sigma = +1 | m) to the
    heat-bath value; z-scores per sufficiently populated bin."""
    if window.nx < 3 or window.ny < 3:
        raise ValueError("window needs an interior vertex")
    params = IsingParams(beta, h)
    plus_given_m = np.zeros(5, dtype=np.int64)
    count_m = np.zeros(5, dtype=np.int64)
    for lo in range(0, samples, _CHUNK):
        reps = range(lo, min(lo + _CHUNK, samples))
        spins = sample_window_batch(window, params, seed, reps, t_max)
        center = spins[:, 1:-1, 1:-1]
        m = ((spins[:, :-2, 1:-1] == 1).astype(np.int64)
             + (spins[:, 2:, 1:-1] == 1)
             + (spins[:, 1:-1, :-2] == 1)
             + (spins[:, 1:-1, 2:] == 1))
        for mm in range(5):
            sel = m == mm
            count_m[mm] += int(sel.sum())
            plus_given_m[mm] += int((center[sel] == 1).sum())
    rows = []
    for mm in range(5):
        q = heat_bath_prob(mm, 1, params)
        cnt = int(count_m[mm])
        if cnt < min_count:
            rows.append({"m": mm, "count": cnt, "tested": False})
            continue
        freq = plus_given_m[mm] / cnt
        z = (freq - q) / math.sqrt(q * (1 - q) / cnt)
        rows.append({"m": mm, "count": cnt, "freq": freq, "expected": q,
                     "z": z, "tested": True})
    return {"beta": beta, "h": h, "samples": samples, "bins": rows}


def boundary_influence(beta: float, h: float, n_list, replicas: int,
                       seed: int, t_max: int = 2 ** 10) -> list:
    """Delta(n) = P(sigma_0 = +1 | + boundary on B(n)) - (same with -
    boundary), paired over replicas (monotone coupling makes the
    difference a per-replica indicator)."""
    params = IsingParams(beta, h)
    out = []
    for n in n_list:
        rect = box(n)
        c = n  # array coords of the origin
        diffs = np.empty(replicas, dtype=np.int8)
        for lo in range(0, replicas, _CHUNK):
            reps = range(lo, min(lo + _CHUNK, replicas))
            plus = finite_box_gibbs_batch(rect, 1, params, seed, reps, t_max)
            minus = finite_box_gibbs_batch(rect, -1, params, seed, reps,
                                           t_max)
            d = (plus[:, c, c] - minus[:, c, c]) // 2
            if np.any(d < 0):
                raise AssertionError("monotone boundary coupling violated")
            diffs[lo:lo + len(d)] = d
        row = EstimateRow.from_indicators(n, diffs)
        out.append({"n": n, "delta": row.estimate, "stderr": row.stderr,
                    "ci95": 1.96 * row.stderr, "replicas": replicas})
    return out


def event_pair_covariance(model, h: float, box_side: int, distance: int,
                          replicas: int, seed: int) -> dict:
    """|P(A and B) - P(A)P(B)| for horizontal + crossings of two boxes of
    the given side separated by the given L1 distance."""
    a_rect = Rect(0, 0, box_side, box_side)
    if distance == 0:
        b_rect = a_rect
    else:
        bx0 = box_side + distance
        b_rect = Rect(bx0, 0, bx0 + box_side, box_side)
    window = Rect(0, 0, b_rect.x1, box_side)
    spins = sample_fields_batch(model, window, h, seed, range(replicas))
    ia = np.empty(replicas, dtype=bool)
    ib = np.empty(replicas, dtype=bool)
    for r in range(replicas):
        fld = SpinField(window, spins[r])
        ia[r] = crossing_from_spins(fld.subwindow(a_rect), "horizontal", 1,
                                    Adjacency.ORDINARY)
        ib[r] = crossing_from_spins(fld.subwindow(b_rect), "horizontal", 1,
                                    Adjacency.ORDINARY)
    pa, pb, pab = ia.mean(), ib.mean(), (ia & ib).mean()
    cov = pab - pa * pb
    se_ab = math.sqrt(max(pab * (1 - pab), 1e-12) / replicas)
    se_a = math.sqrt(max(pa * (1 - pa), 1e-12) / replicas)
    se_b = math.sqrt(max(pb * (1 - pb), 1e-12) / replicas)
    se = math.sqrt(se_ab ** 2 + (pb * se_a) ** 2 + (pa * se_b) ** 2)
    return {"distance": distance, "P_A": float(pa), "P_B": float(pb),
            "P_AB": float(pab), "cov": float(cov), "se": se,
            "replicas": replicas, "compared": distance > 0}


def mixing_check(mode: str, params: dict, n_list, replicas: int,
                 seed: int) -> dict:
    if mode == "ising_boundary":
        rows = boundary_influence(params["beta"], params.get("h", 0.0),
                                  n_list, replicas, seed,
                                  params.get("t_max", 2 ** 10))
        return {"mode": mode, "rows": rows}
    if mode == "event_pair":
        model = get_model(params.get("model", "bernoulli"),
                          beta=params.get("beta", 0.3))
        rows = [event_pair_covariance(model, params.get("h", 0.0),
                                      params.get("box_side", 16), k,
                                      replicas, seed)
                for k in n_list]
        return {"mode": mode, "rows": rows}
    raise ValueError(f"unknown mixing mode {mode!r}")


# -- FKG smoke test --------------------------------------------------------------

def positive_association_check(model, h: float, box_side: int, gap: int,
                               replicas: int, seed: int) -> dict:
    """P(A and B) >= P(A)P(B) - 3 SE for two disjoint horizontal crossing
    events (statistical smoke test, never asserted as exact)."""
    a_rect = Rect(0, 0, box_side, box_side)
    b_rect = Rect(0, box_side + gap, box_side, 2 * box_side + gap)
    window = Rect(0, 0, box_side, b_rect.y1)
    spins = sample_fields_batch(model, window, h, seed, range(replicas))
    ia = np.empty(replicas, dtype=bool)
    ib = np.empty(replicas, dtype=bool)
    for r in range(replicas):
        fld = SpinField(window, spins[r])
        ia[r] = crossing_from_spins(fld.subwindow(a_rect), "horizontal", 1,
                                    Adjacency.ORDINARY)
        ib[r] = crossing_from_spins(fld.subwindow(b_rect), "horizontal", 1,
                                    Adjacency.ORDINARY)
    pa, pb, pab = float(ia.mean()), float(ib.mean()), float((ia & ib).mean())
    se = math.sqrt(max(pab * (1 - pab), 1e-12) / replicas)
    return {"P_A": pa, "P_B": pb, "P_AB": pab, "se": se,
            "ok": pab >= pa * pb - 3 * se}


# -- output helpers ---------------------------------------------------------------

def rows_to_csv(rows, stream):
    w = csv.writer(stream)
    w.writerow(["param", "estimate", "stderr", "replicas", "wall_time"])
    for r in rows:
        w.writerow([r.param, r.estimate, r.stderr, r.replicas,
                    f"{r.wall_time:.4f}"])


def _git_describe() -> str:
    try:
        return subprocess.run(["git", "describe", "--always", "--dirty"],
                              capture_output=True, text=True, timeout=5,
                              check=False).stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _stringify_keys(obj):
    if isinstance(obj, dict):
        return {(k if isinstance(k, str) else str(k)): _stringify_keys(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_stringify_keys(v) for v in obj]
    return obj


def summary_json(config: dict, results) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.integer, np.floating, np.bool_)):
            return o.item()
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        return str(o)

    payload = _stringify_keys({"config": config, "build": _git_describe(),
                               "results": results})
    return json.dumps(payload, indent=2, default=default, sort_keys=False)
