"""2D Ising model with external field via monotone parallel dynamics and
coupling from the past.

Single-site conditionals q^(m)(eta) depend on the neighbour configuration
only through the number m of plus neighbours.  The parallel dynamics
updates even vertices at even times and odd vertices at odd times; the
update at (v, t) consumes one auxiliary level variable Y'_v(t) in {0..5}
with tails P(Y' >= m) = q^(5-m)(+1) and sets

    sigma_v(t+1) := +1  iff  (#minus neighbours at time t) + 1 <= Y'_v(t).

This reproduces P(update -> +1 | d minus neighbours) = q^(4-d)(+1)
exactly.  (The unshifted range {0..4} stated alongside the tail formula
in the source construction is internally inconsistent: it would force
P(Y >= 0) = q^(4)(+1) < 1.  The shift by one fixes the support; the
update marginal is unchanged and is verified to 1e-12 in the tests.)

Backward-cone coupling from the past on these dynamics yields exact
samples of the unique (beta < beta_c) Ising measure.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .clusters import SpinField
from .errors import NonMonotoneTails, NotCoalesced, RegionTooSmall
from .lattice import Rect, Vertex, boundary
from .representation import LevelDistribution, RealizationStore

BETA_WARN = 0.44  # courtesy warning near the zero-field critical point

K_LEVELS = 5  # Y' takes values in {0..5}


@dataclass(frozen=True)
class IsingParams:
    beta: float
    h: float = 0.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.beta >= BETA_WARN:
            warnings.warn(
                f"beta={self.beta} is at or above {BETA_WARN}; CFTP may "
                "coalesce slowly or not at all", stacklevel=2)


def heat_bath_prob(m: int, eta: int, params: IsingParams) -> float:
    """q^(m)(eta): conditional probability that the spin equals eta given
    m plus neighbours (and 4 - m minus neighbours)."""
    if not 0 <= m <= 4:
        raise ValueError(f"m={m} out of range 0..4")
    if eta not in (-1, 1):
        raise ValueError(f"eta={eta} must be -1 or +1")
    s = 2 * m - 4
    return 1.0 / (1.0 + math.exp(-2.0 * params.beta * eta * (params.h + s)))


def _plus_tail(m: int, beta: float, h: float) -> float:
    s = 2 * m - 4
    return 1.0 / (1.0 + math.exp(-2.0 * beta * (h + s)))


def ising_family(beta: float) -> LevelDistribution:
    """Level family of the Y' variables at fixed beta: k = 5 with
    tail(h, m) = q^(5-m)(+1; beta, h) for m = 1..5."""

    def tail(h, m):
        return _plus_tail(K_LEVELS - m, beta, h)

    def dtail(h, m):
        q = _plus_tail(K_LEVELS - m, beta, h)
        return 2.0 * beta * q * (1.0 - q)

    return LevelDistribution(k=K_LEVELS, tail=tail, dtail=dtail)


@dataclass(frozen=True)
class YDistribution:
    """Distribution of the shifted update variable Y' in {0..5}."""

    tails: np.ndarray  # tails[m] = P(Y' >= m) for m = 0..6; tails[0]=1, tails[6]=0
    pmf: np.ndarray    # pmf[m] = P(Y' = m) for m = 0..5

    @property
    def thresholds(self) -> np.ndarray:
        """Inverse-CDF thresholds: Y' = #{m in 1..5 : U < tails[m]}."""
        return self.tails[1:6]


def y_pmf(params: IsingParams) -> YDistribution:
    tails = np.empty(7)
    tails[0] = 1.0
    for m in range(1, 6):
        tails[m] = _plus_tail(K_LEVELS - m, params.beta, params.h)
    tails[6] = 0.0
    if np.any(np.diff(tails) > 1e-15):
        raise NonMonotoneTails(f"tails {tails} not nonincreasing")
    pmf = tails[:-1] - tails[1:]
    if abs(pmf.sum() - 1.0) > 1e-12 or np.any(pmf < -1e-15):
        raise NonMonotoneTails(f"invalid pmf {pmf}")
    return YDistribution(tails=tails, pmf=np.clip(pmf, 0.0, 1.0))


def update_plus_prob_from_tails(d: int, params: IsingParams) -> float:
    """P(update -> +1 | d minus neighbours) derived from the Y' tails."""
    if not 0 <= d <= 4:
        raise ValueError(f"d={d} out of range 0..4")
    return float(y_pmf(params).tails[d + 1])


# -- raw array dynamics -------------------------------------------------------

def _parity_masks(rect: Rect):
    """(even, odd) interior masks over rect's interior cells."""
    xs = np.arange(rect.x0 + 1, rect.x1)
    ys = np.arange(rect.y0 + 1, rect.y1)
    par = (xs[:, None] + ys[None, :]) & 1
    return par == 0, par == 1


def _y_grid(store: RealizationStore, rect: Rect, t: int,
            thresholds: np.ndarray) -> np.ndarray:
    """Y' levels for the interior cells of rect at time t."""
    xs = np.arange(rect.x0 + 1, rect.x1)
    ys = np.arange(rect.y0 + 1, rect.y1)
    u = store.uniform_spacetime_grid(xs, ys, t)
    return np.sum(u[..., None] < thresholds, axis=-1).astype(np.int8)


def _step_interior(spins: np.ndarray, upd_mask: np.ndarray,
                   yvals: np.ndarray) -> None:
    """One parallel step in place; only interior cells are rewritten.

    spins has shape (..., nx, ny); upd_mask/yvals cover the interior
    (nx-2, ny-2).  Cells outside the interior keep their values, which is
    exact inside the shrinking trusted core of a CFTP run and exact for
    frozen-boundary runs.
    """
    minus = ((spins[..., :-2, 1:-1] == -1).astype(np.int8)
             + (spins[..., 2:, 1:-1] == -1)
             + (spins[..., 1:-1, :-2] == -1)
             + (spins[..., 1:-1, 2:] == -1))
    new = np.where(minus + 1 <= yvals, 1, -1).astype(np.int8)
    interior = spins[..., 1:-1, 1:-1]
    spins[..., 1:-1, 1:-1] = np.where(upd_mask, new, interior)


def parallel_update(config: SpinField, t: int, store: RealizationStore,
                    params: IsingParams) -> SpinField:
    """One step of the alternating dynamics: vertices whose parity matches
    t are resampled from Y'_v(t), the rest copy.  The result lives on the
    region shrunk by 1 (every updated vertex needs its 4 neighbours)."""
    r = config.rect
    if r.nx < 3 or r.ny < 3:
        raise RegionTooSmall(f"region {r} cannot shrink")
    ydist = y_pmf(params)
    spins = config.spins.copy()
    even, odd = _parity_masks(r)
    upd = even if (t & 1) == 0 else odd
    yv = _y_grid(store, r, t, ydist.thresholds)
    _step_interior(spins, upd, yv)
    inner = Rect(r.x0 + 1, r.y0 + 1, r.x1 - 1, r.y1 - 1)
    return SpinField(inner, spins[1:-1, 1:-1], model="ising",
                     params={"beta": params.beta, "h": params.h, "t": t + 1})


def _run_pair(rect: Rect, t_start: int, store: RealizationStore,
              thresholds: np.ndarray):
    """Coupled all-plus / all-minus chains on rect from time t_start to 0.

    Returns (upper, lower) spin arrays at time 0.  Values are exact on
    cells at distance >= |t_start| from the rect border.
    """
    nx, ny = rect.nx, rect.ny
    hi = np.ones((nx, ny), dtype=np.int8)
    lo = -np.ones((nx, ny), dtype=np.int8)
    even, odd = _parity_masks(rect)
    for s in range(t_start, 0):
        upd = even if (s & 1) == 0 else odd
        yv = _y_grid(store, rect, s, thresholds)
        _step_interior(hi, upd, yv)
        _step_interior(lo, upd, yv)
    return hi, lo


@dataclass(frozen=True)
class CftpResult:
    spin: int
    tau: int          # latest start time t < 0 with agreement at v
    probes: tuple     # start depths simulated, in order


def _agree_at(v: Vertex, t: int, store: RealizationStore,
              thresholds: np.ndarray):
    """sigma_v^{+/-}(t, 0) from the backward cone; returns (hi, lo) spins."""
    T = -t
    region = Rect(v[0] - T, v[1] - T, v[0] + T, v[1] + T)
    hi, lo = _run_pair(region, t, store, thresholds)
    return int(hi[T, T]), int(lo[T, T])


def cftp_vertex(v: Vertex, store: RealizationStore, params: IsingParams,
                t_max: int = 2 ** 10) -> CftpResult:
    """Exact sample of the mu_{beta,h} marginal at v, with the exact
    coalescence time tau(v) = max{t < 0 : sigma_v^+(t,0) = sigma_v^-(t,0)}.

    Doubling probe schedule; tau refined by binary search, valid because
    agreement at a start time persists for all earlier start times.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    thresholds = y_pmf(params).thresholds
    probes = []
    T = 2
    spin = None
    while True:
        probes.append(-T)
        hi, lo = _agree_at(v, -T, store, thresholds)
        if hi == lo:
            spin = hi
            break
        if T >= t_max:
            raise NotCoalesced(T)
        T = min(2 * T, t_max)
    # binary search max t in [-T, -1] with agreement
    lo_t, hi_t = -T, 0  # agreement holds at lo_t, fails at hi_t (sentinel 0)
    if T > 1:
        probes.append(-1)
        a, b = _agree_at(v, -1, store, thresholds)
        if a == b:
            return CftpResult(spin=spin, tau=-1, probes=tuple(probes))
        hi_t = -1
        while hi_t - lo_t > 1:
            mid = (lo_t + hi_t) // 2
            probes.append(mid)
            a, b = _agree_at(v, mid, store, thresholds)
            if a == b:
                lo_t = mid
            else:
                hi_t = mid
    return CftpResult(spin=spin, tau=lo_t, probes=tuple(probes))


def _cftp_schedule(t_max: int, t0: int = 16, d0: int = 8):
    """(start depth T, region margin D) attempts.

    Depth doubles every attempt, margin every other one.  The frozen
    +1/-1 ring of the margin-D region dominates/minorizes every
    infinite-volume chain from time -T (monotone dynamics), so the
    sandwich is valid for any D; D only controls how often the pair
    coalesces, since residual disagreement comes from boundary influence.
    """
    T, D = min(t0, t_max), d0
    k = 0
    while True:
        yield T, D
        if T >= t_max:
            return
        k += 1
        T = min(2 * T, t_max)
        if k % 2 == 0:
            D *= 2


def _y_levels(u: np.ndarray, asc_thresholds: np.ndarray) -> np.ndarray:
    """Y' = #{m : U < tails[m]} via one searchsorted pass; asc_thresholds
    is the threshold vector sorted ascending."""
    k = len(asc_thresholds)
    return (k - np.searchsorted(asc_thresholds, u, side="right")).astype(np.int8)


def sample_window_batch(rect: Rect, params: IsingParams, master_seed: int,
                        replica_ids, t_max: int = 2 ** 10) -> np.ndarray:
    """Exact samples of the mu_{beta,h} restriction to rect for many
    replicas; int8 array of shape (len(replica_ids), rect.nx, rect.ny).

    Monotone CFTP with a frozen-ring sandwich: chains started all-plus /
    all-minus at -T on rect.dilate(D) with the outer ring never updated.
    When they agree on rect, the common value is the unique stationary
    value for this randomness (every stationary chain is squeezed between
    them), independent of the (T, D) attempt that closed the sandwich.
    """
    replica_ids = np.asarray(list(replica_ids), dtype=np.int64)
    out = np.zeros((len(replica_ids), rect.nx, rect.ny), dtype=np.int8)
    asc = np.sort(y_pmf(params).thresholds)
    active = np.arange(len(replica_ids))
    coalesced = False
    # larger windows coalesce later (max over cells): skip doomed attempts
    t0, d0 = (16, 8) if rect.size < 128 else (64, 16)
    for T, D in _cftp_schedule(t_max, t0, d0):
        if not active.size:
            coalesced = True
            break
        region = rect.dilate(D)
        xs = np.arange(region.x0 + 1, region.x1)
        ys = np.arange(region.y0 + 1, region.y1)
        even, odd = _parity_masks(region)
        reps = replica_ids[active]
        # key state chained through everything but the time word
        state = rng.key_state_array(master_seed, rng.TAG_SPACETIME,
                                    reps[:, None, None],
                                    xs[None, :, None], ys[None, None, :])
        hi = np.ones((len(reps), region.nx, region.ny), dtype=np.int8)
        lo = -hi.copy()
        for s in range(-T, 0):
            yv = _y_levels(rng.key_uniform_from_state(state, s), asc)
            upd = even if (s & 1) == 0 else odd
            _step_interior(hi, upd, yv)
            _step_interior(lo, upd, yv)
        i0, j0 = rect.x0 - region.x0, rect.y0 - region.y0
        hcore = hi[:, i0:i0 + rect.nx, j0:j0 + rect.ny]
        lcore = lo[:, i0:i0 + rect.nx, j0:j0 + rect.ny]
        done = (hcore == lcore).all(axis=(1, 2))
        out[active[done]] = hcore[done]
        active = active[~done]
    if active.size and not coalesced:
        raise NotCoalesced(t_max, f"{active.size} replicas not coalesced")
    return out


def sample_window(rect: Rect, store: RealizationStore, params: IsingParams,
                  t_max: int = 2 ** 10) -> SpinField:
    """Exact sample of the mu_{beta,h} restriction to rect (one replica of
    sample_window_batch, bit-identical)."""
    spins = sample_window_batch(rect, params, store.master_seed,
                                [store.replica_id], t_max)[0]
    return SpinField(rect, spins, model="ising",
                     params={"beta": params.beta, "h": params.h})


def _agree_cone_batch(v: Vertex, t: int, master_seed: int, reps: np.ndarray,
                      asc: np.ndarray):
    """(hi, lo) spins at v for many replicas from the backward cone at
    start time t; each entry bit-identical to _agree_at."""
    T = -t
    region = Rect(v[0] - T, v[1] - T, v[0] + T, v[1] + T)
    xs = np.arange(region.x0 + 1, region.x1)
    ys = np.arange(region.y0 + 1, region.y1)
    even, odd = _parity_masks(region)
    state = rng.key_state_array(master_seed, rng.TAG_SPACETIME,
                                reps[:, None, None],
                                xs[None, :, None], ys[None, None, :])
    hi = np.ones((len(reps), region.nx, region.ny), dtype=np.int8)
    lo = -hi.copy()
    for s in range(t, 0):
        yv = _y_levels(rng.key_uniform_from_state(state, s), asc)
        upd = even if (s & 1) == 0 else odd
        _step_interior(hi, upd, yv)
        _step_interior(lo, upd, yv)
    return hi[:, T, T].astype(np.int64), lo[:, T, T].astype(np.int64)


def cftp_tau_batch(v: Vertex, params: IsingParams, master_seed: int,
                   replica_ids, t_max: int = 2 ** 10):
    """(spins, taus) over many replicas; entry r equals
    cftp_vertex(v, RealizationStore(master_seed, r), params) exactly
    (spin and tau are properties of the randomness, not of the probe
    order).  The doubling phase and the tau bisection are both batched,
    with bisection probes grouped by depth.
    """
    replica_ids = np.asarray(list(replica_ids), dtype=np.int64)
    n = len(replica_ids)
    asc = np.sort(y_pmf(params).thresholds)
    spins = np.zeros(n, dtype=np.int64)
    first_t = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    T = 2
    while active.size:
        hi, lo = _agree_cone_batch(v, -T, master_seed,
                                   replica_ids[active], asc)
        agree = hi == lo
        spins[active[agree]] = hi[agree]
        first_t[active[agree]] = T
        active = active[~agree]
        if active.size and T >= t_max:
            raise NotCoalesced(T, f"{active.size} replicas not coalesced")
        T = min(2 * T, t_max)
    # bisect tau in [-first_t, hi_t) with hi_t = -first_t/2 (known failure
    # from the doubling phase) or the sentinel 0 when first_t = 2
    lo_t = -first_t
    hi_t = np.where(first_t > 2, -(first_t // 2), 0)
    while True:
        open_ = np.flatnonzero(hi_t - lo_t > 1)
        if not open_.size:
            break
        mids = (lo_t[open_] + hi_t[open_]) // 2
        for depth in np.unique(mids):
            sel = open_[mids == depth]
            hi, lo = _agree_cone_batch(v, int(depth), master_seed,
                                       replica_ids[sel], asc)
            agree = hi == lo
            lo_t[sel[agree]] = depth
            hi_t[sel[~agree]] = depth
    return spins, lo_t


# -- finite-volume Gibbs sampling --------------------------------------------

def _bc_array(rect: Rect, bc) -> np.ndarray:
    """Spin array on rect.dilate(1) with the boundary ring frozen.

    bc is +1, -1, or a dict mapping every vertex of boundary(rect) to a
    spin.  Diagonal corners of the dilated array are never read by the
    dynamics; they are set to +1 arbitrarily.
    """
    big = rect.dilate(1)
    arr = np.ones((big.nx, big.ny), dtype=np.int8)
    if bc in (1, -1):
        arr *= np.int8(bc)
    elif isinstance(bc, dict):
        missing = [w for w in boundary(rect) if w not in bc]
        if missing:
            raise ValueError(f"boundary condition missing {missing[:3]}...")
        for w, s in bc.items():
            arr[w[0] - big.x0, w[1] - big.y0] = s
    else:
        raise ValueError(f"unsupported boundary condition {bc!r}")
    return arr


def finite_box_gibbs(rect: Rect, bc, store: RealizationStore,
                     params: IsingParams, t_max: int = 2 ** 10) -> SpinField:
    """Exact sample of the finite-volume Gibbs measure on rect with frozen
    boundary spins, via monotone CFTP of the parity dynamics run inside
    rect only (all-plus / all-minus sandwich)."""
    thresholds = y_pmf(params).thresholds
    big = rect.dilate(1)
    frame = _bc_array(rect, bc)
    even, odd = _parity_masks(big)  # interior of big == rect
    T = 2
    while True:
        hi = frame.copy()
        lo = frame.copy()
        hi[1:-1, 1:-1] = 1
        lo[1:-1, 1:-1] = -1
        for s in range(-T, 0):
            upd = even if (s & 1) == 0 else odd
            yv = _y_grid(store, big, s, thresholds)
            _step_interior(hi, upd, yv)
            _step_interior(lo, upd, yv)
        if np.array_equal(hi, lo):
            return SpinField(rect, hi[1:-1, 1:-1], model="ising_gibbs",
                             params={"beta": params.beta, "h": params.h,
                                     "bc": bc if bc in (1, -1) else "fixed"})
        if T >= t_max:
            raise NotCoalesced(T)
        T = min(2 * T, t_max)


def finite_box_gibbs_batch(rect: Rect, bc, params: IsingParams,
                           master_seed: int, replica_ids,
                           t_max: int = 2 ** 10) -> np.ndarray:
    """finite_box_gibbs over many replicas; shape (R, rect.nx, rect.ny)."""
    replica_ids = np.asarray(list(replica_ids), dtype=np.int64)
    thresholds = y_pmf(params).thresholds
    big = rect.dilate(1)
    frame = _bc_array(rect, bc)
    even, odd = _parity_masks(big)
    xs = np.arange(big.x0 + 1, big.x1)
    ys = np.arange(big.y0 + 1, big.y1)
    out = np.zeros((len(replica_ids), rect.nx, rect.ny), dtype=np.int8)
    asc = np.sort(thresholds)
    active = np.arange(len(replica_ids))
    T = 2
    while active.size:
        reps = replica_ids[active]
        state = rng.key_state_array(master_seed, rng.TAG_SPACETIME,
                                    reps[:, None, None],
                                    xs[None, :, None], ys[None, None, :])
        hi = np.broadcast_to(frame, (len(reps),) + frame.shape).copy()
        lo = hi.copy()
        hi[:, 1:-1, 1:-1] = 1
        lo[:, 1:-1, 1:-1] = -1
        for s in range(-T, 0):
            yv = _y_levels(rng.key_uniform_from_state(state, s), asc)
            upd = even if (s & 1) == 0 else odd
            _step_interior(hi, upd, yv)
            _step_interior(lo, upd, yv)
        done = (hi == lo).all(axis=(1, 2))
        out[active[done]] = hi[done, 1:-1, 1:-1]
        active = active[~done]
        if active.size and T >= t_max:
            raise NotCoalesced(T, f"{active.size} replicas not coalesced")
        T = min(2 * T, t_max)
    return out


class IsingModel:
    """Model adaptor: determination sequence over space-time indices and
    the representation-layer operations."""

    name = "ising"

    def __init__(self, params: IsingParams, t_max: int = 2 ** 10):
        self.params = params
        self.t_max = t_max
        self.family = ising_family(params.beta)
        # gamma/alpha declared; C0 calibrated empirically (see tests)
        from .representation import RepresentationProfile
        self.profile = RepresentationProfile(C0=300.0, gamma=1.0,
                                             alpha=1.0 / 12.0)

    # sequence: (v,-1), then {w : ||w-v||_1 < |t|} at t = -2, -3, ... (lex)
    @staticmethod
    def _ball_cells(v: Vertex, r: int):
        """L1 ball of radius r around v, lexicographic order."""
        x, y = v
        cells = []
        for a in range(x - r, x + r + 1):
            rem = r - abs(a - x)
            for b in range(y - rem, y + rem + 1):
                cells.append((a, b))
        return cells

    @staticmethod
    def _ball_size(r: int) -> int:
        return 2 * r * r + 2 * r + 1

    def determination_index(self, v: Vertex, m: int):
        if m < 1:
            raise ValueError("m >= 1 required")
        if m == 1:
            return (v, -1)
        depth = 2
        base = 1
        while base + self._ball_size(depth - 1) < m:
            base += self._ball_size(depth - 1)
            depth += 1
        cells = self._ball_cells(v, depth - 1)
        return (cells[m - base - 1], -depth)

    def rank_of(self, v: Vertex, j) -> float:
        (w, t) = j
        if t >= 0:
            return math.inf
        d = abs(w[0] - v[0]) + abs(w[1] - v[1])
        depth = -t
        if d >= depth:
            return math.inf
        if depth == 1:
            return 1
        base = 1 + sum(self._ball_size(r - 1) for r in range(2, depth))
        return base + self._ball_cells(v, depth - 1).index(w) + 1

    def is_determined(self, v: Vertex, m: int, store: RealizationStore,
                      h: float = None) -> bool:
        """Exact via monotone extreme completions: unknown Y' levels go to 5
        in the plus chain and 0 in the minus chain; start configurations at
        the deepest covered time bound everything earlier."""
        params = self.params if h is None else IsingParams(self.params.beta, h)
        thresholds = y_pmf(params).thresholds
        deepest = self.determination_index(v, m)[1]
        T = -deepest
        region = Rect(v[0] - T, v[1] - T, v[0] + T, v[1] + T)
        known = self._known_mask(v, m, region, T)
        hi = np.ones((region.nx, region.ny), dtype=np.int8)
        lo = -hi.copy()
        even, odd = _parity_masks(region)
        for s in range(-T, 0):
            yv = _y_grid(store, region, s, thresholds)
            km = known.get(s)
            y_hi = np.where(km, yv, 5).astype(np.int8) if km is not None else yv
            y_lo = np.where(km, yv, 0).astype(np.int8) if km is not None else yv
            upd = even if (s & 1) == 0 else odd
            _step_interior(hi, upd, y_hi)
            _step_interior(lo, upd, y_lo)
        return int(hi[T, T]) == int(lo[T, T])

    def _known_mask(self, v: Vertex, m: int, region: Rect, T: int):
        """Per-time boolean masks over the region interior marking the
        space-time indices among the first m of the sequence."""
        masks = {s: np.zeros((region.nx - 2, region.ny - 2), dtype=bool)
                 for s in range(-T, 0)}
        for i in range(1, m + 1):
            (w, t) = self.determination_index(v, i)
            ii = w[0] - region.x0 - 1
            jj = w[1] - region.y0 - 1
            masks[t][ii, jj] = True
        return masks

    def sigma(self, v: Vertex, store: RealizationStore, h: float = None) -> int:
        params = self.params if h is None else IsingParams(self.params.beta, h)
        return cftp_vertex(v, store, params, self.t_max).spin

    def sample_field(self, rect: Rect, store: RealizationStore,
                     h: float = None) -> SpinField:
        params = self.params if h is None else IsingParams(self.params.beta, h)
        return sample_window(rect, store, params, self.t_max)
