"""Finitary i.i.d. representation machinery.

A spin field is a monotone function of underlying i.i.d. variables
X_i taking values in {0..k}, where the level law is a one-parameter
family with strictly increasing tail probabilities in h.  Realization
is lazy and reproducible: each X_i is the inverse-CDF count of tails
exceeded by a single keyed uniform deviate U_i, which gives the exact
monotone coupling across h for free.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .lattice import Vertex


@dataclass(frozen=True)
class LevelDistribution:
    """One-parameter family mu^(h) on {0..k} via its tail probabilities.

    tail(h, j) = mu^(h)({j..k}) for 1 <= j <= k, strictly increasing and
    C^1 in h; dtail is its h-derivative.
    """

    k: int
    tail: callable   # (h, j) -> probability
    dtail: callable  # (h, j) -> d/dh tail(h, j)

    def tails(self, h: float) -> np.ndarray:
        """Array of tail(h, j) for j = 1..k."""
        return np.array([self.tail(h, j) for j in range(1, self.k + 1)])

    def pmf(self, h: float) -> np.ndarray:
        """Level masses mu^(h)(j) for j = 0..k."""
        t = np.concatenate(([1.0], self.tails(h), [0.0]))
        return t[:-1] - t[1:]


def tail_prob(family: LevelDistribution, h: float, j: int) -> float:
    if not 1 <= j <= family.k:
        raise ValueError(f"level j={j} out of range 1..{family.k}")
    return family.tail(h, j)


def logistic_family() -> LevelDistribution:
    """k=1 family with tail(h, 1) = exp(h)/(exp(h)+exp(-h))."""
    return LevelDistribution(
        k=1,
        tail=lambda h, j: 1.0 / (1.0 + math.exp(-2.0 * h)),
        dtail=lambda h, j: _logistic_deriv(h),
    )


def _logistic_deriv(h: float) -> float:
    p = 1.0 / (1.0 + math.exp(-2.0 * h))
    return 2.0 * p * (1.0 - p)


class RealizationStore:
    """Lazy, seed-derived assignment of uniforms to the countable index set.

    U_i is a pure function of (master_seed, replica_id, index); no state
    is kept, so concurrent sharing and order independence are trivial.
    Indexes are vertices (x, y) or space-time pairs ((x, y), t) with t < 0.
    """

    def __init__(self, master_seed: int, replica_id: int = 0):
        self.master_seed = int(master_seed)
        self.replica_id = int(replica_id)

    def uniform_vertex(self, v: Vertex) -> float:
        return rng.key_uniform(self.master_seed, rng.TAG_VERTEX,
                               self.replica_id, v[0], v[1])

    def uniform_spacetime(self, v: Vertex, t: int) -> float:
        return rng.key_uniform(self.master_seed, rng.TAG_SPACETIME,
                               self.replica_id, v[0], v[1], t)

    def uniform(self, index) -> float:
        """Dispatch on index encoding: (x, y) or ((x, y), t)."""
        if len(index) == 2 and isinstance(index[0], tuple):
            return self.uniform_spacetime(index[0], index[1])
        return self.uniform_vertex(index)

    def uniform_vertex_grid(self, xs, ys) -> np.ndarray:
        """Uniforms over the outer grid xs x ys (broadcast arrays)."""
        return rng.key_uniform_array(self.master_seed, rng.TAG_VERTEX,
                                     self.replica_id,
                                     np.asarray(xs)[:, None],
                                     np.asarray(ys)[None, :])

    def uniform_spacetime_grid(self, xs, ys, t: int) -> np.ndarray:
        return rng.key_uniform_array(self.master_seed, rng.TAG_SPACETIME,
                                     self.replica_id,
                                     np.asarray(xs)[:, None],
                                     np.asarray(ys)[None, :], t)

    def with_replica(self, replica_id: int) -> "RealizationStore":
        return RealizationStore(self.master_seed, replica_id)


def realize(store: RealizationStore, index, family: LevelDistribution,
            h: float) -> int:
    """X_i(h) = #{j in 1..k : U_i < tail(h, j)}; nondecreasing in h."""
    u = store.uniform(index)
    return int(np.sum(u < family.tails(h)))


def realize_from_uniform(u, tails: np.ndarray):
    """Level counts for given uniforms against tails (j = 1..k); vectorized."""
    u = np.asarray(u)
    return np.sum(u[..., None] < tails, axis=-1).astype(np.int64)


@dataclass(frozen=True)
class RepresentationProfile:
    """Declared decay/disjointness constants; empirical, never paper values."""

    C0: float
    gamma: float
    alpha: float

    def __post_init__(self):
        if min(self.C0, self.gamma, self.alpha) <= 0:
            raise ValueError("profile constants must be positive")

    def decay_bound(self, m: int) -> float:
        return self.C0 / m ** (2.0 + self.gamma)


# -- model-generic operations ------------------------------------------------
#
# A model object supplies:
#   family               LevelDistribution of the underlying X variables
#   profile              RepresentationProfile
#   determination_index(v, m) -> index  (the sequence i_m(v), m >= 1)
#   rank_of(v, j)        -> int or math.inf
#   is_determined(v, m, store, h) -> bool
#   sigma(v, store, h)   -> spin in {-1, +1}


def is_determined(model, v: Vertex, m: int, store: RealizationStore,
                  h: float) -> bool:
    if m < 1:
        raise ValueError("m must be >= 1")
    return model.is_determined(v, m, store, h)


def rank_of(model, v: Vertex, j) -> float:
    return model.rank_of(v, j)


def needs(model, v: Vertex, j, store: RealizationStore, h: float) -> bool:
    """True iff the length-(m-1) prefix does not determine sigma_v,
    where m = rank of j for v.  Infinite rank returns False by convention
    (only finite ranks contribute to the influence sums)."""
    m = model.rank_of(v, j)
    if math.isinf(m):
        return False
    if m == 1:
        # empty prefix: determined only if sigma_v is constant, which
        # property (i) rules out for every shipped model
        return True
    return not model.is_determined(v, m - 1, store, h)
