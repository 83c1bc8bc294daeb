"""Exact enumeration for increasing events: probabilities, internal
pivotal probabilities, the Russo derivative, and implied sharp-threshold
constants.

Everything here is exact (no Monte Carlo): probabilities are sums over
all (k+1)^n configurations, capped at 2^24.  Universal constants are
outputs (the smallest constant making the inequality hold at the given
event and parameter), never inputs.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateEvent, TooLarge
from .representation import LevelDistribution

ENUM_CAP = 2 ** 24


@dataclass
class EventSpec:
    """An increasing event on {0..k}^n given by its total indicator."""

    n: int
    k: int
    indicator: callable  # array (N, n) of levels -> bool array (N,)
    name: str = ""
    increasing: bool = True

    def configs(self) -> np.ndarray:
        """All (k+1)^n configurations, one row each, coordinate 0 fastest."""
        total = (self.k + 1) ** self.n
        if total > ENUM_CAP:
            raise TooLarge(f"(k+1)^n = {total} exceeds {ENUM_CAP}")
        idx = np.arange(total)
        cols = []
        for i in range(self.n):
            cols.append((idx // (self.k + 1) ** i) % (self.k + 1))
        return np.stack(cols, axis=1).astype(np.int64)

    def verify_increasing(self) -> bool:
        """Exhaustive single-coordinate-raise monotonicity check."""
        cfg = self.configs()
        ind = np.asarray(self.indicator(cfg), dtype=bool)
        for i in range(self.n):
            can_raise = cfg[:, i] < self.k
            raised = cfg[can_raise].copy()
            raised[:, i] += 1
            if np.any(ind[can_raise] & ~np.asarray(self.indicator(raised),
                                                   dtype=bool)):
                return False
        return True


def _config_probs(cfg: np.ndarray, level_pmf: np.ndarray) -> np.ndarray:
    """Product-measure weight of each configuration row."""
    return np.prod(np.asarray(level_pmf)[cfg], axis=1)


def _kahan_sum(values: np.ndarray) -> float:
    s = 0.0
    c = 0.0
    for v in values:
        y = float(v) - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


def exact_prob_pmf(spec: EventSpec, level_pmf) -> float:
    """Exact P(A) under the product measure with the given level masses."""
    cfg = spec.configs()
    ind = np.asarray(spec.indicator(cfg), dtype=bool)
    w = _config_probs(cfg[ind], level_pmf)
    # compensated summation keeps the result partition-independent
    return _kahan_sum(np.sort(w))


def exact_prob(spec: EventSpec, family: LevelDistribution, h: float) -> float:
    return exact_prob_pmf(spec, family.pmf(h))


def exact_prob_bernoulli(spec: EventSpec, p: float) -> float:
    if spec.k != 1:
        raise ValueError("bernoulli path requires k=1")
    return exact_prob_pmf(spec, [1.0 - p, p])


def exact_prob_rational(spec: EventSpec, level_pmf) -> Fraction:
    """Exact-rational cross-check path (n <= 16)."""
    if (spec.k + 1) ** spec.n > 2 ** 16:
        raise TooLarge("rational mode capped at (k+1)^n <= 2^16")
    pmf = [Fraction(x) for x in level_pmf]
    cfg = spec.configs()
    ind = np.asarray(spec.indicator(cfg), dtype=bool)
    total = Fraction(0)
    for row in cfg[ind]:
        w = Fraction(1)
        for lev in row:
            w *= pmf[int(lev)]
        total += w
    return total


def internal_pivotal_prob_pmf(spec: EventSpec, i: int, level_pmf) -> float:
    """Exact P(A_i) = P(config in A, config with coordinate i forced to 0
    not in A)."""
    if not 0 <= i < spec.n:
        raise ValueError(f"coordinate {i} out of range")
    cfg = spec.configs()
    ind = np.asarray(spec.indicator(cfg), dtype=bool)
    forced = cfg.copy()
    forced[:, i] = 0
    ind0 = np.asarray(spec.indicator(forced), dtype=bool)
    w = _config_probs(cfg[ind & ~ind0], level_pmf)
    return _kahan_sum(np.sort(w))


def internal_pivotal_prob(spec: EventSpec, i: int, family: LevelDistribution,
                          h: float) -> float:
    return internal_pivotal_prob_pmf(spec, i, family.pmf(h))


def pivotal_vector_pmf(spec: EventSpec, level_pmf) -> np.ndarray:
    return np.array([internal_pivotal_prob_pmf(spec, i, level_pmf)
                     for i in range(spec.n)])


def russo_derivative_bernoulli(spec: EventSpec, p: float, delta: float = 1e-5):
    """(closed_form, finite_difference) values of d/dp P_p(A) for k=1.

    Closed form is the Margulis-Russo sum sum_i P(A_i)/p; the central
    finite difference of exact_prob is always computed as a cross-check.
    """
    if spec.k != 1:
        raise ValueError("k=1 required for the closed-form path")
    if not 0 < p < 1:
        raise ValueError("p in (0,1) required")
    piv = pivotal_vector_pmf(spec, [1.0 - p, p])
    closed = float(piv.sum() / p)
    fd = (exact_prob_bernoulli(spec, p + delta)
          - exact_prob_bernoulli(spec, p - delta)) / (2.0 * delta)
    return closed, fd


def derivative_in_h(spec: EventSpec, family: LevelDistribution, h: float,
                    delta: float = 1e-5) -> float:
    """Central finite difference of exact_prob in h (any k)."""
    return (exact_prob(spec, family, h + delta)
            - exact_prob(spec, family, h - delta)) / (2.0 * delta)


def russo_derivative(spec: EventSpec, family: LevelDistribution, h: float,
                     delta: float = 1e-5):
    """(closed_form, finite_difference) values of d/dh P^(h)(A).

    For k=1 the closed form chains the Margulis-Russo identity through
    dp/dh; for k>1 only the finite-difference estimate exists and is
    returned for both entries.
    """
    fd = derivative_in_h(spec, family, h, delta)
    if spec.k == 1:
        p = family.tail(h, 1)
        piv = pivotal_vector_pmf(spec, family.pmf(h))
        closed = float(piv.sum() / p) * family.dtail(h, 1)
    else:
        closed = fd
    return closed, fd


@dataclass
class InfluenceReport:
    event: str
    p: float = None
    h: float = None
    prob: float = None
    pivotal: np.ndarray = None
    epsilon: float = None
    derivative: float = None
    implied_K1: float = None
    implied_K1_sharp: float = None
    # interval (two-point) quantities
    h1: float = None
    h2: float = None
    lhs: float = None
    epsilon_bar: float = None
    c_h1_h2: float = None
    implied_K2: float = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if v is not None}
        if self.pivotal is not None:
            d["pivotal"] = [float(x) for x in self.pivotal]
        return d


def talagrand_report(spec: EventSpec, p: float) -> InfluenceReport:
    """All ingredients of the single-point sharp-threshold inequality
    dP/dp >= log(1/eps)/K1 * P(1-P), plus the implied (smallest) K1 and
    the sharper variant with K1 -> K p(1-p) log(2/(p(1-p)))."""
    prob = exact_prob_bernoulli(spec, p)
    if prob <= 0.0 or prob >= 1.0:
        raise DegenerateEvent(f"P(A) = {prob}")
    piv = pivotal_vector_pmf(spec, [1.0 - p, p])
    eps = float(piv.max())
    if eps >= 1.0 or eps <= 0.0:
        raise DegenerateEvent(f"epsilon = {eps}")
    closed, fd = russo_derivative_bernoulli(spec, p)
    k1 = math.log(1.0 / eps) * prob * (1.0 - prob) / closed
    k_sharp = k1 / (p * (1.0 - p) * math.log(2.0 / (p * (1.0 - p))))
    return InfluenceReport(event=spec.name, p=p, prob=prob, pivotal=piv,
                           epsilon=eps, derivative=closed,
                           implied_K1=k1, implied_K1_sharp=k_sharp,
                           extras={"derivative_fd": fd})


def _refine_extremum(fn, h1: float, h2: float, maximize: bool,
                     tol: float = 1e-6, start_points: int = 17) -> float:
    """Adaptive grid extremum of fn over [h1, h2], refined until stable."""
    pts = np.linspace(h1, h2, start_points)
    best = None
    while True:
        vals = [fn(h) for h in pts]
        cur = max(vals) if maximize else min(vals)
        if best is not None and abs(cur - best) <= tol:
            return cur
        best = cur
        pts = np.linspace(h1, h2, 2 * len(pts) - 1)


def corollary_interval_report(spec: EventSpec, family: LevelDistribution,
                              h1: float, h2: float) -> InfluenceReport:
    """Two-point inequality P^(h1)(A)(1 - P^(h2)(A)) <= eps_bar^((h2-h1)c/K2):
    computes the left side, eps_bar, c(h1,h2), and the implied K2 solving
    the inequality with equality."""
    if not h1 < h2:
        raise ValueError("h1 < h2 required")
    p1 = exact_prob(spec, family, h1)
    p2 = exact_prob(spec, family, h2)
    lhs = p1 * (1.0 - p2)

    def max_pivotal(h):
        return float(pivotal_vector_pmf(spec, family.pmf(h)).max())

    def min_tail_deriv(h):
        return min(family.dtail(h, j) for j in range(1, family.k + 1))

    eps_bar = _refine_extremum(max_pivotal, h1, h2, maximize=True)
    c = _refine_extremum(min_tail_deriv, h1, h2, maximize=False)
    implied_k2 = None
    if 0.0 < lhs < 1.0 and 0.0 < eps_bar < 1.0:
        implied_k2 = (h2 - h1) * c * math.log(eps_bar) / math.log(lhs)
    return InfluenceReport(event=spec.name, h1=h1, h2=h2, lhs=lhs,
                           epsilon_bar=eps_bar, c_h1_h2=c,
                           implied_K2=implied_k2,
                           extras={"P_h1": p1, "P_h2": p2})


# -- builtin events -----------------------------------------------------------

def _dictator(cfg):
    return cfg[:, 0] >= 1


def _and2(cfg):
    return (cfg[:, 0] >= 1) & (cfg[:, 1] >= 1)


def _or2(cfg):
    return (cfg[:, 0] >= 1) | (cfg[:, 1] >= 1)


def _majority(cfg):
    n = cfg.shape[1]
    return (cfg >= 1).sum(axis=1) * 2 > n


def _tribes_2_3(cfg):
    b = cfg >= 1
    return ((b[:, 0] & b[:, 1]) | (b[:, 2] & b[:, 3]) | (b[:, 4] & b[:, 5]))


def _crossing_2x2(cfg):
    # coordinates: (0,0), (0,1), (1,0), (1,1) = BL, TL, BR, TR;
    # horizontal + crossing of the 2x2-vertex box, ordinary adjacency
    b = cfg >= 1
    return (b[:, 0] & b[:, 2]) | (b[:, 1] & b[:, 3])


BUILTINS = {
    "dictator": (1, _dictator),
    "and2": (2, _and2),
    "or2": (2, _or2),
    "maj3": (3, _majority),
    "maj9": (9, _majority),
    "tribes_2_3": (6, _tribes_2_3),
    "crossing_2x2": (4, _crossing_2x2),
}


def builtin_event(name: str, k: int = 1) -> EventSpec:
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin {name!r}; have {sorted(BUILTINS)}")
    n, fn = BUILTINS[name]
    return EventSpec(n=n, k=k, indicator=fn, name=name)


def event_from_truth_table(n: int, table_hex: str, name: str = "table",
                           k: int = 1) -> EventSpec:
    """k=1 event from a hex-encoded bitset over the 2^n configurations
    (bit i = indicator of the configuration with binary encoding i,
    coordinate 0 least significant)."""
    if k != 1:
        raise ValueError("truth tables are supported for k=1 only")
    bits = int(table_hex, 16)
    size = 1 << n

    def indicator(cfg):
        idx = (np.asarray(cfg) << np.arange(n)).sum(axis=1)
        return np.array([(bits >> int(i)) & 1 == 1 for i in idx])

    if bits >> size:
        raise ValueError("truth table longer than 2^n bits")
    return EventSpec(n=n, k=1, indicator=indicator, name=name)


def load_event(doc) -> EventSpec:
    """EventSpec from a JSON document (dict or string): either
    {"builtin": name, "k": k} or {"n": n, "truth_table_hex": "..."}"""
    if isinstance(doc, str):
        if doc in BUILTINS:
            return builtin_event(doc)
        doc = json.loads(doc)
    if "builtin" in doc:
        return builtin_event(doc["builtin"], k=doc.get("k", 1))
    return event_from_truth_table(doc["n"], doc["truth_table_hex"],
                                  name=doc.get("name", "table"),
                                  k=doc.get("k", 1))
