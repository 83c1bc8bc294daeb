import math

import numpy as np
import pytest

from percolab.models import BernoulliModel, MajorityWindowModel
from percolab.representation import (LevelDistribution, RealizationStore,
                                     RepresentationProfile, logistic_family,
                                     needs, rank_of, realize,
                                     realize_from_uniform, tail_prob)


def test_logistic_family_values():
    fam = logistic_family()
    assert fam.k == 1
    assert fam.tail(0.0, 1) == pytest.approx(0.5)
    assert fam.tail(0.5, 1) == pytest.approx(0.7310585786300049, abs=1e-12)
    # symmetric: tail(-h) = 1 - tail(h)
    assert fam.tail(-0.5, 1) == pytest.approx(1 - fam.tail(0.5, 1), abs=1e-15)


def test_pmf_sums_to_one():
    fam = logistic_family()
    for h in (-2, -0.3, 0, 0.7):
        assert fam.pmf(h).sum() == pytest.approx(1.0, abs=1e-14)


def test_tail_prob_range_check():
    fam = logistic_family()
    with pytest.raises(ValueError):
        tail_prob(fam, 0.0, 0)
    with pytest.raises(ValueError):
        tail_prob(fam, 0.0, 2)


def test_store_pure_function():
    st = RealizationStore(3, 1)
    assert st.uniform_vertex((4, -2)) == st.uniform_vertex((4, -2))
    assert st.uniform(((4, -2), -3)) == st.uniform_spacetime((4, -2), -3)
    assert st.uniform((4, -2)) == st.uniform_vertex((4, -2))


def test_store_replica_independence():
    st = RealizationStore(3, 0)
    assert st.uniform_vertex((0, 0)) != st.with_replica(1).uniform_vertex((0, 0))


def test_vertex_and_spacetime_streams_disjoint():
    st = RealizationStore(3, 0)
    # same coordinate words, different domain tag
    assert st.uniform_vertex((2, 5)) != st.uniform_spacetime((2, 5), 0)


def test_realize_monotone_in_h():
    fam = logistic_family()
    st = RealizationStore(17, 0)
    for v in [(0, 0), (5, -1), (-3, 2)]:
        levels = [realize(st, v, fam, h) for h in np.linspace(-3, 3, 25)]
        assert all(a <= b for a, b in zip(levels, levels[1:]))


def test_realize_from_uniform():
    tails = np.array([0.9, 0.5, 0.1])
    assert realize_from_uniform(0.05, tails) == 3
    assert realize_from_uniform(0.3, tails) == 2
    assert realize_from_uniform(0.7, tails) == 1
    assert realize_from_uniform(0.95, tails) == 0
    out = realize_from_uniform(np.array([0.05, 0.95]), tails)
    assert list(out) == [3, 0]


def test_profile_validation():
    with pytest.raises(ValueError):
        RepresentationProfile(C0=0.0, gamma=1.0, alpha=0.5)
    prof = RepresentationProfile(C0=2.0, gamma=1.0, alpha=0.5)
    assert prof.decay_bound(2) == pytest.approx(2.0 / 8.0)


def test_rank_and_needs_bernoulli():
    m = BernoulliModel()
    st = RealizationStore(0, 0)
    assert rank_of(m, (0, 0), (0, 0)) == 1
    # rank 1 always needed (sigma_v non-constant)
    assert needs(m, (0, 0), (0, 0), st, 0.0)
    # any other vertex is never needed: rank > 1 but prefix length 1 determines
    assert not needs(m, (0, 0), (1, 0), st, 0.0)


def test_majority_rank_positive():
    m = MajorityWindowModel()
    # every lattice vertex has finite rank for the majority scan
    assert rank_of(m, (0, 0), (3, 3)) > 1
    assert not math.isinf(rank_of(m, (0, 0), (100, 100)))
