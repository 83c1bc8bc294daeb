import math

import numpy as np
import pytest

from percolab.errors import NotCoalesced, RegionTooSmall
from percolab.ising import (IsingModel, IsingParams, cftp_vertex,
                            finite_box_gibbs, finite_box_gibbs_batch,
                            heat_bath_prob, ising_family, parallel_update,
                            sample_window, sample_window_batch,
                            update_plus_prob_from_tails, y_pmf)
from percolab.clusters import SpinField
from percolab.lattice import Rect, boundary, box, parity
from percolab.representation import RealizationStore, needs


def test_params_validation():
    with pytest.raises(ValueError):
        IsingParams(-0.1, 0.0)
    with pytest.warns(UserWarning):
        IsingParams(0.45, 0.0)


def test_heat_bath_beta_zero():
    p = IsingParams(0.0, 5.0)
    for m in range(5):
        assert heat_bath_prob(m, 1, p) == pytest.approx(0.5)


def test_heat_bath_normalization_and_monotone():
    p = IsingParams(0.3, 0.2)
    qs = [heat_bath_prob(m, 1, p) for m in range(5)]
    for m in range(5):
        assert heat_bath_prob(m, 1, p) + heat_bath_prob(m, -1, p) == \
            pytest.approx(1.0, abs=1e-14)
    assert all(a < b for a, b in zip(qs, qs[1:]))


def test_heat_bath_range_checks():
    p = IsingParams(0.1, 0.0)
    with pytest.raises(ValueError):
        heat_bath_prob(5, 1, p)
    with pytest.raises(ValueError):
        heat_bath_prob(2, 0, p)


def test_y_pmf_valid():
    for beta in (0.0, 0.2, 0.4):
        for h in (-1.0, 0.0, 0.5):
            y = y_pmf(IsingParams(beta, h))
            assert y.pmf.sum() == pytest.approx(1.0, abs=1e-12)
            assert y.tails[0] == 1.0 and y.tails[6] == 0.0
            assert np.all(np.diff(y.tails) <= 1e-15)


def test_y_tails_monotone_in_h():
    lo = y_pmf(IsingParams(0.3, -0.5)).tails
    hi = y_pmf(IsingParams(0.3, 0.5)).tails
    assert np.all(hi[1:6] >= lo[1:6])


def test_update_prob_matches_heat_bath():
    for beta in (0.0, 0.1, 0.3):
        for h in (-1.0, 0.0, 0.1):
            p = IsingParams(beta, h)
            for d in range(5):
                assert update_plus_prob_from_tails(d, p) == pytest.approx(
                    heat_bath_prob(4 - d, 1, p), abs=1e-12)


def test_ising_family_is_y_tails():
    fam = ising_family(0.3)
    y = y_pmf(IsingParams(0.3, 0.2))
    assert fam.k == 5
    for m in range(1, 6):
        assert fam.tail(0.2, m) == pytest.approx(y.tails[m], abs=1e-15)


def test_parallel_update_beta_zero_parity():
    """At beta=0 the update is a fair coin regardless of neighbours, and
    only matching-parity vertices change."""
    rect = Rect(0, 0, 6, 6)
    start = SpinField(rect, np.ones((7, 7), dtype=np.int8))
    st = RealizationStore(9, 0)
    out = parallel_update(start, -2, st, IsingParams(0.0, 0.0))
    assert out.rect == Rect(1, 1, 5, 5)
    for v in out.rect.vertices():
        if parity(v) != 0:  # t=-2 is even: odd vertices copy
            assert out.spin_at(v) == 1
    changed = sum(out.spin_at(v) == -1 for v in out.rect.vertices())
    assert changed > 0


def test_parallel_update_region_too_small():
    fld = SpinField(Rect(0, 0, 1, 1), np.ones((2, 2), dtype=np.int8))
    with pytest.raises(RegionTooSmall):
        parallel_update(fld, -1, RealizationStore(0, 0), IsingParams(0.1))


def test_cftp_deterministic_and_valid_tau():
    p = IsingParams(0.3, 0.0)
    st = RealizationStore(13, 2)
    r1 = cftp_vertex((1, -2), st, p)
    r2 = cftp_vertex((1, -2), st, p)
    assert (r1.spin, r1.tau) == (r2.spin, r2.tau)
    assert r1.spin in (-1, 1)
    assert r1.tau < 0


def test_cftp_beta_zero_tau():
    """At beta=0 a vertex coalesces at its own first update: tau = -1 for
    odd vertices, -2 for even (time -1 is odd, -2 even)."""
    p = IsingParams(0.0, 0.0)
    st = RealizationStore(4, 0)
    assert cftp_vertex((0, 1), st, p).tau == -1
    assert cftp_vertex((0, 0), st, p).tau == -2


def test_cftp_not_coalesced_tmax():
    p = IsingParams(0.3, 0.0)
    found = False
    for rep in range(200):
        st = RealizationStore(50, rep)
        try:
            r = cftp_vertex((0, 0), st, p)
        except NotCoalesced:
            found = True
            break
        if r.tau <= -4:
            with pytest.raises(NotCoalesced):
                cftp_vertex((0, 0), st, p, t_max=2)
            found = True
            break
    assert found


def test_sample_window_matches_batch_and_cftp():
    p = IsingParams(0.3, 0.1)
    rect = Rect(0, 0, 4, 4)
    st = RealizationStore(42, 3)
    fld = sample_window(rect, st, p)
    batch = sample_window_batch(rect, p, 42, [3])
    assert np.array_equal(fld.spins, batch[0])
    # per-vertex CFTP reproduces the window values (same stationary config)
    for v in [(0, 0), (2, 3), (4, 4)]:
        assert fld.spin_at(v) == cftp_vertex(v, st, p).spin


def test_window_monotone_in_h():
    rect = Rect(0, 0, 5, 5)
    st = RealizationStore(7, 1)
    prev = sample_window(rect, st, IsingParams(0.3, -0.4)).spins
    for h in (-0.2, 0.0, 0.2, 0.4):
        cur = sample_window(rect, st, IsingParams(0.3, h)).spins
        assert np.all(cur >= prev)
        prev = cur


def test_finite_box_gibbs_boundary_handling():
    rect = box(2)
    p = IsingParams(0.2, 0.0)
    st = RealizationStore(3, 0)
    plus = finite_box_gibbs(rect, 1, st, p)
    minus = finite_box_gibbs(rect, -1, st, p)
    assert np.all(plus.spins >= minus.spins)  # monotone in the boundary
    fixed = {w: 1 for w in boundary(rect)}
    same = finite_box_gibbs(rect, fixed, st, p)
    assert np.array_equal(plus.spins, same.spins)
    with pytest.raises(ValueError):
        finite_box_gibbs(rect, {(99, 99): 1}, st, p)


def test_finite_box_gibbs_batch_matches_scalar():
    rect = box(2)
    p = IsingParams(0.25, 0.1)
    arr = finite_box_gibbs_batch(rect, 1, p, 8, range(5))
    for r in range(5):
        fld = finite_box_gibbs(rect, 1, RealizationStore(8, r), p)
        assert np.array_equal(arr[r], fld.spins)


def test_model_determination_sequence():
    model = IsingModel(IsingParams(0.2, 0.0))
    v = (1, 1)
    assert model.determination_index(v, 1) == ((1, 1), -1)
    seen = set()
    for m in range(1, 40):
        j = model.determination_index(v, m)
        assert j not in seen
        seen.add(j)
        assert model.rank_of(v, j) == m
        (w, t) = j
        assert abs(w[0] - v[0]) + abs(w[1] - v[1]) < -t


def test_model_rank_infinite_outside_cone():
    model = IsingModel(IsingParams(0.2, 0.0))
    assert math.isinf(model.rank_of((0, 0), ((3, 0), -2)))
    assert math.isinf(model.rank_of((0, 0), ((0, 0), 0)))


def test_model_is_determined_consistent():
    """Once determined, the extreme completions both equal sigma_v."""
    model = IsingModel(IsingParams(0.3, 0.1))
    st = RealizationStore(19, 0)
    v = (0, 0)
    full = model.sigma(v, st)
    m = 1
    while not model.is_determined(v, m, st):
        m += 1
        assert m < 2000
    assert model.is_determined(v, m + 10, st)
    # determination at prefix m pins the value: both completions agree on
    # full, checked through sigma
    assert model.sigma(v, st) == full


def test_needs_first_index():
    model = IsingModel(IsingParams(0.2, 0.0))
    st = RealizationStore(2, 0)
    assert needs(model, (0, 0), ((0, 0), -1), st, 0.0)
    assert not needs(model, (0, 0), ((5, 5), -1), st, 0.0)
