import numpy as np
import pytest

from percolab.errors import ScanCapExceeded
from percolab.lattice import Rect
from percolab.models import (BernoulliModel, MajorityWindowModel,
                             bernoulli_field, bernoulli_p, h_from_p,
                             majority_sigma)
from percolab.representation import RealizationStore


def test_bernoulli_p_values():
    assert bernoulli_p(0.0) == pytest.approx(0.5)
    assert bernoulli_p(0.5) == pytest.approx(0.731059, abs=1e-6)
    assert bernoulli_p(-0.5) == pytest.approx(1 - bernoulli_p(0.5), abs=1e-15)


def test_h_from_p_roundtrip():
    for p in (0.1, 0.5, 0.9):
        assert bernoulli_p(h_from_p(p)) == pytest.approx(p, abs=1e-14)
    with pytest.raises(ValueError):
        h_from_p(0.0)


def test_bernoulli_field_extremes():
    st = RealizationStore(1, 0)
    rect = Rect(0, 0, 5, 5)
    assert np.all(bernoulli_field(rect, st, 30.0).spins == 1)
    assert np.all(bernoulli_field(rect, st, -30.0).spins == -1)


def test_bernoulli_field_monotone_coupling():
    st = RealizationStore(8, 3)
    rect = Rect(-4, -4, 4, 4)
    prev = bernoulli_field(rect, st, -1.0).spins
    for h in (-0.5, 0.0, 0.5, 1.0):
        cur = bernoulli_field(rect, st, h).spins
        assert np.all(cur >= prev)
        prev = cur


def test_bernoulli_field_matches_sigma():
    m = BernoulliModel()
    st = RealizationStore(5, 0)
    fld = m.sample_field(Rect(0, 0, 4, 4), st, 0.3)
    for v in [(0, 0), (2, 3), (4, 4)]:
        assert fld.spin_at(v) == m.sigma(v, st, 0.3)


@pytest.mark.parametrize("model", [BernoulliModel(), MajorityWindowModel()])
def test_determination_sequence_roundtrip(model):
    v = (2, -1)
    seen = set()
    for m in range(1, 60):
        j = model.determination_index(v, m)
        assert j not in seen, f"duplicate index at m={m}"
        seen.add(j)
        assert model.rank_of(v, j) == m
    with pytest.raises(ValueError):
        model.determination_index(v, 0)


def test_bernoulli_rank_shells():
    m = BernoulliModel()
    assert m.rank_of((0, 0), (0, 0)) == 1
    # ring 1 occupies ranks 2..9, ring 2 ranks 10..25
    for j in [(1, 1), (-1, 0), (0, 1)]:
        assert 2 <= m.rank_of((0, 0), j) <= 9
    assert 10 <= m.rank_of((0, 0), (2, 0)) <= 25


def test_majority_window_convention():
    m = MajorityWindowModel()
    w = m.window((0, 0), 1)
    assert w == Rect(-1, -1, 0, 0)
    assert w.size == 4
    assert m.window((3, 2), 2) == Rect(1, 0, 4, 3)


def test_majority_shell_sizes():
    m = MajorityWindowModel()
    for n in (1, 2, 3):
        assert len(m.shell_cells((0, 0), n)) == 4 * n * n - 4 * (n - 1) ** 2


def test_majority_sigma_matches_field():
    m = MajorityWindowModel()
    st = RealizationStore(11, 0)
    fld = m.sample_field(Rect(0, 0, 7, 7), st, 0.2)
    for v in [(0, 0), (3, 5), (7, 7)]:
        assert fld.spin_at(v) == m.sigma(v, st, 0.2)


def test_majority_sigma_helper_agrees():
    st = RealizationStore(2, 0)
    assert majority_sigma((1, 1), st, 0.1) == MajorityWindowModel().sigma(
        (1, 1), st, 0.1)


def test_majority_threshold_validation():
    with pytest.raises(ValueError):
        MajorityWindowModel(threshold=0)


def test_majority_scan_cap_error():
    # scan_cap=1 consults only the 4-cell window: |diff| <= 4 < 5 always
    m = MajorityWindowModel(threshold=5, scan_cap=1)
    with pytest.raises(ScanCapExceeded):
        m.sigma((0, 0), RealizationStore(0, 0), 0.0)


def test_majority_extreme_bias_decides_fast():
    m = MajorityWindowModel()
    st = RealizationStore(4, 0)
    assert m.sigma((0, 0), st, 30.0) == 1
    assert m.sigma((0, 0), st, -30.0) == -1


def test_majority_monotone_in_h():
    m = MajorityWindowModel()
    st = RealizationStore(21, 0)
    vals = [m.sigma((0, 0), st, h) for h in (-1.0, -0.3, 0.0, 0.3, 1.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_majority_is_determined_consistent():
    """Once the prefix determines sigma_v, the determined value equals the
    fully realized sigma_v (exactness of the extreme-completion test)."""
    m = MajorityWindowModel()
    st = RealizationStore(6, 0)
    v = (0, 0)
    full = m.sigma(v, st, 0.1)
    determined_at = None
    for k in range(1, 200):
        if m.is_determined(v, k, st, 0.1):
            determined_at = k
            break
    assert determined_at is not None
    # determination is monotone in the prefix length
    assert m.is_determined(v, determined_at + 7, st, 0.1)
    assert m._scan(v, st, 0.1, known=determined_at, fill=0) == full
    assert m._scan(v, st, 0.1, known=determined_at, fill=1) == full
