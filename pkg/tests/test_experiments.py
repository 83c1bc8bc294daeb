import io
import json

import numpy as np
import pytest

import percolab.experiments as ex
from percolab.errors import BracketFailure
from percolab.ising import IsingParams
from percolab.lattice import Adjacency, Rect, box
from percolab.models import BernoulliModel, h_from_p
from percolab.representation import RealizationStore


BERN = BernoulliModel()


def test_get_model_names():
    assert ex.get_model("bernoulli").name == "bernoulli"
    assert ex.get_model("majority").name == "majority"
    assert ex.get_model("ising", beta=0.2).name == "ising"
    with pytest.raises(KeyError):
        ex.get_model("potts")


def test_sample_fields_batch_matches_scalar():
    rect = Rect(0, 0, 5, 5)
    for name in ("bernoulli", "majority"):
        model = ex.get_model(name)
        batch = ex.sample_fields_batch(model, rect, 0.2, 9, range(3))
        for r in range(3):
            fld = model.sample_field(rect, RealizationStore(9, r), 0.2)
            assert np.array_equal(batch[r], fld.spins), name


def test_crossing_curve_limits_and_monotone():
    rect = Rect(0, 0, 8, 8)
    rows, violations = ex.crossing_curve(BERN, rect, [-6.0, 0.0, 6.0], 50, 1)
    assert violations == 0
    assert rows[0].estimate == 0.0
    assert rows[-1].estimate == 1.0
    assert rows[0].stderr == 0.0
    assert all(r.replicas == 50 for r in rows)


def test_estimate_critical_bernoulli():
    est = ex.estimate_critical(BERN, 16, tol=0.05, replicas=400, seed=3,
                               bracket=(-1.0, 1.0))
    assert est.lo <= est.h_hat <= est.hi
    assert est.hi - est.lo <= 0.05
    # converged p_hat lands in the artifact's own sanity interval
    from percolab.models import bernoulli_p
    assert 0.5 < bernoulli_p(est.h_hat) < 0.7


def test_estimate_critical_bad_bracket():
    with pytest.raises(BracketFailure):
        ex.estimate_critical(BERN, 8, replicas=100, seed=0,
                             bracket=(-2.0, -1.5))


def test_estimate_critical_tol_validation():
    with pytest.raises(ValueError):
        ex.estimate_critical(BERN, 8, tol=0.0, replicas=10, seed=0)


def test_estimate_critical_flat_curve_ising_beta0():
    model = ex.get_model("ising", beta=0.0)
    with pytest.raises(BracketFailure):
        ex.estimate_critical(model, 4, replicas=200, seed=1,
                             bracket=(-1.0, 1.0))


def test_matching_low_confidence_flag():
    rep = ex.matching_relation_check(BERN, 4, tol=0.2, replicas=50, seed=5,
                                     bracket=(-1.5, 1.5))
    assert rep["low_confidence"]
    assert "p_sum" in rep


def test_origin_cluster_size():
    st = RealizationStore(12, 0)
    window = box(10)
    size, truncated = ex.origin_cluster_size(BERN, st, -6.0, window, 1,
                                             Adjacency.ORDINARY)
    assert (size, truncated) == (0, False)
    size, truncated = ex.origin_cluster_size(BERN, st, 6.0, window, 1,
                                             Adjacency.ORDINARY)
    assert truncated
    assert size == window.size


def test_cluster_tail_window_rule():
    with pytest.raises(ValueError):
        ex.cluster_tail_experiment(BERN, 0.0, box(10), 10, (2, 50), 0)


def test_cluster_tail_small_run():
    out = ex.cluster_tail_experiment(BERN, h_from_p(0.3), box(20), 3000,
                                     (1, 8), 2, targets=("plus",))
    fit = out["plus"]["fit"]
    assert fit.rate > 0
    hist = out["plus"]["hist"]
    # P(|C+| >= 1) = p
    total = sum(hist.values())
    assert sum(c for s, c in hist.items() if s >= 1) / total == \
        pytest.approx(0.3, abs=0.03)


def test_finite_size_check_fires_subcritical():
    out = ex.finite_size_check(BERN, h_from_p(0.2), 8, replicas=300, seed=1,
                               tail_replicas=2000)
    assert out["fired"]
    assert out["tail_fit"].rate > 0


def test_finite_size_check_supercritical():
    out = ex.finite_size_check(BERN, h_from_p(0.9), 8, replicas=200, seed=1)
    assert not out["fired"]
    assert out["estimate"] > 0.9


def test_finite_size_check_eps_zero_never_fires():
    out = ex.finite_size_check(BERN, h_from_p(0.2), 8, eps_hat=0.0,
                               replicas=100, seed=1)
    assert not out["fired"]


def test_rsw_scan_extremes():
    hi = ex.rsw_scan(BERN, h_from_p(0.9), [0.5, 1.0], [6, 10], 100, 4)
    assert all(r.estimate > 0.9 for r in hi["grid"].values())
    lo = ex.rsw_scan(BERN, h_from_p(0.1), [1.0], [6, 10], 100, 4)
    assert all(r.estimate < 0.1 for r in lo["grid"].values())


def test_rsw_rho_one_matches_crossing_curve():
    h = h_from_p(0.6)
    scan = ex.rsw_scan(BERN, h, [1.0], [8], 200, 6)
    rows, _ = ex.crossing_curve(BERN, Rect(0, 0, 8, 8), [h], 200, 6,
                                audit=False)
    assert scan["grid"][(1.0, 8)].estimate == pytest.approx(rows[0].estimate)


def test_influence_scan_bernoulli():
    out = ex.influence_scan(BERN, 4, h_from_p(0.6), 2000, 3)
    assert 0 < out["crossing_rate"] < 1
    assert out["epsilon_n"] > 0
    assert out["epsilon_upper"] >= out["epsilon_n"] >= out["epsilon_lower"]
    # every reported pivotal site is inside the box
    rect = Rect(0, 0, 12, 4)
    assert all(rect.contains(v) for v in out["per_index"])


def test_pivotal_sites_hand_case():
    # single bridge column in the middle: the bridge cell is pivotal
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, :] = True
    mask[2, :] = True
    mask[1, 1] = True
    piv = ex._pivotal_sites(mask)
    assert (1, 1) in piv


def test_influence_forced_matches_articulation():
    """The articulation fast path and the forced-recomputation path count
    the same pivotal events for the lattice-indexed model."""
    rect = Rect(0, 0, 6, 2)
    h = h_from_p(0.55)
    fast = ex.influence_scan(BERN, 2, h, 300, 11)
    slow = ex._influence_forced(BERN, rect, 2, h, 300, 11,
                                list(rect.vertices()))
    assert fast["per_index"] == slow["per_index"]


def test_forced_store_overrides():
    st = RealizationStore(5, 0)
    fv = ex.ForcedStore(st, (2, 3))
    assert fv.uniform_vertex((2, 3)) == 1.0
    assert fv.uniform_vertex((2, 4)) == st.uniform_vertex((2, 4))
    grid = fv.uniform_vertex_grid(np.arange(0, 5), np.arange(0, 5))
    assert grid[2, 3] == 1.0
    fs = ex.ForcedStore(st, ((1, 1), -2))
    assert fs.uniform_spacetime((1, 1), -2) == 1.0
    g2 = fs.uniform_spacetime_grid(np.arange(0, 3), np.arange(0, 3), -2)
    assert g2[1, 1] == 1.0
    g3 = fs.uniform_spacetime_grid(np.arange(0, 3), np.arange(0, 3), -1)
    assert g3[1, 1] != 1.0


def test_dlr_check_beta_zero():
    out = ex.dlr_check(0.0, 0.0, box(1), 3000, 7)
    tested = [b for b in out["bins"] if b["tested"]]
    assert tested
    for b in tested:
        assert b["expected"] == pytest.approx(0.5)
        assert abs(b["z"]) < 4


def test_dlr_window_validation():
    with pytest.raises(ValueError):
        ex.dlr_check(0.1, 0.0, Rect(0, 0, 1, 1), 100, 0)


def test_boundary_influence_beta_zero():
    rows = ex.boundary_influence(0.0, 0.0, [2], 500, 3)
    assert rows[0]["delta"] == pytest.approx(0.0, abs=0.01)


def test_event_pair_distance_zero_not_compared():
    out = ex.event_pair_covariance(BERN, h_from_p(0.6), 6, 0, 300, 2)
    assert not out["compared"]
    assert out["cov"] == pytest.approx(out["P_A"] * (1 - out["P_A"]),
                                       abs=1e-12)


def test_mixing_check_modes():
    out = ex.mixing_check("ising_boundary", {"beta": 0.0, "h": 0.0}, [2],
                          300, 1)
    assert out["rows"][0]["n"] == 2
    out2 = ex.mixing_check("event_pair", {"model": "bernoulli",
                                          "h": h_from_p(0.6), "box_side": 6},
                           [8], 200, 1)
    assert out2["rows"][0]["compared"]
    with pytest.raises(ValueError):
        ex.mixing_check("bogus", {}, [1], 10, 0)


def test_positive_association_smoke():
    out = ex.positive_association_check(BERN, h_from_p(0.6), 8, 4, 500, 9)
    assert out["ok"]


def test_rows_to_csv():
    rows = [ex.EstimateRow(0.1, 0.5, 0.05, 100, 0.01)]
    buf = io.StringIO()
    ex.rows_to_csv(rows, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("param,")
    assert lines[1].startswith("0.1,0.5,")


def test_summary_json_serializes_everything():
    payload = ex.summary_json(
        {"seed": 1},
        {"row": ex.EstimateRow(0.0, 0.5, 0.1, 10, 0.0),
         "arr": np.arange(3), "np": np.float64(1.5),
         "tuplekey": {(1, 2): 3}})
    doc = json.loads(payload)
    assert doc["config"]["seed"] == 1
    assert doc["results"]["arr"] == [0, 1, 2]
    assert "build" in doc


def test_reproducibility_bit_for_bit():
    rect = Rect(0, 0, 10, 10)
    a, _ = ex.crossing_curve(BERN, rect, [0.1], 200, 99, audit=False)
    b, _ = ex.crossing_curve(BERN, rect, [0.1], 200, 99, audit=False)
    assert a[0].estimate == b[0].estimate
