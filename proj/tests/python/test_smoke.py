import math

import pytest

import bbmlab


def test_version():
    assert bbmlab.__version__ == "0.1.0"


def test_analytic_functions():
    assert bbmlab.centering(1.0) == pytest.approx(math.sqrt(2))
    assert bbmlab.envelope(10.0, 0.4, 5.0) == pytest.approx(5.0 ** 0.4)
    assert bbmlab.normal_cdf(0.0) == pytest.approx(0.5)
    assert bbmlab.normal_icdf(0.975) == pytest.approx(1.959963985, abs=1e-8)


def test_run_is_deterministic():
    a = bbmlab.run(T=2.0, seed=42)
    b = bbmlab.run(T=2.0, seed=42)
    assert a.snapshots[0].entries == b.snapshots[0].entries
    assert a.stats.final_alive == len(a.snapshots[0].entries)
    assert a.stats.nodes_created == 2 * a.stats.branch_events + 1


def test_observables():
    res = bbmlab.run(T=2.0, seed=7)
    snap = res.snapshots[0]
    best = max(pos for _, pos in snap.entries)
    assert bbmlab.max_offset(snap) == pytest.approx(best - bbmlab.centering(2.0))
    bbmlab.derivative_martingale(snap)  # just has to evaluate


def test_pruning_never_raises_the_max():
    full = bbmlab.run(T=4.0, seed=11, mode="grid", sample_dt=0.1)
    pruned = bbmlab.run(T=4.0, seed=11, mode="grid", sample_dt=0.1,
                        prune="gap_to_max", prune_param=2.0)
    m_full = bbmlab.max_offset(full.snapshots[0])
    m_pruned = bbmlab.max_offset(pruned.snapshots[0])
    assert m_pruned <= m_full + 1e-12
    assert pruned.stats.final_alive <= full.stats.final_alive


def test_bridge_closed_forms():
    assert bbmlab.bridge_nonneg_prob(2.0, 1.0, 1.0) == pytest.approx(1 - math.exp(-1))
    assert bbmlab.bridge_subinterval_nonneg_prob(1.0, 2.0, 1.0) == pytest.approx(0.52050, abs=1e-4)
    assert bbmlab.bridge_two_point_line_bound(1.0, 1.0, 1.0, 1.0, 4.0) == pytest.approx(4.0)


def test_many_to_one_small():
    c = bbmlab.many_to_one_check(t=1.0, trials=2000, seed=3)
    assert c["rhs"] == pytest.approx(math.e)
    assert abs(c["z"]) < 5


def test_subsequence_check():
    rows = bbmlab.subsequence_average_check([0.0], [1.0], [1.0, 2.0, 4.0])
    assert all(r["ok"] for r in rows)
    assert rows[0]["sup_abs_rho"] == pytest.approx(1.0)
