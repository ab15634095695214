import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from marked_renewal.characterization import CaseDescriptor, make_case_laws
from marked_renewal.laws import INF, parse_law_expr
from marked_renewal.renewal_sim import (
    EpochCSVError,
    EpochPairs,
    EpochStatus,
    MarkedArrivalSequence,
    SimConfig,
    Termination,
    batch_counts_at_time,
    batch_sample_epoch_pairs,
    counts_at_time,
    first_epochs,
    read_epoch_pairs_csv,
    simulate_marked_arrivals,
    write_epoch_pairs_csv,
)

OBS, INFX, CENS = EpochStatus.OBSERVED, EpochStatus.INFINITE_EXACT, EpochStatus.HORIZON_CENSORED


def _seq(epochs, marks, term=Termination.HORIZON_REACHED, horizon=10.0):
    return MarkedArrivalSequence(np.asarray(epochs, float), np.asarray(marks, np.int8), term, horizon)


# -- config -----------------------------------------------------------------


@pytest.mark.parametrize("kw", [{"p": 0.0}, {"p": 1.0}, {"horizon": 0.0}, {"arrival_cap": 0}])
def test_config_rejects_invalid(kw):
    args = {"t1_law": "exp(rate=1)", "t2_law": "exp(rate=1)", "p": 0.5} | kw
    with pytest.raises(ValueError):
        SimConfig(**args)


# -- single trajectories ----------------------------------------------------


def test_infinite_first_arrival_gives_empty_sequence():
    seq = simulate_marked_arrivals(SimConfig("point(inf)", "exp(rate=1)", 0.5))
    assert len(seq) == 0
    assert seq.terminated is Termination.INFINITY_REACHED


def test_zero_inter_arrivals_hit_the_cap():
    seq = simulate_marked_arrivals(SimConfig("point(2)", "point(0)", 0.5, horizon=5, arrival_cap=10))
    assert len(seq) == 10
    assert np.all(seq.epochs == 2.0)
    assert seq.terminated is Termination.CAP_REACHED


def test_horizon_termination_keeps_epochs_inside():
    seq = simulate_marked_arrivals(SimConfig("exp(rate=1)", "exp(rate=1)", 0.5, horizon=50.0, seed=3))
    assert seq.terminated is Termination.HORIZON_REACHED
    assert np.all(seq.epochs <= 50.0)
    assert np.all(np.diff(seq.epochs) >= 0)
    assert len(seq.marks) == len(seq.epochs)


def test_hpp_mean_count():
    cfg = SimConfig("exp(rate=1)", "exp(rate=1)", 0.5, horizon=1000.0, seed=5)
    n0, n1 = batch_counts_at_time(cfg, 10**5, 10.0)
    total = n0 + n1
    assert abs(total.mean() - 10.0) <= 3 * math.sqrt(10 / 1e5)


def test_hpp_counts_are_poisson():
    theta, t, n = 1.5, 4.0, 10**5
    cfg = SimConfig(f"exp(rate={theta})", f"exp(rate={theta})", 0.3, horizon=100.0, seed=8)
    n0, n1 = batch_counts_at_time(cfg, n, t)
    total = n0 + n1
    mean = theta * t
    top = int(sps.poisson.ppf(1 - 1e-4, mean))
    observed = np.array([np.sum(total == k) for k in range(top)] + [np.sum(total >= top)])
    expected = np.append(sps.poisson.pmf(np.arange(top), mean), sps.poisson.sf(top - 1, mean)) * n
    # pool sparse tail cells into their neighbours
    lo, hi = np.argmax(expected >= 5), len(expected) - np.argmax(expected[::-1] >= 5)
    obs = np.concatenate([[observed[:lo + 1].sum()], observed[lo + 1:hi - 1], [observed[hi - 1:].sum()]])
    exp = np.concatenate([[expected[:lo + 1].sum()], expected[lo + 1:hi - 1], [expected[hi - 1:].sum()]])
    _, p_value = sps.chisquare(obs, exp * obs.sum() / exp.sum())
    assert p_value > 0.01


# -- first epochs and counts ------------------------------------------------


def test_first_epochs_of_empty_infinite_sequence():
    pair = first_epochs(_seq([], [], Termination.INFINITY_REACHED))
    assert (pair.r0, pair.r1, pair.r0_status, pair.r1_status) == (INF, INF, INFX, INFX)


def test_first_epochs_with_simultaneous_arrivals():
    pair = first_epochs(_seq([1.0, 1.0, 2.5], [1, 0, 1]))
    assert (pair.r1, pair.r0) == (1.0, 1.0)
    assert pair.r0_status == pair.r1_status == OBS


def test_first_epochs_horizon_censoring():
    pair = first_epochs(_seq([3.0], [1]))
    assert pair.r1 == 3.0 and pair.r1_status == OBS
    assert pair.r0 == INF and pair.r0_status == CENS


def test_first_epochs_cap_counts_as_censoring():
    pair = first_epochs(_seq([2.0, 2.0], [0, 0], Termination.CAP_REACHED))
    assert pair.r1_status == CENS


def test_counts_examples():
    assert counts_at_time(_seq([], []), 4.0) == (0, 0)
    assert counts_at_time(_seq([2, 2, 2], [0, 1, 1]), 2.0) == (1, 2)


@given(st.integers(0, 2**31), st.floats(0.0, 30.0))
@settings(max_examples=50, deadline=None)
def test_thinning_counts_add_up(seed, t):
    seq = simulate_marked_arrivals(SimConfig("erlang(k=2,rate=1)", "exp(rate=2)", 0.4, horizon=30.0, seed=seed))
    n0, n1 = counts_at_time(seq, t)
    assert n0 + n1 == int(np.sum(seq.epochs <= t))


def test_case_e_single_arrival_probability_at_delay():
    t1, t2 = make_case_laws(CaseDescriptor("E", kappa=0.0, q0=0.5, alpha=1.0))
    n = 10**6
    _, n1 = batch_counts_at_time(SimConfig(t1, t2, 0.5, horizon=1.0, arrival_cap=10**4, seed=21), n, 0.0)
    assert abs(np.mean(n1 == 1) - 1 / 3) <= 3 * math.sqrt(2 / 9) / 1e3


# -- batches ----------------------------------------------------------------


BATCH_LAWS = [
    ("exp(rate=1)", "exp(rate=1)"),
    ("mix(0.75: point(1), 0.25: point(inf))", "mix(0.5: point(0), 0.5: point(inf))"),
    ("geomN0(s=0.75,scale=1)", "mix(0.5: point(0), 0.5: geomN(s=0.75,scale=1))"),
    ("unif(0,2)", "mix(0.3: erlang(k=3,rate=2), 0.7: exp(rate=1,shift=0.2))"),
]


@pytest.mark.parametrize("t1, t2", BATCH_LAWS)
def test_batch_matches_sequential_simulation(t1, t2):
    cfg = SimConfig(t1, t2, 0.35, horizon=20.0, arrival_cap=500, seed=99)
    batch = batch_sample_epoch_pairs(cfg, 60)
    for i in range(60):
        one = SimConfig(t1, t2, 0.35, horizon=20.0, arrival_cap=500, seed=99, stream_index=i)
        assert batch[i] == first_epochs(simulate_marked_arrivals(one))


def test_batch_of_one_is_stream_zero():
    cfg = SimConfig("exp(rate=1)", "exp(rate=2)", 0.5, seed=4)
    assert batch_sample_epoch_pairs(cfg, 1)[0] == first_epochs(simulate_marked_arrivals(cfg))


def test_batch_counts_match_sequential():
    cfg = SimConfig("exp(rate=1)", "exp(rate=1)", 0.5, horizon=10.0, seed=6)
    n0, n1 = batch_counts_at_time(cfg, 40, 3.0)
    for i in range(40):
        seq = simulate_marked_arrivals(SimConfig("exp(rate=1)", "exp(rate=1)", 0.5, horizon=10.0, seed=6,
                                                 stream_index=i))
        assert counts_at_time(seq, 3.0) == (n0[i], n1[i])


def test_batch_independent_of_thread_count():
    cfg = SimConfig("exp(rate=1)", "exp(rate=1)", 0.5, seed=12)
    a = batch_sample_epoch_pairs(cfg, 200_000, threads=1)
    b = batch_sample_epoch_pairs(cfg, 200_000, threads=4)
    for f in ("r0", "r1", "r0_status", "r1_status"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_all_infinite_pairs():
    pairs = batch_sample_epoch_pairs(SimConfig("point(inf)", "exp(rate=1)", 0.5), 100)
    assert np.all(np.isinf(pairs.r0)) and np.all(np.isinf(pairs.r1))
    assert np.all(pairs.r0_status == INFX)


def test_case_d_thinned_first_arrival_mean():
    t1, t2 = make_case_laws(CaseDescriptor("D", kappa=0.0, theta=1.0))
    pairs = batch_sample_epoch_pairs(SimConfig(t1, t2, 0.5, seed=7), 10**6)
    _, o1 = pairs.observed()
    assert abs(pairs.r1[o1].mean() - 2.0) <= 0.006


def test_case_d_first_epochs_uncorrelated():
    t1, t2 = make_case_laws(CaseDescriptor("D", kappa=0.0, theta=1.0))
    pairs = batch_sample_epoch_pairs(SimConfig(t1, t2, 0.5, seed=8), 10**6)
    assert abs(np.corrcoef(pairs.r0, pairs.r1)[0, 1]) < 0.004


def test_seed_changes_realizations_not_distribution():
    n = 10**5
    a = batch_sample_epoch_pairs(SimConfig("erlang(k=2,rate=1)", "erlang(k=2,rate=1)", 0.5, seed=1), n)
    b = batch_sample_epoch_pairs(SimConfig("erlang(k=2,rate=1)", "erlang(k=2,rate=1)", 0.5, seed=2), n)
    assert not np.array_equal(a.r1, b.r1)
    assert sps.ks_2samp(a.r1, b.r1).statistic < 2 * 1.63 / math.sqrt(n)


def test_case_c_exact_infinity_fraction():
    t1, t2 = make_case_laws(CaseDescriptor("C", kappa=1.0, q0=0.5))
    pairs = batch_sample_epoch_pairs(SimConfig(t1, t2, 0.5, horizon=5.0, seed=2), 10**5)
    frac = pairs.censoring_fractions()
    # both epochs are infinite when T1 is infinite
    both_inf = np.mean((pairs.r0_status == INFX) & (pairs.r1_status == INFX))
    assert both_inf >= 0.25 - 4 * math.sqrt(0.25 * 0.75 / 1e5)
    assert frac["r0_HorizonCensored"] == 0.0


# -- CSV --------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    cfg = SimConfig("mix(0.75: point(1), 0.25: point(inf))", "exp(rate=1)", 0.5, horizon=3.0, seed=1)
    pairs = batch_sample_epoch_pairs(cfg, 500)
    path = tmp_path / "pairs.csv"
    write_epoch_pairs_csv(pairs, str(path))
    text = path.read_text()
    assert text.splitlines()[0] == "r0,r0_status,r1,r1_status"
    assert any(line.startswith("inf,") for line in text.splitlines())
    back = read_epoch_pairs_csv(str(path))
    for f in ("r0", "r1", "r0_status", "r1_status"):
        assert np.array_equal(getattr(back, f), getattr(pairs, f))


@pytest.mark.parametrize("text", [
    "",
    "a,b,c,d\n1,observed,2,observed\n",
    "r0,r0_status,r1,r1_status\n1,Observed,2\n",
    "r0,r0_status,r1,r1_status\n1,seen,2,observed\n",
    "r0,r0_status,r1,r1_status\n",
])
def test_csv_errors(text):
    with pytest.raises(EpochCSVError):
        read_epoch_pairs_csv(io.StringIO(text))


def test_from_pairs_round_trip():
    pairs = batch_sample_epoch_pairs(SimConfig("exp(rate=1)", "exp(rate=1)", 0.5, horizon=0.5), 50)
    again = EpochPairs.from_pairs(list(pairs))
    assert np.array_equal(again.r1, pairs.r1)
    assert np.array_equal(again.r1_status, pairs.r1_status)
