import itertools
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvspeedup import multiwalk
from lvspeedup.distributions import RuntimeDistribution, min_expectation, sample
from lvspeedup.fitting import EmpiricalSample
from lvspeedup.multiwalk import (
    MissingBaseline,
    bootstrap_min,
    bootstrap_speedup,
    exact_bootstrap_min,
    measure_parallel_speedup,
    parallel_solve,
    speedup_from_winners,
)
from lvspeedup.problems import PermutationProblem
from lvspeedup.solver import SolverError, SolverParams, collect, solve


def enumerate_min(values, n):
    # brute force over all ordered n-tuples drawn with replacement
    total = sum(min(t) for t in itertools.product(values, repeat=n))
    return total / len(values) ** n


# bootstrap ---------------------------------------------------------------------

def test_bootstrap_examples():
    s = EmpiricalSample(sample(RuntimeDistribution.exponential(10, 0.1), 3, 500))
    one = bootstrap_min(s, 1, 20_000, seed=1)
    assert abs(one.mean_min - s.mean) < 3 * one.std_error
    two = bootstrap_min(EmpiricalSample([1, 3]), 2, 100_000, seed=2)
    assert abs(two.mean_min - 1.5) < 3 * two.std_error
    const = bootstrap_min(EmpiricalSample([7.0] * 20), 64, 5_000)
    assert const.mean_min == 7 and const.std_error == 0


def test_exact_formula_matches_enumeration():
    values = [4.0, 1.0, 9.0, 1.0, 2.5]
    for n in range(1, 5):
        assert exact_bootstrap_min(values, n) == pytest.approx(enumerate_min(values, n), rel=1e-12)
    assert exact_bootstrap_min([1, 3], 2) == 1.5


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.lists(st.sampled_from([1.0, 2.0, 5.0, 11.0, 40.0]), min_size=1, max_size=30),
       st.integers(1, 12), st.integers(0, 10**6))
def test_bootstrap_converges_on_discrete_samples(values, n, seed):
    resamples = 4_000
    est = bootstrap_min(values, n, resamples, seed)
    exact = exact_bootstrap_min(values, n)
    # exact sd of the minimum (min of squares is the square of the min): the
    # empirical one is 0 when a rare atom never shows up among the resamples
    var = exact_bootstrap_min(np.square(values), n) - exact ** 2
    assert abs(est.mean_min - exact) <= 3 * math.sqrt(max(var, 0.0) / resamples) + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(1, 1e4), min_size=2, max_size=50), st.integers(0, 1000))
def test_bootstrap_nonincreasing_in_n(values, seed):
    means = [bootstrap_min(values, n, 2_000, seed).mean_min for n in (1, 2, 3, 8, 20)]
    assert all(b <= a for a, b in zip(means, means[1:]))
    curve = bootstrap_speedup(values, [1, 2, 3, 8, 20], 2_000, seed)
    assert [curve.as_dict()[n] for n in (1, 2, 3, 8, 20)] == pytest.approx([np.mean(values) / m for m in means])


def test_bootstrap_deterministic():
    v = sample(RuntimeDistribution.lognormal(0, 3, 1), 4, 300)
    assert bootstrap_min(v, 5, 3000, 9) == bootstrap_min(v, 5, 3000, 9)


def test_bootstrap_speedup_matches_closed_form():
    s = EmpiricalSample(sample(RuntimeDistribution.exponential(100, 0.001), 21, 10**4))
    curve = bootstrap_speedup(s, [1, 2, 4, 8], 100_000, seed=3)
    g = curve.as_dict()
    assert abs(g[1] - 1.0) < 3 * curve.std_errors[0]
    for n, target in zip((2, 4, 8), (1100 / 600, 1100 / 350, 1100 / 225)):
        assert g[n] == pytest.approx(target, rel=0.05)
    assert (round(1100 / 600, 2), round(1100 / 350, 2), round(1100 / 225, 2)) == (1.83, 3.14, 4.89)
    assert curve.limit is None


def test_bootstrap_tracks_min_expectation():
    dist = RuntimeDistribution.lognormal(6210, 12.0275, 1.3398)
    s = EmpiricalSample(sample(dist, 8, 10**5))
    for n in (2, 4, 8, 16):
        est = bootstrap_min(s, n, 100_000, seed=n)
        assert est.mean_min == pytest.approx(min_expectation(dist, n), rel=0.02)


def test_bootstrap_unbiased_on_cut_gaussian():
    # across seeds the bootstrap speedup centers on the predicted curve even
    # where a single 10^4-draw sample scatters by several percent
    dist = RuntimeDistribution.gaussian(0, 3000, 1500)
    cores = [2, 8, 64]
    pred = np.array([dist.mean() / min_expectation(dist, n) for n in cores])
    errs = []
    for seed in range(40):
        v = sample(dist, seed, 10**4)
        errs.append([v.mean() / exact_bootstrap_min(v, n) for n in cores] / pred - 1)
    errs = np.array(errs)
    assert np.all(np.abs(errs.mean(axis=0)) <= 3 * errs.std(axis=0, ddof=1) / math.sqrt(40))


@pytest.mark.parametrize("call", [
    lambda: bootstrap_speedup([1.0, 2.0], []),
    lambda: bootstrap_speedup([1.0, 2.0], [4, 2]),
    lambda: bootstrap_min([], 2),
    lambda: bootstrap_min([1.0], 0),
    lambda: bootstrap_min([1.0], 2, resamples=0),
])
def test_bootstrap_argument_errors(call):
    with pytest.raises(ValueError):
        call()


# parallel race -----------------------------------------------------------------

COSTAS10 = PermutationProblem("costas", 10)


def test_single_worker_equals_sequential():
    rec = parallel_solve(COSTAS10, SolverParams(rng_seed=77), 1)
    seq = solve(COSTAS10, SolverParams(rng_seed=77))
    assert (rec.winner.seed, rec.winner.iterations, rec.winner.solution) == \
           (seq.seed, seq.iterations, seq.solution)
    assert rec.total_iterations_all_workers == seq.iterations


def test_winner_is_min_of_replays():
    for base in (0, 500, 9001):
        rec = parallel_solve(COSTAS10, SolverParams(rng_seed=base), 6)
        seq = [solve(COSTAS10, SolverParams(rng_seed=base + i)).iterations for i in range(6)]
        assert rec.winner_iterations == min(seq)
        assert rec.winner_seed == base + seq.index(min(seq))
        assert rec.total_iterations_all_workers <= sum(seq)
        for i, walk in enumerate(rec.walks):
            assert walk.iterations <= seq[i]


def test_no_threads_left_running():
    before = threading.active_count()
    parallel_solve(COSTAS10, SolverParams(rng_seed=3), 8)
    assert threading.active_count() == before


def test_worker_failures_are_recorded(monkeypatch):
    real = multiwalk.solve

    def flaky(problem, params, **kw):
        if params.rng_seed % 2:
            raise RuntimeError("boom")
        return real(problem, params, **kw)

    monkeypatch.setattr(multiwalk, "solve", flaky)
    rec = parallel_solve(COSTAS10, SolverParams(rng_seed=10), 4)
    assert [f.seed for f in rec.failures] == [11, 13]
    assert rec.winner_seed in (10, 12)

    monkeypatch.setattr(multiwalk, "solve", lambda *a, **k: (_ for _ in ()).throw(RuntimeError("x")))
    with pytest.raises(SolverError):
        parallel_solve(COSTAS10, SolverParams(rng_seed=10), 3)


def test_parallel_argument_errors():
    with pytest.raises(ValueError):
        parallel_solve(COSTAS10, SolverParams(), 0)
    with pytest.raises(ValueError):
        measure_parallel_speedup(COSTAS10, SolverParams(), 2, 0, [1.0, 2.0])
    with pytest.raises(MissingBaseline):
        measure_parallel_speedup(COSTAS10, SolverParams(), 2, 3, None)


def test_one_worker_speedup_is_about_one():
    base = collect(COSTAS10, SolverParams(rng_seed=1000), 60).iterations_sample()
    res = measure_parallel_speedup(COSTAS10, SolverParams(rng_seed=5000), 1, 60, base)
    lo, hi = res.confidence_interval
    assert lo <= 1.0 <= hi
    assert len(res.records) == 60
    seeds = [r.winner_seed for r in res.records]
    assert seeds == list(range(5000, 5060))


def test_speedup_interval_formula():
    base = np.array([10.0, 20.0, 30.0, 40.0])
    wins = np.array([5.0, 5.0, 10.0, 20.0])
    g, (lo, hi), se = speedup_from_winners(base, wins)
    assert g == pytest.approx(25.0 / 10.0)
    rel_b = base.std(ddof=1) / 2 / 25.0
    rel_w = wins.std(ddof=1) / 2 / 10.0
    assert se == pytest.approx(g * math.sqrt(rel_b ** 2 + rel_w ** 2))
    assert (lo + hi) / 2 == pytest.approx(g)
    assert hi - lo == pytest.approx(2 * 1.959963984540054 * se)
