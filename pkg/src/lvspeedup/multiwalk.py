"""Two empirical views of the multi-walk runtime.

``bootstrap_*`` resamples minima from a sequential sample, a nonparametric
stand-in for the min transform.  ``parallel_solve`` actually races several
solver instances on threads, first solution wins.

Race semantics are defined in iterations, not wall time.  Every walk
publishes its final iteration count, and a walk that has already spent as
many iterations as the best published one (ties go to the lower worker
index) stops at its next poll, since it can no longer win.  The reported
winner is therefore exactly the walk a sequential replay of the same seeds
would elect, whatever the thread scheduling.
"""

from __future__ import annotations

import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import SpeedupCurve
from .fitting import EmpiricalSample
from .problems import PermutationProblem
from .solver import RunSample, SolverError, SolverParams, solve

Z95 = 1.959963984540054


class MissingBaseline(ValueError):
    pass


@dataclass(frozen=True)
class BootstrapEstimate:
    n: int
    mean_min: float
    std_error: float
    resamples: int


def _positive_int(name, value):
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _as_values(sample) -> np.ndarray:
    values = sample.values if isinstance(sample, EmpiricalSample) else np.asarray(sample, dtype=float)
    if values.size == 0:
        raise ValueError("empty sample")
    return values


def _bootstrap_minima(values: np.ndarray, cores: Sequence[int], resamples: int, seed: int):
    """Yield ``(n, minima)`` for increasing ``n``.

    Draw k of every resample comes from its own stream ``[seed, k]``, so the
    minima for n+1 extend those for n and can only shrink.
    """
    running = np.full(resamples, np.inf)
    drawn = 0
    for n in cores:
        for k in range(drawn, n):
            rng = np.random.default_rng([seed, k])
            np.minimum(running, values[rng.integers(values.size, size=resamples)], out=running)
        drawn = n
        yield n, running


def _estimate(n, minima, resamples) -> BootstrapEstimate:
    sd = float(minima.std(ddof=1)) if resamples > 1 else 0.0
    return BootstrapEstimate(n, float(minima.mean()), sd / math.sqrt(resamples), resamples)


def bootstrap_min(sample, n: int, resamples: int = 100_000, seed: int = 0) -> BootstrapEstimate:
    """Mean and standard error of the minimum of n draws with replacement."""
    values = _as_values(sample)
    n = _positive_int("n", n)
    resamples = _positive_int("resamples", resamples)
    for _, minima in _bootstrap_minima(values, [n], resamples, seed):
        pass
    return _estimate(n, minima, resamples)


def bootstrap_speedup(sample, cores: Sequence[int], resamples: int = 100_000,
                      seed: int = 0) -> SpeedupCurve:
    """mean(sample) / bootstrap mean-min per core count; errors by the delta
    method with the sample mean held fixed."""
    values = _as_values(sample)
    cores = [_positive_int("core count", n) for n in cores]
    if not cores:
        raise ValueError("no core counts given")
    if any(b <= a for a, b in zip(cores, cores[1:])):
        raise ValueError("core counts must be strictly increasing")
    resamples = _positive_int("resamples", resamples)
    mean = float(values.mean())
    points, errors = [], []
    for n, minima in _bootstrap_minima(values, cores, resamples, seed):
        est = _estimate(n, minima, resamples)
        points.append((n, mean / est.mean_min))
        errors.append(mean * est.std_error / est.mean_min ** 2)
    return SpeedupCurve(tuple(points), std_errors=tuple(errors))


def exact_bootstrap_min(sample, n: int) -> float:
    """E[min of n draws with replacement], computed exactly from order statistics."""
    v = np.sort(_as_values(sample))
    size = v.size
    # P(min >= v[i]) = ((size - i) / size) ** n
    tail = ((size - np.arange(size)) / size) ** n
    return float(v[0] + np.sum(np.diff(v) * tail[1:]))


# parallel race ----------------------------------------------------------

@dataclass
class WorkerFailure:
    worker: int
    seed: int
    message: str


@dataclass
class ParallelRunRecord:
    workers: int
    base_seed: int
    winner_seed: int
    winner_iterations: int
    wall_time: float
    total_iterations_all_workers: int
    winner: RunSample
    walks: list = field(default_factory=list, repr=False)
    failures: list = field(default_factory=list)
    oversubscribed: bool = False


class _Race:
    def __init__(self):
        self.lock = threading.Lock()
        self.best = (math.inf, math.inf)  # (iterations, worker)

    def offer(self, iterations, worker):
        with self.lock:
            if (iterations, worker) < self.best:
                self.best = (iterations, worker)

    def hopeless(self, iterations_done, worker):
        # an unsolved walk ends at >= iterations_done + 1
        return (iterations_done + 1, worker) > self.best


def parallel_solve(problem: PermutationProblem, params: SolverParams, workers: int,
                   *, iteration_cap: Optional[int] = None) -> ParallelRunRecord:
    """Race ``workers`` walks with seeds ``rng_seed + i``; first (fewest
    iterations, then lowest index) verified solution wins."""
    workers = _positive_int("workers", workers)
    race = _Race()
    results: list = [None] * workers
    failures: list = []

    def walk(i):
        seed = params.rng_seed + i
        try:
            rec = solve(problem, params.with_seed(seed), iteration_cap=iteration_cap,
                        should_stop=lambda it: race.hopeless(it, i))
        except Exception as exc:  # noqa: BLE001 - one bad walk must not sink the race
            failures.append(WorkerFailure(i, seed, f"{type(exc).__name__}: {exc}"))
            return
        results[i] = rec
        if rec.solved:
            race.offer(rec.iterations, i)

    start = time.perf_counter()
    if workers == 1:
        walk(0)
    else:
        threads = [threading.Thread(target=walk, args=(i,), daemon=True) for i in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    wall = time.perf_counter() - start

    if math.isinf(race.best[0]):
        detail = "; ".join(f.message for f in failures) or "no walk solved within the cap"
        raise SolverError(f"parallel run failed on every worker: {detail}")
    w = int(race.best[1])
    winner = results[w]
    return ParallelRunRecord(
        workers=workers,
        base_seed=params.rng_seed,
        winner_seed=winner.seed,
        winner_iterations=winner.iterations,
        wall_time=wall,
        total_iterations_all_workers=sum(r.iterations for r in results if r is not None),
        winner=winner,
        walks=results,
        failures=sorted(failures, key=lambda f: f.worker),
        oversubscribed=workers > (os.cpu_count() or 1),
    )


@dataclass
class ParallelSpeedup:
    workers: int
    trials: int
    mean_speedup: float
    confidence_interval: tuple
    std_error: float
    baseline_mean: float
    baseline_size: int
    mean_winner_iterations: float
    records: list = field(default_factory=list, repr=False)


def trial_seed(base_seed: int, trial: int, workers: int) -> int:
    """Base seed of a trial; trials use disjoint consecutive seed blocks."""
    return base_seed + trial * workers


def measure_parallel_speedup(problem: PermutationProblem, params: SolverParams, workers: int,
                             trials: int, baseline, *, iteration_cap: Optional[int] = None,
                             progress=None) -> ParallelSpeedup:
    """baseline mean / mean winner iterations over ``trials`` races.

    ``baseline`` is the sequential iteration sample (EmpiricalSample or raw
    values); see :func:`speedup_from_winners` for the interval.
    """
    if baseline is None:
        raise MissingBaseline("a sequential baseline sample is required")
    base = _as_values(baseline)
    workers = _positive_int("workers", workers)
    trials = _positive_int("trials", trials)
    records = []
    for t in range(trials):
        rec = parallel_solve(problem, params.with_seed(trial_seed(params.rng_seed, t, workers)),
                             workers, iteration_cap=iteration_cap)
        records.append(rec)
        if progress is not None:
            progress(t + 1, trials, rec)
    wins = [r.winner_iterations for r in records]
    speedup, ci, se = speedup_from_winners(base, wins)
    return ParallelSpeedup(
        workers=workers,
        trials=trials,
        mean_speedup=speedup,
        confidence_interval=ci,
        std_error=se,
        baseline_mean=float(base.mean()),
        baseline_size=int(base.size),
        mean_winner_iterations=float(np.mean(wins)),
        records=records,
    )


def speedup_from_winners(baseline, winner_iterations) -> tuple:
    """(speedup, (lo, hi), std_error) of baseline mean over mean winner count.

    The normal-approximation variance adds the delta-method terms of both
    means.  All-zero winners (every race started on a solution) give inf.
    """
    base = _as_values(baseline)
    wins = np.asarray(winner_iterations, dtype=float)
    if wins.size == 0:
        raise ValueError("no parallel trials")
    b_mean, w_mean = float(base.mean()), float(wins.mean())
    if w_mean <= 0:
        return math.inf, (math.inf, math.inf), math.inf
    speedup = b_mean / w_mean
    rel_b = base.std(ddof=1) / math.sqrt(base.size) / b_mean if base.size > 1 else 0.0
    rel_w = wins.std(ddof=1) / math.sqrt(wins.size) / w_mean if wins.size > 1 else 0.0
    se = speedup * math.hypot(rel_b, rel_w)
    return speedup, (speedup - Z95 * se, speedup + Z95 * se), se
