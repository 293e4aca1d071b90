"""Adaptive Search: error projection, culprit repair, tabu marks, resets."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .problems import PermutationProblem, ProblemKind, is_solution


@dataclass(frozen=True)
class SolverParams:
    tabu_tenure: int = 10
    reset_fraction: float = 0.25
    reset_trigger: Optional[int] = None  # None -> max(1, variables // 10)
    max_iterations: Optional[int] = None  # restart-from-scratch period
    rng_seed: int = 0

    def __post_init__(self):
        if self.tabu_tenure < 0:
            raise ValueError("tabu_tenure must be >= 0")
        if not 0.0 < self.reset_fraction <= 1.0:
            raise ValueError("reset_fraction must lie in (0, 1]")
        if self.reset_trigger is not None and self.reset_trigger < 1:
            raise ValueError("reset_trigger must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    def trigger_for(self, problem: PermutationProblem) -> int:
        if self.reset_trigger is not None:
            return self.reset_trigger
        return max(1, problem.num_variables // 10)

    def with_seed(self, seed: int) -> "SolverParams":
        return SolverParams(**{**asdict(self), "rng_seed": seed})

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RunSample:
    seed: int
    iterations: int
    wall_time: float
    solved: bool
    problem: PermutationProblem
    solution: Optional[tuple] = None
    cancelled: bool = False


class SolverError(RuntimeError):
    pass


def solve(
    problem: PermutationProblem,
    params: SolverParams,
    *,
    iteration_cap: Optional[int] = None,
    should_stop: Optional[Callable[[int], bool]] = None,
) -> RunSample:
    """Run one Las Vegas walk until the total error reaches zero.

    ``should_stop`` is polled once per iteration with the current iteration
    count; a true answer abandons the walk (``cancelled=True``).
    ``iteration_cap`` bounds the walk for callers that need a guarantee.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(params.rng_seed)
    domain = problem.domain()
    nvars = problem.num_variables
    state = problem.new_state(rng.permutation(domain))
    trigger = params.trigger_for(problem)
    n_reset = max(1, int(round(params.reset_fraction * nvars)))
    tenure = params.tabu_tenure

    tabu_until = np.zeros(nvars, dtype=np.int64)
    it = 0
    since_restart = 0
    cancelled = False
    while state.total > 0:
        if iteration_cap is not None and it >= iteration_cap:
            break
        if should_stop is not None and should_stop(it):
            cancelled = True
            break
        if params.max_iterations is not None and since_restart >= params.max_iterations:
            state.reassign(rng.permutation(domain))
            tabu_until[:] = 0
            since_restart = 0

        errors = np.where(tabu_until <= it, state.variable_errors(), -1)
        worst = np.flatnonzero(errors == errors.max())
        culprit = int(worst[rng.integers(len(worst))]) if len(worst) > 1 else int(worst[0])

        costs = state.swap_costs(culprit)
        costs[culprit] = costs.max() + 1
        best = costs.min()
        if best <= state.total:
            targets = np.flatnonzero(costs == best)
            j = int(targets[rng.integers(len(targets))]) if len(targets) > 1 else int(targets[0])
            if best == state.total:
                # plateau move: allowed, but the culprit sits out a while
                tabu_until[culprit] = it + 1 + tenure
            state.swap(culprit, j)
        else:
            tabu_until[culprit] = it + 1 + tenure
        it += 1
        since_restart += 1

        if state.total > 0 and int((tabu_until > it).sum()) >= trigger:
            state.reset(rng, n_reset)
            tabu_until[:] = 0

    solved = state.total == 0 and not cancelled
    solution = None
    if solved:
        solution = tuple(int(v) for v in state.values)
        if not is_solution(problem, solution):
            raise SolverError(f"zero-cost state failed the checker for {problem.label}")
    return RunSample(
        seed=params.rng_seed,
        iterations=it,
        wall_time=time.perf_counter() - start,
        solved=solved,
        problem=problem,
        solution=solution,
        cancelled=cancelled,
    )


@dataclass
class Collection:
    """Sequential runs with seeds ``seed, seed+1, ...`` in seed order."""

    problem: PermutationProblem
    params: SolverParams
    runs: list

    def iterations(self) -> np.ndarray:
        return np.array([r.iterations for r in self.runs if r.solved], dtype=np.int64)

    def wall_times(self) -> np.ndarray:
        return np.array([r.wall_time for r in self.runs if r.solved], dtype=float)

    def iterations_sample(self, label: Optional[str] = None):
        from .fitting import EmpiricalSample, Unit

        return EmpiricalSample(self.iterations(), Unit.ITERATIONS, label or self.problem.label)

    def wall_time_sample(self, label: Optional[str] = None):
        from .fitting import EmpiricalSample, Unit

        return EmpiricalSample(self.wall_times(), Unit.SECONDS, label or self.problem.label)


def _solve_one(args):
    problem, params, cap = args
    return solve(problem, params, iteration_cap=cap)


def collect(
    problem: PermutationProblem,
    params: SolverParams,
    runs: int,
    *,
    jobs: int = 1,
    iteration_cap: Optional[int] = None,
    progress: Optional[Callable[[int, int, RunSample], None]] = None,
) -> Collection:
    """Run ``runs`` independent walks; ``jobs > 1`` spreads them over processes.

    Results do not depend on ``jobs``: run k always uses seed ``rng_seed + k``.
    """
    if isinstance(runs, bool) or int(runs) != runs or runs < 1:
        raise ValueError(f"runs must be a positive integer, got {runs!r}")
    if jobs < 1:
        raise ValueError("jobs must be positive")
    tasks = [(problem, params.with_seed(params.rng_seed + k), iteration_cap) for k in range(int(runs))]
    out = []
    if jobs == 1:
        for task in tasks:
            out.append(_solve_one(task))
            if progress is not None:
                progress(len(out), len(tasks), out[-1])
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_solve_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))):
                out.append(rec)
                if progress is not None:
                    progress(len(out), len(tasks), rec)
    return Collection(problem, params, out)
