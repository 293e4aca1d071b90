"""Permutation benchmarks for the local-search solver.

Each benchmark keeps an incrementally maintained cost state so the solver can
score every swap involving one variable in a single vectorized call.  The
``is_solution`` checker at the bottom recomputes everything from scratch and
shares no code with the incremental states.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

import numpy as np


class ProblemKind(str, enum.Enum):
    MAGIC_SQUARE = "magic-square"
    ALL_INTERVAL = "all-interval"
    COSTAS = "costas"


class InvalidConfiguration(ValueError):
    """Raised when an assignment is not a permutation of the problem's domain."""


@dataclass(frozen=True)
class PermutationProblem:
    kind: ProblemKind
    n: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        if self.n < 1:
            raise ValueError(f"problem order must be positive, got {self.n}")
        if self.kind is ProblemKind.ALL_INTERVAL and self.n < 2:
            raise ValueError("all-interval needs at least 2 notes")

    @property
    def num_variables(self) -> int:
        return self.n * self.n if self.kind is ProblemKind.MAGIC_SQUARE else self.n

    def domain(self) -> np.ndarray:
        """Sorted values the assignment must be a permutation of."""
        if self.kind is ProblemKind.MAGIC_SQUARE:
            return np.arange(1, self.n * self.n + 1)
        if self.kind is ProblemKind.ALL_INTERVAL:
            return np.arange(self.n)
        return np.arange(1, self.n + 1)

    @property
    def label(self) -> str:
        return f"{self.kind.value} {self.n}"

    def new_state(self, assignment) -> "CostState":
        cls = _STATES[self.kind]
        return cls(self, assignment)


def _as_permutation(problem: PermutationProblem, assignment) -> np.ndarray:
    a = np.asarray(assignment, dtype=np.int64).ravel()
    if a.shape[0] != problem.num_variables or not np.array_equal(np.sort(a), problem.domain()):
        raise InvalidConfiguration(
            f"assignment is not a permutation of the {problem.label} domain"
        )
    return a.copy()


class CostState:
    """Mutable assignment plus the bookkeeping needed for O(1)-ish swap scoring."""

    def __init__(self, problem: PermutationProblem, assignment):
        self.problem = problem
        self.values = _as_permutation(problem, assignment)
        self.total = 0
        self._rebuild()

    def _rebuild(self) -> None:
        raise NotImplementedError

    def variable_errors(self) -> np.ndarray:
        raise NotImplementedError

    def swap_costs(self, i: int) -> np.ndarray:
        """Total cost after swapping position ``i`` with each position ``j``."""
        raise NotImplementedError

    def swap(self, i: int, j: int) -> None:
        raise NotImplementedError

    def reassign(self, assignment) -> None:
        self.values = _as_permutation(self.problem, assignment)
        self._rebuild()

    def reset(self, rng: np.random.Generator, count: int) -> None:
        """Give ``count`` randomly chosen variables fresh values."""
        chosen = rng.choice(len(self.values), size=count, replace=False)
        vals = self.values.copy()
        vals[chosen] = rng.permutation(vals[chosen])
        self.reassign(vals)


class MagicSquareState(CostState):
    # lines: N rows, N columns, main diagonal, anti-diagonal; errors are signed
    # (sum - target) so a swap's effect on a line is a plain shift.

    def __init__(self, problem, assignment):
        n = problem.n
        cells = np.arange(n * n)
        self._row = cells // n
        self._col = cells % n
        self._diag = (self._row == self._col).astype(np.int64)
        self._anti = (self._row + self._col == n - 1).astype(np.int64)
        self.target = n * (n * n + 1) // 2
        super().__init__(problem, assignment)

    def _rebuild(self):
        n = self.problem.n
        sq = self.values.reshape(n, n)
        self.row_err = sq.sum(axis=1) - self.target
        self.col_err = sq.sum(axis=0) - self.target
        self.diag_err = int(np.trace(sq)) - self.target
        self.anti_err = int(np.trace(np.fliplr(sq))) - self.target
        self.total = int(
            np.abs(self.row_err).sum()
            + np.abs(self.col_err).sum()
            + abs(self.diag_err)
            + abs(self.anti_err)
        )

    def variable_errors(self):
        ar, ac = np.abs(self.row_err), np.abs(self.col_err)
        return (
            ar[self._row]
            + ac[self._col]
            + self._diag * abs(self.diag_err)
            + self._anti * abs(self.anti_err)
        )

    def swap_costs(self, i):
        row, col = self._row, self._col
        d = self.values - self.values[i]
        ri, ci = row[i], col[i]
        er, ec = self.row_err, self.col_err

        same_row = row == ri
        d_row = (
            np.abs(er[ri] + d) - abs(er[ri]) + np.abs(er[row] - d) - np.abs(er[row])
        )
        d_row[same_row] = 0
        same_col = col == ci
        d_col = (
            np.abs(ec[ci] + d) - abs(ec[ci]) + np.abs(ec[col] - d) - np.abs(ec[col])
        )
        d_col[same_col] = 0
        k_diag = d * (self._diag[i] - self._diag)
        k_anti = d * (self._anti[i] - self._anti)
        d_diag = np.abs(self.diag_err + k_diag) - abs(self.diag_err)
        d_anti = np.abs(self.anti_err + k_anti) - abs(self.anti_err)
        return self.total + d_row + d_col + d_diag + d_anti

    def swap(self, i, j):
        if i == j:
            return
        v = self.values
        d = int(v[j] - v[i])
        self.row_err[self._row[i]] += d
        self.row_err[self._row[j]] -= d
        self.col_err[self._col[i]] += d
        self.col_err[self._col[j]] -= d
        self.diag_err += d * int(self._diag[i] - self._diag[j])
        self.anti_err += d * int(self._anti[i] - self._anti[j])
        v[i], v[j] = v[j], v[i]
        self.total = int(
            np.abs(self.row_err).sum()
            + np.abs(self.col_err).sum()
            + abs(self.diag_err)
            + abs(self.anti_err)
        )


class AllIntervalState(CostState):
    # Search objective: sum of 2**d over missing intervals d, so repairs go
    # from the largest interval (hardest to place) down.  The plain duplicate
    # count reported by constraint_errors() plateaus too much to drive the
    # search past N ~ 20.

    def __init__(self, problem, assignment):
        n = problem.n
        self._weights = [1 << d for d in range(n)]
        self._weights[0] = 0
        self._proj = np.array([2.0 ** min(d, 1000) / (n - d) for d in range(n)])
        self._proj[0] = 0.0
        self._reach = np.maximum(np.arange(n), n - 1 - np.arange(n))
        super().__init__(problem, assignment)

    def _rebuild(self):
        n = self.problem.n
        self.intervals = np.abs(np.diff(self.values))
        self.counts = np.bincount(self.intervals, minlength=n)
        self.total = sum(self._weights[d] for d in range(1, n) if self.counts[d] == 0)

    def variable_errors(self):
        n = self.problem.n
        dup = (self.counts[self.intervals] >= 2).astype(np.float64)
        out = np.zeros(n)
        out[:-1] += dup
        out[1:] += dup
        # a missing interval d is blamed on every value that could sit at
        # either end of it
        missing = np.where(self.counts == 0, self._proj, 0.0)
        missing[0] = 0.0
        reach = np.cumsum(missing)
        return out + reach[self._reach[self.values]]

    def swap_costs(self, i):
        n = self.problem.n
        x = self.values.tolist()
        counts = self.counts.tolist()
        w = self._weights
        last = n - 2
        costs = [self.total] * n
        xi = x[i]
        for j in range(n):
            if j == i:
                continue
            pos = [p for p in {i - 1, i, j - 1, j} if 0 <= p <= last]
            xj = x[j]
            old = []
            for p in pos:
                a, b = x[p], x[p + 1]
                old.append(a - b if a > b else b - a)
            new = []
            for p in pos:
                a = xj if p == i else xi if p == j else x[p]
                q = p + 1
                b = xj if q == i else xi if q == j else x[q]
                new.append(a - b if a > b else b - a)
            delta = 0
            for v in old:
                counts[v] -= 1
                if counts[v] == 0:
                    delta += w[v]
            for v in new:
                if counts[v] == 0:
                    delta -= w[v]
                counts[v] += 1
            for v in new:
                counts[v] -= 1
            for v in old:
                counts[v] += 1
            costs[j] = self.total + delta
        return np.asarray(costs, dtype=np.int64 if n <= 62 else object)

    def swap(self, i, j):
        if i == j:
            return
        n = self.problem.n
        v = self.values
        pos = [p for p in {i - 1, i, j - 1, j} if 0 <= p <= n - 2]
        w = self._weights
        for p in pos:
            d = int(self.intervals[p])
            self.counts[d] -= 1
            if self.counts[d] == 0:
                self.total += w[d]
        v[i], v[j] = v[j], v[i]
        for p in pos:
            d = abs(int(v[p]) - int(v[p + 1]))
            self.intervals[p] = d
            if self.counts[d] == 0:
                self.total -= w[d]
            self.counts[d] += 1

    def reset(self, rng, count):
        # a cyclic shift keeps every interval but one; re-randomizing a
        # quarter of the sequence destroys the large intervals already placed
        self.reassign(np.roll(self.values, -int(rng.integers(1, self.problem.n))))

    def duplicate_errors(self):
        """Total and per-variable errors under the plain duplicate count."""
        err = np.maximum(self.counts - 1, 0)
        per_interval = err[self.intervals]
        out = np.zeros(self.problem.n, dtype=np.int64)
        out[:-1] += per_interval
        out[1:] += per_interval
        return int(err[1:].sum()), out


class CostasState(CostState):
    # every pair (a, b) with a < b contributes the difference v[b] - v[a] to
    # row k = b - a of the difference triangle; duplicates within a row cost 1
    # each.

    def __init__(self, problem, assignment):
        n = problem.n
        pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64).reshape(-1, 2)
        self._pa, self._pb = pairs[:, 0], pairs[:, 1]
        self._width = 2 * n + 1
        self._row_base = (self._pb - self._pa) * self._width + n
        self._nkeys = n * self._width
        self._pairs_of = [np.flatnonzero((self._pa == v) | (self._pb == v)) for v in range(n)]
        super().__init__(problem, assignment)

    def _keys(self, vals):
        return self._row_base + vals[..., self._pb] - vals[..., self._pa]

    def _rebuild(self):
        self.counts = np.bincount(self._keys(self.values), minlength=self._nkeys)
        self.total = int(np.maximum(self.counts - 1, 0).sum())

    def variable_errors(self):
        dup = self.counts[self._keys(self.values)] >= 2
        out = np.bincount(self._pa[dup], minlength=self.problem.n)
        out += np.bincount(self._pb[dup], minlength=self.problem.n)
        return out

    def swap_costs(self, i):
        n = self.problem.n
        cand = np.tile(self.values, (n, 1))
        idx = np.arange(n)
        cand[idx, i] = self.values
        cand[idx, idx] = self.values[i]
        keys = self._keys(cand) + (idx * self._nkeys)[:, None]
        counts = np.bincount(keys.ravel(), minlength=n * self._nkeys).reshape(n, -1)
        return np.maximum(counts - 1, 0).sum(axis=1)

    def swap(self, i, j):
        if i == j:
            return
        affected = np.union1d(self._pairs_of[i], self._pairs_of[j])
        v = self.values
        old = self._row_base[affected] + v[self._pb[affected]] - v[self._pa[affected]]
        np.subtract.at(self.counts, old, 1)
        v[i], v[j] = v[j], v[i]
        new = self._row_base[affected] + v[self._pb[affected]] - v[self._pa[affected]]
        np.add.at(self.counts, new, 1)
        self.total = int(np.maximum(self.counts - 1, 0).sum())


_STATES = {
    ProblemKind.MAGIC_SQUARE: MagicSquareState,
    ProblemKind.ALL_INTERVAL: AllIntervalState,
    ProblemKind.COSTAS: CostasState,
}


def constraint_errors(problem: PermutationProblem, assignment) -> tuple[int, np.ndarray]:
    """Total cost and the projected per-variable errors of ``assignment``."""
    state = problem.new_state(assignment)
    if problem.kind is ProblemKind.ALL_INTERVAL:
        return state.duplicate_errors()
    return state.total, state.variable_errors()


def is_solution(problem: PermutationProblem, assignment) -> bool:
    """Check a candidate solution from first principles."""
    a = [int(v) for v in np.asarray(assignment).ravel()]
    if sorted(a) != problem.domain().tolist():
        return False
    n = problem.n
    if problem.kind is ProblemKind.MAGIC_SQUARE:
        target = n * (n * n + 1) // 2
        rows = [a[r * n:(r + 1) * n] for r in range(n)]
        lines = rows + [[rows[r][c] for r in range(n)] for c in range(n)]
        lines.append([rows[k][k] for k in range(n)])
        lines.append([rows[k][n - 1 - k] for k in range(n)])
        return all(sum(line) == target for line in lines)
    if problem.kind is ProblemKind.ALL_INTERVAL:
        gaps = sorted(abs(a[k] - a[k + 1]) for k in range(n - 1))
        return gaps == list(range(1, n))
    vectors = set()
    for x1 in range(n):
        for x2 in range(x1 + 1, n):
            vectors.add((x2 - x1, a[x2] - a[x1]))
    return len(vectors) == n * (n - 1) // 2
