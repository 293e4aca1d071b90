"""Join predicted, bootstrap and measured speedups into one comparison."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

MISSING = "-"


class JoinError(ValueError):
    pass


@dataclass
class ComparisonRow:
    n: int
    predicted_speedup: Optional[float] = None
    bootstrap_speedup: Optional[float] = None
    bootstrap_std_error: Optional[float] = None
    measured_speedup: Optional[float] = None
    measured_ci: Optional[tuple] = None


@dataclass
class ComparisonReport:
    problem: str
    rows: list
    fit: Optional[dict] = None  # family, params, p-value, verdict
    metadata: dict = field(default_factory=dict)

    @property
    def cores(self) -> list[int]:
        return [r.n for r in self.rows]

    def has(self, column: str) -> bool:
        return any(getattr(r, column) is not None for r in self.rows)

    # renderings --------------------------------------------------------
    def to_text(self) -> str:
        columns = [("measured", "measured_speedup"), ("predicted", "predicted_speedup"),
                   ("bootstrap", "bootstrap_speedup")]
        head = ["Problem", "", *(str(n) for n in self.cores)]
        body = []
        for k, (name, attr) in enumerate(columns):
            cells = [_fmt(getattr(r, attr)) for r in self.rows]
            body.append([self.problem if k == 0 else "", name, *cells])
        widths = [max(len(row[i]) for row in [head, *body]) for i in range(len(head))]

        def line(cells):
            out = [cells[0].ljust(widths[0]), cells[1].ljust(widths[1])]
            out += [c.rjust(w) for c, w in zip(cells[2:], widths[2:])]
            return "  ".join(out).rstrip()

        rule = "-" * len(line(head))
        lines = ["speed-up on n cores", rule, line(head), rule, *map(line, body), rule]
        if self.fit:
            p = self.fit.get("p_value")
            p_text = "n/a" if p is None else f"{p:.4g}"
            lines.append(f"fit: {self.fit.get('describe', self.fit.get('family'))}, "
                         f"p-value {p_text} ({self.fit.get('verdict')})")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "predicted_speedup", "bootstrap_speedup", "bootstrap_std_error",
                    "measured_speedup", "measured_ci_low", "measured_ci_high"])
        for r in self.rows:
            lo, hi = r.measured_ci if r.measured_ci else (None, None)
            w.writerow([r.n, *(_csv(v) for v in (r.predicted_speedup, r.bootstrap_speedup,
                                                 r.bootstrap_std_error, r.measured_speedup, lo, hi))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "rows": [
                {
                    "n": r.n,
                    "predicted_speedup": r.predicted_speedup,
                    "bootstrap_speedup": r.bootstrap_speedup,
                    "bootstrap_std_error": r.bootstrap_std_error,
                    "measured_speedup": r.measured_speedup,
                    "measured_ci": list(r.measured_ci) if r.measured_ci else None,
                }
                for r in self.rows
            ],
            "fit": self.fit,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _fmt(value) -> str:
    if value is None:
        return MISSING
    return f"{value:.2f}" if value < 1000 else f"{value:,.1f}"


def _csv(value) -> str:
    return "" if value is None else repr(float(value))


def build_report(problem: str, *, predicted: Optional[dict] = None,
                 bootstrap: Optional[dict] = None, measured: Optional[dict] = None,
                 fit: Optional[dict] = None, metadata: Optional[dict] = None) -> ComparisonReport:
    """Rows keyed by core count.

    ``predicted`` maps n -> speedup, ``bootstrap`` n -> (speedup, se) and
    ``measured`` n -> (speedup, (lo, hi)).  Predicted and bootstrap lists must
    agree exactly; measured counts must be a subset of the table.  A rejected
    ``fit`` drops the predicted column.
    """
    if fit is not None and fit.get("verdict") != "accepted":
        predicted = None
    tables = [t for t in (predicted, bootstrap) if t]
    if not tables and not measured:
        raise JoinError("nothing to report: no predicted, bootstrap or measured values")
    if len(tables) == 2:
        a, b = set(predicted), set(bootstrap)
        if a != b:
            missing = sorted(a ^ b)
            raise JoinError("core lists differ; unmatched n: " + ", ".join(map(str, missing)))
    cores = sorted(set(tables[0])) if tables else sorted(measured)
    if measured:
        extra = sorted(set(measured) - set(cores))
        if extra:
            raise JoinError("measured core counts missing from the table: " + ", ".join(map(str, extra)))
    rows = []
    for n in cores:
        row = ComparisonRow(n)
        if predicted:
            row.predicted_speedup = float(predicted[n])
        if bootstrap:
            row.bootstrap_speedup, row.bootstrap_std_error = (float(x) for x in bootstrap[n])
        if measured and n in measured:
            g, ci = measured[n]
            row.measured_speedup = float(g)
            row.measured_ci = tuple(float(x) for x in ci) if ci else None
        rows.append(row)
    return ComparisonReport(problem, rows, fit, dict(metadata or {}))
