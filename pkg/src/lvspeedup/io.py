"""CSV/JSON files passed between pipeline stages."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from pathlib import Path
from typing import Iterable, Optional

from . import __version__

RUNS_HEADER = ["run_id", "seed", "problem", "n", "iterations", "wall_time_s", "solved"]
PARALLEL_HEADER = ["trial_id", "workers", "winner_seed", "winner_iterations", "wall_time_s"]
BOOTSTRAP_HEADER = ["n", "bootstrap_speedup", "std_error"]


class DataError(ValueError):
    """Input file is missing, unreadable or ill-formed."""


def write_runs_csv(runs, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RUNS_HEADER)
    for k, r in enumerate(runs):
        w.writerow([k, r.seed, r.problem.kind.value, r.problem.n, r.iterations,
                    f"{r.wall_time:.6f}", "true" if r.solved else "false"])


def write_parallel_csv(records, out, first_trial: int = 0) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(PARALLEL_HEADER)
    for k, r in enumerate(records, start=first_trial):
        w.writerow([k, r.workers, r.winner_seed, r.winner_iterations, f"{r.wall_time:.6f}"])


def _rows(path, header: list[str]) -> list[dict]:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = [c for c in header if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def _cell(row: dict, key: str, row_no: int, path, kind=float):
    text = (row.get(key) or "").strip()
    try:
        return kind(text)
    except ValueError:
        raise DataError(f"{path}: row {row_no}: {key}={text!r} is not a valid {kind.__name__}") from None


def read_parallel_csv(path) -> list[dict]:
    out = []
    for row_no, row in enumerate(_rows(path, PARALLEL_HEADER), start=2):
        out.append({
            "trial_id": _cell(row, "trial_id", row_no, path, int),
            "workers": _cell(row, "workers", row_no, path, int),
            "winner_seed": _cell(row, "winner_seed", row_no, path, int),
            "winner_iterations": _cell(row, "winner_iterations", row_no, path, int),
            "wall_time_s": _cell(row, "wall_time_s", row_no, path, float),
        })
    return out


def read_bootstrap_csv(path) -> list[tuple[int, float, float]]:
    out = []
    for row_no, row in enumerate(_rows(path, BOOTSTRAP_HEADER), start=2):
        out.append((_cell(row, "n", row_no, path, int),
                    _cell(row, "bootstrap_speedup", row_no, path),
                    _cell(row, "std_error", row_no, path)))
    return out


def write_bootstrap_csv(curve, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(BOOTSTRAP_HEADER)
    errors = curve.std_errors or [0.0] * len(curve.points)
    for (n, g), se in zip(curve.points, errors):
        w.writerow([n, repr(float(g)), repr(float(se))])


def read_json(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def metadata(command: str, **fields) -> dict:
    """Provenance block recorded next to every output file."""
    meta = {
        "command": command,
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
    }
    meta.update(fields)
    return meta


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_sidecar(path, meta: dict) -> Path:
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return side


def read_sidecar(path) -> Optional[dict]:
    side = sidecar_path(path)
    if not side.exists():
        return None
    return read_json(side)

