"""Parameter estimation and Kolmogorov-Smirnov testing of runtime samples."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .distributions import Family, InvalidParameters, RuntimeDistribution

ZERO_SHIFT_FRACTION = 0.01  # exponential x0 snaps to 0 when min <= 1% of mean
MIN_KS_SAMPLE = 10
DEFAULT_THRESHOLD = 0.05


class Unit(str, enum.Enum):
    ITERATIONS = "iterations"
    SECONDS = "seconds"


class DegenerateSample(ValueError):
    """The sample cannot support the requested estimate."""


class SampleError(ValueError):
    """Malformed runtime data (bad CSV cell, nonpositive value, ...)."""


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray
    unit: Unit = Unit.ITERATIONS
    label: str = ""

    def __post_init__(self):
        arr = np.sort(np.asarray(self.values, dtype=float).ravel())
        if arr.size == 0:
            raise SampleError("empty sample")
        if not np.all(np.isfinite(arr)):
            raise SampleError("sample contains non-finite values")
        if arr[0] <= 0:
            raise SampleError(f"runtimes must be positive, smallest is {arr[0]:g}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "unit", Unit(getattr(self.unit, "value", self.unit)))

    def __len__(self):
        return int(self.values.size)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def max(self) -> float:
        return float(self.values[-1])

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    def summary(self) -> dict:
        return {"size": self.size, "min": self.min, "mean": self.mean,
                "median": self.median, "max": self.max}

    @classmethod
    def from_csv(cls, source: Union[str, Path, io.TextIOBase], unit: Optional[str] = None,
                 label: Optional[str] = None) -> "EmpiricalSample":
        """Read one observation per row.

        The column is ``iterations`` or ``seconds`` (``wall_time_s`` is taken
        as seconds, so a runs file can be fed straight in).  Rows whose
        ``solved`` column is false are skipped.
        """
        if isinstance(source, (str, Path)):
            path = Path(source)
            with open(path, newline="", encoding="utf-8") as fh:
                return cls._read(fh, unit, label if label is not None else path.stem)
        return cls._read(source, unit, label or "")

    @classmethod
    def _read(cls, fh, unit, label) -> "EmpiricalSample":
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        header = reader.fieldnames or []
        if unit is None:
            unit = Unit.ITERATIONS if "iterations" in header else Unit.SECONDS
        unit = Unit(unit)
        candidates = ["iterations"] if unit is Unit.ITERATIONS else ["seconds", "wall_time_s"]
        column = next((c for c in candidates if c in header), None)
        if column is None:
            raise SampleError(f"no {' or '.join(candidates)} column in header {header}")
        values = []
        problem = None
        for row_no, row in enumerate(reader, start=2):
            solved = (row.get("solved") or "true").strip().lower()
            if solved in ("false", "0", "no"):
                continue
            cell = (row.get(column) or "").strip()
            try:
                val = float(cell)
            except ValueError:
                raise SampleError(f"row {row_no}: {column}={cell!r} is not a number") from None
            if not math.isfinite(val) or val <= 0:
                raise SampleError(f"row {row_no}: {column}={cell!r} must be positive")
            values.append(val)
            if problem is None and row.get("problem"):
                problem = f"{row['problem']} {row.get('n', '')}".strip()
        if not values:
            raise SampleError("no observations in file")
        return cls(np.array(values), unit, problem or label)


@dataclass
class FitReport:
    sample_label: str
    dist: Optional[RuntimeDistribution]
    ks_statistic: Optional[float]
    p_value: Optional[float]
    threshold: float
    verdict: str  # "accepted" | "rejected"
    sample_size: int
    params_estimated_from_sample: bool = True
    family: Optional[str] = None
    notes: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    def to_dict(self) -> dict:
        return {
            "sample_label": self.sample_label,
            "family": self.family or (self.dist.family.value if self.dist else None),
            "dist": self.dist.to_dict() if self.dist else None,
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "sample_size": self.sample_size,
            "params_estimated_from_sample": self.params_estimated_from_sample,
            "notes": list(self.notes),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitReport":
        try:
            dist = RuntimeDistribution.from_dict(data["dist"]) if data.get("dist") else None
            return cls(
                sample_label=str(data.get("sample_label", "")),
                dist=dist,
                ks_statistic=data.get("ks_statistic"),
                p_value=data.get("p_value"),
                threshold=float(data.get("threshold", DEFAULT_THRESHOLD)),
                verdict=str(data["verdict"]),
                sample_size=int(data["sample_size"]),
                params_estimated_from_sample=bool(data.get("params_estimated_from_sample", True)),
                family=data.get("family"),
                notes=list(data.get("notes", [])),
                error=data.get("error"),
            )
        except (KeyError, TypeError) as exc:
            raise SampleError(f"bad fit report: missing or malformed {exc}") from None


def _as_sample(sample) -> EmpiricalSample:
    if isinstance(sample, EmpiricalSample):
        return sample
    return EmpiricalSample(np.asarray(sample, dtype=float))


# estimators ------------------------------------------------------------

def estimate_shifted_exponential(sample, *, zero_fraction: float = ZERO_SHIFT_FRACTION
                                 ) -> RuntimeDistribution:
    """x0 = observed minimum, lambda = 1/(mean - x0); tiny shifts snap to 0."""
    s = _as_sample(sample)
    if s.size < 2:
        raise DegenerateSample("exponential fit needs at least 2 values")
    lo, mean = s.min, s.mean
    if mean - lo <= 0:
        raise DegenerateSample("all values equal: rate undefined")
    if lo <= zero_fraction * mean:
        return RuntimeDistribution.exponential(0.0, 1.0 / mean)
    return RuntimeDistribution.exponential(lo, 1.0 / (mean - lo))


def lognormal_shift(sample: EmpiricalSample) -> float:
    # half a step below an integer count, a hair below a continuous time
    if sample.unit is Unit.ITERATIONS:
        return max(sample.min - 0.5, 0.0)
    return sample.min * (1.0 - 1e-6)


def estimate_shifted_lognormal(sample) -> RuntimeDistribution:
    """x0 just below the minimum, then the Gaussian MLE of log(v - x0)."""
    s = _as_sample(sample)
    if s.size < 3 or np.unique(s.values).size < 3:
        raise DegenerateSample("lognormal fit needs at least 3 distinct values")
    return lognormal_mle(s.values, lognormal_shift(s))


def lognormal_mle(values, x0: float) -> RuntimeDistribution:
    """Gaussian MLE (mean, ddof=0 sd) of log(v - x0) for a known shift."""
    logs = np.log(np.asarray(values, dtype=float) - x0)
    return RuntimeDistribution.lognormal(x0, float(logs.mean()), float(logs.std()))


def estimate_gaussian(sample) -> RuntimeDistribution:
    """Unshifted normal cut at zero, with moment (MLE) parameters."""
    s = _as_sample(sample)
    if s.size < 2:
        raise DegenerateSample("gaussian fit needs at least 2 values")
    sd = float(s.values.std())
    if sd <= 0:
        raise DegenerateSample("all values equal: sd is zero")
    return RuntimeDistribution.gaussian(0.0, s.mean, sd)


ESTIMATORS = {
    Family.EXPONENTIAL: estimate_shifted_exponential,
    Family.LOGNORMAL: estimate_shifted_lognormal,
    Family.GAUSSIAN: estimate_gaussian,
}


def estimate(sample, family) -> RuntimeDistribution:
    return ESTIMATORS[Family.parse(str(getattr(family, "value", family)))](sample)


# Kolmogorov-Smirnov ----------------------------------------------------

def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution.

    The alternating series 2*sum (-1)^(k-1) exp(-2 k^2 lam^2) converges fast
    for large lam; below 1 the equivalent theta-function form of the cdf,
    sqrt(2 pi)/lam * sum exp(-(2k-1)^2 pi^2 / (8 lam^2)), is used instead.
    Both are summed until a term drops under ``tol``.
    """
    lam = float(lam)
    if lam < 0.05:
        return 1.0  # the cdf is below 1e-200 here
    if lam < 1.0:
        c = -math.pi ** 2 / (8.0 * lam * lam)
        total, k = 0.0, 1
        while True:
            term = math.exp(c * (2 * k - 1) ** 2)
            total += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    total, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(values: np.ndarray, dist: RuntimeDistribution) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    f = np.asarray(dist.cdf(v), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_pvalue(d: float, n: int) -> float:
    root = math.sqrt(n)
    return kolmogorov_sf((root + 0.12 + 0.11 / root) * d)


def _check_threshold(threshold: float) -> float:
    threshold = float(threshold)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie strictly between 0 and 1, got {threshold}")
    return threshold


def ks_test(sample, dist: RuntimeDistribution, threshold: float = DEFAULT_THRESHOLD,
            *, estimated: bool = True) -> FitReport:
    """Test ``sample`` against ``dist``; ``estimated`` records whether the
    parameters came from the same sample (the p-value ignores this)."""
    s = _as_sample(sample)
    threshold = _check_threshold(threshold)
    if not isinstance(dist, RuntimeDistribution):
        raise InvalidParameters(f"not a distribution: {dist!r}")
    if s.size < MIN_KS_SAMPLE:
        raise DegenerateSample(f"KS test needs at least {MIN_KS_SAMPLE} values, got {s.size}")
    d = ks_statistic(s.values, dist)
    p = ks_pvalue(d, s.size)
    return FitReport(
        sample_label=s.label,
        dist=dist,
        ks_statistic=d,
        p_value=p,
        threshold=threshold,
        verdict="accepted" if p >= threshold else "rejected",
        sample_size=s.size,
        params_estimated_from_sample=estimated,
        family=dist.family.value,
    )


def fit(sample, family, threshold: float = DEFAULT_THRESHOLD) -> FitReport:
    s = _as_sample(sample)
    fam = Family.parse(str(getattr(family, "value", family)))
    dist = ESTIMATORS[fam](s)
    report = ks_test(s, dist, threshold)
    if fam is Family.EXPONENTIAL and dist.x0 == 0.0 and s.min > 0:
        report.notes.append(
            f"shift snapped to 0 (min {s.min:g} <= {ZERO_SHIFT_FRACTION:g} * mean {s.mean:g})")
    elif fam is Family.LOGNORMAL:
        report.notes.append(f"shift placed below the minimum ({s.min:g}) to keep log(v - x0) finite")
    elif fam is Family.GAUSSIAN:
        report.notes.append("normal cut at zero and renormalized")
    return report


def fit_all(sample, families: Sequence = tuple(Family),
            threshold: float = DEFAULT_THRESHOLD) -> list[FitReport]:
    """Fit every family; failures become error reports, never exceptions.

    Reports come back by descending p-value, failed fits last.
    """
    families = list(families)
    if not families:
        raise ValueError("no families to fit")
    threshold = _check_threshold(threshold)
    s = _as_sample(sample)
    reports = []
    for fam in families:
        try:
            fam = Family.parse(str(getattr(fam, "value", fam)))
            reports.append(fit(s, fam, threshold))
        except (ValueError, ArithmeticError) as exc:
            reports.append(FitReport(
                sample_label=s.label, dist=None, ks_statistic=None, p_value=None,
                threshold=threshold, verdict="rejected", sample_size=s.size,
                family=getattr(fam, "value", str(fam)), error=str(exc)))
    reports.sort(key=lambda r: -1.0 if r.p_value is None else r.p_value, reverse=True)
    return reports


def best_fit(reports: Iterable[FitReport]) -> Optional[FitReport]:
    """Highest-p accepted report, if any."""
    accepted = [r for r in reports if r.accepted and r.dist is not None]
    return max(accepted, key=lambda r: r.p_value) if accepted else None
