"""Runtime distributions and the expected runtime of n independent walks.

The multi-walk runtime is the minimum of n i.i.d. copies of the sequential
runtime, so its expectation is ``x0 + integral of S(t)**n`` over ``t > x0``
where ``S`` is the survival function.  For the shifted exponential this has a
closed form; everything else goes through :func:`min_expectation`'s
quadrature, which integrates in log-time ``t = x0 + exp(v)``.  That
substitution turns the lognormal into a smooth Gaussian-like bump and keeps
the exponential's long tail on a compact range.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import integrate, special

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    LOGNORMAL = "lognormal"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, text: str) -> "Family":
        aliases = {"exp": cls.EXPONENTIAL, "shifted-exponential": cls.EXPONENTIAL,
                   "lnorm": cls.LOGNORMAL, "shifted-lognormal": cls.LOGNORMAL,
                   "normal": cls.GAUSSIAN, "shifted-gaussian": cls.GAUSSIAN}
        key = text.strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


class InvalidParameters(ValueError):
    pass


class QuadratureError(ArithmeticError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message: str, error_bound: float):
        super().__init__(f"{message} (achieved error bound {error_bound:.3g})")
        self.error_bound = error_bound


def std_normal_sf(z):
    """Upper tail of the standard normal, ``erfc(z / sqrt 2) / 2``."""
    return 0.5 * special.erfc(np.asarray(z, dtype=float) / _SQRT2)


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * z * z) / _SQRT2PI


@dataclass(frozen=True)
class RuntimeDistribution:
    """Parametric law of a sequential runtime, supported on ``[x0, inf)``.

    * exponential: ``lam`` is the rate of ``Y - x0``;
    * lognormal: ``log(Y - x0)`` is normal with mean ``mu`` and sd ``sigma``;
    * gaussian: ``Y - x0`` is normal(``mu``, ``sigma``) cut at zero and
      renormalized.
    """

    family: Family
    x0: float = 0.0
    lam: Optional[float] = None
    mu: Optional[float] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", Family.parse(str(getattr(self.family, "value", self.family))))
        except ValueError as exc:
            raise InvalidParameters(f"unknown family {self.family!r}") from exc
        if not (math.isfinite(self.x0) and self.x0 >= 0):
            raise InvalidParameters(f"x0 must be finite and >= 0, got {self.x0}")
        if self.family is Family.EXPONENTIAL:
            if self.lam is None or not (math.isfinite(self.lam) and self.lam > 0):
                raise InvalidParameters(f"exponential rate must be positive, got {self.lam}")
            if self.mu is not None or self.sigma is not None:
                raise InvalidParameters("exponential takes no mu/sigma")
        else:
            if self.lam is not None:
                raise InvalidParameters(f"{self.family.value} takes no rate")
            if self.mu is None or not math.isfinite(self.mu):
                raise InvalidParameters(f"mu must be a finite real, got {self.mu}")
            if self.sigma is None or not (math.isfinite(self.sigma) and self.sigma > 0):
                raise InvalidParameters(f"sigma must be positive, got {self.sigma}")

    # constructors ------------------------------------------------------
    @classmethod
    def exponential(cls, x0: float, lam: float) -> "RuntimeDistribution":
        return cls(Family.EXPONENTIAL, float(x0), lam=float(lam))

    @classmethod
    def lognormal(cls, x0: float, mu: float, sigma: float) -> "RuntimeDistribution":
        return cls(Family.LOGNORMAL, float(x0), mu=float(mu), sigma=float(sigma))

    @classmethod
    def gaussian(cls, x0: float, mu: float, sigma: float) -> "RuntimeDistribution":
        return cls(Family.GAUSSIAN, float(x0), mu=float(mu), sigma=float(sigma))

    # gaussian helpers --------------------------------------------------
    @property
    def _kept_mass(self) -> float:
        # P(normal(mu, sigma) >= 0), the renormalization constant
        return float(std_normal_sf(-self.mu / self.sigma))

    # distribution functions -------------------------------------------
    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.x0
        # right-continuous at x0; the lognormal density vanishes there anyway
        above = s > 0 if self.family is Family.LOGNORMAL else s >= 0
        safe = np.where(above, s, 1.0)
        if self.family is Family.EXPONENTIAL:
            val = self.lam * np.exp(-self.lam * safe)
        elif self.family is Family.LOGNORMAL:
            z = (np.log(safe) - self.mu) / self.sigma
            val = std_normal_pdf(z) / (safe * self.sigma)
        else:
            val = std_normal_pdf((safe - self.mu) / self.sigma) / (self.sigma * self._kept_mass)
        out = np.where(above, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def sf(self, t):
        """Survival function ``1 - cdf``, computed without cancellation."""
        t = np.asarray(t, dtype=float)
        s = t - self.x0
        above = s > 0
        safe = np.where(above, s, 1.0)
        if self.family is Family.EXPONENTIAL:
            val = np.exp(-self.lam * safe)
        elif self.family is Family.LOGNORMAL:
            val = std_normal_sf((np.log(safe) - self.mu) / self.sigma)
        else:
            val = std_normal_sf((safe - self.mu) / self.sigma) / self._kept_mass
        out = np.where(above, np.minimum(val, 1.0), 1.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        s = t - self.x0
        above = s > 0
        safe = np.where(above, s, 1.0)
        if self.family is Family.EXPONENTIAL:
            val = -np.expm1(-self.lam * safe)
        elif self.family is Family.LOGNORMAL:
            val = std_normal_sf((self.mu - np.log(safe)) / self.sigma)
        else:
            lo = std_normal_sf(-self.mu / self.sigma)
            val = (lo - std_normal_sf((safe - self.mu) / self.sigma)) / lo
        out = np.where(above, np.clip(val, 0.0, 1.0), 0.0)
        return float(out) if out.ndim == 0 else out

    def ppf(self, p):
        """Quantile function (inverse cdf) on ``[0, 1)``."""
        p = np.asarray(p, dtype=float)
        if self.family is Family.EXPONENTIAL:
            out = self.x0 - np.log1p(-p) / self.lam
        elif self.family is Family.LOGNORMAL:
            out = self.x0 + np.exp(self.mu + self.sigma * special.ndtri(p))
        else:
            cut = special.ndtr(-self.mu / self.sigma)
            out = self.x0 + np.maximum(self.mu + self.sigma * special.ndtri(cut + p * self._kept_mass), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def isf(self, q):
        """Inverse survival function; accurate for ``q`` near zero."""
        q = np.asarray(q, dtype=float)
        if self.family is Family.EXPONENTIAL:
            out = self.x0 - np.log(q) / self.lam
        elif self.family is Family.LOGNORMAL:
            out = self.x0 + np.exp(self.mu - self.sigma * special.ndtri(q))
        else:
            out = self.x0 + np.maximum(self.mu - self.sigma * special.ndtri(q * self._kept_mass), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        if self.family is Family.EXPONENTIAL:
            return self.x0 + 1.0 / self.lam
        if self.family is Family.LOGNORMAL:
            return self.x0 + math.exp(self.mu + 0.5 * self.sigma ** 2)
        alpha = -self.mu / self.sigma
        return self.x0 + self.mu + self.sigma * float(std_normal_pdf(alpha)) / self._kept_mass

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"family": self.family.value, "x0": self.x0}
        for key, value in (("lambda", self.lam), ("mu", self.mu), ("sigma", self.sigma)):
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RuntimeDistribution":
        unknown = set(data) - {"family", "x0", "lambda", "mu", "sigma"}
        if unknown or "family" not in data:
            raise InvalidParameters(f"bad distribution object: {data!r}")
        return cls(
            data["family"],
            float(data.get("x0", 0.0)),
            lam=_opt_float(data.get("lambda")),
            mu=_opt_float(data.get("mu")),
            sigma=_opt_float(data.get("sigma")),
        )

    def describe(self) -> str:
        parts = [f"x0={self.x0:g}"]
        if self.lam is not None:
            parts.append(f"lambda={self.lam:.6g}")
        if self.mu is not None:
            parts.append(f"mu={self.mu:.6g}")
            parts.append(f"sigma={self.sigma:.6g}")
        return f"{self.family.value}({', '.join(parts)})"


def _scalar_sf_pdf(dist: RuntimeDistribution):
    """Plain-float survival and density of ``Y - x0``, for quadrature loops."""
    if dist.family is Family.EXPONENTIAL:
        lam = dist.lam

        def sf(s):
            return math.exp(-lam * s)

        def dens(s):
            return lam * math.exp(-lam * s)

    elif dist.family is Family.LOGNORMAL:
        mu, sigma = dist.mu, dist.sigma

        def sf(s):
            return 0.5 * math.erfc((math.log(s) - mu) / (sigma * _SQRT2))

        def dens(s):
            z = (math.log(s) - mu) / sigma
            return math.exp(-0.5 * z * z) / (_SQRT2PI * sigma * s)

    else:
        mu, sigma, kept = dist.mu, dist.sigma, dist._kept_mass

        def sf(s):
            return min(1.0, 0.5 * math.erfc((s - mu) / (sigma * _SQRT2)) / kept)

        def dens(s):
            z = (s - mu) / sigma
            return math.exp(-0.5 * z * z) / (_SQRT2PI * sigma * kept)

    return sf, dens


def _opt_float(value):
    return None if value is None else float(value)


# module-level forms of the basic functions
def pdf(dist: RuntimeDistribution, t):
    return dist.pdf(t)


def cdf(dist: RuntimeDistribution, t):
    return dist.cdf(t)


def expectation(dist: RuntimeDistribution) -> float:
    return dist.mean()


@dataclass(frozen=True)
class MinTransform:
    """Law of the fastest of ``n`` independent runs drawn from ``base``."""

    base: RuntimeDistribution
    n: int

    def __post_init__(self):
        _check_cores(self.n)

    def sf(self, t):
        return np.power(self.base.sf(t), self.n)

    def cdf(self, t):
        # 1 - S**n via expm1/log for small survival changes
        s = np.asarray(self.base.sf(t), dtype=float)
        with np.errstate(divide="ignore"):
            out = -np.expm1(self.n * np.log(s))
        return float(out) if np.ndim(out) == 0 else out

    def pdf(self, t):
        return self.n * np.asarray(self.base.pdf(t)) * np.power(self.base.sf(t), self.n - 1)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        # F_min(t) = p  <=>  F(t) = 1 - (1 - p)**(1/n)
        return self.base.ppf(-np.expm1(np.log1p(-p) / self.n))

    def mean(self) -> float:
        return min_expectation(self.base, self.n)

    def total_mass(self) -> float:
        """Quadrature of the density over the support (should be 1)."""
        base, n = self.base, self.n
        sf, dens = _scalar_sf_pdf(base)

        def integrand(v):
            s = math.exp(v)
            if s == 0.0:
                return 0.0
            return n * dens(s) * sf(s) ** (n - 1) * s

        value, _ = _integrate_log_time(base, n, integrand)
        return value


def _check_cores(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameters(f"core count must be a positive integer, got {n!r}")
    return int(n)


_EPSREL = 1e-11
_V_MAX = 700.0


def _integrate_log_time(base: RuntimeDistribution, n: int, integrand):
    """Integrate ``integrand(v)`` over the whole real line in log-time.

    The bulk of the minimum's law (quantiles 1e-6 .. 1 - 1e-6) is handled on
    a finite interval with breakpoints; both tails go to QUADPACK's
    infinite-range rule.  Returns ``(value, error_bound)``.
    """
    x0 = base.x0
    mins = MinTransform(base, n)
    q = np.array([1e-6, 0.5, 1 - 1e-6])
    knots = np.asarray(mins.ppf(q)) - x0
    if not np.all(knots > 0) or not np.all(np.isfinite(knots)):
        raise QuadratureError("degenerate quantiles in the integration range", float("inf"))
    va, vm, vb = np.log(knots)
    if not va < vm < vb:
        vm = 0.5 * (va + vb)
    # a light upper tail can fall off within a sliver just past vb; without
    # breakpoints there, QUADPACK samples the long last interval and misses it
    tail = [vb]
    for q in (1e-10, 1e-14):
        s = float(base.isf(q ** (1.0 / n))) - x0
        if math.isfinite(s) and s > 0 and math.log(s) > tail[-1]:
            tail.append(math.log(s))
    # e**700 time units is beyond any runtime this is used for
    tail.append(max(tail[-1], _V_MAX))
    pieces = [(-np.inf, va), (va, vm), (vm, vb), *zip(tail, tail[1:])]
    results = [(lo, hi, *_quad(integrand, lo, hi)) for lo, hi in pieces if lo != hi]
    total = sum(r[2] for r in results)
    err = sum(r[3] for r in results)
    # a far-tail piece holding ~1e-20 of the mass may report roundoff; only
    # its error relative to the whole integral matters
    for lo, hi, val, abserr, info in results:
        if info["ier"] and abserr > 1e-9 * max(abs(total), 1e-300):
            raise QuadratureError(f"quadrature failed on [{lo}, {hi}]: {info['message']}", abserr)
    if err > 1e-8 * abs(total):
        raise QuadratureError("quadrature did not converge", err)
    return total, err


def _quad(f, lo, hi):
    out = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=_EPSREL, limit=400, full_output=1)
    info = {"ier": 0 if len(out) == 3 else 1, "message": out[3] if len(out) > 3 else ""}
    return out[0], out[1], info


def min_expectation(base: RuntimeDistribution, n: int, *, method: str = "auto") -> float:
    """Expected runtime of the fastest of ``n`` independent walks.

    ``method="auto"`` uses the closed form ``x0 + 1/(n lam)`` for the
    exponential and quadrature otherwise; ``method="quadrature"`` forces the
    numerical route for every family.
    """
    n = _check_cores(n)
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and base.family is Family.EXPONENTIAL:
        return base.x0 + 1.0 / (n * base.lam)
    x0 = base.x0
    sf, _ = _scalar_sf_pdf(base)

    def integrand(v):
        s = math.exp(v)
        if s == 0.0:
            return 0.0
        return sf(s) ** n * s

    value, _ = _integrate_log_time(base, n, integrand)
    return x0 + value


@dataclass(frozen=True)
class SpeedupCurve:
    points: tuple  # ((n, speedup), ...)
    limit: Optional[float] = None
    origin_slope: Optional[float] = None
    std_errors: Optional[tuple] = field(default=None, compare=False)

    @property
    def cores(self) -> list[int]:
        return [n for n, _ in self.points]

    @property
    def speedups(self) -> list[float]:
        return [g for _, g in self.points]

    def as_dict(self) -> dict[int, float]:
        return dict(self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.limit is not None:
            buf.write(f"# limit={self.limit!r}\n")
        if self.origin_slope is not None:
            buf.write(f"# origin_slope={self.origin_slope!r}\n")
        if self.std_errors is not None:
            buf.write("n,speedup,std_error\n")
            for (n, g), se in zip(self.points, self.std_errors):
                buf.write(f"{n},{g!r},{se!r}\n")
        else:
            buf.write("n,speedup\n")
            for n, g in self.points:
                buf.write(f"{n},{g!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SpeedupCurve":
        meta: dict[str, float] = {}
        rows = []
        header = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = float(value)
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = cells
                if header[:1] != ["n"] or len(header) < 2:
                    raise ValueError(f"line {lineno}: expected header 'n,speedup', got {line!r}")
                continue
            try:
                rows.append((int(cells[0]), *(float(c) for c in cells[1:])))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-numeric cell in {line!r}") from exc
        if header is None:
            raise ValueError("missing header row")
        points = tuple((r[0], r[1]) for r in rows)
        errs = tuple(r[2] for r in rows) if len(header) > 2 else None
        return cls(points, meta.get("limit"), meta.get("origin_slope"), errs)


def _check_core_list(cores: Sequence[int]) -> list[int]:
    cores = [_check_cores(n) for n in cores]
    if not cores:
        raise InvalidParameters("core list is empty")
    if any(b <= a for a, b in zip(cores, cores[1:])):
        raise InvalidParameters("core list must be strictly increasing")
    return cores


def speedup_limit(base: RuntimeDistribution) -> Optional[float]:
    """Speedup as the number of walks grows without bound (None if unbounded)."""
    if base.x0 <= 0:
        return None
    if base.family is Family.EXPONENTIAL:
        return 1.0 + 1.0 / (base.x0 * base.lam)
    return base.mean() / base.x0


def speedup_curve(
    base: RuntimeDistribution, cores: Iterable[int], *, with_limit: Optional[bool] = None
) -> SpeedupCurve:
    """Predicted speedup ``E[Y] / E[min of n]`` at each core count.

    The limit is always attached for the exponential; for the other
    families only when ``with_limit=True``.
    """
    cores = _check_core_list(list(cores))
    mean = base.mean()
    points = tuple((n, mean / min_expectation(base, n)) for n in cores)
    limit = None
    slope = None
    if base.family is Family.EXPONENTIAL:
        limit = speedup_limit(base)
        slope = base.x0 * base.lam + 1.0
    elif with_limit:
        limit = speedup_limit(base)
    return SpeedupCurve(points, limit, slope)


def sample(dist: RuntimeDistribution, rng, count: int) -> np.ndarray:
    """Inverse-cdf draws; ``rng`` is a numpy Generator or an integer seed."""
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise InvalidParameters(f"sample count must be a positive integer, got {count!r}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    u = rng.random(int(count))
    out = np.asarray(dist.ppf(u), dtype=float)
    return np.maximum(out, dist.x0)
