"""Monostable (KPP) growth nonlinearities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DOMAIN_SLACK = 1e-12


class DomainError(ValueError):
    """Raised when a density lies outside [0, 1] beyond the clamping slack."""


@dataclass(frozen=True)
class GrowthFunction:
    """Reaction term F with its first two derivatives.

    Use :func:`logistic` or :func:`from_callables` rather than the constructor.
    ``f``, ``df`` and ``d2f`` are unchecked vectorized callables; the solvers
    call them directly because roundoff can push densities slightly outside
    [0, 1]. :func:`evaluate` is the checked entry point.
    """

    kind: str
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    df: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d2f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    rate: float | None = None
    alpha: float = float("nan")

    @property
    def fprime0(self) -> float:
        return float(self.df(np.float64(0.0)))

    @property
    def fprime1(self) -> float:
        return float(self.df(np.float64(1.0)))

    @property
    def fsecond0(self) -> float:
        return float(self.d2f(np.float64(0.0)))

    def describe(self) -> dict:
        if self.kind == "logistic":
            return {"growth": "logistic", "rate": self.rate}
        return {"growth": self.kind}


def logistic(rate: float = 1.0) -> GrowthFunction:
    """F(rho) = rate * rho * (1 - rho)."""
    rate = float(rate)
    if not rate > 0:
        raise ValueError(f"logistic rate must be positive, got {rate}")
    return GrowthFunction(
        kind="logistic",
        f=lambda rho: rate * rho * (1.0 - rho),
        df=lambda rho: rate * (1.0 - 2.0 * rho),
        d2f=lambda rho: np.full_like(np.asarray(rho, dtype=float), -2.0 * rate),
        rate=rate,
        alpha=2.0 * rate,
    )


def from_callables(f, df, d2f, samples: int = 1001, kind: str = "analytic") -> GrowthFunction:
    """Wrap a user-supplied analytic triple (F, F', F'').

    The coercivity constant is estimated as the minimum of -F'' on a uniform
    sample of [0, 1].
    """
    rho = np.linspace(0.0, 1.0, samples)
    alpha = float(np.min(-np.asarray(d2f(rho), dtype=float) * np.ones_like(rho)))

    def _vec(fn):
        return lambda r: np.asarray(fn(r), dtype=float) * np.ones_like(np.asarray(r, dtype=float))

    return GrowthFunction(kind=kind, f=_vec(f), df=_vec(df), d2f=_vec(d2f), alpha=alpha)


def _check_domain(rho):
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < -DOMAIN_SLACK) or np.any(arr > 1.0 + DOMAIN_SLACK):
        raise DomainError(f"density outside [0, 1]: {rho!r}")
    return np.clip(arr, 0.0, 1.0)


def evaluate(g: GrowthFunction, rho, order: int = 0):
    """Return F, F' or F'' at ``rho`` (scalar or array) for order 0, 1, 2."""
    fn = {0: g.f, 1: g.df, 2: g.d2f}.get(order)
    if fn is None:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    out = fn(_check_domain(rho))
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


@dataclass
class ValidationReport:
    checks: dict[str, bool]
    alpha: float
    fprime0: float
    fprime1: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]


def validate(g: GrowthFunction, samples: int = 101) -> ValidationReport:
    """Check the monostable concavity assumptions on a uniform sample grid.

    Failures are reported in the returned object, never raised.
    """
    if samples < 3:
        raise ValueError("need at least 3 samples")
    rho = np.linspace(0.0, 1.0, samples)
    F = g.f(rho)
    neg_d2 = -g.d2f(rho)
    alpha = float(np.min(neg_d2))
    fp0, fp1 = g.fprime0, g.fprime1
    checks = {
        "roots": abs(float(F[0])) <= 1e-14 and abs(float(F[-1])) <= 1e-14,
        "positive": bool(np.all(F[1:-1] > 0)),
        "concave": alpha > 0,
        "fprime0_positive": fp0 > 0,
        "fprime1_negative": fp1 < 0,
    }
    return ValidationReport(checks=checks, alpha=alpha, fprime0=fp0, fprime1=fp1)
