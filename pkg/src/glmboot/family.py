"""GLM sub-models as bundles of link-component functions.

Each family is described through three scalar maps of the linear predictor
``u = x'beta``:

* ``h``: canonical parameter as a function of ``u``,
* ``h1 = b o h``: the cumulant composed with ``h``,
* ``ginv``: the mean function.

The per-observation negative log-likelihood is ``-y*h(u) + h1(u)``. All
functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError, DomainOverflowError

FAMILY_NAMES = ("linear", "logistic", "poisson", "gamma")

# beyond this |u| the exponential families overflow or lose all precision
OVERFLOW_BOUND = 700.0

Fn = Callable[[np.ndarray], np.ndarray]


class DerivBundle(NamedTuple):
    """Link derivatives evaluated at one (array of) linear predictor(s)."""

    dh: np.ndarray
    d2h: np.ndarray
    d3h: np.ndarray
    dh1: np.ndarray
    d2h1: np.ndarray
    ginv: np.ndarray
    dginv: np.ndarray


@dataclass(frozen=True)
class LinkFamily:
    name: str
    shape: float | None
    h: Fn
    dh: Fn
    d2h: Fn
    d3h: Fn
    h1: Fn
    dh1: Fn
    d2h1: Fn
    d3h1: Fn
    ginv: Fn
    dginv: Fn
    d2ginv: Fn
    bundle: Callable[[np.ndarray], DerivBundle]

    @property
    def bounded(self) -> bool:
        """Whether the overflow guard applies (every family but linear)."""
        return self.name != "linear"

    def check_domain(self, u) -> None:
        if not self.bounded:
            return
        u = np.asarray(u)
        if u.size and not np.all(np.abs(u) <= OVERFLOW_BOUND):
            worst = float(np.max(np.abs(u))) if np.all(np.isfinite(u)) else float("inf")
            raise DomainOverflowError(
                f"{self.name}: linear predictor |u|={worst:.4g} exceeds {OVERFLOW_BOUND}"
            )

    def validate_response(self, y: np.ndarray) -> None:
        """Raise :class:`DataError` naming the first row outside the family support."""
        y = np.asarray(y, dtype=float)
        if self.name == "logistic":
            bad = ~((y == 0.0) | (y == 1.0))
            what = "must be 0 or 1"
        elif self.name == "poisson":
            bad = ~((y >= 0) & (y == np.floor(y)))
            what = "must be a nonnegative integer"
        elif self.name == "gamma":
            bad = ~(y > 0)
            what = "must be positive"
        else:
            bad = ~np.isfinite(y)
            what = "must be finite"
        if np.any(bad):
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f"{self.name} response at row index {row} {what} (got {y[row]!r})")

    def variance(self, mu):
        """Var(y) as a function of the mean, for unit dispersion."""
        mu = np.asarray(mu, dtype=float)
        if self.name == "linear":
            return np.ones_like(mu)
        if self.name == "logistic":
            return mu * (1.0 - mu)
        if self.name == "poisson":
            return mu * 1.0
        return np.square(mu) / self.shape

    def describe(self) -> str:
        return self.name if self.shape is None else f"{self.name}(shape={self.shape:g})"

    def __reduce__(self):
        # closures do not pickle; rebuild from the name in worker processes
        return (make_family, (self.name, self.shape))


def _zeros(u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _ones(u):
    return np.ones_like(np.asarray(u, dtype=float))


def _identity(u):
    return np.asarray(u, dtype=float) * 1.0


def _linear() -> LinkFamily:
    def bundle(u):
        u = np.asarray(u, dtype=float)
        one, zero = np.ones_like(u), np.zeros_like(u)
        return DerivBundle(one, zero, zero, u * 1.0, one, u * 1.0, one)

    return LinkFamily(
        name="linear",
        shape=None,
        h=_identity,
        dh=_ones,
        d2h=_zeros,
        d3h=_zeros,
        h1=lambda u: 0.5 * np.square(np.asarray(u, dtype=float)),
        dh1=_identity,
        d2h1=_ones,
        d3h1=_zeros,
        ginv=_identity,
        dginv=_ones,
        d2ginv=_zeros,
        bundle=bundle,
    )


def _logistic() -> LinkFamily:
    def d1(u):
        s = expit(u)
        return s * (1.0 - s)

    def d2(u):
        s = expit(u)
        return s * (1.0 - s) * (1.0 - 2.0 * s)

    def bundle(u):
        u = np.asarray(u, dtype=float)
        s = expit(u)
        v = s * (1.0 - s)
        one, zero = np.ones_like(u), np.zeros_like(u)
        return DerivBundle(one, zero, zero, s, v, s, v)

    return LinkFamily(
        name="logistic",
        shape=None,
        h=_identity,
        dh=_ones,
        d2h=_zeros,
        d3h=_zeros,
        h1=lambda u: np.logaddexp(0.0, u),
        dh1=expit,
        d2h1=d1,
        d3h1=d2,
        ginv=expit,
        dginv=d1,
        d2ginv=d2,
        bundle=bundle,
    )


def _poisson() -> LinkFamily:
    def bundle(u):
        u = np.asarray(u, dtype=float)
        e = np.exp(u)
        one, zero = np.ones_like(u), np.zeros_like(u)
        return DerivBundle(one, zero, zero, e, e, e, e)

    return LinkFamily(
        name="poisson",
        shape=None,
        h=_identity,
        dh=_ones,
        d2h=_zeros,
        d3h=_zeros,
        h1=np.exp,
        dh1=np.exp,
        d2h1=np.exp,
        d3h1=np.exp,
        ginv=np.exp,
        dginv=np.exp,
        d2ginv=np.exp,
        bundle=bundle,
    )


def _gamma(alpha: float) -> LinkFamily:
    def bundle(u):
        u = np.asarray(u, dtype=float)
        a = alpha * np.exp(-u)
        e = np.exp(u)
        full = np.full_like(u, alpha)
        return DerivBundle(a, -a, a, full, np.zeros_like(u), e, e)

    return LinkFamily(
        name="gamma",
        shape=alpha,
        h=lambda u: -alpha * np.exp(-np.asarray(u, dtype=float)),
        dh=lambda u: alpha * np.exp(-np.asarray(u, dtype=float)),
        d2h=lambda u: -alpha * np.exp(-np.asarray(u, dtype=float)),
        d3h=lambda u: alpha * np.exp(-np.asarray(u, dtype=float)),
        h1=lambda u: alpha * np.asarray(u, dtype=float),
        dh1=lambda u: np.full_like(np.asarray(u, dtype=float), alpha),
        d2h1=_zeros,
        d3h1=_zeros,
        ginv=np.exp,
        dginv=np.exp,
        d2ginv=np.exp,
        bundle=bundle,
    )


def make_family(name: str, shape: float | None = None) -> LinkFamily:
    """Build a :class:`LinkFamily` by name.

    ``shape`` is the known gamma shape parameter and must be given for
    ``"gamma"`` only.
    """
    if name not in FAMILY_NAMES:
        raise ConfigError(f"unknown family {name!r}; expected one of {', '.join(FAMILY_NAMES)}")
    if name == "gamma":
        if shape is None:
            raise ConfigError("gamma family requires a shape parameter")
        shape = float(shape)
        if not np.isfinite(shape) or shape <= 0:
            raise ConfigError(f"gamma shape must be positive, got {shape!r}")
        return _gamma(shape)
    if shape is not None:
        raise ConfigError(f"shape is only meaningful for the gamma family, not {name!r}")
    return {"linear": _linear, "logistic": _logistic, "poisson": _poisson}[name]()


def eval_bundle(family: LinkFamily, u) -> DerivBundle:
    """Evaluate the seven derivatives the solvers need in one pass."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainOverflowError(f"{family.name}: non-finite linear predictor")
    family.check_domain(u)
    return family.bundle(u)
