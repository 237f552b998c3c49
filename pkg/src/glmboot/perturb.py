"""Perturbation bootstrap for unpenalized GLMs.

A bootstrap replicate minimizes the negative log-likelihood plus the linear
centering term

    sum_i r_i h'(u_i) (2 - G_i/mu) x_i'beta,    r_i = y_i - ginv(u_i),

where ``u_i`` is the base fit's linear predictor and ``G_i`` are iid
nonnegative multipliers with mean ``mu`` and variance ``mu**2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import streams
from .errors import GlmBootError
from .family import LinkFamily, eval_bundle
from .glm import Dataset, GlmFit, SolverOptions, newton_minimize

log = logging.getLogger(__name__)

FAILURE_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class WeightDist:
    """Multiplier law: ``exp1`` (Exponential, rate 1) or ``degenerate`` at ``constant``."""

    kind: str = "exp1"
    constant: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exp1", "degenerate"):
            raise ValueError(f"unknown weight distribution {self.kind!r}")
        if self.kind == "degenerate" and not self.constant > 0:
            raise ValueError("degenerate weights need a positive constant")

    @classmethod
    def parse(cls, text: str) -> "WeightDist":
        """``"exp1"`` or ``"degenerate"`` / ``"degenerate:<c>"``."""
        kind, _, value = text.partition(":")
        return cls(kind, float(value) if value else 1.0)


EXP1 = WeightDist()


def degenerate(c: float = 1.0) -> WeightDist:
    return WeightDist("degenerate", c)


@dataclass(frozen=True)
class PerturbationWeights:
    g: np.ndarray
    mu: float


@dataclass(frozen=True)
class BootstrapDistribution:
    """Scaled pivots ``sqrt(n) (beta* - beta_base)``, one row per successful replicate."""

    pivots: np.ndarray
    n: int
    B: int
    failures: int

    @property
    def B_eff(self) -> int:
        return self.pivots.shape[0]


def draw_weights(n: int, dist: WeightDist = EXP1, rng: np.random.Generator | None = None) -> PerturbationWeights:
    if n < 1:
        raise ValueError(f"need n >= 1 weights, got {n}")
    if dist.kind == "degenerate":
        return PerturbationWeights(np.full(n, dist.constant), dist.constant)
    if rng is None:
        raise ValueError("exp1 weights need a random generator")
    return PerturbationWeights(rng.exponential(1.0, size=n), 1.0)


def _score_terms(family: LinkFamily, data: Dataset, beta_base) -> np.ndarray:
    """Per-row ``r_i h'(u_i)`` at the base fit."""
    b = eval_bundle(family, data.X @ np.asarray(beta_base, dtype=float))
    return (data.y - b.ginv) * b.dh


def centering_term(family: LinkFamily, data: Dataset, beta_base, weights: PerturbationWeights) -> np.ndarray:
    """Coefficient vector ``c`` of the linear term added to the objective."""
    a = _score_terms(family, data, beta_base)
    return data.X.T @ (a * (2.0 - weights.g / weights.mu))


def pb_score(family: LinkFamily, data: Dataset, beta_base, weights: PerturbationWeights) -> np.ndarray:
    """Bootstrap score ``n^-1/2 sum_i r_i h'(u_i) x_i (G_i/mu - 1)``."""
    a = _score_terms(family, data, beta_base)
    return data.X.T @ (a * (weights.g / weights.mu - 1.0)) / np.sqrt(data.n)


def fit_pb_glm(
    family: LinkFamily,
    data: Dataset,
    base_fit: GlmFit,
    weights: PerturbationWeights,
    opts: SolverOptions = SolverOptions(),
) -> GlmFit:
    """One perturbation-bootstrap replicate, warm-started at the base fit."""
    if not base_fit.converged:
        raise GlmBootError("perturbation bootstrap needs a converged base fit")
    if weights.g.shape != (data.n,):
        raise ValueError(f"weights have shape {weights.g.shape}, expected ({data.n},)")
    c = centering_term(family, data, base_fit.beta_hat, weights)
    return newton_minimize(family, data.X, data.y, base_fit.beta_hat, c, opts)


def _one_replicate(b, family, data, base_fit, dist, seed, opts):
    rng = streams.generator(seed, streams.BOOTSTRAP, b)
    w = draw_weights(data.n, dist, rng)
    try:
        fit = fit_pb_glm(family, data, base_fit, w, opts)
    except GlmBootError:
        return None
    if not fit.converged:
        return None
    return np.sqrt(data.n) * (fit.beta_hat - base_fit.beta_hat)


def collect_pivots(rows: list, n: int, d: int) -> BootstrapDistribution:
    good = [r for r in rows if r is not None]
    failures = len(rows) - len(good)
    B = len(rows)
    if B and failures / B > FAILURE_WARN_FRACTION:
        log.warning("%d of %d bootstrap fits failed", failures, B)
    pivots = np.vstack(good) if good else np.empty((0, d))
    return BootstrapDistribution(pivots, n, B, failures)


def pb_distribution(
    family: LinkFamily,
    data: Dataset,
    base_fit: GlmFit,
    B: int,
    dist: WeightDist = EXP1,
    seed=0,
    opts: SolverOptions = SolverOptions(),
    workers: int = 1,
) -> BootstrapDistribution:
    """``B`` perturbation-bootstrap pivots.

    Replicate ``b`` draws its weights from the substream ``(seed, BOOTSTRAP, b)``,
    so the result is identical for any ``workers``.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    task = partial(_one_replicate, family=family, data=data, base_fit=base_fit, dist=dist, seed=seed, opts=opts)
    rows = streams.parallel_map(task, range(B), workers)
    return collect_pivots(rows, data.n, data.d)
