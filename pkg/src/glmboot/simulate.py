"""Monte-Carlo coverage experiments for the GLM and Lasso perturbation bootstrap.

Design: rows iid N(0, Sigma) with ``Sigma_jk = 0.1**|j-k|`` (unit diagonal),
drawn once per (n, d) cell and held fixed across replications. Coefficients:
``beta_j = -0.25 + 0.5 * sqrt(j) * (-1)**j`` for ``j <= d0``, zero after.

Every replication ``r`` owns the random substream ``(seed, REPLICATION, r)``
for its response, fold assignment and bootstrap weights, so reports do not
depend on the degree of parallelism.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np
import scipy.linalg as sla

from . import streams
from .errors import ConfigError, GlmBootError, NumericalError, SingularMatrixError
from .family import LinkFamily, make_family
from .glm import Dataset, expected_info, fit_glm, sandwich, score_covariance
from .inference import (
    CoverageAccumulator,
    CoverageReport,
    gaussian_region_covers,
    interval_outcome,
    region_covers,
)
from .lasso import LassoOptions, fit_lasso, pb_lasso_distribution, select_lambda_cv
from .perturb import EXP1, WeightDist, pb_distribution

log = logging.getLogger(__name__)

REPLICATION = 5
MAX_FAILURE_FRACTION = 0.2


@dataclass(frozen=True)
class LambdaMode:
    """Penalty choice: ``cv`` (k folds), ``fixed`` (value) or ``rate`` (c * n**(1/2 + tau))."""

    kind: str = "cv"
    k: int = 10
    value: float = 0.0
    c: float = 1.0
    tau: float = 0.2

    def __post_init__(self):
        if self.kind not in ("cv", "fixed", "rate"):
            raise ConfigError(f"unknown lambda mode {self.kind!r}")
        if self.kind == "cv" and self.k < 2:
            raise ConfigError("cross-validation needs k >= 2 folds")
        if self.kind == "fixed" and not self.value >= 0:
            raise ConfigError("fixed penalty must be nonnegative")
        if self.kind == "rate" and not self.c >= 0:
            raise ConfigError("rate constant must be nonnegative")

    def rate_lambda(self, n: int) -> float:
        return self.c * n ** (0.5 + self.tau)


@dataclass(frozen=True)
class SimConfig:
    family: str = "logistic"
    shape: float | None = None
    n: int = 100
    d: int = 6
    d0: int | None = None
    reps: int = 300
    B: int = 500
    level: float = 0.9
    lambda_mode: LambdaMode | None = None
    master_seed: int = 0
    parallelism: int = 1
    weights: WeightDist = EXP1

    def __post_init__(self):
        make_family(self.family, self.shape)
        if self.d0 is None:
            object.__setattr__(self, "d0", self.d)
        if not (1 <= self.d0 <= self.d):
            raise ConfigError(f"need 1 <= d0 <= d, got d0={self.d0}, d={self.d}")
        if self.n < 1 or self.reps < 1 or self.B < 1:
            raise ConfigError("n, reps and B must all be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def make_family(self) -> LinkFamily:
        return make_family(self.family, self.shape)


@dataclass(frozen=True)
class VscReport:
    exact_support_rate: float
    sign_match_rate: float
    support_flags: tuple
    sign_flags: tuple
    mean_active_size: float
    empty_fits: int = 0
    pb_sign_replication: float = float("nan")
    diagnostic: str = ""


@dataclass(frozen=True)
class FailureRow:
    n: int
    lam: float
    naive_coverage: float
    pb_coverage: float
    vsc_rate: float
    reps: int
    excluded: int


@dataclass(frozen=True)
class FailureReport:
    family: str
    d: int
    d0: int
    level: float
    tau: float
    c: float
    rows: tuple = field(default=())


# ---------------------------------------------------------------- data


def design_covariance(d: int) -> np.ndarray:
    idx = np.arange(d)
    return 0.1 ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def gen_design(n: int, d: int, seed=0, cov: np.ndarray | None = None) -> np.ndarray:
    """Fixed design with iid N(0, cov) rows (default: the 0.1-decay covariance).

    The random stream is keyed by ``(seed, DESIGN, n, d)``, giving each (n, d)
    cell its own design.
    """
    if n < 1 or d < 1:
        raise ConfigError(f"need n, d >= 1, got n={n}, d={d}")
    cov = design_covariance(d) if cov is None else np.asarray(cov, dtype=float)
    try:
        chol = sla.cholesky(cov, lower=True)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularMatrixError("design covariance is not positive definite") from exc
    z = streams.generator(seed, streams.DESIGN, n, d).standard_normal((n, d))
    return z @ chol.T


def true_beta(d: int, d0: int | None = None) -> np.ndarray:
    d0 = d if d0 is None else d0
    if not 0 < d0 <= d:
        raise ConfigError(f"need 0 < d0 <= d, got d0={d0}, d={d}")
    j = np.arange(1, d + 1, dtype=float)
    beta = -0.25 + 0.5 * np.sqrt(j) * (-1.0) ** j
    beta[d0:] = 0.0
    return beta


def gen_response(family: LinkFamily, X, beta, rng: np.random.Generator) -> np.ndarray:
    """One response vector from the family at linear predictor ``X @ beta``."""
    u = np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    family.check_domain(u)
    mu = family.ginv(u)
    if family.name == "logistic":
        return (rng.random(u.size) < mu).astype(float)
    if family.name == "gamma":
        return rng.gamma(family.shape, mu / family.shape)
    if family.name == "poisson":
        return rng.poisson(mu).astype(float)
    return u + rng.standard_normal(u.size)


# ---------------------------------------------------------------- helpers


def _rep_stream(seed: int, r: int) -> np.random.SeedSequence:
    return streams.seed_sequence(seed, REPLICATION, r)


def _check_failures(failed: int, reps: int, what: str) -> None:
    if reps and failed / reps > MAX_FAILURE_FRACTION:
        raise NumericalError(
            f"{what}: {failed} of {reps} replications failed numerically "
            f"(limit {MAX_FAILURE_FRACTION:.0%}); check the design, family and sample size"
        )


# ---------------------------------------------------------------- regime I


def _coverage_rep(r, cfg: SimConfig, X, beta):
    family = cfg.make_family()
    rep_ss = _rep_stream(cfg.master_seed, r)
    y = gen_response(family, X, beta, streams.generator(rep_ss, streams.RESPONSE))
    data = Dataset(X, y)
    try:
        fit = fit_glm(family, data)
    except GlmBootError:
        return None
    if not fit.converged:
        return None
    try:
        dist = pb_distribution(family, data, fit, cfg.B, cfg.weights, rep_ss)
    except GlmBootError:
        return None
    if dist.B_eff < 2:
        return None
    coords = range(cfg.d)
    ts, rs, width = interval_outcome(dist, fit.beta_hat, beta, coords, cfg.level)
    region = region_covers(dist, fit.beta_hat, beta, cfg.n, cfg.level)
    return ts, rs, width, region


def run_coverage_sim(cfg: SimConfig) -> CoverageReport:
    """Coverage of unpenalized PB-GLM percentile intervals and the norm region."""
    X = gen_design(cfg.n, cfg.d, cfg.master_seed)
    beta = true_beta(cfg.d, cfg.d0)
    task = partial(_coverage_rep, cfg=cfg, X=X, beta=beta)
    outcomes = streams.parallel_map(task, range(cfg.reps), cfg.parallelism)
    acc = CoverageAccumulator(range(1, cfg.d + 1))
    for out in outcomes:
        if out is None:
            acc.exclude()
        else:
            acc.add(*out)
    _check_failures(acc.excluded, cfg.reps, "coverage simulation")
    return acc.report(cfg.make_family().describe(), cfg.n, cfg.d, cfg.d0, cfg.master_seed)


# ---------------------------------------------------------------- regime II


def _choose_lambda(family, data, mode: LambdaMode, rep_ss, opts) -> float:
    if mode.kind == "fixed":
        return mode.value
    if mode.kind == "rate":
        return mode.rate_lambda(data.n)
    return select_lambda_cv(family, data, mode.k, seed=streams.generator(rep_ss, streams.CV_FOLDS), opts=opts).lam


def _lasso_rep(r, cfg: SimConfig, X, beta, opts):
    family = cfg.make_family()
    rep_ss = _rep_stream(cfg.master_seed, r)
    y = gen_response(family, X, beta, streams.generator(rep_ss, streams.RESPONSE))
    data = Dataset(X, y)
    coords = np.arange(cfg.d0)
    try:
        lam = _choose_lambda(family, data, cfg.lambda_mode, rep_ss, opts)
        base = fit_lasso(family, data, lam, opts)
    except GlmBootError:
        return {"status": "failed"}
    if not base.converged:
        return {"status": "failed"}
    support = np.array_equal(base.active_set, coords)
    sign = bool(support and np.array_equal(base.signs[coords], np.sign(beta[coords])))
    out = {"status": "ok", "support": support, "sign": sign, "active": int(base.active_set.size), "lam": lam}
    if base.active_set.size == 0:
        out["status"] = "empty"
        return out
    dist, replicated = pb_lasso_distribution(family, data, base, cfg.B, cfg.weights, rep_ss, coords, opts)
    if dist.B_eff < 2:
        out["status"] = "failed"
        return out
    ts, rs, width = interval_outcome(dist, base.beta_bar[coords], beta[coords], range(cfg.d0), cfg.level)
    region = region_covers(dist, base.beta_bar[coords], beta[coords], cfg.n, cfg.level)
    out.update(outcome=(ts, rs, width, region), replicated=replicated)
    return out


def run_lasso_sim(cfg: SimConfig, opts: LassoOptions = LassoOptions()) -> tuple[CoverageReport, VscReport]:
    """PB-Lasso coverage on the true active coordinates, with selection accuracy.

    Replications whose base fit selects nothing are excluded from coverage
    (and count as selection failures); numerical failures beyond 20% abort.
    """
    if cfg.lambda_mode is None:
        raise ConfigError("the Lasso simulation needs a lambda mode")
    if cfg.d0 >= cfg.d:
        raise ConfigError("the Lasso simulation needs d0 < d")
    X = gen_design(cfg.n, cfg.d, cfg.master_seed)
    beta = true_beta(cfg.d, cfg.d0)
    task = partial(_lasso_rep, cfg=cfg, X=X, beta=beta, opts=opts)
    outcomes = streams.parallel_map(task, range(cfg.reps), cfg.parallelism)

    acc = CoverageAccumulator(range(1, cfg.d0 + 1))
    support, sign, sizes, replicated = [], [], [], []
    failed = empty = 0
    for out in outcomes:
        support.append(bool(out.get("support", False)))
        sign.append(bool(out.get("sign", False)))
        if out["status"] == "failed":
            failed += 1
            acc.exclude()
            continue
        sizes.append(out["active"])
        if out["status"] == "empty":
            empty += 1
            acc.exclude()
            continue
        acc.add(*out["outcome"])
        if out["sign"]:
            replicated.append(out["replicated"])
    _check_failures(failed, cfg.reps, "Lasso simulation")
    diagnostic = ""
    if empty:
        diagnostic = f"{empty} of {cfg.reps} replications selected an empty active set and were excluded"
        log.warning(diagnostic)
    vsc = VscReport(
        exact_support_rate=float(np.mean(support)),
        sign_match_rate=float(np.mean(sign)),
        support_flags=tuple(support),
        sign_flags=tuple(sign),
        mean_active_size=float(np.mean(sizes)) if sizes else 0.0,
        empty_fits=empty,
        pb_sign_replication=float(np.mean(replicated)) if replicated else float("nan"),
        diagnostic=diagnostic,
    )
    report = acc.report(cfg.make_family().describe(), cfg.n, cfg.d, cfg.d0, cfg.master_seed)
    return report, vsc


# ---------------------------------------------------------------- penalty-bias demo


def _failure_rep(r, cfg: SimConfig, X, beta, sigma11, lam, opts):
    family = cfg.make_family()
    rep_ss = _rep_stream(cfg.master_seed, r)
    y = gen_response(family, X, beta, streams.generator(rep_ss, streams.RESPONSE))
    data = Dataset(X, y)
    coords = np.arange(cfg.d0)
    try:
        base = fit_lasso(family, data, lam, opts)
    except GlmBootError:
        return None
    if not base.converged:
        return None
    z = math.sqrt(cfg.n) * (base.beta_bar[coords] - beta[coords])
    naive = gaussian_region_covers(z, sigma11, cfg.level)
    vsc = bool(
        np.array_equal(base.active_set, coords)
        and np.array_equal(base.signs[coords], np.sign(beta[coords]))
    )
    dist, _ = pb_lasso_distribution(family, data, base, cfg.B, cfg.weights, rep_ss, coords, opts)
    if dist.B_eff < 2:
        return None
    pb = region_covers(dist, base.beta_bar[coords], beta[coords], cfg.n, cfg.level)
    return naive, pb, vsc


def oracle_covariance(family: LinkFamily, X, beta, d0: int) -> np.ndarray:
    """Covariance of the oracle linear term on the first ``d0`` coordinates."""
    E = expected_info(family, X, beta)[:d0, :d0]
    S = score_covariance(family, X, beta)[:d0, :d0]
    return sandwich(E, S)


def gauss_failure_demo(cfg: SimConfig, ns=(200, 500, 1000), opts: LassoOptions = LassoOptions()) -> FailureReport:
    """Naive Gaussian vs PB-Lasso region coverage along an increasing-n sweep.

    The penalty is ``c * n**(1/2 + tau)``; the Gaussian region uses the oracle
    covariance of the linear term and ignores the penalty bias. Each sample
    size uses the leading ``n`` rows of one design drawn at ``max(ns)``.
    """
    mode = cfg.lambda_mode
    if mode is None or mode.kind != "rate":
        raise ConfigError("the failure demo needs a rate-mode penalty")
    if mode.tau <= 0:
        raise ConfigError("the failure demo needs tau > 0")
    family = cfg.make_family()
    ns = [int(n) for n in ns]
    if not ns or min(ns) < 1:
        raise ConfigError("the failure demo needs at least one positive sample size")
    # nested designs: the sweep shares one matrix, so coverage differences across
    # n reflect the growing penalty bias rather than design-to-design noise
    X_full = gen_design(max(ns), cfg.d, cfg.master_seed)
    rows = []
    for n in ns:
        cell = replace(cfg, n=n)
        X = X_full[:n]
        beta = true_beta(cell.d, cell.d0)
        sigma11 = oracle_covariance(family, X, beta, cell.d0)
        lam = mode.rate_lambda(cell.n)
        task = partial(_failure_rep, cfg=cell, X=X, beta=beta, sigma11=sigma11, lam=lam, opts=opts)
        outcomes = streams.parallel_map(task, range(cell.reps), cell.parallelism)
        good = [o for o in outcomes if o is not None]
        excluded = len(outcomes) - len(good)
        _check_failures(excluded, cell.reps, f"failure demo at n={n}")
        arr = np.array(good, dtype=float).reshape(-1, 3)
        rows.append(
            FailureRow(
                n=cell.n, lam=lam,
                naive_coverage=float(arr[:, 0].mean()), pb_coverage=float(arr[:, 1].mean()),
                vsc_rate=float(arr[:, 2].mean()), reps=cell.reps, excluded=excluded,
            )
        )
        log.info("n=%d lambda=%.4g naive=%.3f pb=%.3f vsc=%.3f", n, lam, *arr.mean(axis=0))
    return FailureReport(family.describe(), cfg.d, cfg.d0, cfg.level, mode.tau, mode.c, tuple(rows))
