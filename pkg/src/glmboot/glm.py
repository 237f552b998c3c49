"""Unpenalized GLM estimation and plug-in linearization quantities.

The objective is the summed negative log-likelihood

    f(beta) = sum_i { -y_i h(x_i'beta) + h1(x_i'beta) }

optionally augmented by a linear term ``c'beta``; the perturbation bootstrap
reuses the same Newton solver with ``c`` carrying its centering correction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import DataError, DomainOverflowError, SingularMatrixError
from .family import LinkFamily, eval_bundle

COND_LIMIT = 1e12
SEPARATION_NORM = 1e3
SEPARATION_RESID = 1e-6


@dataclass(frozen=True)
class Dataset:
    """Fixed design ``X`` (n x d) and response ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray
    names: tuple | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1:
            raise DataError(f"X must be 2-d and y 1-d, got shapes {X.shape} and {y.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"empty design {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("design and response must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.names is None:
            object.__setattr__(self, "names", tuple(f"x{j + 1}" for j in range(X.shape[1])))
        elif len(self.names) != X.shape[1]:
            raise DataError(f"{len(self.names)} column names for {X.shape[1]} columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def validate_for(self, family: LinkFamily) -> "Dataset":
        family.validate_response(self.y)
        return self


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 100
    max_halvings: int = 60


@dataclass(frozen=True)
class GlmFit:
    beta_hat: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    final_objective: float
    separated: bool = False


@dataclass(frozen=True)
class BahadurStats:
    """Plug-in linearization quantities at a coefficient vector.

    ``S_tilde_hat`` is ``None`` when ``L_hat`` is too ill-conditioned to invert
    and the stats were requested with ``strict=False``.
    """

    W_hat: np.ndarray
    L_hat: np.ndarray
    S_hat: np.ndarray
    S_tilde_hat: np.ndarray | None


def _check_beta(data: Dataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.d,):
        raise DataError(f"beta has shape {beta.shape}, expected ({data.d},)")
    return beta


def _objective(family: LinkFamily, X, y, beta, c=None) -> float:
    u = X @ beta
    family.check_domain(u)
    val = float(np.sum(family.h1(u) - y * family.h(u)))
    if c is not None:
        val += float(c @ beta)
    return val


def _grad_and_weights(family: LinkFamily, X, y, beta, c=None):
    """Gradient of the (possibly offset) objective and per-row Hessian weights."""
    u = X @ beta
    b = eval_bundle(family, u)
    g = X.T @ (b.dh1 - y * b.dh)
    if c is not None:
        g = g + c
    # -y h'' + h1'' = ginv' h' - (y - ginv) h''
    w = b.d2h1 - y * b.d2h
    return g, w


def neg_log_lik(family: LinkFamily, data: Dataset, beta) -> float:
    """Summed negative log-likelihood at ``beta``."""
    beta = _check_beta(data, beta)
    return _objective(family, data.X, data.y, beta)


def score(family: LinkFamily, data: Dataset, beta) -> np.ndarray:
    """Gradient of :func:`neg_log_lik`: ``sum_i {-y_i h'(u_i) + h1'(u_i)} x_i``."""
    beta = _check_beta(data, beta)
    b = eval_bundle(family, data.X @ beta)
    return data.X.T @ (b.dh1 - data.y * b.dh)


def hessian(family: LinkFamily, data: Dataset, beta) -> np.ndarray:
    """Observed Hessian of :func:`neg_log_lik`, i.e. ``n * L_hat``."""
    beta = _check_beta(data, beta)
    _, w = _grad_and_weights(family, data.X, data.y, beta)
    return (data.X * w[:, None]).T @ data.X


def newton_minimize(family, X, y, beta0, c=None, opts: SolverOptions = SolverOptions()) -> GlmFit:
    """Damped Newton on ``f(beta) + c'beta`` with step halving on the objective.

    Raises :class:`SingularMatrixError` when the Hessian cannot be factored.
    """
    beta = np.array(beta0, dtype=float)
    f = _objective(family, X, y, beta, c)
    g, w = _grad_and_weights(family, X, y, beta, c)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm >= opts.tol and it < opts.max_iter:
        it += 1
        H = (X * w[:, None]).T @ X
        try:
            step = -sla.cho_solve(sla.cho_factor(H, check_finite=False), g, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularMatrixError(f"Hessian not positive definite at iteration {it}") from exc
        if not np.all(np.isfinite(step)):
            raise SingularMatrixError(f"non-finite Newton step at iteration {it}")
        t = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            trial = beta + t * step
            try:
                f_trial = _objective(family, X, y, trial, c)
            except DomainOverflowError:
                f_trial = np.inf
            # allow rounding-level increase; the gradient test decides convergence
            if f_trial <= f + 1e-12 * max(1.0, abs(f)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        beta, f = trial, f_trial
        g, w = _grad_and_weights(family, X, y, beta, c)
        gnorm = float(np.linalg.norm(g))
        if np.linalg.norm(beta) > SEPARATION_NORM:
            return GlmFit(beta, False, it, gnorm, f, separated=True)
    return GlmFit(beta, gnorm < opts.tol, it, gnorm, f)


def fit_glm(family: LinkFamily, data: Dataset, opts: SolverOptions = SolverOptions(), beta0=None) -> GlmFit:
    """Maximum-likelihood fit by damped Newton.

    Non-convergence is reported through ``converged=False`` (with
    ``separated=True`` when the coefficient norm diverges, the signature of
    logistic separation); the caller decides what to do with it.
    """
    data.validate_for(family)
    zero_cols = np.flatnonzero(~np.any(data.X != 0, axis=0))
    if zero_cols.size:
        raise DataError(f"design column {int(zero_cols[0])} is identically zero")
    start = np.zeros(data.d) if beta0 is None else _check_beta(data, beta0)
    fit = newton_minimize(family, data.X, data.y, start, None, opts)
    if family.name == "logistic" and fit.converged:
        # the gradient vanishes exponentially along a separating direction, so a
        # tiny score alone does not certify an MLE; a perfect fit gives it away
        resid = data.y - family.ginv(data.X @ fit.beta_hat)
        if np.max(np.abs(resid)) < SEPARATION_RESID:
            return replace(fit, converged=False, separated=True)
    return fit


def _sym_solve_twice(L: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``L^{-1} S L^{-1}`` via two symmetric solves."""
    A = sla.solve(L, S, assume_a="sym")
    out = sla.solve(L, A.T, assume_a="sym").T
    return 0.5 * (out + out.T)


def check_conditioning(M: np.ndarray, what: str) -> None:
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(f"{what} is numerically singular (condition number {cond:.3g})")


def plugin_stats(family: LinkFamily, data: Dataset, beta, strict: bool = True) -> BahadurStats:
    """Score direction, curvature and bootstrap covariance plugged in at ``beta``."""
    beta = _check_beta(data, beta)
    X, y = data.X, data.y
    n = data.n
    b = eval_bundle(family, X @ beta)
    resid = y - b.ginv
    W = X.T @ (resid * b.dh) / np.sqrt(n)
    curv = b.dginv * b.dh - resid * b.d2h
    L = (X * curv[:, None]).T @ X / n
    L = 0.5 * (L + L.T)
    Xs = X * (b.dh * resid)[:, None]
    S = Xs.T @ Xs / n
    S = 0.5 * (S + S.T)
    try:
        check_conditioning(L, "L_hat")
        S_tilde = _sym_solve_twice(L, S)
    except SingularMatrixError:
        if strict:
            raise
        S_tilde = None
    return BahadurStats(W, L, S, S_tilde)


def expected_info(family: LinkFamily, X, beta) -> np.ndarray:
    """Expected curvature ``n^-1 sum_i x_i x_i' ginv'(u_i) h'(u_i)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b = eval_bundle(family, X @ np.asarray(beta, dtype=float))
    E = (X * (b.dginv * b.dh)[:, None]).T @ X / X.shape[0]
    return 0.5 * (E + E.T)


def score_covariance(family: LinkFamily, X, beta) -> np.ndarray:
    """Covariance of the scaled score at the true ``beta``: ``n^-1 sum x x' h'^2 Var(y)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b = eval_bundle(family, X @ np.asarray(beta, dtype=float))
    v = np.square(b.dh) * family.variance(b.ginv)
    S = (X * v[:, None]).T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def sandwich(L: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``L^{-1} S L^{-1}`` for symmetric ``L`` (two solves, no explicit inverse)."""
    check_conditioning(L, "curvature matrix")
    return _sym_solve_twice(L, S)
