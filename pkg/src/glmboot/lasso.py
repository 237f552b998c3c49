"""l1-penalized GLM: fitting, KKT checks, cross-validation, irrepresentability.

The penalty multiplies ``||beta||_1`` against the *summed* negative
log-likelihood, so a given ``lam`` means something different than in tools
that average the loss over observations (glmnet's lambda times n).

Fits use proximal Newton: at each outer step the smooth part is replaced by
its second-order expansion and the resulting quadratic + l1 problem is solved
by cyclic coordinate descent over a working set (current support plus KKT
violators), followed by step halving on the exact penalized objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import streams
from ._cd import cd_quadratic
from .errors import DataError, DomainOverflowError, GlmBootError, NumericalError
from .family import LinkFamily, eval_bundle
from .glm import SEPARATION_NORM, Dataset, _objective, check_conditioning, expected_info
from .perturb import EXP1, BootstrapDistribution, PerturbationWeights, WeightDist, centering_term, collect_pivots, draw_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LassoOptions:
    xtol: float = 1e-8
    kkt_tol: float = 1e-6
    max_outer: int = 100
    inner_tol: float = 1e-13
    max_sweeps: int = 100_000
    max_halvings: int = 60


@dataclass(frozen=True)
class LassoFit:
    beta_bar: np.ndarray
    lam: float
    active_set: np.ndarray
    signs: np.ndarray
    kkt_max_violation: float
    converged: bool
    iterations: int = 0
    objective: float = float("nan")
    objective_trace: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class KktReport:
    active: np.ndarray
    active_residuals: np.ndarray
    inactive: np.ndarray
    inactive_slack: np.ndarray
    tol: float

    @property
    def max_violation(self) -> float:
        r = self.active_residuals.max(initial=0.0)
        s = (-self.inactive_slack).max(initial=0.0)
        return float(max(r, s, 0.0))

    @property
    def satisfied(self) -> bool:
        return bool(
            self.active_residuals.max(initial=0.0) < self.tol
            and self.inactive_slack.min(initial=np.inf) > -self.tol
        )


@dataclass(frozen=True)
class CvResult:
    lam: float
    grid: np.ndarray
    cv_curve: np.ndarray
    folds: np.ndarray


def penalized_objective(family, X, y, beta, lam, c=None) -> float:
    return _objective(family, X, y, beta, c) + lam * float(np.abs(beta).sum())


def _gradient(family, X, y, beta, c=None):
    b = eval_bundle(family, X @ beta)
    g = X.T @ (b.dh1 - y * b.dh)
    if c is not None:
        g = g + c
    return g, b.d2h1 - y * b.d2h


def kkt_report(grad: np.ndarray, beta: np.ndarray, lam: float, tol: float) -> KktReport:
    nz = beta != 0
    active = np.flatnonzero(nz)
    inactive = np.flatnonzero(~nz)
    resid = np.abs(grad[active] + lam * np.sign(beta[active]))
    slack = lam - np.abs(grad[inactive])
    return KktReport(active, resid, inactive, slack, tol)


def _prox_newton(family: LinkFamily, X, y, lam: float, beta0, c, opts: LassoOptions) -> LassoFit:
    beta = np.array(beta0, dtype=float)
    F = penalized_objective(family, X, y, beta, lam, c)
    trace = [F]
    converged = False
    report = None
    it = 0
    while it < opts.max_outer:
        it += 1
        g, w = _gradient(family, X, y, beta, c)
        report = kkt_report(g, beta, lam, opts.kkt_tol)
        ws = (beta != 0) | (np.abs(g) > lam)
        if not ws.any():
            converged = report.satisfied
            break
        idx = np.flatnonzero(ws)
        Xw = X[:, idx]
        H = (Xw * w[:, None]).T @ Xw
        b_old = beta[idx]
        a = H @ b_old - g[idx]
        b_new = b_old.copy()
        cd_quadratic(np.ascontiguousarray(H), a, b_new, float(lam), opts.inner_tol, opts.max_sweeps)
        direction = b_new - b_old
        t = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            trial = beta.copy()
            trial[idx] = b_old + t * direction if t < 1.0 else b_new
            try:
                F_trial = penalized_objective(family, X, y, trial, lam, c)
            except DomainOverflowError:
                F_trial = np.inf
            if F_trial <= F + 1e-12 * max(1.0, abs(F)):
                accepted = True
                break
            t *= 0.5
        step = float(np.max(np.abs(t * direction))) if accepted else 0.0
        if accepted:
            beta, F = trial, F_trial
            trace.append(F)
        if np.linalg.norm(beta) > SEPARATION_NORM:
            break
        if step < opts.xtol:
            g, _ = _gradient(family, X, y, beta, c)
            report = kkt_report(g, beta, lam, opts.kkt_tol)
            if report.satisfied:
                converged = True
                break
            if step == 0.0:
                break
    g, _ = _gradient(family, X, y, beta, c)
    report = kkt_report(g, beta, lam, opts.kkt_tol)
    active = np.flatnonzero(beta != 0)
    return LassoFit(
        beta_bar=beta,
        lam=float(lam),
        active_set=active,
        signs=np.sign(beta),
        kkt_max_violation=report.max_violation,
        converged=converged,
        iterations=it,
        objective=F,
        objective_trace=tuple(trace),
    )


def fit_lasso(family: LinkFamily, data: Dataset, lam: float, opts: LassoOptions = LassoOptions(), beta0=None) -> LassoFit:
    """Minimize ``neg_log_lik(beta) + lam * ||beta||_1``."""
    if not lam >= 0:
        raise ValueError(f"penalty must be nonnegative, got {lam!r}")
    data.validate_for(family)
    start = np.zeros(data.d) if beta0 is None else np.asarray(beta0, dtype=float)
    return _prox_newton(family, data.X, data.y, lam, start, None, opts)


def fit_pb_lasso(
    family: LinkFamily,
    data: Dataset,
    base_fit: LassoFit,
    weights: PerturbationWeights,
    lam: float | None = None,
    opts: LassoOptions = LassoOptions(),
) -> LassoFit:
    """Perturbation-bootstrap Lasso replicate, warm-started at the base fit.

    The centering term is built from the base Lasso's residuals. Its
    unperturbed part equals minus the base score, which under the base KKT
    conditions is ``lam * sign(beta_bar)``; so even with constant weights the
    replicate carries one extra penalty shift (it is *not* a fixed point),
    which is exactly what lets the bootstrap pivot reproduce the Lasso bias.
    """
    if not base_fit.converged:
        raise GlmBootError("PB-Lasso needs a converged base fit")
    lam = base_fit.lam if lam is None else float(lam)
    c = centering_term(family, data, base_fit.beta_bar, weights)
    return _prox_newton(family, data.X, data.y, lam, base_fit.beta_bar, c, opts)


def pb_lasso_distribution(
    family: LinkFamily,
    data: Dataset,
    base_fit: LassoFit,
    B: int,
    dist: WeightDist = EXP1,
    seed=0,
    coords=None,
    opts: LassoOptions = LassoOptions(),
) -> tuple[BootstrapDistribution, float]:
    """PB-Lasso pivots ``sqrt(n)(beta_bar* - beta_bar)`` on ``coords`` (default: all).

    Replicate ``b`` uses the substream ``(seed, BOOTSTRAP, b)``. Also returns
    the fraction of replicates reproducing the base fit's sign pattern.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    coords = np.arange(data.d) if coords is None else np.asarray(coords, dtype=np.int64)
    rows = []
    same = 0
    rn = np.sqrt(data.n)
    for b in range(B):
        w = draw_weights(data.n, dist, streams.generator(seed, streams.BOOTSTRAP, b))
        try:
            fit = fit_pb_lasso(family, data, base_fit, w, opts=opts)
        except GlmBootError:
            rows.append(None)
            continue
        if not fit.converged:
            rows.append(None)
            continue
        same += bool(np.array_equal(fit.signs, base_fit.signs))
        rows.append(rn * (fit.beta_bar[coords] - base_fit.beta_bar[coords]))
    return collect_pivots(rows, data.n, coords.size), same / B


def check_kkt(family: LinkFamily, data: Dataset, fit: LassoFit, tol: float = 1e-6, c=None) -> KktReport:
    """KKT conditions of the exact penalized problem at ``fit.beta_bar``.

    ``c`` is the linear term of a perturbed problem (``None`` for the plain Lasso).
    """
    g, _ = _gradient(family, data.X, data.y, np.asarray(fit.beta_bar, dtype=float), c)
    return kkt_report(g, np.asarray(fit.beta_bar), fit.lam, tol)


def lambda_max(family: LinkFamily, data: Dataset) -> float:
    """Smallest penalty for which the all-zero vector is optimal."""
    g, _ = _gradient(family, data.X, data.y, np.zeros(data.d))
    return float(np.max(np.abs(g)))


def default_grid(lmax: float, size: int = 50, ratio: float = 1e-3) -> np.ndarray:
    return np.geomspace(lmax, ratio * lmax, size)


def _degenerate(family: LinkFamily, y: np.ndarray) -> bool:
    if family.name == "logistic":
        return bool(np.all(y == y[0]))
    if family.name == "poisson":
        return bool(np.all(y == 0))
    return False


def _assign_folds(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    folds = np.empty(n, dtype=np.int64)
    folds[rng.permutation(n)] = np.arange(n) % k
    return folds


def _fold_path_loss(family, data, folds, fold, grid_desc, opts) -> np.ndarray:
    train = folds != fold
    Xtr, ytr = data.X[train], data.y[train]
    Xte, yte = data.X[~train], data.y[~train]
    scale = train.sum() / data.n
    losses = np.full(grid_desc.size, np.inf)
    beta = np.zeros(data.d)
    for m, lam in enumerate(grid_desc):
        try:
            fit = _prox_newton(family, Xtr, ytr, lam * scale, beta, None, opts)
        except NumericalError:
            break
        if not fit.converged:
            break
        beta = fit.beta_bar
        try:
            losses[m] = _objective(family, Xte, yte, beta)
        except DomainOverflowError:
            break
    return losses


def select_lambda_cv(
    family: LinkFamily,
    data: Dataset,
    k: int = 10,
    grid=None,
    seed=0,
    opts: LassoOptions = LassoOptions(),
) -> CvResult:
    """K-fold cross-validated penalty on held-out negative log-likelihood.

    Training fits use ``lam * n_train / n`` so a grid value means the same
    per-observation penalty in every fold. Once a fold's path stops converging
    (tiny penalties, near-separation) its remaining losses are infinite.
    Ties go to the smallest penalty.
    """
    if k < 2 or data.n < k:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={data.n}")
    data.validate_for(family)
    if grid is None:
        grid = default_grid(lambda_max(family, data))
    grid_desc = np.sort(np.asarray(grid, dtype=float))[::-1]
    if grid_desc.size == 0 or np.any(grid_desc < 0):
        raise ValueError("penalty grid must be nonempty and nonnegative")

    rng = streams.generator(seed, streams.CV_FOLDS) if not isinstance(seed, np.random.Generator) else seed
    for attempt in range(2):
        folds = _assign_folds(data.n, k, rng)
        if not any(_degenerate(family, data.y[folds != f]) for f in range(k)):
            break
    else:
        raise DataError("cross-validation folds have a degenerate training response after re-randomizing")

    total = np.zeros(grid_desc.size)
    for f in range(k):
        total += _fold_path_loss(family, data, folds, f, grid_desc, opts)
    curve = total / data.n
    finite = np.isfinite(curve)
    if not finite.any():
        raise NumericalError("no penalty on the grid produced converged fits in every fold")
    best = np.min(curve[finite])
    # grid is descending, so the last minimizer is the smallest penalty
    pick = int(np.flatnonzero(curve == best)[-1])
    return CvResult(float(grid_desc[pick]), grid_desc, curve, folds)


def irrepresentable_margin(family: LinkFamily, X, beta_true, active) -> float:
    """``1 - max_{j inactive} |(E21 E11^-1 sgn(beta_active))_j|`` from the expected curvature."""
    beta_true = np.asarray(beta_true, dtype=float)
    d = beta_true.size
    active = np.asarray(sorted(set(int(j) for j in active)), dtype=np.int64)
    if active.size == 0 or active.size >= d:
        raise ValueError("active set must be a nonempty proper subset of the coordinates")
    inactive = np.setdiff1d(np.arange(d), active)
    E = expected_info(family, X, beta_true)
    E11 = E[np.ix_(active, active)]
    E21 = E[np.ix_(inactive, active)]
    check_conditioning(E11, "active curvature block")
    s = np.sign(beta_true[active])
    v = E21 @ sla.solve(E11, s, assume_a="sym")
    return float(1.0 - np.max(np.abs(v)))
