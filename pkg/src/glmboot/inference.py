"""Percentile intervals, norm confidence regions and coverage bookkeeping."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import GlmBootError, SingularMatrixError
from .perturb import BootstrapDistribution

SIDES = ("two_sided", "left_sided", "right_sided")

REPORT_COLUMNS = (
    "family", "n", "d", "d0", "coefficient", "ts_coverage", "ts_width",
    "rs_coverage", "region_coverage", "reps", "excluded", "seed",
)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    side: str
    coefficient: int

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def order_stat_index(p: float, B: int) -> int:
    """0-based index of the ``ceil(p*B)``-th order statistic, clamped to ``[0, B-1]``."""
    # 0.95 * 100 == 95.00000000000001 must still select the 95th
    k = math.ceil(p * B - 1e-9)
    return min(max(k, 1), B) - 1


def quantile(values, p: float) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise GlmBootError("quantile of an empty bootstrap distribution")
    return float(v[order_stat_index(p, v.size)])


def _check_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    return 1.0 - level


def percentile_ci(dist: BootstrapDistribution, beta_hat, j: int, level: float, side: str = "two_sided") -> ConfidenceInterval:
    """Percentile interval for coordinate ``j`` (0-based) from the pivot quantiles."""
    alpha = _check_level(level)
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    if dist.B_eff < 1:
        raise GlmBootError("empty bootstrap distribution")
    col = np.sort(dist.pivots[:, j])
    rn = math.sqrt(dist.n)
    b = float(np.asarray(beta_hat)[j])

    def q(p):
        return col[order_stat_index(p, col.size)]

    if side == "two_sided":
        return ConfidenceInterval(b - q(1 - alpha / 2) / rn, b - q(alpha / 2) / rn, level, side, j)
    if side == "right_sided":
        return ConfidenceInterval(-math.inf, b - q(alpha) / rn, level, side, j)
    return ConfidenceInterval(b - q(1 - alpha) / rn, math.inf, level, side, j)


def region_radius(dist: BootstrapDistribution, level: float) -> float:
    """(level)-quantile of the pivot row norms."""
    _check_level(level)
    if dist.B_eff < 1:
        raise GlmBootError("empty bootstrap distribution")
    return quantile(np.linalg.norm(dist.pivots, axis=1), level)


def region_covers(dist: BootstrapDistribution, beta_hat, beta_true, n: int, level: float) -> bool:
    """Whether ``||sqrt(n)(beta_hat - beta_true)||`` is within the bootstrap norm quantile."""
    t = math.sqrt(n) * np.linalg.norm(np.asarray(beta_hat, float) - np.asarray(beta_true, float))
    return bool(t <= region_radius(dist, level))


def gaussian_region_covers(z, sigma, level: float) -> bool:
    """``z' sigma^-1 z <= chi2_{dim, level}``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    try:
        stat = float(z @ sla.solve(sigma, z, assume_a="pos"))
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularMatrixError("Gaussian region covariance is singular") from exc
    return stat <= stats.chi2.ppf(level, z.size)


def ball_diagnostic(samples, sigma, grid: int | None = None) -> float:
    """Centered-ball distance between ``samples`` and ``N(0, sigma)``.

    Standardized squared norms are compared with the chi-square(d) CDF. With
    ``grid=None`` the supremum runs over all radii (a Kolmogorov-Smirnov
    statistic); an integer evaluates the right-continuous ECDF at that many
    radii placed at equally spaced chi-square quantiles.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 1 and np.ndim(sigma) < 2:
        samples = samples.T
    m, d = samples.shape
    if m < 100:
        raise ValueError(f"need at least 100 draws, got {m}")
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    try:
        chol = sla.cholesky(sigma, lower=True)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SingularMatrixError("sigma must be positive definite") from exc
    z = sla.solve_triangular(chol, samples.T, lower=True)
    r2 = np.sort(np.einsum("ij,ij->j", z, z))
    if grid is None:
        F = stats.chi2.cdf(r2, d)
        i = np.arange(1, m + 1)
        return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))
    radii = stats.chi2.ppf((np.arange(grid) + 0.5) / grid, d)
    ecdf = np.searchsorted(r2, radii, side="right") / m
    return float(np.max(np.abs(ecdf - stats.chi2.cdf(radii, d))))


@dataclass(frozen=True)
class CoverageReport:
    """Monte-Carlo coverage of percentile intervals and the norm region.

    ``coefficients`` are 1-based coordinate labels. Coverages and widths are
    averaged over the ``reps - excluded`` successful replications.
    """

    family: str
    n: int
    d: int
    d0: int
    coefficients: tuple
    ts_coverage: tuple
    ts_width: tuple
    rs_coverage: tuple
    region_coverage: float
    reps: int
    excluded: int
    seed: int

    @property
    def successes(self) -> int:
        return self.reps - self.excluded

    def per_coefficient(self) -> dict:
        return {
            c: (t, r, w)
            for c, t, r, w in zip(self.coefficients, self.ts_coverage, self.rs_coverage, self.ts_width)
        }

    def rows(self) -> list[dict]:
        return [
            {
                "family": self.family, "n": self.n, "d": self.d, "d0": self.d0,
                "coefficient": c, "ts_coverage": t, "ts_width": w, "rs_coverage": r,
                "region_coverage": self.region_coverage, "reps": self.reps,
                "excluded": self.excluded, "seed": self.seed,
            }
            for c, t, r, w in zip(self.coefficients, self.ts_coverage, self.rs_coverage, self.ts_width)
        ]


class CoverageAccumulator:
    """Streams per-replication outcomes into a :class:`CoverageReport`."""

    def __init__(self, coefficients):
        self.coefficients = tuple(int(c) for c in coefficients)
        k = len(self.coefficients)
        self.ts_hits = np.zeros(k, dtype=np.int64)
        self.rs_hits = np.zeros(k, dtype=np.int64)
        self.width_sum = np.zeros(k)
        self.region_hits = 0
        self.successes = 0
        self.excluded = 0

    def add(self, ts_hit, rs_hit, width, region_hit: bool) -> None:
        self.ts_hits += np.asarray(ts_hit, dtype=np.int64)
        self.rs_hits += np.asarray(rs_hit, dtype=np.int64)
        self.width_sum += np.asarray(width, dtype=float)
        self.region_hits += int(bool(region_hit))
        self.successes += 1

    def exclude(self) -> None:
        self.excluded += 1

    def report(self, family: str, n: int, d: int, d0: int, seed: int) -> CoverageReport:
        s = self.successes
        nan = float("nan")

        def mean(x):
            return tuple(float(v) / s if s else nan for v in x)

        return CoverageReport(
            family=family, n=int(n), d=int(d), d0=int(d0),
            coefficients=self.coefficients,
            ts_coverage=mean(self.ts_hits), ts_width=mean(self.width_sum), rs_coverage=mean(self.rs_hits),
            region_coverage=self.region_hits / s if s else nan,
            reps=s + self.excluded, excluded=self.excluded, seed=int(seed),
        )


def interval_outcome(dist: BootstrapDistribution, beta_hat, beta_true, coords, level: float):
    """Two-sided hit, right-sided hit and two-sided width for each 0-based coordinate."""
    ts, rs, width = [], [], []
    for j in coords:
        two = percentile_ci(dist, beta_hat, j, level, "two_sided")
        right = percentile_ci(dist, beta_hat, j, level, "right_sided")
        ts.append(two.contains(beta_true[j]))
        rs.append(right.contains(beta_true[j]))
        width.append(two.width)
    return np.array(ts), np.array(rs), np.array(width)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        for row in rep.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def reports_from_csv(text: str) -> list[CoverageReport]:
    """Inverse of :func:`reports_to_csv`; consecutive rows sharing a cell form one report."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise ValueError(f"unexpected coverage columns {reader.fieldnames}")
    groups: list[list[dict]] = []
    key_cols = ("family", "n", "d", "d0", "region_coverage", "reps", "excluded", "seed")
    for row in reader:
        key = tuple(row[k] for k in key_cols)
        if groups and tuple(groups[-1][0][k] for k in key_cols) == key:
            groups[-1].append(row)
        else:
            groups.append([row])
    out = []
    for rows in groups:
        r0 = rows[0]
        out.append(
            CoverageReport(
                family=r0["family"], n=int(r0["n"]), d=int(r0["d"]), d0=int(r0["d0"]),
                coefficients=tuple(int(r["coefficient"]) for r in rows),
                ts_coverage=tuple(float(r["ts_coverage"]) for r in rows),
                ts_width=tuple(float(r["ts_width"]) for r in rows),
                rs_coverage=tuple(float(r["rs_coverage"]) for r in rows),
                region_coverage=float(r0["region_coverage"]),
                reps=int(r0["reps"]), excluded=int(r0["excluded"]), seed=int(r0["seed"]),
            )
        )
    return out


def format_report(rep: CoverageReport, level: float | None = None) -> str:
    """Human-readable table: TS coverage with mean width in parentheses, then RS."""
    head = f"{rep.family}  n={rep.n}  d={rep.d}"
    if rep.d0 != rep.d:
        head += f"  d0={rep.d0}"
    if level is not None:
        head += f"  level={level:g}"
    lines = [head, f"{'coef':>6}  {'TS (width)':>14}  {'RS':>6}"]
    for c, t, r, w in zip(rep.coefficients, rep.ts_coverage, rep.rs_coverage, rep.ts_width):
        lines.append(f"{'b' + str(c):>6}  {f'{t:.3f}({w:.2f})':>14}  {r:>6.3f}")
    lines.append(f"region coverage {rep.region_coverage:.3f}   reps {rep.reps}   excluded {rep.excluded}")
    return "\n".join(lines)
