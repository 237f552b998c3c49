"""Command-line frontend: ``glmboot {fit,bootstrap,lasso,simulate,demo-failure}``.

Settings come from an optional TOML file (``--config``) and flags; flags win.
Unknown config keys are rejected. Results go to stdout (or ``--output``),
progress and errors to stderr. Exit codes: 0 ok, 2 config, 3 data, 4 numerical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import streams
from .errors import ConfigError, DataError, GlmBootError, NumericalError
from .family import make_family
from .glm import Dataset, fit_glm
from .inference import SIDES, format_report, percentile_ci, reports_to_csv
from .lasso import (
    check_kkt,
    fit_lasso,
    irrepresentable_margin,
    pb_lasso_distribution,
    select_lambda_cv,
)
from .perturb import WeightDist, pb_distribution
from .simulate import LambdaMode, SimConfig, gauss_failure_demo, run_coverage_sim, run_lasso_sim

log = logging.getLogger("glmboot")

COMMANDS = ("fit", "bootstrap", "lasso", "simulate", "demo-failure")
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4

# key -> type, per command; "lambda" is a nested table
COMMON_KEYS = {"family": str, "shape": float, "seed": int, "format": str, "output": str, "threads": int}
DATA_KEYS = {"input": str, "standardize": bool}
KEYS = {
    "fit": {**COMMON_KEYS, **DATA_KEYS},
    "bootstrap": {**COMMON_KEYS, **DATA_KEYS, "level": float, "B": int, "weights": str},
    "lasso": {**COMMON_KEYS, **DATA_KEYS, "level": float, "B": int, "weights": str, "truth": str, "lambda": dict},
    "simulate": {**COMMON_KEYS, "n": list, "d": int, "d0": int, "reps": int, "B": int, "level": float, "lambda": dict},
    "demo-failure": {**COMMON_KEYS, "n": list, "d": int, "d0": int, "reps": int, "B": int, "level": float, "lambda": dict},
}
LAMBDA_KEYS = {"mode": str, "k": int, "value": float, "c": float, "tau": float}
DEFAULTS = {
    "family": "logistic", "seed": 0, "format": "csv", "standardize": False,
    "level": 0.9, "B": 500, "weights": "exp1", "reps": 300, "d": 6,
}
DEMO_DEFAULTS = {"family": "linear", "n": [200, 500, 1000], "d": 50, "d0": 4, "reps": 200, "B": 300,
                 "lambda": {"mode": "rate", "c": 0.35, "tau": 0.2}}


@dataclass
class RunConfig:
    command: str
    settings: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.settings.get(key, default)


# ---------------------------------------------------------------- config


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _check_type(key: str, value, typ):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is list and isinstance(value, int):
        return [value]
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise ConfigError(f"config key {key!r} must be {typ.__name__}, got {value!r}")
    return value


def load_config(path: str | Path, command: str) -> dict:
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return validate_settings(raw, command)


def validate_settings(raw: dict, command: str) -> dict:
    schema = KEYS[command]
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
        out[key] = _check_type(key, value, schema[key])
    if "lambda" in out:
        lam = {}
        for key, value in out["lambda"].items():
            if key not in LAMBDA_KEYS:
                raise ConfigError(f"unknown config key 'lambda.{key}'")
            lam[key] = _check_type(f"lambda.{key}", value, LAMBDA_KEYS[key])
        out["lambda"] = lam
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="glmboot", description="Perturbation bootstrap inference for GLMs and the GLM Lasso.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML file with settings (flags override it)")
        sp.add_argument("--family", choices=("linear", "logistic", "poisson", "gamma"))
        sp.add_argument("--shape", type=float, help="gamma shape parameter")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--format", choices=("csv", "json", "table"))
        sp.add_argument("--output", "-o", help="write results here instead of stdout")
        sp.add_argument("--threads", type=int, help="worker processes (overrides GLMBOOT_THREADS)")

    def data(sp):
        sp.add_argument("--input", "-i", help="CSV with a header row and a 'y' column")
        sp.add_argument("--standardize", action="store_true", default=None,
                        help="center and scale covariate columns")

    def boot(sp):
        sp.add_argument("--level", type=float)
        sp.add_argument("-B", "--B", dest="B", type=int, help="bootstrap replicates")
        sp.add_argument("--weights", help="'exp1' (default) or 'degenerate[:c]' (debugging)")

    def penalty(sp):
        sp.add_argument("--lambda", dest="lam", type=float, help="fixed penalty")
        sp.add_argument("--cv", type=int, metavar="K", help="choose the penalty by K-fold CV")
        sp.add_argument("--rate", nargs=2, type=float, metavar=("C", "TAU"),
                        help="penalty C * n^(1/2 + TAU)")

    def grid(sp):
        sp.add_argument("-n", "--n", dest="n", type=int, nargs="+")
        sp.add_argument("-d", "--d", dest="d", type=int)
        sp.add_argument("--d0", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--level", type=float)
        sp.add_argument("-B", "--B", dest="B", type=int)

    sp = sub.add_parser("fit", help="maximum-likelihood coefficient table")
    common(sp); data(sp)
    sp = sub.add_parser("bootstrap", help="estimates with perturbation-bootstrap percentile intervals")
    common(sp); data(sp); boot(sp)
    sp = sub.add_parser("lasso", help="Lasso fit, KKT check and PB-Lasso intervals on the active set")
    common(sp); data(sp); boot(sp); penalty(sp)
    sp.add_argument("--truth", help="CSV with a 'beta' column; enables the irrepresentable margin")
    sp = sub.add_parser("simulate", help="Monte-Carlo coverage tables")
    common(sp); grid(sp); penalty(sp)
    sp = sub.add_parser("demo-failure", help="naive Gaussian vs PB-Lasso coverage as n grows")
    common(sp); grid(sp); penalty(sp)
    return p


def _flag_settings(ns: argparse.Namespace) -> dict:
    out = {}
    for key in ("family", "shape", "seed", "format", "output", "threads", "input", "standardize",
                "level", "B", "weights", "truth", "n", "d", "d0", "reps"):
        value = getattr(ns, key, None)
        if value is not None:
            out[key] = value
    modes = [m for m in ("lam", "cv", "rate") if getattr(ns, m, None) is not None]
    if len(modes) > 1:
        raise ConfigError("give at most one of --lambda, --cv, --rate")
    if modes:
        m = modes[0]
        if m == "lam":
            out["lambda"] = {"mode": "fixed", "value": ns.lam}
        elif m == "cv":
            out["lambda"] = {"mode": "cv", "k": ns.cv}
        else:
            out["lambda"] = {"mode": "rate", "c": ns.rate[0], "tau": ns.rate[1]}
    return out


def resolve_config(argv=None) -> tuple[RunConfig, bool]:
    ns = build_parser().parse_args(argv)
    settings = dict(DEFAULTS)
    if ns.command == "demo-failure":
        settings.update(DEMO_DEFAULTS)
    if ns.config:
        settings.update(load_config(ns.config, ns.command))
    settings.update(_flag_settings(ns))
    settings = {k: v for k, v in settings.items() if k in KEYS[ns.command]}
    if "input" in KEYS[ns.command]:
        if "input" not in settings:
            raise ConfigError(f"{ns.command} needs --input")
        if not Path(settings["input"]).is_file():
            raise ConfigError(f"input file not found: {settings['input']}")
    return RunConfig(ns.command, settings), ns.verbose


def _lambda_mode(spec: dict | None) -> LambdaMode | None:
    if not spec:
        return None
    spec = dict(spec)
    kind = spec.pop("mode", None)
    if kind is None:
        raise ConfigError("lambda table needs a 'mode' (cv, fixed or rate)")
    return LambdaMode(kind=kind, **spec)


# ---------------------------------------------------------------- data


def load_csv(path: str | Path, standardize: bool = False) -> Dataset:
    """Read a header-row CSV with a ``y`` column; other columns are covariates in file order."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise DataError(f"{path}: no 'y' column in header {header}")
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: header but no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i - 1, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at row {i}, column {header[j]!r}") from None
    yi = header.index("y")
    names = [h for j, h in enumerate(header) if j != yi]
    X = np.delete(values, yi, axis=1)
    y = values[:, yi]
    if standardize:
        sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
        for j in np.flatnonzero(~(sd > 0)):
            raise DataError(f"{path}: zero-variance column {names[j]!r} cannot be standardized")
        X = (X - X.mean(axis=0)) / sd
    data = Dataset(X, y, tuple(names))
    log.info("loaded %s: n=%d, d=%d", path, data.n, data.d)
    return data


def _names(data: Dataset) -> tuple:
    return data.names


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _records_csv(records: list[dict]) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _table(records: list[dict]) -> str:
    if not records:
        return ""
    cols = list(records[0])
    cells = [[c for c in cols]] + [
        [f"{v:.4g}" if isinstance(v, (float, np.floating)) else str(v) for v in (r[c] for c in cols)]
        for r in records
    ]
    widths = [max(len(row[j]) for row in cells) for j in range(len(cols))]
    return "\n".join("  ".join(s.rjust(w) for s, w in zip(row, widths)) for row in cells) + "\n"


def _emit(cfg: RunConfig, records: list[dict], meta: dict | None = None, table: str | None = None,
          csv_text: str | None = None) -> str:
    fmt = cfg.get("format", "csv")
    if fmt == "json":
        return json.dumps(_jsonable({**(meta or {}), "rows": records}), indent=2, sort_keys=False) + "\n"
    if fmt == "table":
        return table if table is not None else _table(records)
    return csv_text if csv_text is not None else _records_csv(records)


# ---------------------------------------------------------------- commands


def _family(cfg: RunConfig):
    return make_family(cfg.get("family"), cfg.get("shape"))


def _workers(cfg: RunConfig) -> int:
    return streams.resolve_workers(cfg.get("threads"))


def cmd_fit(cfg: RunConfig) -> str:
    family = _family(cfg)
    data = load_csv(cfg.get("input"), cfg.get("standardize"))
    fit = fit_glm(family, data)
    if not fit.converged:
        raise NumericalError(
            "maximum-likelihood fit did not converge" + (" (separated data)" if fit.separated else "")
        )
    records = [{"coefficient": name, "estimate": float(b)} for name, b in zip(_names(data), fit.beta_hat)]
    meta = {"family": family.describe(), "n": data.n, "d": data.d, "iterations": fit.iterations}
    return _emit(cfg, records, meta)


def _ci_records(dist, estimate, coords, names, level):
    records = []
    for k, j in enumerate(coords):
        row = {"coefficient": names[j], "estimate": float(estimate[k])}
        for side in SIDES:
            ci = percentile_ci(dist, estimate, k, level, side)
            row[f"{side}_lower"] = float(ci.lower)
            row[f"{side}_upper"] = float(ci.upper)
        records.append(row)
    return records


def cmd_bootstrap(cfg: RunConfig) -> str:
    family = _family(cfg)
    data = load_csv(cfg.get("input"), cfg.get("standardize"))
    fit = fit_glm(family, data)
    if not fit.converged:
        raise NumericalError("maximum-likelihood fit did not converge")
    dist = pb_distribution(family, data, fit, cfg.get("B"), WeightDist.parse(cfg.get("weights")),
                           seed=cfg.get("seed"), workers=_workers(cfg))
    if dist.B_eff < 1:
        raise NumericalError("every bootstrap replicate failed")
    records = _ci_records(dist, fit.beta_hat, range(data.d), _names(data), cfg.get("level"))
    meta = {"family": family.describe(), "n": data.n, "d": data.d, "level": cfg.get("level"),
            "B": dist.B, "B_failed": dist.failures, "seed": cfg.get("seed")}
    return _emit(cfg, records, meta)


def _read_truth(path: str, d: int) -> np.ndarray:
    try:
        rows = list(csv.DictReader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    if not rows or "beta" not in rows[0]:
        raise DataError(f"{path}: truth file needs a 'beta' column")
    try:
        beta = np.array([float(r["beta"]) for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric truth value") from exc
    if beta.size != d:
        raise DataError(f"{path}: {beta.size} truth values for {d} covariates")
    return beta


def cmd_lasso(cfg: RunConfig) -> str:
    family = _family(cfg)
    data = load_csv(cfg.get("input"), cfg.get("standardize"))
    mode = _lambda_mode(cfg.get("lambda")) or LambdaMode("cv", k=10)
    seed = cfg.get("seed")
    if mode.kind == "cv":
        lam = select_lambda_cv(family, data, mode.k, seed=seed).lam
    elif mode.kind == "fixed":
        lam = mode.value
    else:
        lam = mode.rate_lambda(data.n)
    fit = fit_lasso(family, data, lam)
    if not fit.converged:
        raise NumericalError("Lasso fit did not converge")
    kkt = check_kkt(family, data, fit)
    names = _names(data)
    active = [int(j) for j in fit.active_set]
    meta = {
        "family": family.describe(), "n": data.n, "d": data.d, "lambda": lam,
        "active_set": [names[j] for j in active], "signs": [int(fit.signs[j]) for j in active],
        "kkt_max_violation": kkt.max_violation, "kkt_satisfied": kkt.satisfied, "seed": seed,
    }
    if cfg.get("truth"):
        beta = _read_truth(cfg.get("truth"), data.d)
        support = np.flatnonzero(beta)
        meta["irrepresentable_margin"] = irrepresentable_margin(family, data.X, beta, support)
    records = []
    if active:
        dist, _ = pb_lasso_distribution(family, data, fit, cfg.get("B"), WeightDist.parse(cfg.get("weights")),
                                        seed=seed, coords=active)
        if dist.B_eff < 1:
            raise NumericalError("every PB-Lasso replicate failed")
        records = _ci_records(dist, fit.beta_bar[active], active, names, cfg.get("level"))
        for r, j in zip(records, active):
            r["sign"] = int(fit.signs[j])
        meta["B_failed"] = dist.failures
    else:
        log.warning("the Lasso selected no covariates; no intervals to report")
    if cfg.get("format", "csv") == "csv":
        for r in records:
            r["lambda"] = lam
            r["kkt_max_violation"] = kkt.max_violation
            if "irrepresentable_margin" in meta:
                r["irrepresentable_margin"] = meta["irrepresentable_margin"]
    table = None
    if cfg.get("format") == "table":
        head = (f"lambda={lam:.6g}  active={meta['active_set']}  "
                f"kkt_max_violation={kkt.max_violation:.3g}")
        if "irrepresentable_margin" in meta:
            head += f"  irrepresentable_margin={meta['irrepresentable_margin']:.4f}"
        table = head + "\n" + _table(records)
    return _emit(cfg, records, meta, table=table)


def _sim_config(cfg: RunConfig, n: int) -> SimConfig:
    return SimConfig(
        family=cfg.get("family"), shape=cfg.get("shape"), n=int(n), d=cfg.get("d"), d0=cfg.get("d0"),
        reps=cfg.get("reps"), B=cfg.get("B"), level=cfg.get("level"),
        lambda_mode=_lambda_mode(cfg.get("lambda")), master_seed=cfg.get("seed"),
        parallelism=_workers(cfg),
    )


def cmd_simulate(cfg: RunConfig) -> str:
    ns = cfg.get("n") or [100]
    reports, vscs = [], []
    for n in ns:
        sc = _sim_config(cfg, n)
        log.info("simulating %s n=%d d=%d reps=%d B=%d", sc.family, sc.n, sc.d, sc.reps, sc.B)
        if sc.lambda_mode is None:
            reports.append(run_coverage_sim(sc))
        else:
            rep, vsc = run_lasso_sim(sc)
            reports.append(rep)
            vscs.append(vsc)
    fmt = cfg.get("format", "csv")
    if fmt == "csv":
        return reports_to_csv(reports)
    if fmt == "table":
        out = []
        for i, rep in enumerate(reports):
            out.append(format_report(rep, cfg.get("level")))
            if vscs:
                v = vscs[i]
                out.append(f"support recovery {v.exact_support_rate:.3f}   sign recovery {v.sign_match_rate:.3f}"
                           f"   mean active size {v.mean_active_size:.2f}")
        return "\n\n".join(out) + "\n"
    payload = []
    for i, rep in enumerate(reports):
        item = asdict(rep)
        if vscs:
            v = asdict(vscs[i])
            v.pop("support_flags")
            v.pop("sign_flags")
            item["selection"] = v
        payload.append(item)
    return json.dumps(_jsonable({"level": cfg.get("level"), "reports": payload}), indent=2) + "\n"


def cmd_demo_failure(cfg: RunConfig) -> str:
    sc = _sim_config(cfg, cfg.get("n")[0])
    report = gauss_failure_demo(sc, ns=cfg.get("n"))
    records = [asdict(r) for r in report.rows]
    meta = {k: v for k, v in asdict(report).items() if k != "rows"}
    table = None
    if cfg.get("format") == "table":
        table = (f"{report.family}  d={report.d}  d0={report.d0}  level={report.level:g}  "
                 f"lambda={report.c:g}*n^{0.5 + report.tau:g}\n" + _table(records))
    return _emit(cfg, records, meta, table=table)


HANDLERS = {
    "fit": cmd_fit, "bootstrap": cmd_bootstrap, "lasso": cmd_lasso,
    "simulate": cmd_simulate, "demo-failure": cmd_demo_failure,
}


def run(cfg: RunConfig) -> str:
    return HANDLERS[cfg.command](cfg)


def _error_exit(kind: str, code: int, exc: BaseException) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        cfg, verbose = resolve_config(argv)
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        out = run(cfg)
        if cfg.get("output"):
            Path(cfg.get("output")).write_text(out, encoding="utf-8")
        else:
            sys.stdout.write(out)
        return 0
    except DataError as exc:
        return _error_exit("data", EXIT_DATA, exc)
    except (ConfigError, ValueError, TypeError) as exc:
        return _error_exit("config", EXIT_CONFIG, exc)
    except (NumericalError, GlmBootError, ArithmeticError) as exc:
        return _error_exit("numerical", EXIT_NUMERICAL, exc)


if __name__ == "__main__":
    sys.exit(main())
