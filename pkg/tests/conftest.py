import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from glmboot import Dataset, make_family

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FAMILY_SPECS = [("linear", None), ("logistic", None), ("poisson", None), ("gamma", 1.0), ("gamma", 2.5)]


def family_id(spec):
    name, shape = spec
    return name if shape is None else f"{name}{shape:g}"


@pytest.fixture(params=FAMILY_SPECS, ids=family_id)
def family(request):
    return make_family(*request.param)


def simulate_data(family, n, d, rng, scale=0.4):
    """Small well-conditioned GLM dataset with a moderate linear predictor."""
    X = rng.standard_normal((n, d))
    beta = rng.uniform(-scale, scale, d)
    u = X @ beta
    mu = family.ginv(u)
    if family.name == "logistic":
        y = (rng.random(n) < mu).astype(float)
    elif family.name == "poisson":
        y = rng.poisson(mu).astype(float)
    elif family.name == "gamma":
        y = rng.gamma(family.shape, mu / family.shape)
    else:
        y = u + rng.standard_normal(n)
    return Dataset(X, y), beta


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: criterion -> list of (label, passed, detail)
ACCEPTANCE: dict = {}


@pytest.fixture
def accept(capsys):
    def record(criterion: int, label: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))
        with capsys.disabled():
            print(f"\n[criterion {label}] {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{label}: {d}" for label, _, d in parts)
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
