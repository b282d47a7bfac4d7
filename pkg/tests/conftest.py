import numpy as np
import pytest
from hypothesis import settings

from msvcj.config import ModelConfig, bermudan_config, example_config
from msvcj.jumps import JumpSpec, PeaSpec
from msvcj.msvol import ChainSpec

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

REF_P = [[0.70, 0.15, 0.10, 0.05], [0.03, 0.90, 0.06, 0.01],
         [0.05, 0.05, 0.85, 0.05], [0.03, 0.07, 0.10, 0.80]]
REF_VARS = [0.02, 0.04, 0.06, 0.08]

_ACCEPTANCE: dict = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (bool(passed), detail)


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def ref_chain():
    return ChainSpec.from_variances(REF_VARS, REF_P, 0.25 / 30, initial_var=0.04)


@pytest.fixture(scope="session")
def ref_jump():
    return JumpSpec(3.0, -0.025, 0.005, n_max=10)


@pytest.fixture(scope="session")
def ref_pea():
    return PeaSpec(2.0, 250.0, 0.02)


@pytest.fixture(scope="session")
def ref_cfg():
    return ModelConfig.from_dict(example_config())


@pytest.fixture(scope="session")
def berm_sv_cfg():
    return ModelConfig.from_dict(bermudan_config(jumps=False))


@pytest.fixture(scope="session")
def berm_svcj_cfg():
    return ModelConfig.from_dict(bermudan_config(jumps=True))


def random_chain(rng, m, tau=0.01, lattice=False):
    """Random chain with strictly increasing variances and a random stochastic matrix."""
    if lattice:
        var = 0.01 * np.sort(rng.choice(np.arange(1, 10), size=m, replace=False))
    else:
        var = np.sort(rng.uniform(0.005, 0.1, size=m))
        while m > 1 and np.min(np.diff(var)) < 1e-4:
            var = np.sort(rng.uniform(0.005, 0.1, size=m))
    P = rng.random((m, m)) ** 2
    P /= P.sum(axis=1, keepdims=True)
    P[:, -1] = 1.0 - P[:, :-1].sum(axis=1)
    return ChainSpec.from_variances(var, P, tau, var[rng.integers(m)])
