import pytest

from frailmix.data import Dataset, make_cluster
from frailmix.params import (
    FrailtySpec,
    MixtureParams,
    ModelParams,
    Type1Params,
    Type2Params,
    csl_2019_params,
)
from frailmix.simulate import SimConfig, simulate_dataset


@pytest.fixture(scope="session")
def table1():
    return csl_2019_params()


@pytest.fixture(scope="session")
def sim_small(table1):
    """20 games at the reference estimates."""
    return simulate_dataset(SimConfig(table1, 20, seed=5))


@pytest.fixture(scope="session")
def tiny_dataset():
    rows_a = [(3.0, 1, (1, 1, 0, 0, 2.0)), (0.4, 1, (1, 1, 0, 0, 2.0)), (12.0, 0, (1, 1, 0, 0, 2.0))]
    rows_b = [(20.0, 1, (0, 0, 1, 0, 3.0)), (25.0, 0, (0, 0, 1, 0, 3.0))]
    return Dataset((make_cluster("T1", "G1", rows_a), make_cluster("T2", "G1", rows_b)), 5)


def random_params(rng, family="gamma", p=2):
    frailty = {
        "gamma": FrailtySpec.gamma(rng.uniform(0.1, 1.0)),
        "lognormal": FrailtySpec.lognormal(rng.uniform(0.2, 1.0)),
        "degenerate": FrailtySpec.degenerate(),
    }[family]
    return ModelParams(
        frailty,
        Type1Params(rng.uniform(0.01, 0.1), rng.uniform(0.7, 1.3), rng.normal(0, 0.3, p)),
        Type2Params(rng.uniform(0.8, 2.0), rng.uniform(1.5, 4.0)),
        MixtureParams(rng.normal(1.0, 0.5), rng.normal(0, 0.3, p)),
    )


def random_cluster(rng, idx, p=2, max_len=6):
    n = int(rng.integers(1, max_len + 1))
    rows = []
    for _ in range(n):
        delta = int(rng.random() < 0.6)
        y = float(rng.exponential(5.0)) + 0.01
        rows.append((y, delta, tuple(rng.normal(0, 1, p))))
    return make_cluster(f"T{idx}", f"G{idx}", rows)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
