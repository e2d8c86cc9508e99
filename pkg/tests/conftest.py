import pytest

from laneshoot import builtin_profile, make_exponents, summarize

N = 3


@pytest.fixture(scope="session")
def exps55():
    return make_exponents(5.0, 5.0, N)


@pytest.fixture(scope="session")
def geom_euclid(exps55):
    return summarize(builtin_profile("euclidean", N), exps55)


@pytest.fixture(scope="session")
def geom_hyp(exps55):
    return summarize(builtin_profile("hyperbolic", N), exps55)


@pytest.fixture(scope="session")
def geom_exp3(exps55):
    return summarize(builtin_profile("exp_power", N, alpha=3.0), exps55)
