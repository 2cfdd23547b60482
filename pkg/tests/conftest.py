"""Shared fixtures. The wave constructions are expensive, so they are
built once per session and reused by every test module."""

import pytest

from detwave import GasState, make_model
from detwave.profiles import (
    compute_ns_shock_profile,
    compute_viscous_detonation_profile,
    compute_znd_profile,
    solve_end_states,
)

U_PLUS_M = GasState((0.0,), 1.0)
U_PLUS_IG = GasState((1.0, 0.0, 3.0), 1.0)  # tau=1, v=0, p=1, e=2.5, +q chemical


@pytest.fixture(scope="session")
def majda():
    return make_model("majda")


@pytest.fixture(scope="session")
def ideal_gas():
    return make_model("ideal_gas")


@pytest.fixture(scope="session")
def majda_ends(majda):
    return solve_end_states(majda, U_PLUS_M, 1.0)


@pytest.fixture(scope="session")
def majda_znd(majda, majda_ends):
    return compute_znd_profile(majda, majda_ends)


@pytest.fixture(scope="session")
def majda_shock(majda, majda_ends):
    return compute_ns_shock_profile(
        majda, majda_ends.u_star, majda_ends.u_plus, majda_ends.s
    )


@pytest.fixture(scope="session")
def majda_rns(majda, majda_znd, majda_shock):
    return compute_viscous_detonation_profile(majda, 0.05, majda_znd, majda_shock)


@pytest.fixture(scope="session")
def ig_ends(ideal_gas):
    return solve_end_states(ideal_gas, U_PLUS_IG, 3.0)


@pytest.fixture(scope="session")
def ig_shock(ideal_gas, ig_ends):
    return compute_ns_shock_profile(
        ideal_gas, ig_ends.u_star, ig_ends.u_plus, ig_ends.s
    )


@pytest.fixture(scope="session")
def ig_znd(ideal_gas, ig_ends):
    return compute_znd_profile(ideal_gas, ig_ends)
