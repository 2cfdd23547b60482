"""Profile construction against closed forms and independent oracles.

Majda-type fixtures have closed-form end states, reaction curve, and
viscous shock; the gas fixtures are checked against a scalar Hugoniot
reduction solved by bisection inside the test.
"""

import json

import numpy as np
import pytest
from scipy.integrate import solve_bvp
from scipy.optimize import brentq

from detwave import (
    GasState,
    LaxViolation,
    NoBurnedState,
    UsageError,
    make_model,
)
from detwave.profiles import (
    EndStates,
    ProfileOptions,
    compute_ns_shock_profile,
    compute_viscous_detonation_profile,
    compute_znd_profile,
    sample_profile,
    solve_burned_state,
    solve_end_states,
    solve_neumann_shock,
)

from conftest import U_PLUS_IG, U_PLUS_M


# -- Rankine-Hugoniot, Majda closed forms --


def test_majda_post_shock_closed_form(majda):
    # u^2/2 - s u = 0 has the nontrivial root u = 2s
    star = solve_neumann_shock(majda, U_PLUS_M, 1.0)
    assert star.components[0] == pytest.approx(2.0, abs=1e-10)
    assert star.z == 1.0
    star2 = solve_neumann_shock(majda, U_PLUS_M, 2.0)
    assert star2.components[0] == pytest.approx(4.0, abs=1e-10)


def test_majda_burned_state_closed_form(majda):
    star = solve_neumann_shock(majda, U_PLUS_M, 1.0)
    burned = solve_burned_state(majda, star, 1.0)
    assert burned.components[0] == pytest.approx(1.0 + np.sqrt(0.4), abs=1e-10)
    assert burned.z == 0.0


def test_majda_zero_heat_release_collapses_to_shock(majda):
    star = solve_neumann_shock(majda, U_PLUS_M, 1.0)
    burned = solve_burned_state(majda, star, 1.0, q=0.0)
    assert burned.components[0] == pytest.approx(2.0, abs=1e-12)


def test_majda_excessive_heat_release(majda):
    # u^2/2 - u + q = 0 loses real roots for q > s/2
    star = solve_neumann_shock(majda, U_PLUS_M, 1.0)
    with pytest.raises(NoBurnedState):
        solve_burned_state(majda, star, 1.0, q=0.6)


def test_subsonic_speed_rejected(majda):
    with pytest.raises(LaxViolation):
        solve_neumann_shock(majda, U_PLUS_M, 0.0)


def test_end_states_bundle(majda, majda_ends):
    us = np.array(majda_ends.u_star.components)
    up = np.array(majda_ends.u_plus.components)
    rh = majda_ends.s * (us - up) - (majda.f(us) - majda.f(up))
    assert np.linalg.norm(rh) <= 1e-10
    assert majda_ends.q == 0.3
    assert majda_ends.z_minus == 0.0 and majda_ends.z_plus == 1.0


# -- Rankine-Hugoniot, ideal gas vs scalar Hugoniot oracle --


def _hugoniot_oracle_tau(s, q_jump):
    """Bisection on the scalar Hugoniot reduction.

    Eliminating v = s(1 - tau) and p = 1 + s^2 (1 - tau) from the jump
    relations for (tau+, v+, p+) = (1, 0, 1) leaves one equation in tau;
    q_jump is the chemical energy released across the jump.
    """
    Gamma = 0.4

    def g(tau):
        v = s * (1.0 - tau)
        p = 1.0 + s**2 * (1.0 - tau)
        e = p * tau / Gamma
        return p * v - s * (e + 0.5 * v**2) + s * 2.5 + s * q_jump

    return brentq(g, 0.15, 0.9, xtol=1e-14)


def test_ig_post_shock_matches_hugoniot_oracle(ideal_gas):
    tau = _hugoniot_oracle_tau(3.0, 0.0)
    assert tau == pytest.approx(8.0 / 27.0, abs=1e-12)  # quadratic root 27 tau^2 - 35 tau + 8
    v = 3.0 * (1.0 - tau)
    p = 1.0 + 9.0 * (1.0 - tau)
    e = p * tau / 0.4
    star = solve_neumann_shock(ideal_gas, U_PLUS_IG, 3.0)
    expect = (tau, v, e + 0.5 * v**2 + 0.5)  # +q: unreacted at z = 1
    assert np.allclose(star.components, expect, rtol=0, atol=1e-9)
    us = ideal_gas.u_of_state(star)
    up = ideal_gas.u_of_state(U_PLUS_IG)
    rh = 3.0 * (us - up) - (ideal_gas.f(us) - ideal_gas.f(up))
    assert np.linalg.norm(rh) <= 1e-10


def test_ig_burned_state_strong_branch(ideal_gas, ig_ends):
    # quadratic 81 tau^2 - 105 tau + 25.5 = 0, strong branch = smaller root
    tau = (105.0 - 3.0 * np.sqrt(307.0)) / 162.0
    v = 3.0 * (1.0 - tau)
    p = 10.0 - 9.0 * tau
    e = p * tau / 0.4
    burned = ig_ends.u_minus
    assert np.allclose(burned.components, (tau, v, e + 0.5 * v**2), rtol=0, atol=1e-9)
    weak_tau = (105.0 + 3.0 * np.sqrt(307.0)) / 162.0
    assert abs(burned.components[0] - weak_tau) > 0.5
    lam = np.linalg.eigvals(ideal_gas.df(ideal_gas.u_of_state(burned))).real
    assert lam.max() > 3.0 + 1e-8


def test_ig_excessive_heat_release(ideal_gas):
    # discriminant 361 - 108 q turns negative
    star = solve_neumann_shock(ideal_gas, U_PLUS_IG, 3.0)
    with pytest.raises(NoBurnedState):
        solve_burned_state(ideal_gas, star, 3.0, q=4.0)


# -- ZND profile --


def test_znd_closed_form_reaction_curve(majda_znd):
    # conserved relation gives u(z) = 1 + sqrt(0.4 + 0.6 z)
    expect = 1.0 + np.sqrt(0.4 + 0.6 * majda_znd.z)
    assert np.abs(majda_znd.u[:, 0] - expect).max() <= 1e-8


def test_znd_value_at_half_burned(majda_znd):
    x_half = brentq(lambda x: majda_znd.sample(x)[0, -1] - 0.5, majda_znd.grid[0], 0.0)
    u_half = majda_znd.sample(x_half)[0, 0]
    assert u_half == pytest.approx(1.0 + np.sqrt(0.7), abs=1e-8)
    assert u_half == pytest.approx(1.8366600, abs=1e-6)


def test_znd_anchors_and_monotonicity(majda_znd):
    assert majda_znd.z[-1] == 1.0
    assert majda_znd.u[-1, 0] == pytest.approx(2.0, abs=1e-10)
    assert majda_znd.z[0] <= 1e-8
    assert majda_znd.u[0, 0] == pytest.approx(1.0 + np.sqrt(0.4), abs=1e-9)
    assert np.all(np.diff(majda_znd.z) > 0)
    assert np.all(np.diff(majda_znd.u[:, 0]) > 0)


def test_znd_conserved_drift(majda, majda_znd):
    s = majda_znd.end_states.s
    qv = majda_znd.end_states.q_vec(majda)
    drift = max(
        np.linalg.norm(majda.f(u) - s * (u + qv * z) - majda_znd.conserved_value)
        for u, z in zip(majda_znd.u, majda_znd.z)
    )
    scale = 1.0 + np.linalg.norm(majda_znd.conserved_value)
    assert drift <= 1e-8 * scale


def test_znd_grid_doubling(majda, majda_ends, majda_znd):
    fine = compute_znd_profile(
        majda, majda_ends, ProfileOptions(slow_spacing=0.05)
    )
    xs = np.linspace(majda_znd.grid[0], 0.0, 700)
    diff = np.abs(majda_znd.sample(xs) - fine.sample(xs)).max()
    assert diff <= 1e-7


def test_znd_sampling_contract(majda, majda_znd):
    vals = majda_znd.sample(majda_znd.grid)
    assert np.array_equal(vals[:, 0], majda_znd.u[:, 0])
    assert np.array_equal(vals[:, 1], majda_znd.z)
    ahead = majda_znd.sample(3.7)[0]
    assert ahead[0] == 0.0 and ahead[1] == 1.0
    # between nodes the conserved relation still holds after polishing
    xs = majda_znd.grid[:-1] + 0.5 * np.diff(majda_znd.grid)
    s, qv = majda_znd.end_states.s, majda_znd.end_states.q_vec(majda)
    for row in majda_znd.sample(xs[::25]):
        res = majda.f(row[:1]) - s * (row[:1] + qv * row[1]) - majda_znd.conserved_value
        assert np.linalg.norm(res) <= 1e-9
    state, ok = sample_profile(majda_znd, majda_znd.grid[0] - 5.0, with_flag=True)
    assert not ok
    assert state.components[0] == pytest.approx(1.0 + np.sqrt(0.4), abs=1e-9)
    inside, ok = sample_profile(majda_znd, -1.0, with_flag=True)
    assert ok and isinstance(inside, GasState)


def test_znd_serialization_round_trip(majda, majda_znd):
    blob = json.dumps(majda_znd.to_payload(), sort_keys=True)
    clone = type(majda_znd).from_payload(json.loads(blob), majda)
    xs = np.linspace(majda_znd.grid[0], 1.0, 137)
    assert np.array_equal(majda_znd.sample(xs), clone.sample(xs))
    other = make_model("majda", q=0.25)
    with pytest.raises(UsageError):
        type(majda_znd).from_payload(json.loads(blob), other)


# -- viscous Neumann shock --


def test_shock_tanh_closed_form(majda_shock):
    # Burgers with b = 1: u = 1 - tanh(x/2) joins 2 to 0 at s = 1
    xs = majda_shock.fast_grid
    expect = 1.0 - np.tanh(xs / 2.0)
    assert np.abs(majda_shock.u[:, 0] - expect).max() <= 1e-8
    assert majda_shock.sample(0.0)[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_shock_dense_sampling_matches_closed_form(majda_shock):
    xs = np.linspace(-40.0, 40.0, 1777)
    expect = 1.0 - np.tanh(xs / 2.0)
    assert np.abs(majda_shock.sample(xs)[:, 0] - expect).max() <= 1e-8


def test_shock_residual_and_tails(majda_shock):
    assert majda_shock.residual() <= 1e-8
    assert majda_shock.sample(-60.0)[0, 0] == 2.0
    assert majda_shock.sample(60.0)[0, 0] == 0.0
    state, ok = sample_profile(majda_shock, 100.0, with_flag=True)
    assert not ok and state.components[0] == 0.0


def test_shock_serialization_round_trip(majda, majda_shock):
    blob = json.dumps(majda_shock.to_payload(), sort_keys=True)
    clone = type(majda_shock).from_payload(json.loads(blob), majda)
    xs = np.linspace(-41.0, 41.0, 311)
    assert np.array_equal(majda_shock.sample(xs), clone.sample(xs))


def test_ig_shock_self_checks(ideal_gas, ig_ends):
    prof = compute_ns_shock_profile(
        ideal_gas, ig_ends.u_star, ig_ends.u_plus, ig_ends.s
    )
    scale = 1.0 + np.linalg.norm(ideal_gas.u_of_state(ig_ends.u_star))
    assert prof.residual() <= 1e-8 * scale
    us = ideal_gas.u_of_state(ig_ends.u_star)
    up = ideal_gas.u_of_state(ig_ends.u_plus)
    assert np.linalg.norm(prof.sample(-40.0)[0] - us) <= 1e-8
    assert np.linalg.norm(prof.sample(40.0)[0] - up) <= 1e-8
    # centering: first parabolic component (v) crosses its midpoint at 0
    v_mid = 0.5 * (us[1] + up[1])
    assert prof.sample(0.0)[0, 1] == pytest.approx(v_mid, abs=1e-9)


# -- viscous detonation --


def test_rns_guards(majda, majda_znd, majda_shock):
    with pytest.raises(UsageError):
        compute_viscous_detonation_profile(majda, 0.2, majda_znd, majda_shock)
    with pytest.raises(UsageError):
        compute_viscous_detonation_profile(majda, -0.01, majda_znd, majda_shock)
    alien = compute_ns_shock_profile(
        majda, solve_neumann_shock(majda, U_PLUS_M, 2.0), U_PLUS_M, 2.0
    )
    with pytest.raises(UsageError):
        compute_viscous_detonation_profile(majda, 0.05, majda_znd, alien)


def test_rns_diagnostics(majda_rns):
    d = majda_rns.diagnostics
    assert d["rms_residual"] <= 1e-9
    assert d["conservation_drift"] <= 1e-8
    assert d["p3_ok"]
    assert d["p3_slow_error"] <= d["p3_bound"]
    assert d["p3_fast_error"] <= d["p3_bound"]


def test_rns_centering_and_range(majda_rns):
    assert majda_rns.sample(0.0)[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert majda_rns.z.min() >= -1e-8 and majda_rns.z.max() <= 1.0 + 1e-8
    # burned and unburned tails
    left = majda_rns.sample(majda_rns.grid[0])[0]
    right = majda_rns.sample(majda_rns.grid[-1])[0]
    assert abs(left[0] - (1.0 + np.sqrt(0.4))) <= 1e-6
    assert abs(left[1]) <= 1e-6
    assert abs(right[0]) <= 1e-6
    assert abs(right[1] - 1.0) <= 1e-6


def test_rns_against_scaffolds(majda_rns, majda_znd, majda_shock):
    eps = majda_rns.eps
    xs = np.linspace(majda_rns.grid[0], -0.5, 400)
    slow_err = np.abs(majda_rns.sample(xs) - majda_znd.sample(xs)).max()
    assert slow_err <= 10.0 * eps
    xf = np.linspace(0.0, majda_rns.grid[-1], 300)
    fast = np.column_stack([majda_shock.sample(xf / eps), np.ones(xf.size)])
    assert np.abs(majda_rns.sample(xf) - fast).max() <= 10.0 * eps


def test_rns_epsilon_halving(majda, majda_znd, majda_shock):
    errs = {}
    for eps in (0.1, 0.05):
        prof = compute_viscous_detonation_profile(majda, eps, majda_znd, majda_shock)
        xs = np.linspace(majda_znd.grid[0], -0.5, 600)
        errs[eps] = np.abs(prof.sample(xs) - majda_znd.sample(xs)).max()
    ratio = errs[0.05] / errs[0.1]
    assert 0.3 <= ratio <= 0.7


def test_rns_zero_heat_release_decouples(majda, majda_shock):
    """q = 0: gas decouples into the pure viscous shock; z solves a
    scalar linear two-point problem driven by it."""
    eps = 0.05
    ends0 = solve_end_states(majda, U_PLUS_M, 1.0, q=0.0)
    znd0 = compute_znd_profile(majda, ends0)
    prof = compute_viscous_detonation_profile(majda, eps, znd0, majda_shock)
    xs = np.linspace(prof.grid[0], prof.grid[-1], 900)
    u_exact = 1.0 - np.tanh(xs / (2.0 * eps))
    assert np.abs(prof.sample(xs)[:, 0] - u_exact).max() <= 1e-6

    # independent scalar solve for (Y_z, z) on the same window
    k, s, C = majda.k_rate, ends0.s, majda.params.C
    x_l, x_r = prof.grid[0], prof.grid[-1]
    z_l = prof.sample(x_l)[0, 1]

    def phi_of(x):
        return np.array(
            [majda.phi(np.array([1.0 - np.tanh(xi / (2.0 * eps))])) for xi in np.atleast_1d(x)]
        )

    def rhs(x, y):
        return np.vstack([-k * phi_of(x) * y[1], -(s * y[1] + y[0]) / (eps * C)])

    def bc(ya, yb):
        return np.array([ya[1] - z_l, yb[0] + s])

    mesh = np.linspace(x_l, x_r, 2001)
    z_guess = np.clip(np.exp((mesh - 0.0) * 0.5), 0.0, 1.0)
    sol = solve_bvp(
        rhs, bc, mesh, np.vstack([-s * z_guess, z_guess]), tol=1e-10, max_nodes=50_000
    )
    assert sol.success
    z_oracle = sol.sol(xs)[1]
    assert np.abs(prof.sample(xs)[:, 1] - z_oracle).max() <= 1e-6


def test_rns_serialization_round_trip(majda, majda_rns, majda_znd, majda_shock):
    blob = json.dumps(majda_rns.to_payload(), sort_keys=True)
    clone = type(majda_rns).from_payload(
        json.loads(blob), majda, znd=majda_znd, shock=majda_shock
    )
    xs = np.linspace(majda_rns.grid[0], majda_rns.grid[-1], 257)
    assert np.array_equal(majda_rns.sample(xs), clone.sample(xs))
    W, dW = majda_rns.sample(xs, derivative=True)
    Wc, dWc = clone.sample(xs, derivative=True)
    assert np.array_equal(dW, dWc)


def test_rns_derivative_consistency(majda, majda_rns):
    # sampled derivative matches a centered difference of sampled values
    xs = np.array([-3.0, -1.0, -0.2, 0.0, 0.3, 1.0])
    W, dW = majda_rns.sample(xs, derivative=True)
    h = 1e-6
    fd = (majda_rns.sample(xs + h) - majda_rns.sample(xs - h)) / (2 * h)
    assert np.abs(dW - fd).max() <= 5e-4 * (1.0 + np.abs(dW).max())


@pytest.mark.slow
def test_ig_rns_smoke(ideal_gas, ig_ends):
    znd = compute_znd_profile(ideal_gas, ig_ends)
    shock = compute_ns_shock_profile(
        ideal_gas, ig_ends.u_star, ig_ends.u_plus, ig_ends.s
    )
    prof = compute_viscous_detonation_profile(ideal_gas, 0.1, znd, shock)
    d = prof.diagnostics
    assert d["rms_residual"] <= 1e-9
    assert d["p3_ok"]
    xs = np.linspace(prof.grid[0], prof.grid[-1], 500)
    W = prof.sample(xs)
    assert W[:, 0].min() > 0.0  # tau stays positive
    assert W[:, -1].min() >= -1e-8 and W[:, -1].max() <= 1.0 + 1e-8
