import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from singlering.config import settings
from singlering.services import freeconv
from singlering.services.errors import BranchError, ConvergenceError, MeasureDomainError
from singlering.services.measures import DiscreteMeasure, symmetrize
from singlering.utils.export import read_csv

DELTA_ZERO = symmetrize(DiscreteMeasure.dirac(0.0))
LAMBDA_ONE = symmetrize(DiscreteMeasure.dirac(1.0))
UNIFORM_SYM_40 = symmetrize(DiscreteMeasure.from_arrays(0.5 + 1.5 * (np.arange(1, 41) - 0.5) / 40))


def arcsine_G(z):
    """Cauchy transform of λ_1 ⊞ λ_1 (arcsine law on [-2, 2]), branch with G ~ 1/z."""
    return 1.0 / (np.sqrt(z - 2) * np.sqrt(z + 2))


@given(
    rho=st.floats(0.0, 3.0),
    x=st.floats(-4.0, 4.0),
    y=st.floats(1e-3, 10.0),
)
@hsettings(max_examples=50, deadline=None)
def test_delta_zero_matches_closed_form(rho, x, y):
    z = complex(x, y)
    state = freeconv.solve_sd(DELTA_ZERO, rho, z)
    assert abs(state.G - z / (z * z - rho * rho)) < 1e-8


@pytest.mark.parametrize("x", np.linspace(-3.0, 3.0, 10))
@pytest.mark.parametrize("y", [0.05, 1.0])
def test_arcsine_closed_form(x, y):
    z = complex(x, y)
    state = freeconv.solve_sd(LAMBDA_ONE, 1.0, z)
    assert abs(state.G - arcsine_G(z)) < 1e-6


def test_arcsine_just_above_the_axis():
    z = 3 + 1e-6j
    state = freeconv.solve_sd(LAMBDA_ONE, 1.0, z)
    assert abs(state.G - arcsine_G(z)) < 1e-6
    assert state.G.imag < 0


def test_delta_zero_density_has_unit_mass():
    # ν = λ_1 has atoms at ±1; refine the grid there so the Cauchy peaks of width 1e-4 are resolved
    half = np.unique(np.concatenate([np.linspace(0.0, 2.0, 2001), 1.0 + np.linspace(-0.02, 0.02, 4001)]))
    grid = np.concatenate([-half[:0:-1], half])
    law = freeconv.density(DELTA_ZERO, 1.0, grid, eps=1e-4, warm_start=True)
    assert law.mass() == pytest.approx(1.0, abs=0.02)
    assert law.density[np.argmin(np.abs(grid - 1.0))] == pytest.approx(0.5 / (math.pi * 1e-4), rel=1e-3)


def test_rho_zero_reduces_to_theta(uniform_sym_40):
    z = 0.7 + 0.01j
    state = freeconv.solve_sd(uniform_sym_40, 0.0, z)
    assert state.G == pytest.approx(uniform_sym_40.cauchy(z), abs=1e-14)
    assert state.G_U == 0
    assert state.psi == z
    assert state.branch_ok


@given(x=st.floats(-3.0, 3.0), y=st.floats(1e-3, 5.0), rho=st.floats(0.05, 2.5))
@hsettings(max_examples=40, deadline=None)
def test_solution_invariants(x, y, rho):
    state = freeconv.solve_sd(UNIFORM_SYM_40, rho, complex(x, y))
    assert state.G.imag < 0
    assert state.residual <= settings.SD_TOL
    # 1 + 4ρG_U is a square root of 1 + 4ρ²G² on whichever sheet the path reached
    assert abs(state.sqrt_term**2 - state.branch_quantity) < 1e-8 * max(1.0, abs(state.branch_quantity))
    assert abs(state.G - UNIFORM_SYM_40.cauchy(state.psi)) < 1e-9 * max(1.0, abs(state.G))


@given(y=st.floats(1e-3, 10.0), rho=st.floats(0.0, 2.5))
@hsettings(max_examples=40, deadline=None)
def test_imaginary_axis_symmetry(y, rho):
    state = freeconv.solve_sd(UNIFORM_SYM_40, rho, complex(0.0, y))
    assert abs(state.G.real) < 1e-8


@given(x=st.floats(-3.0, 3.0), y=st.floats(1e-2, 5.0), rho=st.floats(0.05, 2.5))
@hsettings(max_examples=30, deadline=None)
def test_principal_mode_only_returns_certified_states(x, y, rho):
    try:
        state = freeconv.solve_sd(UNIFORM_SYM_40, rho, complex(x, y), principal_only=True)
    except BranchError as e:
        assert e.last_good is None or e.last_good.branch_ok
        return
    assert state.path_branch_ok
    assert state.branch_quantity.real > 0


def test_branch_is_lost_inside_the_support():
    # ν = λ_1 ⊞ λ_3: at x = 3 the boundary value of 1 + 4ρ²G² is negative real
    z = 3.0 + 1e-3j
    state = freeconv.solve_sd(LAMBDA_ONE, 3.0, z)
    assert not state.branch_ok
    assert not state.path_branch_ok
    assert state.G.imag < 0
    with pytest.raises(BranchError) as info:
        freeconv.solve_sd(LAMBDA_ONE, 3.0, z, principal_only=True)
    assert info.value.last_good is not None
    assert info.value.last_good.branch_ok


def test_r_transform_agrees_with_certified_state(uniform_sym_40):
    z = 0.3 + 5.0j
    rho = 1.2
    state = freeconv.solve_sd(uniform_sym_40, rho, z)
    assert state.branch_ok
    assert state.psi == pytest.approx(z - freeconv.r_transform(rho, state.G), abs=1e-10)


def test_r_transform_small_argument_limit():
    assert freeconv.r_transform(2.0, 0.0) == 0
    assert freeconv.r_transform(2.0, 1e-9) == pytest.approx(4e-9, rel=1e-6)


def test_warm_start_reaches_same_solution(uniform_sym_40):
    z = 1.1 + 1e-3j
    cold = freeconv.solve_sd(uniform_sym_40, 1.15, z)
    warm = freeconv.solve_sd(uniform_sym_40, 1.15, z, start=1.0 + 0.5j)
    assert warm.G == pytest.approx(cold.G, abs=1e-9)


def test_solve_rejects_real_axis_and_negative_rho(uniform_sym_40):
    with pytest.raises(MeasureDomainError):
        freeconv.solve_sd(uniform_sym_40, 1.0, 0.5 + 0j)
    with pytest.raises(MeasureDomainError):
        freeconv.solve_sd(uniform_sym_40, -1.0, 0.5 + 1j)


def test_iteration_budget_exhaustion_raises(monkeypatch, uniform_sym_40):
    monkeypatch.setattr(settings, "SD_MAX_ITER", 1)
    with pytest.raises(ConvergenceError) as info:
        freeconv.solve_sd(uniform_sym_40, 1.0, 0.9 + 1e-4j, tol=1e-300)
    assert info.value.residual > 0


def test_density_of_shifted_bernoulli_sum():
    grid = np.linspace(-6.0, 6.0, 1201)
    law = freeconv.density(LAMBDA_ONE, 3.0, grid, eps=1e-2, warm_start=True)
    assert law.mass() == pytest.approx(1.0, abs=2e-2)
    assert law.moment(2) == pytest.approx(3.0**2 + 1.0, rel=2e-2)
    np.testing.assert_allclose(law.density, law.density[::-1], atol=1e-8)
    # edges carry inverse square-root singularities; a lower height keeps the components sharp
    law = freeconv.density(LAMBDA_ONE, 3.0, grid, eps=1e-3, warm_start=True)
    assert len(law.components) == 2
    (l0, r0), (l1, r1) = law.components
    assert l0 == pytest.approx(-4.0, abs=0.1) and r0 == pytest.approx(-2.0, abs=0.1)
    assert l1 == pytest.approx(2.0, abs=0.1) and r1 == pytest.approx(4.0, abs=0.1)


def test_density_second_moment_is_additive(uniform_sym_40):
    rho = 0.8
    grid = np.linspace(-5.0, 5.0, 1001)
    law = freeconv.density(uniform_sym_40, rho, grid, eps=5e-3, warm_start=True)
    assert law.mass() == pytest.approx(1.0, abs=2e-2)
    assert law.moment(2) == pytest.approx(rho**2 + uniform_sym_40.moment(2), rel=2e-2)


def test_density_rejects_bad_grids(uniform_sym_40):
    with pytest.raises(MeasureDomainError):
        freeconv.density(uniform_sym_40, 1.0, [0.0, 1.0, 2.0], eps=1e-3)
    with pytest.raises(MeasureDomainError):
        freeconv.density(uniform_sym_40, 1.0, [-1.0, 0.0, 1.0], eps=0.0)


def test_gap_probe_detects_hole(uniform_sym_40):
    assert freeconv.gap_probe(uniform_sym_40, 0.5, 0.1)


def test_gap_probe_bernoulli_examples():
    assert freeconv.gap_probe(LAMBDA_ONE, 3.0, 0.5)
    # arcsine law has density 1/(2π) at 0
    assert not freeconv.gap_probe(LAMBDA_ONE, 1.0, 0.1)
    assert freeconv.max_density_near_zero(LAMBDA_ONE, 1.0, 0.1) == pytest.approx(1 / (2 * math.pi), rel=1e-2)


@pytest.mark.parametrize(
    "theta, rho, expected",
    [
        (LAMBDA_ONE, 0.2, 0.0),  # inside the hole: U = ∫ log x dΘ
        (LAMBDA_ONE, 2.0, math.log(2.0)),  # outside the ring: U = log ρ
        (DELTA_ZERO, 1.5, math.log(1.5)),
    ],
)
def test_log_potential_reference_values(theta, rho, expected):
    est = freeconv.log_potential_estimate(theta, rho)
    assert est.value == pytest.approx(expected, abs=1e-6)
    assert not est.flagged
    assert est.err_estimate < 1e-6


def test_log_potential_at_rho_zero(two_atom):
    sym = symmetrize(two_atom)
    assert freeconv.log_potential(sym, 0.0) == pytest.approx(0.5 * math.log(0.5) + 0.5 * math.log(2.0))
    assert freeconv.log_potential(DELTA_ZERO, 0.0) == -math.inf


def test_log_potential_is_nondecreasing(uniform_sym_40):
    values = [freeconv.log_potential(uniform_sym_40, r) for r in np.linspace(0.6, 1.6, 6)]
    assert all(b >= a - 1e-4 for a, b in zip(values, values[1:]))


def test_log_potential_sweep_past_outer_radius():
    # b = 1.3229 for uniform[0.5, 2]; past b, |G(iy)| shrinks like y near the axis
    rhos = np.linspace(0.6, 1.6, 21)
    estimates = [freeconv.log_potential_estimate(UNIFORM_SYM_40, r) for r in rhos]
    values = [e.value for e in estimates]
    assert all(np.isfinite(values))
    assert all(b >= a - 1e-4 for a, b in zip(values, values[1:]))
    for r, est in zip(rhos, estimates):
        if r >= 1.45:
            assert est.value == pytest.approx(math.log(r), abs=max(5e-3, est.err_estimate))


def test_stalled_residual_is_accepted_near_the_axis():
    state = freeconv.solve_sd(UNIFORM_SYM_40, 1.4, 2.36e-5j)
    assert state.G.imag < 0
    assert abs(state.G) < 1e-3
    assert state.residual <= settings.SD_TOL


def test_limit_cdf_at_rho_zero_is_smoothed_theta():
    grid = np.linspace(-2, 2, 41)
    cdf = freeconv.limit_cdf(LAMBDA_ONE, 0.0, grid, 1e-4)
    assert cdf[0] == pytest.approx(0.0, abs=1e-3)
    assert cdf[20] == pytest.approx(0.5, abs=1e-3)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-3)


def test_exports(results_dir):
    grid = np.linspace(-3.0, 3.0, 61)
    law = freeconv.density(LAMBDA_ONE, 1.0, grid, eps=1e-2, warm_start=True)
    rows = read_csv(freeconv.export_density(law, results_dir / "density.csv"))
    assert list(rows[0]) == ["x", "density"]
    assert len(rows) == 61

    values = [freeconv.log_potential_estimate(DELTA_ZERO, r) for r in (0.5, 1.0)]
    rows = read_csv(freeconv.export_log_potential(values, results_dir / "logpot.csv"))
    assert list(rows[0]) == ["rho", "U", "err_estimate"]
