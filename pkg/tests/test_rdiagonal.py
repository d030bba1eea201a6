import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from singlering.services import ensemble, rdiagonal
from singlering.services.errors import DivergenceError, MeasureDomainError
from singlering.services.measures import DiscreteMeasure
from singlering.utils.export import read_csv
from singlering.utils.seeding import trial_seeds


@pytest.mark.parametrize(
    "p, s, C, expected",
    [
        (1, 7.3, 1.0, 2.0),
        (3, 2.0, 1.0, 16.0),
        (5, 0.5, 2.0, 0.75),
    ],
)
def test_power_norm_bound(p, s, C, expected):
    assert rdiagonal.power_norm_bound(p, s, C) == pytest.approx(expected)


def test_power_norm_bound_rejects_bad_input():
    with pytest.raises(MeasureDomainError):
        rdiagonal.power_norm_bound(0, 1.0, 1.0)
    with pytest.raises(MeasureDomainError):
        rdiagonal.power_norm_bound(2, 0.0, 1.0)


@pytest.mark.parametrize(
    "gamma, s, expected",
    [
        (0.5, 1.0, 3.0),
        (0.25, 2.0, 1.5),
    ],
)
def test_F_gamma_examples(gamma, s, expected):
    assert rdiagonal.F_gamma(gamma, s) == pytest.approx(expected, abs=1e-12)
    assert rdiagonal.F_gamma_partial(gamma, s) == pytest.approx(expected, abs=1e-10)


def test_F_gamma_small_gamma():
    assert rdiagonal.F_gamma(1e-6, 1.0) == pytest.approx(2e-6, rel=1e-5)


def test_F_gamma_diverges():
    with pytest.raises(DivergenceError):
        rdiagonal.F_gamma(1.0, 1.0)
    with pytest.raises(DivergenceError):
        rdiagonal.F_gamma(0.6, 2.0)


@given(st.floats(0.01, 3.0), st.floats(0.01, 0.9))
@hsettings(max_examples=100, deadline=None)
def test_F_gamma_matches_partial_sums(s, q):
    # γs ≤ 0.9 keeps the 60-term tail below 1e-10 relative to the sum
    gamma = q / s
    closed = rdiagonal.F_gamma(gamma, s)
    partial = rdiagonal.F_gamma_partial(gamma, s, terms=400)
    assert closed == pytest.approx(partial, rel=1e-10, abs=1e-10)


def test_eta_bound_examples():
    assert rdiagonal.eta_bound(1.0, 2.0, 1.0, 1.0) == pytest.approx(0.0625)
    params = rdiagonal.bound_params(99.0, 1.0, 1.0, 1.0)
    assert params.gamma == pytest.approx(0.01)
    assert params.F == pytest.approx(0.0203, abs=1e-4)
    assert params.eta == pytest.approx(24.50, abs=0.01)


def test_eta_scaling():
    base = rdiagonal.eta_bound(0.5, 1.5, 0.8, 1.0)
    assert rdiagonal.eta_bound(0.5, 1.5, 0.8, 2.0) == pytest.approx(base / 2, rel=1e-14)
    assert rdiagonal.eta_bound(0.5, 3.0, 0.8, 1.0) == pytest.approx(base / 2, rel=1e-14)


@given(
    eps=st.floats(1e-3, 50.0),
    c0=st.floats(1e-2, 10.0),
    s=st.floats(1e-2, 10.0),
    C=st.floats(0.1, 5.0),
)
@hsettings(max_examples=100, deadline=None)
def test_eta_bound_margin_is_one_quarter(eps, c0, s, C):
    params = rdiagonal.bound_params(eps, c0, s, C)
    assert params.gamma * params.s < 1
    assert params.margin == pytest.approx(0.25, rel=1e-12)
    assert params.margin < 0.5


@given(st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
@hsettings(max_examples=50, deadline=None)
def test_eta_is_nondecreasing_in_eps(e1, e2):
    lo, hi = sorted((e1, e2))
    assert rdiagonal.eta_bound(lo, 1.0, 1.0) <= rdiagonal.eta_bound(hi, 1.0, 1.0) * (1 + 1e-12)


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((12, 12))
    exact = np.linalg.norm(M, 2)
    assert rdiagonal.operator_norm(M, steps=500, tol=1e-14) == pytest.approx(exact, rel=1e-6)
    assert rdiagonal.operator_norm(M) <= exact * (1 + 1e-12)


def test_spectral_radius_of_identity():
    assert rdiagonal.spectral_radius_estimate(np.eye(5)) == pytest.approx(1.0, abs=1e-10)


def test_spectral_radius_of_nilpotent():
    assert rdiagonal.spectral_radius_estimate(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(0.0, abs=1e-10)


def test_spectral_radius_window_for_odd_k_max():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((6, 6)) / 3
    direct = min(np.linalg.norm(np.linalg.matrix_power(A, k), 2) ** (1 / k) for k in range(5, 10))
    estimate = rdiagonal.spectral_radius_estimate(A, k_max=9)
    assert estimate == pytest.approx(direct, rel=1e-3)
    assert estimate <= direct * (1 + 1e-9)


def test_F_gamma_partial_with_large_gamma_and_small_s():
    # γ = 6, s = 0.125: γⁿ alone overflows a float long before the terms are negligible
    closed = rdiagonal.F_gamma(6.0, 0.125)
    assert closed == pytest.approx(120.0)
    assert rdiagonal.F_gamma_partial(6.0, 0.125, terms=400) == pytest.approx(closed, rel=1e-10)
    assert math.isfinite(rdiagonal.F_gamma_partial(6.0, 0.125, terms=5000))


def test_spectral_radius_needs_long_window():
    with pytest.raises(MeasureDomainError):
        rdiagonal.spectral_radius_estimate(np.eye(2), k_max=4)


def test_spectral_radius_of_large_scaled_matrix():
    # Rescaling keeps powers of a matrix with entries ~1e100 finite
    A = 1e100 * np.diag([1.0, 0.5])
    assert rdiagonal.spectral_radius_estimate(A) == pytest.approx(1e100, rel=1e-6)


@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
@hsettings(max_examples=100, deadline=None)
def test_recursion_majorization(n, seed, eta):
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    B = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    assert rdiagonal.recursion_majorization_check(A, B, eta, k_max=12)


def test_gap_certificate_regimes(two_atom):
    outside = rdiagonal.gap_certificate(two_atom, 1.6)
    assert outside.regime == "outside"
    assert outside.zeta == pytest.approx(1.457738 / 1.6, abs=1e-6)
    assert outside.eta > 0

    hole = rdiagonal.gap_certificate(two_atom, 0.4)
    assert hole.regime == "hole"
    assert hole.zeta == pytest.approx(0.4 / 0.685994, abs=1e-6)
    assert hole.eta > 0

    ring = rdiagonal.gap_certificate(two_atom, 1.0)
    assert ring.regime == "ring"
    assert ring.eta == 0.0


def test_gap_certificate_without_hole():
    theta = DiscreteMeasure.from_atoms([(0.0, 0.5), (1.0, 0.5)])
    assert rdiagonal.gap_certificate(theta, 0.1).regime == "ring"


def test_eta_table_export(tmp_path):
    params = [rdiagonal.bound_params(e, 1.0, 1.0) for e in (0.5, 1.0)]
    rows = read_csv(rdiagonal.export_eta_table(params, tmp_path / "eta.csv"))
    assert list(rows[0]) == ["eps", "c0", "s", "C", "eta"]
    assert float(rows[1]["eta"]) == pytest.approx(0.0625 * 2)


@pytest.mark.slow
def test_matrix_model_spectral_radius_outside_ring():
    # A = U diag(T) V / z with |z| = 1.6 > b: the estimate stays near b/|z|
    n = 500
    T = np.repeat([0.5, 2.0], n // 2)
    good = 0
    for trial in range(10):
        draw = ensemble.assemble(T, *trial_seeds(424242, trial, n))
        if rdiagonal.spectral_radius_estimate(draw.A / 1.6) <= 1.457738 / 1.6 + 0.05:
            good += 1
    assert good >= 9
