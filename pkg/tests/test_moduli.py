import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import concavity_threshold

from ergopt._validation import ParameterError
from ergopt.maps import make_log_V, make_map
from ergopt.moduli import (
    KernelPotential,
    check_modulus,
    compose,
    liminf_ratio,
    make_omega_alpha_beta,
    make_omega_log,
    modulus_norm,
    random_kernel_potential,
    sandwich_slack,
)

GRID = np.geomspace(1e-12, 3.0, 1000)

MODULI = [
    make_omega_alpha_beta(0.3, 0.0),
    make_omega_alpha_beta(0.8, 0.0),
    make_omega_alpha_beta(1.0, 0.0),
    make_omega_alpha_beta(0.0, 1.0),
    make_omega_alpha_beta(0.5, 2.0),
    make_omega_alpha_beta(0.8, 1.0),
    make_omega_log(1.0),
    make_omega_log(3.0),
]


@pytest.mark.parametrize("alpha, beta", [(0.0, 1.0), (0.8, 1.0), (0.5, 2.0), (0.2, 0.3)])
def test_concavity_threshold_matches_quadratic_root(alpha, beta):
    om = make_omega_alpha_beta(alpha, beta)
    assert om.h0 == pytest.approx(concavity_threshold(alpha, beta), rel=1e-6)


def test_threshold_frozen_values():
    # Frozen from the analytic root: u = 1/2 gives e^-2 for (0, 1).
    assert make_omega_alpha_beta(0.0, 1.0).h0 == pytest.approx(np.exp(-2.0), rel=1e-6)
    assert make_omega_alpha_beta(0.8, 1.0).h0 == pytest.approx(0.0028033, rel=1e-4)


@pytest.mark.parametrize("om", MODULI, ids=lambda m: m.name)
def test_constructed_moduli_pass(om):
    cert = check_modulus(om, GRID)
    assert cert.passed, cert.flags
    assert float(om(0.0)) == 0.0


@pytest.mark.parametrize("i, j", [(0, 1), (3, 6), (4, 0), (6, 7)])
def test_composition_closure(i, j):
    om = compose(MODULI[i], MODULI[j])
    assert check_modulus(om, GRID).passed


@given(st.sampled_from(MODULI), st.floats(1e-9, 1e3), st.floats(1e-12, 10.0))
@settings(max_examples=300, deadline=None)
def test_sandwich_property(om, chi, h):
    assert float(sandwich_slack(om, h, chi)) >= -1e-12


def test_check_modulus_detects_convexity():
    bad = type(MODULI[0])(lambda h: np.asarray(h) ** 2, "square")
    cert = check_modulus(bad, GRID)
    assert not cert.passed
    assert not cert.flags["concave"]


@pytest.mark.parametrize("alpha, tag", [(0.3, "ObstructionRegime"), (0.5, "ObstructionRegime"),
                                        (0.8, "VanishingRatio")])
def test_liminf_tags_power(alpha, tag):
    V = make_map("mp", s=0.5).V
    assert liminf_ratio(make_omega_alpha_beta(alpha, 0.0), V).tag == tag


def test_liminf_log_pair_with_single_log_is_stable():
    # omega_k(h) ~ k h log(1/h) and V ~ (2/log 2) h log(1/h): ratio tends to k log(2) / 2.
    rep = liminf_ratio(make_omega_log(2.0), make_log_V(1.0, 0.0))
    assert rep.tag == "ObstructionRegime"
    assert rep.ratios[-1] == pytest.approx(np.log(2.0), rel=0.01)


def test_liminf_log_pair_with_extra_log_vanishes():
    # An extra power of log(1/h) in V sends the ratio to 0.
    rep = liminf_ratio(make_omega_log(1.0), make_log_V(1.0, 1.0))
    assert rep.tag == "VanishingRatio"


def test_omega_dominates_small_powers():
    om = make_omega_alpha_beta(0.3, 1.0)
    h = np.geomspace(1e-300, 1e-100, 5)
    # omega(h) / h^eps blows up as h -> 0 for every eps > alpha.
    q = om(h) / h ** 0.31
    assert np.all(np.diff(q) < 0)


def test_modulus_norm_of_itself_is_one():
    om = make_omega_alpha_beta(0.5, 0.0)
    xs = np.linspace(0.0, 1.0, 2001)
    est = modulus_norm(xs, om(xs), om)
    assert est.finite
    assert 0.99 <= est.value <= 1.0 + 1e-12


def test_modulus_norm_stable_under_refinement():
    om = make_omega_alpha_beta(0.8, 0.0)
    f = random_kernel_potential(om, 6, np.random.default_rng(3))
    a = modulus_norm(np.linspace(0, 1, 1001), f(np.linspace(0, 1, 1001)), om).value
    b = modulus_norm(np.linspace(0, 1, 4001), f(np.linspace(0, 1, 4001)), om).value
    assert abs(a - b) <= 0.1 * b
    assert b <= f.norm_bound


def test_modulus_norm_flags_jump():
    om = make_omega_alpha_beta(0.5, 0.0)
    xs = np.array([0.0, 0.5, 0.5, 1.0])
    assert not modulus_norm(xs, np.array([0.0, 0.0, 1.0, 1.0]), om).finite


def test_kernel_potential_scalar_and_empty():
    om = make_omega_alpha_beta(0.5, 0.0)
    f = KernelPotential(om, np.array([0.25]), np.array([2.0]))
    assert f(0.5) == pytest.approx(1.0)
    empty = KernelPotential(om, np.zeros(0), np.zeros(0))
    assert np.all(empty(np.linspace(0, 1, 5)) == 0.0)


@pytest.mark.parametrize("alpha, beta", [(1.2, 0.0), (0.0, 0.0), (1.0, 0.5), (-0.1, 1.0)])
def test_invalid_alpha_beta(alpha, beta):
    with pytest.raises(ParameterError):
        make_omega_alpha_beta(alpha, beta)


def test_invalid_log_k():
    with pytest.raises(ParameterError):
        make_omega_log(0.5)
