"""Vector field, oscillation diagnostics, and Dini integrals."""

import numpy as np
import pytest

from potlab.errors import DomainError, SingularPointError, StateError
from potlab.field import (
    OscillationModulus,
    VectorField,
    affine_coefficient,
    checkerboard_coefficient,
    constant_coefficient,
    dini_integral,
    jump_coefficient,
    make_coefficient,
)
from potlab.grid import Grid2D, GridFunction, ball_average
from potlab.orlicz import OrliczG, PowerGrowth, RegularizedPowerGrowth


def field(p=2.0, coeff=None):
    return VectorField(PowerGrowth(p), coeff or constant_coefficient(1.0))


# -- field values and Jacobian -------------------------------------------------

def test_eval_a_identity_for_p2():
    vf = field(2.0)
    assert np.allclose(vf.a((0.3, 0.3), [3.0, 4.0]), [3.0, 4.0])


def test_eval_a_zero_at_origin():
    vf = field(4.0)
    assert np.allclose(vf.a((0.3, 0.3), [0.0, 0.0]), [0.0, 0.0])


def test_eval_a_coefficient_scaling():
    vf = VectorField(PowerGrowth(4.0), constant_coefficient(2.0))
    assert np.allclose(vf.a((0.1, 0.1), [1.0, 0.0]), [2.0, 0.0])


def test_jacobian_p2_identity():
    vf = field(2.0)
    assert np.allclose(vf.jacobian((0.2, 0.2), [0.7, -1.3]), np.eye(2))


def test_jacobian_p4_axis():
    vf = field(4.0)
    J = vf.jacobian((0.2, 0.2), [1.0, 0.0])
    assert np.allclose(J, np.diag([3.0, 1.0]))


def test_jacobian_singular_point():
    with pytest.raises(SingularPointError):
        field(4.0).jacobian((0.2, 0.2), [0.0, 0.0])


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_jacobian_matches_finite_differences(p):
    vf = VectorField(RegularizedPowerGrowth(p, 0.5), constant_coefficient(1.3))
    rng = np.random.default_rng(11)
    x = (0.4, 0.6)
    for mag in (1e-3, 1.0, 1e3):
        eta = rng.normal(size=2)
        eta *= mag / np.linalg.norm(eta)
        J = vf.jacobian(x, eta)
        step = 1e-5 * mag
        fd = np.empty((2, 2))
        for k, e in enumerate(np.eye(2)):
            fd[:, k] = (vf.a(x, eta + step * e) - vf.a(x, eta - step * e)) / (2 * step)
        assert np.linalg.norm(J - fd) <= 1e-6 * np.linalg.norm(J)


def test_jacobian_eigenvalue_floor():
    vf = VectorField(PowerGrowth(3.0), constant_coefficient(1.0))
    rng = np.random.default_rng(12)
    for _ in range(1000):
        eta = rng.normal(size=2) * 10.0 ** rng.uniform(-2, 2)
        t = np.linalg.norm(eta)
        if t == 0:
            continue
        eigs = np.linalg.eigvalsh(vf.jacobian((0.5, 0.5), eta))
        assert eigs.min() >= vf.v * float(vf.growth.kernel(t)) * (1 - 1e-12)


def test_growth_bound_on_field():
    vf = VectorField(PowerGrowth(3.0), constant_coefficient(2.0))
    rng = np.random.default_rng(13)
    eta = rng.normal(size=(200, 2)) * 10.0 ** rng.uniform(-2, 2, (200, 1))
    t = np.linalg.norm(eta, axis=1)
    a = vf.a((0.5, 0.5), eta)
    assert np.all(np.linalg.norm(a, axis=1) <= vf.L * vf.growth.g(t) * (1 + 1e-12))


# -- monotonicity / coercivity ---------------------------------------------------

@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_monotonicity_constant(p):
    vf = field(p)
    og = OrliczG(vf.growth)
    rng = np.random.default_rng(21)
    eta = rng.normal(size=(10_000, 2)) * 10.0 ** rng.uniform(-1, 1, (10_000, 1))
    xi = rng.normal(size=(10_000, 2)) * 10.0 ** rng.uniform(-1, 1, (10_000, 1))
    diff = eta - xi
    norm = np.linalg.norm(diff, axis=1)
    keep = norm > 1e-12
    lhs = np.sum((vf.a((0.5, 0.5), eta) - vf.a((0.5, 0.5), xi)) * diff, axis=1)
    ratio = lhs[keep] / og.G(norm[keep])
    assert ratio.min() >= 0.1
    if p == 2.0:
        assert abs(ratio.min() - 2.0) <= 1e-9


def test_coercivity():
    vf = field(3.0)
    og = OrliczG(vf.growth)
    rng = np.random.default_rng(22)
    eta = rng.normal(size=(10_000, 2)) * 10.0 ** rng.uniform(-2, 2, (10_000, 1))
    t = np.linalg.norm(eta, axis=1)
    keep = t > 1e-12
    dot = np.sum(vf.a((0.5, 0.5), eta) * eta, axis=1)
    assert (dot[keep] / og.G(t[keep])).min() > 0.5


# -- oscillation ----------------------------------------------------------------

def test_theta_constant_coefficient():
    g = Grid2D(64)
    vf = field(2.0)
    assert vf.theta(((0.5, 0.5), 0.25), (0.5, 0.5), g) == 0.0


def test_theta_affine_center():
    g = Grid2D(128)
    vf = VectorField(PowerGrowth(2.0), affine_coefficient(1.0, 0.0, 1.0))
    val = vf.theta(((0.5, 0.5), 0.25), (0.5, 0.5), g)
    assert val == pytest.approx(0.0, abs=g.h)


def test_theta_affine_offset_matches_ball_average_oracle():
    g = Grid2D(128)
    coeff = affine_coefficient(1.0, 0.0, 1.0)
    vf = VectorField(PowerGrowth(2.0), coeff)
    got = vf.theta(((0.5, 0.5), 0.25), (0.75, 0.5), g)
    omega = GridFunction(g, coeff.on_nodes(g))
    oracle = abs(coeff.at(0.75, 0.5) - ball_average(omega, (0.5, 0.5), 0.25))
    assert got == pytest.approx(oracle, rel=1e-12)
    assert got == pytest.approx(0.25, abs=2 * g.h)


def test_theta_sampled_equals_model_path():
    g = Grid2D(64)
    vf = VectorField(PowerGrowth(3.0), jump_coefficient(0.2))
    ball = ((0.5, 0.5), 0.2)
    exact = vf.theta(ball, (0.55, 0.5), g)
    sampled = vf.theta(ball, (0.55, 0.5), g, eta_samples=8)
    assert sampled == pytest.approx(exact, rel=1e-12)


def test_theta_additive_shift_invariance():
    g = Grid2D(64)
    base = jump_coefficient(0.2)
    vf1 = VectorField(PowerGrowth(2.0), base)
    vf2 = VectorField(PowerGrowth(2.0), base.shifted(0.5))
    ball = ((0.5, 0.5), 0.2)
    assert vf1.theta(ball, (0.55, 0.5), g) == pytest.approx(
        vf2.theta(ball, (0.55, 0.5), g), rel=1e-12
    )


def test_theta_domain_guards():
    g = Grid2D(64)
    vf = field(2.0)
    with pytest.raises(DomainError):
        vf.theta(((0.1, 0.5), 0.2), (0.1, 0.5), g)
    with pytest.raises(DomainError):
        vf.theta(((0.5, 0.5), 0.1), (0.8, 0.5), g)


def test_omega_modulus_constant_zero():
    g = Grid2D(64)
    assert field(2.0).omega_modulus(0.25, g) == 0.0


def test_omega_modulus_jump():
    g = Grid2D(128)
    vf = VectorField(PowerGrowth(2.0), jump_coefficient(0.2))
    val = vf.omega_modulus(0.25, g)
    assert 0.0 < val <= 2 * vf.L
    # doubling the amplitude doubles the modulus exactly
    vf2 = VectorField(PowerGrowth(2.0), jump_coefficient(0.4))
    assert vf2.omega_modulus(0.25, g) == pytest.approx(2 * val, rel=1e-12)


def test_oscillation_modulus_monotone():
    g = Grid2D(128)
    vf = VectorField(PowerGrowth(2.0), checkerboard_coefficient(0.3, 0.25))
    om = vf.oscillation_modulus(g, 0.3)
    assert np.all(np.diff(om.values) >= 0)
    assert om.values.max() <= 2 * vf.L


def test_omega_modulus_guards():
    g = Grid2D(64)
    with pytest.raises(DomainError):
        field(2.0).omega_modulus(0.9, g)


# -- Dini integrals ----------------------------------------------------------------

def test_dini_integral_zero_modulus():
    om = OscillationModulus.from_function(
        lambda r: np.zeros_like(r), np.geomspace(1e-4, 1.0, 64), sg=1.0
    )
    value, r_min = dini_integral(om, 1.0)
    assert value == 0.0
    assert r_min == pytest.approx(1e-4)


def test_dini_integral_linear_integrand():
    # omega(rho) = rho^(1+sg)  ->  integrand rho  ->  integral over (0, 1] is 1
    sg = 1.5
    om = OscillationModulus.from_function(
        lambda r: r ** (1 + sg), np.geomspace(1e-8, 1.0, 1024), sg=sg
    )
    value, _ = dini_integral(om, 1.0)
    assert value == pytest.approx(1.0, abs=1e-3)


def test_dini_integral_sqrt_integrand():
    # omega(rho) = rho^((1+sg)/2) -> integrand rho^(-1/2) -> integral 2
    sg = 1.0
    om = OscillationModulus.from_function(
        lambda r: r ** ((1 + sg) / 2.0), np.geomspace(1e-8, 1.0, 4096), sg=sg
    )
    value, _ = dini_integral(om, 1.0)
    assert value == pytest.approx(2.0, abs=2e-3)


def test_dini_integral_weight_and_exponent():
    sg = 1.0
    om = OscillationModulus.from_function(
        lambda r: r ** (1 + sg), np.geomspace(1e-8, 1.0, 2048), sg=sg
    )
    # measure rho * rho^(-1/2) * rho * drho/rho = rho^(1/2) drho: integral 2/3
    value, _ = dini_integral(om, 1.0, alpha_hat=0.5, weight=lambda r: r)
    assert value == pytest.approx(2.0 / 3.0, abs=1e-3)


def test_dini_integral_empty():
    om = OscillationModulus(2.0, np.array([]), np.array([]), 0.5)
    with pytest.raises(StateError):
        dini_integral(om, 1.0)


def test_make_coefficient_presets():
    for preset in ("constant", "affine", "jump", "checkerboard"):
        c = make_coefficient(preset)
        assert 0 < c.c_low <= c.c_high
    g = Grid2D(32)
    vals = make_coefficient("jump", amplitude=0.3).on_nodes(g)
    assert set(np.round(np.unique(vals), 10)) == {0.7, 1.3}


def test_coefficient_clamping():
    c = affine_coefficient(100.0, 0.0, 0.0, c_low=0.5, c_high=2.0)
    g = Grid2D(32)
    vals = c.on_nodes(g)
    assert vals.min() >= 0.5 and vals.max() <= 2.0
