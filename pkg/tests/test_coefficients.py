import dataclasses

import numpy as np
import pytest

from spdesim.coefficients import (
    BoxSampler,
    ConditionConstants,
    ConstantFn,
    MarkIntegral,
    check_bf_bounds,
    check_coercivity,
    check_growth,
    check_monotonicity,
    exponential_transform,
    probe_hemicontinuity,
)
from spdesim.fixtures import (
    LinearDrift,
    additive_multimode,
    heat_jump,
    semilinear,
)
from spdesim.noise import AtomMarks, PowerLawMarks
from spdesim.space import build_sine_space

MARKS = PowerLawMarks()
SPACE = build_sine_space(8)
SAMPLER = BoxSampler(dim=8)
TRIALS = 800


@pytest.fixture(scope="module")
def quadrature():
    return MarkIntegral(MARKS, level=2, points_per_cell=4)


@pytest.fixture(scope="module")
def base(quadrature):
    return heat_jump(SPACE, MARKS)


def test_mark_integral_exact_for_weight(quadrature):
    # int xi^2 nu(dxi) over (0, 1] = 2/3 for the power-law family
    got = quadrature.integral_sq(lambda xi: np.asarray(xi, dtype=float)[None, :])
    assert got == pytest.approx(2.0 / 3.0, rel=1e-9)


def test_mark_integral_atoms():
    atoms = AtomMarks(positions=(0.5, 1.0), weights=(2.0, 1.0))
    mq = MarkIntegral(atoms, level=1)
    got = mq.integral_sq(lambda xi: np.asarray(xi, dtype=float)[None, :])
    assert got == pytest.approx(2.0 * 0.25 + 1.0, rel=1e-14)


def test_monotonicity_passes_on_base(base, quadrature):
    report = check_monotonicity(base, SPACE, SAMPLER, TRIALS, quadrature, seed=1)
    assert report.passed
    assert report.worst_violation <= 0.0
    assert report.trials == TRIALS


def test_monotonicity_equal_arguments_vanish(base, quadrature):
    x = np.linspace(-2, 3, 8)
    lhs = (
        2.0 * (x - x) @ (np.asarray(base.eval_A(0.1, x)) - base.eval_A(0.1, x))
        + np.sum(
            (np.asarray(base.eval_B(0.1, x)) - np.asarray(base.eval_B(0.1, x))) ** 2
        )
        + quadrature.integral_sq(
            lambda xi: np.asarray(base.eval_F(0.1, x, xi))
            - np.asarray(base.eval_F(0.1, x, xi))
        )
    )
    assert abs(lhs) <= 1e-12


def test_monotonicity_fails_on_negated_drift(base, quadrature):
    anti = dataclasses.replace(
        base, eval_A=LinearDrift(-base.linear_A), linear_A=-base.linear_A
    )
    report = check_monotonicity(anti, SPACE, SAMPLER, TRIALS, quadrature, seed=2)
    assert not report.passed
    assert report.worst_violation > 0
    assert "sample" in report.witness


def test_coercivity_passes_on_base(base, quadrature):
    report = check_coercivity(base, SPACE, SAMPLER, TRIALS, quadrature, seed=3)
    assert report.passed


def test_coercivity_zero_input_margin(base, quadrature):
    # at x = 0 the left side reduces to the jump mass minus K1, negative
    # for fixtures with F(0) = 0
    c = base.constants
    lhs = quadrature.integral_sq(lambda xi: base.eval_F(0.0, np.zeros(8), xi))
    assert lhs - c.k1_fn(0.0) <= 0


def test_coercivity_fails_with_inflated_weight(base, quadrature):
    c = base.constants
    inflated = dataclasses.replace(
        base, constants=dataclasses.replace(c, lambda_fn=ConstantFn(10 * 0.375))
    )
    report = check_coercivity(inflated, SPACE, SAMPLER, TRIALS, quadrature, seed=4)
    assert not report.passed


def test_coercivity_fails_for_theta_outside_unit(quadrature):
    bad = heat_jump(SPACE, MARKS, theta=1.2, lambda_const=0.375)
    report = check_coercivity(bad, SPACE, SAMPLER, TRIALS, quadrature, seed=5)
    assert not report.passed


def test_growth_passes_on_base(base, quadrature):
    report = check_growth(base, SPACE, SAMPLER, TRIALS, quadrature, seed=6)
    assert report.passed


def test_growth_zero_input(base):
    a0 = np.asarray(base.eval_A(0.0, np.zeros(8)))
    assert np.linalg.norm(a0) == 0.0


def test_growth_fails_below_threshold(quadrature):
    # alpha must exceed 1/(4 lambda^2) = 16/9 for the half-Laplacian
    weak = heat_jump(SPACE, MARKS, alpha=1.0)
    report = check_growth(weak, SPACE, SAMPLER, TRIALS, quadrature, seed=7)
    assert not report.passed


def test_growth_fails_for_affine_offset_without_allowance(quadrature):
    base = heat_jump(SPACE, MARKS)

    class AffineDrift:
        def __call__(self, t, x):
            x = np.asarray(x, dtype=float)
            out = base.eval_A(t, x).copy()
            out[0] += 1.0
            return out

    affine = dataclasses.replace(
        base,
        eval_A=AffineDrift(),
        linear_A=None,
        constants=dataclasses.replace(base.constants, k2_fn=ConstantFn(0.0)),
    )
    report = check_growth(affine, SPACE, SAMPLER, TRIALS, quadrature, seed=8)
    assert not report.passed


def test_hemicontinuity_linear_decay(base):
    x = np.full(8, 0.5)
    y = np.full(8, -0.25)
    z = np.linspace(0.1, 0.8, 8)
    eps = 2.0 ** -np.arange(1, 21)
    report = probe_hemicontinuity(base, SPACE, x, y, z, 0.0, epsilons=eps)
    gaps = np.asarray(report.witness["gaps"])
    # linear drift: gap(eps) = eps * |<A(y), z>| exactly
    scale = abs(z @ np.asarray(base.eval_A(0.0, y)))
    assert np.allclose(gaps, eps * scale, rtol=1e-6)


def test_hemicontinuity_zero_direction(base):
    report = probe_hemicontinuity(
        base, SPACE, np.ones(8), np.zeros(8), np.ones(8), 0.2
    )
    assert report.passed
    assert report.worst_violation == 0.0


def test_hemicontinuity_semilinear(base):
    sem = semilinear(SPACE, MARKS)
    rng = np.random.default_rng(12)
    x = rng.normal(size=8) / 4
    y = rng.normal(size=8) / 4
    z = rng.normal(size=8) / 4
    report = probe_hemicontinuity(
        sem, SPACE, x, y, z, 0.0, epsilons=2.0 ** -np.arange(1, 41)
    )
    assert report.passed
    assert report.worst_violation < 1e-8


def test_hemicontinuity_rejects_bad_ladder(base):
    with pytest.raises(ValueError):
        probe_hemicontinuity(
            base, SPACE, np.ones(8), np.ones(8), np.ones(8), 0.0,
            epsilons=np.array([0.5, 0.5]),
        )


def test_bf_bounds_pass_on_base(base, quadrature):
    report = check_bf_bounds(base, SPACE, SAMPLER, TRIALS, quadrature, seed=9)
    assert report.passed


def test_bf_bounds_zero_pair(base, quadrature):
    c = base.constants
    zeros = np.zeros(8)
    diff = np.sum(
        (np.asarray(base.eval_B(0.0, zeros)) - np.asarray(base.eval_B(0.0, zeros))) ** 2
    )
    assert diff <= (4.0 / c.q) * c.k2_fn(0.0)


def test_k3_combination():
    c = ConditionConstants(
        p=2.0, alpha=1.0, lambda_fn=0.5, k1_fn=0.3, k1bar_fn=0.0, k2_fn=0.7
    )
    for t in np.linspace(0, 1, 11):
        assert c.k3_fn(t) == pytest.approx((2.0 / c.q) * 0.7 + 0.3, rel=1e-15)


def test_constants_validation():
    with pytest.raises(ValueError):
        ConditionConstants(p=1.5, alpha=1.0, lambda_fn=1.0, k1_fn=0.0, k1bar_fn=0.0, k2_fn=0.0)
    with pytest.raises(ValueError):
        ConditionConstants(p=2.0, alpha=0.5, lambda_fn=1.0, k1_fn=0.0, k1bar_fn=0.0, k2_fn=0.0)


def test_transform_identity_for_zero_rate(base):
    same = exponential_transform(base, 0.0)
    x = np.linspace(-1, 1, 8)
    assert np.array_equal(
        np.asarray(same.eval_A(0.3, x)), np.asarray(base.eval_A(0.3, x))
    )
    assert same.autonomous


def test_transform_gamma_closed_form(base):
    moved = exponential_transform(base, 2.0)
    # A is linear, so the drift picks up exactly -(K/2) x = -x
    x = np.linspace(0.2, 0.9, 8)
    want = np.asarray(base.eval_A(0.5, x)) - x
    assert np.allclose(np.asarray(moved.eval_A(0.5, x)), want, rtol=1e-9)


def test_transform_restores_monotonicity(quadrature):
    # a mild reaction term keeps the relaxed bound with rate K = 2c, and
    # the transform removes it exactly for a linear drift
    perturbed = heat_jump(SPACE, MARKS, reaction=0.3)
    fixed = exponential_transform(perturbed, 0.6)
    report = check_monotonicity(fixed, SPACE, SAMPLER, TRIALS, quadrature, seed=10)
    assert report.passed


def test_transform_fixes_strong_reaction(quadrature):
    perturbed = heat_jump(SPACE, MARKS, reaction=5.0)
    broken = check_monotonicity(perturbed, SPACE, SAMPLER, TRIALS, quadrature, seed=11)
    assert not broken.passed
    fixed = exponential_transform(perturbed, 10.0)
    report = check_monotonicity(fixed, SPACE, SAMPLER, TRIALS, quadrature, seed=11)
    assert report.passed


def test_transform_rejects_negative_rate(base):
    with pytest.raises(ValueError):
        exponential_transform(base, -1.0)


def test_additive_and_semilinear_pass_all(quadrature):
    for triple in (additive_multimode(SPACE, MARKS), semilinear(SPACE, MARKS)):
        assert check_monotonicity(
            triple, SPACE, SAMPLER, TRIALS, quadrature, seed=13
        ).passed
        assert check_coercivity(
            triple, SPACE, SAMPLER, TRIALS, quadrature, seed=14
        ).passed
        assert check_growth(
            triple, SPACE, SAMPLER, TRIALS, quadrature, seed=15
        ).passed
        assert check_bf_bounds(
            triple, SPACE, SAMPLER, TRIALS, quadrature, seed=16
        ).passed
