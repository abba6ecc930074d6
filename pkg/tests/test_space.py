import numpy as np
import pytest
import scipy.integrate

from spdesim.space import (
    build_sine_space,
    c_b,
    embed,
    norms,
    pairing,
    project,
    restrict,
    sine_basis_matrix,
    smooth_profile,
)


def sine_gram_oracle(n):
    """V-Gram entries by direct quadrature of the derivative products."""
    gram = np.zeros((n, n))
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            f = lambda x: (
                np.sqrt(2) * j * np.pi * np.cos(j * np.pi * x)
                * np.sqrt(2) * k * np.pi * np.cos(k * np.pi * x)
            )
            gram[j - 1, k - 1], _ = scipy.integrate.quad(f, 0.0, 1.0, limit=200)
    return gram


def test_sine_space_gram_against_quadrature():
    space = build_sine_space(3)
    assert np.allclose(space.v_gram, sine_gram_oracle(3), rtol=1e-10, atol=1e-10)


def test_sine_space_dim_one():
    space = build_sine_space(1)
    assert space.v_gram.shape == (1, 1)
    assert space.v_gram[0, 0] == pytest.approx(np.pi**2, rel=1e-12)


def test_sine_space_rejects_zero():
    with pytest.raises(ValueError):
        build_sine_space(0)


def test_nesting_restriction_matches_smaller_space():
    big = build_sine_space(2)
    small = restrict(big, 1)
    direct = build_sine_space(1)
    assert np.array_equal(small.v_gram, direct.v_gram)
    assert small.basis_id == direct.basis_id


def test_project_identity_on_own_space():
    space = build_sine_space(4)
    x = np.array([0.3, -1.2, 4.0, 0.01])
    assert np.array_equal(project(space, x), x)


def test_project_truncates_coordinates():
    space = build_sine_space(2)
    assert np.array_equal(project(space, np.array([1.0, 2.0, 3.0])), [1.0, 2.0])


def test_project_is_h_contraction():
    rng = np.random.default_rng(7)
    small = build_sine_space(3)
    for _ in range(1000):
        x = rng.normal(size=8)
        assert np.linalg.norm(project(small, x)) <= np.linalg.norm(x) + 1e-15


def test_project_idempotent_and_self_adjoint():
    rng = np.random.default_rng(8)
    space = build_sine_space(3)
    for _ in range(200):
        h = rng.normal(size=6)
        k = rng.normal(size=6)
        ph = embed(project(space, h), 6)
        pk = embed(project(space, k), 6)
        assert np.array_equal(project(space, ph), project(space, h))
        assert ph @ k == pytest.approx(h @ pk, abs=1e-12)


def test_project_rejects_cross_family():
    sine = build_sine_space(2)
    other = build_sine_space(4)
    object.__setattr__(other, "basis_id", "custom-family")
    with pytest.raises(ValueError):
        project(sine, np.ones(4), source=other)


def test_project_rejects_short_vector():
    space = build_sine_space(4)
    with pytest.raises(ValueError):
        project(space, np.ones(2))


def test_pairing_and_projection_symmetry():
    rng = np.random.default_rng(9)
    space = build_sine_space(2)
    assert pairing(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0
    assert pairing(np.arange(3.0), np.zeros(3)) == 0.0
    for _ in range(100):
        x = rng.normal(size=4)
        phi = rng.normal(size=4)
        lhs = pairing(project(space, x), project(space, phi))
        rhs = pairing(project(space, x), project(space, phi))
        assert lhs == rhs
        # adjoint identity in the ambient space
        assert pairing(embed(project(space, x), 4), phi) == pytest.approx(
            pairing(x, embed(project(space, phi), 4)), abs=1e-12
        )


def test_pairing_dimension_mismatch():
    with pytest.raises(ValueError):
        pairing(np.ones(2), np.ones(3))


@pytest.mark.parametrize("n,expected", [(1, np.pi**2), (2, 5 * np.pi**2)])
def test_c_b_small_values(n, expected):
    assert c_b(build_sine_space(n)) == pytest.approx(expected, rel=1e-12)


def test_c_b_closed_form_and_monotone():
    values = []
    for n in range(1, 65):
        got = c_b(build_sine_space(n))
        want = np.pi**2 * n * (n + 1) * (2 * n + 1) / 6.0
        assert got == pytest.approx(want, rel=1e-10)
        values.append(got)
    assert all(b > a for a, b in zip(values, values[1:]))


def test_norms_zero_vector():
    space = build_sine_space(3)
    assert norms(space, np.zeros(3)) == (0.0, 0.0, 0.0)


def test_norms_dim_one_triple():
    space = build_sine_space(1)
    h, v, dual = norms(space, np.array([1.0]))
    assert h == pytest.approx(1.0, rel=1e-14)
    assert v == pytest.approx(np.pi, rel=1e-14)
    assert dual == pytest.approx(1.0 / np.pi, rel=1e-14)


def test_norms_rejects_nonfinite():
    space = build_sine_space(2)
    with pytest.raises(ValueError):
        norms(space, np.array([1.0, np.nan]))


def test_norm_inequalities_random():
    rng = np.random.default_rng(11)
    space = build_sine_space(8)
    big = build_sine_space(16)
    cb = c_b(space)
    for _ in range(2000):
        x = rng.uniform(-5, 5, 16)
        px = project(space, x)
        h, v, _ = norms(space, px)
        _, _, dual_big = norms(big, x)
        assert v**2 <= cb * h**2 * (1 + 1e-10) + 1e-12
        assert h**2 <= cb * dual_big**2 * (1 + 1e-10) + 1e-12


def test_projection_error_decreases_on_smooth_profile():
    profile = smooth_profile(64, normalize=False)
    errors = []
    for n in (2, 4, 8, 16, 32):
        space = build_sine_space(n)
        tail = profile.copy()
        tail[:n] = 0.0
        errors.append(np.linalg.norm(tail))
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_smooth_profile_matches_quadrature_coefficients():
    profile = smooth_profile(5, normalize=False)
    for k in range(1, 6):
        f = lambda x: x * (1 - x) * np.sqrt(2) * np.sin(k * np.pi * x)
        want, _ = scipy.integrate.quad(f, 0.0, 1.0, limit=100)
        assert profile[k - 1] == pytest.approx(want, abs=1e-12)


def test_space_rejects_indefinite_gram():
    from spdesim.space import GalerkinSpace

    bad = GalerkinSpace(dim=2, v_gram=np.array([[1.0, 0.0], [0.0, -1.0]]), basis_id="x")
    with pytest.raises(ValueError):
        norms(bad, np.ones(2))


def test_space_rejects_asymmetric_gram():
    from spdesim.space import GalerkinSpace

    with pytest.raises(ValueError):
        GalerkinSpace(dim=2, v_gram=np.array([[1.0, 0.5], [0.0, 1.0]]), basis_id="x")


def test_sine_basis_matrix_orthonormal():
    nodes, weights = np.polynomial.legendre.leggauss(64)
    nodes = 0.5 * (nodes + 1)
    weights = 0.5 * weights
    basis = sine_basis_matrix(4, nodes)
    gram = (basis * weights) @ basis.T
    assert np.allclose(gram, np.eye(4), atol=1e-12)
