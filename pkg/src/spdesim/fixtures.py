"""Shipped coefficient families on the sine basis.

Three fixtures cover the regimes the schemes need to exercise:

* ``heat_jump`` - half-Laplacian drift, gradient noise against one Wiener
  mode, and Lipschitz state-dependent jumps weighted by the mark.  An
  optional linear reaction term breaks plain dissipativity while
  remaining within the relaxed (rate-K) version, which the exponential
  transform removes exactly.
* ``additive_multimode`` - half-Laplacian drift with constant
  multi-mode Wiener noise (mode k scaled k^{-3/2}) and an additive
  first-mode jump; exercises Wiener truncation levels.
* ``semilinear`` - half-Laplacian plus a bounded non-increasing scalar
  nonlinearity applied pointwise in space through composite quadrature;
  exercises the nonlinear implicit solver.

Evaluator classes are module level and stateless so triples can cross
process pools, and all are dimension polymorphic: called with the first n
coordinates they return the leading-subspace projection of the operator
value, consistently with the nested basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientTriple, ConditionConstants
from .space import sine_basis_matrix, sine_derivative_matrix


@dataclass(frozen=True)
class LinearDrift:
    """A(x) = M x for an ambient matrix M, restricted by input length."""

    matrix: np.ndarray

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        n = x.size
        return self.matrix[:n, :n] @ x


@dataclass(frozen=True)
class MatrixNoise:
    """B(x) = theta · D x against a single Wiener mode."""

    matrix: np.ndarray
    theta: float

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        n = x.size
        return (self.theta * (self.matrix[:n, :n] @ x))[:, None]


@dataclass(frozen=True)
class ConstantNoise:
    """State-independent B with a fixed coordinate matrix."""

    matrix: np.ndarray

    def __call__(self, t, x):
        n = np.asarray(x).size
        return self.matrix[:n, :]


@dataclass(frozen=True)
class SineJumpProfile:
    """Coordinatewise Lipschitz map x -> amplitude · sin(x)."""

    amplitude: float

    def __call__(self, t, x):
        return self.amplitude * np.sin(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FirstModeProfile:
    """Constant profile pointing along the first basis vector."""

    def __call__(self, t, x):
        out = np.zeros(np.asarray(x).size)
        out[0] = 1.0
        return out


@dataclass(frozen=True)
class ZeroProfile:
    def __call__(self, t, x):
        return np.zeros(np.asarray(x).size)


@dataclass(frozen=True)
class IdentityWeight:
    def __call__(self, xi):
        return np.asarray(xi, dtype=float)


@dataclass(frozen=True)
class WeightedJump:
    """F(t, x, ξ) = weight(ξ) · profile(t, x), broadcast over marks."""

    profile: object
    weight: object

    def __call__(self, t, x, xi):
        w = np.asarray(self.weight(xi), dtype=float)
        return np.multiply.outer(np.asarray(self.profile(t, x), dtype=float), w)


@dataclass(frozen=True)
class ZeroNoise:
    def __call__(self, t, x):
        return np.zeros((np.asarray(x).size, 1))


@dataclass(frozen=True)
class ZeroJump:
    def __call__(self, t, x, xi):
        w = np.asarray(xi, dtype=float)
        return np.multiply.outer(np.zeros(np.asarray(x).size), w)


@dataclass(frozen=True)
class SemilinearDrift:
    """A(x) = -1/2 Δx + pointwise g(u) integrated against the basis.

    g(s) = -amplitude · tanh(s): bounded, non-increasing, Lipschitz with
    constant `amplitude`, so the perturbation is itself dissipative.  The
    spatial integrals use composite Gauss-Legendre with 4 points per basis
    half-wave of the ambient resolution.
    """

    basis: np.ndarray
    quad_weights: np.ndarray
    laplace_diag: np.ndarray
    amplitude: float

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        n = x.size
        u_nodes = self.basis[:n].T @ x
        g_nodes = -self.amplitude * np.tanh(u_nodes)
        return self.laplace_diag[:n] * x + self.basis[:n] @ (self.quad_weights * g_nodes)


def _sine_quadrature(dim, points_per_halfwave=4):
    """Composite Gauss-Legendre rule on (0, 1), `dim` cells."""
    nodes01, w01 = np.polynomial.legendre.leggauss(points_per_halfwave)
    nodes01 = 0.5 * (nodes01 + 1.0)
    w01 = 0.5 * w01
    offsets = np.arange(dim)[:, None] / dim
    nodes = (offsets + nodes01[None, :] / dim).ravel()
    weights = np.tile(w01 / dim, dim)
    return nodes, weights


def _laplace_diag(dim):
    k = np.arange(1, dim + 1, dtype=float)
    return -0.5 * (k * np.pi) ** 2


def heat_jump(
    space,
    marks,
    theta=0.5,
    lipschitz=0.1,
    reaction=0.0,
    lambda_const=None,
    alpha=None,
    k1=0.1,
    k1bar=None,
    k2=0.1,
    horizon=1.0,
):
    """Gradient-noise heat equation with multiplicative mark-weighted jumps.

    Constants are calibrated from the parameters: the coercivity weight
    defaults to (1 − θ²)/2, the growth constant covers the half-Laplacian
    plus the reaction term, and the H-growth allowance absorbs the jump
    intensity plus twice the reaction rate.
    """
    if not -1.0 < theta < 1.0 and lambda_const is None:
        raise ValueError("theta outside (-1, 1) requires an explicit lambda_const")
    lam = (1.0 - theta**2) / 2.0 if lambda_const is None else float(lambda_const)
    if lam <= 0:
        raise ValueError("coercivity weight must be positive")
    if alpha is None:
        alpha = max(2.0, 1.1 * (0.5 + reaction / np.pi**2) ** 2 / lam**2)
    if k1bar is None:
        k1bar = 0.05 + 2.0 * max(reaction, 0.0)
    dim = space.dim
    drift = np.diag(_laplace_diag(dim) + reaction)
    profile = SineJumpProfile(lipschitz)
    return CoefficientTriple(
        dim=dim,
        eval_A=LinearDrift(drift),
        eval_B=MatrixNoise(sine_derivative_matrix(dim), theta),
        eval_F=WeightedJump(profile, marks.weight),
        constants=ConditionConstants(
            p=2.0,
            alpha=float(alpha),
            lambda_fn=lam,
            k1_fn=float(k1),
            k1bar_fn=float(k1bar),
            k2_fn=float(k2),
            horizon=horizon,
        ),
        autonomous=True,
        wiener_modes=1,
        linear_A=drift,
        jump_profile=profile,
    )


def additive_multimode(
    space,
    marks,
    modes=None,
    lambda_const=0.5,
    alpha=1.25,
    k1=2.0,
    k1bar=0.0,
    k2=0.5,
    horizon=1.0,
):
    """Heat drift with additive decaying multi-mode noise and a first-mode jump."""
    dim = space.dim
    modes = dim if modes is None else int(modes)
    sigma = np.arange(1, modes + 1, dtype=float) ** -1.5
    b = np.zeros((dim, modes))
    np.fill_diagonal(b, sigma[: min(dim, modes)])
    profile = FirstModeProfile()
    drift = np.diag(_laplace_diag(dim))
    return CoefficientTriple(
        dim=dim,
        eval_A=LinearDrift(drift),
        eval_B=ConstantNoise(b),
        eval_F=WeightedJump(profile, marks.weight),
        constants=ConditionConstants(
            p=2.0,
            alpha=float(alpha),
            lambda_fn=float(lambda_const),
            k1_fn=float(k1),
            k1bar_fn=float(k1bar),
            k2_fn=float(k2),
            horizon=horizon,
        ),
        autonomous=True,
        wiener_modes=modes,
        linear_A=drift,
        jump_profile=profile,
    )


def semilinear(
    space,
    marks=None,
    amplitude=0.5,
    lambda_const=0.5,
    alpha=1.5,
    k1=0.1,
    k1bar=0.0,
    k2=1.0,
    horizon=1.0,
):
    """Nonlinear dissipative drift, no driving noise; solver workout."""
    dim = space.dim
    nodes, weights = _sine_quadrature(dim)
    profile = ZeroProfile()
    weight = marks.weight if marks is not None else IdentityWeight()
    return CoefficientTriple(
        dim=dim,
        eval_A=SemilinearDrift(
            basis=sine_basis_matrix(dim, nodes),
            quad_weights=weights,
            laplace_diag=_laplace_diag(dim),
            amplitude=float(amplitude),
        ),
        eval_B=ZeroNoise(),
        eval_F=WeightedJump(profile, weight),
        constants=ConditionConstants(
            p=2.0,
            alpha=float(alpha),
            lambda_fn=float(lambda_const),
            k1_fn=float(k1),
            k1bar_fn=float(k1bar),
            k2_fn=float(k2),
            horizon=horizon,
        ),
        autonomous=True,
        wiener_modes=0,
        linear_A=None,
        jump_profile=profile,
    )


def zero_triple(space, marks=None, horizon=1.0):
    """A = B = F = 0; transports the initial condition unchanged."""
    profile = ZeroProfile()
    weight = marks.weight if marks is not None else IdentityWeight()
    dim = space.dim
    return CoefficientTriple(
        dim=dim,
        eval_A=LinearDrift(np.zeros((dim, dim))),
        eval_B=ZeroNoise(),
        eval_F=WeightedJump(profile, weight),
        constants=ConditionConstants(
            p=2.0,
            alpha=1.0,
            lambda_fn=1e-6,
            k1_fn=0.0,
            k1bar_fn=0.0,
            k2_fn=0.0,
            horizon=horizon,
        ),
        autonomous=True,
        wiener_modes=0,
        linear_A=np.zeros((dim, dim)),
        jump_profile=profile,
    )
