"""Finite-dimensional Galerkin subspaces of a Gelfand triple V ⊂ H ⊂ V*.

A space is described by a basis family whose members are orthonormal in H,
so coordinate vectors *are* H-inner products and the H-Gram matrix is the
identity by construction.  The V-geometry enters through an explicit Gram
matrix, and dual norms are evaluated with its inverse, i.e. as the norm of
a functional restricted to the subspace.  Vectors are plain float arrays:
an "H vector" holds coordinates against the basis, a "dual vector" holds
the actions of a functional on the basis; both coincide numerically for
functionals represented by H elements.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

SINE_FAMILY = "sine-dirichlet-(0,1)"


@dataclass(frozen=True)
class GalerkinSpace:
    """Span of the first `dim` members of a nested, H-orthonormal basis."""

    dim: int
    v_gram: np.ndarray
    basis_id: str
    p_exponent: float = 2.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"space dimension must be >= 1, got {self.dim}")
        gram = np.asarray(self.v_gram, dtype=float)
        if gram.shape != (self.dim, self.dim):
            raise ValueError("v_gram shape does not match dim")
        if not np.isfinite(gram).all():
            raise ValueError("v_gram has non-finite entries")
        if not np.allclose(gram, gram.T, rtol=1e-12, atol=1e-12):
            raise ValueError("v_gram must be symmetric")
        object.__setattr__(self, "v_gram", gram)
        if self.p_exponent < 2.0:
            raise ValueError("p exponent must be >= 2")

    @cached_property
    def _v_chol(self):
        # Also certifies positive definiteness on first use.
        try:
            return scipy.linalg.cho_factor(self.v_gram, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("v_gram is not positive definite") from exc


def build_sine_space(n, p_exponent=2.0):
    """Span of sqrt(2)·sin(kπx), k = 1..n, on (0,1) with Dirichlet ends.

    H is L²(0,1); the V-norm is the L² norm of the derivative, whose Gram
    matrix is diag(k²π²).
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    k = np.arange(1, n + 1, dtype=float)
    return GalerkinSpace(
        dim=int(n),
        v_gram=np.diag((k * np.pi) ** 2),
        basis_id=SINE_FAMILY,
        p_exponent=p_exponent,
    )


def restrict(space, n):
    """Leading-subspace of dimension n from the same basis family."""
    if not 1 <= n <= space.dim:
        raise ValueError(f"cannot restrict dim-{space.dim} space to {n}")
    if n == space.dim:
        return space
    return GalerkinSpace(
        dim=int(n),
        v_gram=space.v_gram[:n, :n],
        basis_id=space.basis_id,
        p_exponent=space.p_exponent,
    )


def _as_vector(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d coordinate vector, got shape {x.shape}")
    return x


def project(space, x, source=None):
    """First space.dim coordinates of x.

    Because the basis is H-orthonormal this single formula is both the
    orthogonal H-projection and its continuous extension to functionals.
    """
    x = _as_vector(x)
    if source is not None and source.basis_id != space.basis_id:
        raise ValueError(
            f"cannot project across basis families "
            f"({source.basis_id!r} -> {space.basis_id!r})"
        )
    if x.size < space.dim:
        raise ValueError(f"source dimension {x.size} < target {space.dim}")
    return x[: space.dim].copy()


def embed(x, dim):
    """Zero-pad coordinates into a larger space of the same family."""
    x = _as_vector(x)
    if x.size > dim:
        raise ValueError(f"cannot embed dim-{x.size} vector into dim {dim}")
    out = np.zeros(dim)
    out[: x.size] = x
    return out


def c_b(space):
    """Sum of squared V-norms of the basis vectors (trace of the V-Gram)."""
    return float(np.trace(space.v_gram))


def norms(space, x):
    """(H-norm, V-norm, dual norm) of a coordinate vector in the space.

    The dual norm is the exact V*-norm of the functional restricted to the
    subspace, i.e. the Gram-inverse quadratic form.
    """
    x = _as_vector(x)
    if x.size != space.dim:
        raise ValueError(f"vector of length {x.size} not in dim-{space.dim} space")
    if not np.isfinite(x).all():
        raise ValueError("non-finite coordinates")
    h = float(np.linalg.norm(x))
    v = float(np.sqrt(x @ (space.v_gram @ x)))
    dual = float(np.sqrt(x @ scipy.linalg.cho_solve(space._v_chol, x)))
    return h, v, dual


def pairing(x, phi):
    """Duality pairing of coordinates with functional actions."""
    x = _as_vector(x)
    phi = _as_vector(phi)
    if x.size != phi.size:
        raise ValueError(f"dimension mismatch: {x.size} vs {phi.size}")
    return float(x @ phi)


def sine_basis_matrix(n, points):
    """Matrix e_k(x_i) of the sine family, shape (n, len(points))."""
    points = np.asarray(points, dtype=float)
    k = np.arange(1, n + 1, dtype=float)[:, None]
    return np.sqrt(2.0) * np.sin(k * np.pi * points[None, :])


def sine_derivative_matrix(n):
    """H-coordinates of projected derivatives in the sine family.

    Column k holds the coordinates of Π_n(e_k'); entries are
    4jk/(j² − k²) when j + k is odd and zero otherwise (antisymmetric).
    """
    j = np.arange(1, n + 1, dtype=float)[:, None]
    k = np.arange(1, n + 1, dtype=float)[None, :]
    odd = ((j + k) % 2) == 1
    denom = np.where(odd, j**2 - k**2, 1.0)
    return np.where(odd, 4.0 * j * k / denom, 0.0)


def smooth_profile(dim, normalize=True):
    """Sine coordinates of x(1−x): a fixed smooth initial profile."""
    k = np.arange(1, dim + 1, dtype=float)
    coeff = np.where(k % 2 == 1, 4.0 * np.sqrt(2.0) / (np.pi * k) ** 3, 0.0)
    if normalize:
        coeff = coeff / np.linalg.norm(coeff)
    return coeff
