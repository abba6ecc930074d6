"""Integral-mean discretizations of the coefficients.

The explicit time stepping replaces each coefficient at step i with its
average over the *previous* subinterval [t_{i−2}, t_{i−1}] (zero at the
first two knots); the implicit stepping averages the drift over the
*current* subinterval [t_{i−1}, t_i] instead.  Jump coefficients are
additionally averaged over each partition cell against the intensity
measure, with the convention 0/0 = 0 on massless cells.

Time means use Gauss-Legendre nodes per window, exact for autonomous
coefficients (evaluated once at the window midpoint) and for polynomial
time dependence up to degree 2·points − 1.  Mark-cell integrals use the
closed-form weight masses whenever the triple declares the factorized
form F = weight(ξ)·profile(t, x), and per-cell quadrature against the
density otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre nodes per time subinterval."""

    points_per_step: int = 4

    def __post_init__(self):
        if self.points_per_step < 1:
            raise ValueError("need at least one quadrature point per step")


DEFAULT_QUADRATURE = QuadratureSpec()


@lru_cache(maxsize=16)
def _unit_rule(points):
    nodes, weights = np.polynomial.legendre.leggauss(points)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def time_mean(fn, t0, t1, autonomous, quad=DEFAULT_QUADRATURE):
    """Average of fn over [t0, t1]; a single evaluation when autonomous."""
    if autonomous:
        return np.asarray(fn(0.5 * (t0 + t1)), dtype=float)
    nodes, weights = _unit_rule(quad.points_per_step)
    ts = t0 + (t1 - t0) * nodes
    acc = weights[0] * np.asarray(fn(ts[0]), dtype=float)
    for w, t in zip(weights[1:], ts[1:]):
        acc = acc + w * np.asarray(fn(t), dtype=float)
    return acc


def _check_step(grid, i):
    if not 0 <= i <= grid.m:
        raise ValueError(f"step index {i} outside 0..{grid.m}")


def _lagged_window(grid, i):
    knots = grid.knots
    return float(knots[i - 2]), float(knots[i - 1])


def tilde_A(triple, grid, i, x, quad=DEFAULT_QUADRATURE):
    """Drift averaged over the previous subinterval; zero at the first two knots."""
    _check_step(grid, i)
    x = np.asarray(x, dtype=float)
    if i < 2:
        return np.zeros(x.size)
    t0, t1 = _lagged_window(grid, i)
    return time_mean(lambda s: triple.eval_A(s, x), t0, t1, triple.autonomous, quad)


def tilde_B(triple, grid, i, x, modes=None, quad=DEFAULT_QUADRATURE):
    """Wiener coefficient averaged over the previous subinterval.

    Columns beyond `modes` (the Wiener truncation level) are dropped.
    """
    _check_step(grid, i)
    x = np.asarray(x, dtype=float)
    width = triple.wiener_modes if modes is None else min(modes, triple.wiener_modes)
    if i < 2:
        return np.zeros((x.size, width))
    t0, t1 = _lagged_window(grid, i)
    full = time_mean(lambda s: triple.eval_B(s, x), t0, t1, triple.autonomous, quad)
    return full[:, :width]


def cell_weight_means(triple, partition):
    """Per-cell ratio ∫ weight ν / ν for a factorized jump coefficient."""
    wmass = np.asarray(
        partition.marks.weight_mass(partition.lo, partition.hi), dtype=float
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(partition.nu > 0, wmass / partition.nu, 0.0)
    return ratio, wmass


def tilde_F(triple, grid, partition, i, x, quad=DEFAULT_QUADRATURE, points_per_cell=4):
    """Jump coefficient averaged in time and over each partition cell.

    Returns a (dim, cells) matrix whose column j is the mean of F over
    [t_{i−2}, t_{i−1}] × cell_j against the normalized cell mass; columns
    are zero at the first two knots and for massless cells.
    """
    _check_step(grid, i)
    x = np.asarray(x, dtype=float)
    if i < 2:
        return np.zeros((x.size, partition.size))
    t0, t1 = _lagged_window(grid, i)
    if triple.jump_profile is not None:
        ratio, _ = cell_weight_means(triple, partition)
        profile = time_mean(
            lambda s: triple.jump_profile(s, x), t0, t1, triple.autonomous, quad
        )
        return np.multiply.outer(profile, ratio)

    nodes, weights = partition.marks.cell_rule(
        partition.lo, partition.hi, points_per_cell
    )

    def cell_integrals(s):
        vals = np.asarray(triple.eval_F(s, x, nodes.ravel()), dtype=float)
        vals = vals.reshape(x.size, partition.size, -1)
        return np.einsum("dcq,cq->dc", vals, weights)

    integrals = time_mean(cell_integrals, t0, t1, triple.autonomous, quad)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(partition.nu > 0, integrals / partition.nu, 0.0)


def impl_A(triple, grid, i, x, quad=DEFAULT_QUADRATURE):
    """Drift averaged over the current subinterval; zero at the origin knot."""
    _check_step(grid, i)
    x = np.asarray(x, dtype=float)
    if i == 0:
        return np.zeros(x.size)
    knots = grid.knots
    t0, t1 = float(knots[i - 1]), float(knots[i])
    return time_mean(lambda s: triple.eval_A(s, x), t0, t1, triple.autonomous, quad)
