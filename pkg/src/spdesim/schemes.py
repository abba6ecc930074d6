"""Explicit and implicit Galerkin time-stepping schemes.

The explicit scheme starts from zero, injects the projected initial
condition at the first knot, and advances with lagged-window coefficient
means; its stability is governed by the product of the step size with the
basis constant of the space.  The implicit schemes start from the
(projected) initial condition and solve a monotone step equation in which
the drift is averaged over the current window while the noise
coefficients keep their lagged windows.  "Unprojected" runs are realized
at the ambient resolution of the experiment: a truly infinite-dimensional
state is not representable, and the two variants differ only through the
projection dimension.

Explicit trajectories that leave double-precision range record the first
non-finite step and stop instead of raising: instability outside the
stability region is a legitimate, reportable outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .averaging import (
    DEFAULT_QUADRATURE,
    cell_weight_means,
    impl_A,
    tilde_B,
    tilde_F,
    time_mean,
)
from .noise import TimeGrid, build_partition, coarsen_wiener, compensated_cell_increments
from .rng import TAG_INITIAL, derive_key, make_generator
from .space import c_b, project, restrict, smooth_profile

EXPLICIT = "explicit"
IMPLICIT = "implicit"
IMPLICIT_PROJECTED = "implicit_projected"
SCHEME_KINDS = (EXPLICIT, IMPLICIT, IMPLICIT_PROJECTED)


class ImplicitStepError(RuntimeError):
    """Raised when the monotone step equation cannot be solved."""


@dataclass(frozen=True)
class SchemeConfig:
    """Resolution triple and initial condition of one scheme run.

    `initial` may be a coordinate vector (length >= n; projected), a
    callable receiving a numpy Generator for random initial data, or None
    for the default smooth profile.  The Wiener truncation and the
    mark-partition level share `l`.
    """

    kind: str
    n: int
    m: int
    l: int
    gamma: float = 0.5
    initial: object = None
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.n < 1 or self.m < 2 or self.l < 1:
            raise ValueError("need n >= 1, m >= 2, l >= 1")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool


@dataclass
class Trajectory:
    """Grid values of one scheme run plus per-step diagnostics."""

    kind: str
    n: int
    m: int
    l: int
    knots: np.ndarray
    values: np.ndarray
    blow_up_step: int | None = None
    solver_iterations: list = field(default_factory=list)
    solver_residuals: list = field(default_factory=list)
    vnorm_weighted: float = 0.0

    @property
    def final(self):
        return self.values[self.m]

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "n": self.n,
                "m": self.m,
                "l": self.l,
                "knots": self.knots.tolist(),
                "values": self.values.tolist(),
                "blow_up_step": self.blow_up_step,
                "solver_iterations": list(self.solver_iterations),
                "solver_residuals": list(self.solver_residuals),
                "vnorm_weighted": self.vnorm_weighted,
            }
        )

    def final_csv(self):
        lines = ["mode,value"]
        for k, value in enumerate(self.final, start=1):
            lines.append(f"{k},{value:.17g}")
        return "\n".join(lines) + "\n"


def stability_margin(alpha, grid, space, gamma=0.5):
    """(ρ, gate) for the explicit scheme: ρ = 1 − α·δ·C_B and α·δ·C_B ≤ γ."""
    product = alpha * grid.delta * c_b(space)
    return 1.0 - product, bool(product <= gamma)


def step_energy_bound(constants, space, grid, zeta_sq):
    """A-priori bound on sup_i E‖u(t_i)‖_H² inside the stability region.

    Follows the coercivity convention: the H-quadratic allowance K̄1 drives
    the exponential, the additive allowances K1 and δ·C_B·K2 the constant.
    """
    k1, _ = scipy.integrate.quad(constants.k1_fn, 0.0, grid.T, limit=200)
    k1bar, _ = scipy.integrate.quad(constants.k1bar_fn, 0.0, grid.T, limit=200)
    k2, _ = scipy.integrate.quad(constants.k2_fn, 0.0, grid.T, limit=200)
    base = zeta_sq + k1 + grid.delta * c_b(space) * k2
    return base * np.exp(k1bar)


def _resolve_initial(config, space, master_seed):
    init = config.initial
    if init is None:
        zeta = smooth_profile(config.n)
    elif callable(init):
        zeta = np.asarray(
            init(make_generator(derive_key(master_seed, TAG_INITIAL))), dtype=float
        )
    else:
        zeta = np.asarray(init, dtype=float)
    if zeta.size < config.n:
        raise ValueError(f"initial condition has {zeta.size} < n = {config.n} coords")
    return project(space, zeta)


def _jump_scalars(triple, grid, partition, bundle):
    """Per-step jump-term scalars for factorized jump coefficients.

    The compensated integral against a factorized F collapses to
    profile(x) times (sum of per-cell weight means at the observed jumps
    minus δ times the total weight mass of the level set).
    """
    ratio, wmass = cell_weight_means(triple, partition)
    scalars = np.zeros(grid.m + 1)
    if bundle.jump_times.size:
        steps = np.searchsorted(grid.knots, bundle.jump_times, side="left")
        cells = np.asarray(partition.locate(bundle.jump_marks))
        valid = cells >= 0
        np.add.at(scalars, steps[valid], ratio[cells[valid]])
    scalars[1:] -= grid.delta * float(wmass.sum())
    scalars[0] = 0.0
    return scalars


def _check_bundle(config, bundle):
    if bundle.m % config.m != 0:
        raise ValueError(f"bundle grid {bundle.m} not divisible by m = {config.m}")
    if config.l > bundle.l_level:
        raise ValueError(f"bundle level {bundle.l_level} < requested l = {config.l}")


def _diagnose(traj, space, constants, grid):
    last = traj.m if traj.blow_up_step is None else traj.blow_up_step - 1
    vals = traj.values[: last + 1]
    gram = space.v_gram
    vsq = np.einsum("ij,jk,ik->i", vals, gram, vals)
    lam = np.array([constants.lambda_fn(t) for t in grid.knots[: last + 1]])
    traj.vnorm_weighted = float(
        np.sum(grid.delta * lam * vsq ** (constants.p / 2.0))
    )


def run_explicit(space, triple, config, bundle, quad=DEFAULT_QUADRATURE):
    """Projected explicit scheme driven by one noise bundle."""
    if config.kind != EXPLICIT:
        raise ValueError(f"config kind {config.kind!r} is not explicit")
    if triple.constants.p != 2.0:
        raise ValueError("the explicit scheme requires p = 2")
    if triple.constants.lambda_max() > 1.0 + 1e-12:
        raise ValueError("the explicit scheme requires the coercivity weight <= 1")
    _check_bundle(config, bundle)
    n, m, l = config.n, config.m, config.l
    space = restrict(space, n)
    grid = TimeGrid(bundle.T, m)
    delta = grid.delta
    modes = min(l, triple.wiener_modes)
    dw = coarsen_wiener(bundle, m, modes)
    partition = build_partition(bundle.marks, l)
    zeta = _resolve_initial(config, space, bundle.master_seed)

    values = np.zeros((m + 1, n))
    values[1] = zeta
    factorized = triple.jump_profile is not None
    if factorized:
        scalars = _jump_scalars(triple, grid, partition, bundle)
    traj = Trajectory(
        kind=config.kind, n=n, m=m, l=l, knots=grid.knots, values=values
    )
    knots = grid.knots
    autonomous = triple.autonomous
    x = values[1]
    # overflow is reported through the blow-up marker, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(2, m + 1):
            if autonomous:
                tmid = 0.5 * (knots[i - 2] + knots[i - 1])
                drift = np.asarray(triple.eval_A(tmid, x), dtype=float)
                new = x + delta * drift
                if modes:
                    bmat = np.asarray(triple.eval_B(tmid, x), dtype=float)[:, :modes]
                    new = new + bmat @ dw[:, i - 1]
                if factorized:
                    new = new + scalars[i] * np.asarray(
                        triple.jump_profile(tmid, x), dtype=float
                    )
                else:
                    cols = tilde_F(triple, grid, partition, i, x, quad)
                    new = new + cols @ compensated_cell_increments(
                        bundle, partition, grid, i
                    )
            else:
                t0, t1 = float(knots[i - 2]), float(knots[i - 1])
                drift = time_mean(lambda s: triple.eval_A(s, x), t0, t1, False, quad)
                new = x + delta * drift
                if modes:
                    bmat = tilde_B(triple, grid, i, x, modes, quad)
                    new = new + bmat @ dw[:, i - 1]
                if factorized:
                    profile = time_mean(
                        lambda s: triple.jump_profile(s, x), t0, t1, False, quad
                    )
                    new = new + scalars[i] * profile
                else:
                    cols = tilde_F(triple, grid, partition, i, x, quad)
                    new = new + cols @ compensated_cell_increments(
                        bundle, partition, grid, i
                    )
            if not np.isfinite(new).all():
                traj.blow_up_step = i
                values[i:] = np.nan
                break
            values[i] = new
            x = new
    _diagnose(traj, space, triple.constants, grid)
    return traj


def solve_implicit_step(
    space,
    triple,
    grid,
    i,
    y,
    projected=True,
    tol=1e-10,
    max_iter=200,
    x0=None,
    quad=DEFAULT_QUADRATURE,
    _lu=None,
):
    """Solve x − δ·(Π_n)A^m_i(x) = y for the implicit step.

    Affine drifts are solved directly; otherwise a damped residual
    iteration runs first and a finite-difference Newton step takes over
    when it stalls.  Non-convergence signals that the step equation has
    left the strongly monotone regime, i.e. the time step is too large.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    delta = grid.delta
    target = tol * (1.0 + float(np.linalg.norm(y)))

    if triple.linear_A is not None and triple.autonomous:
        try:
            if _lu is None:
                mat = np.eye(n) - delta * triple.linear_A[:n, :n]
                _lu = scipy.linalg.lu_factor(mat)
            x = scipy.linalg.lu_solve(_lu, y)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise ImplicitStepError(
                "implicit step matrix is singular; increase the number of "
                "time steps m"
            ) from exc
        residual = float(
            np.linalg.norm(x - delta * impl_A(triple, grid, i, x, quad) - y)
        )
        return x, SolveReport(iterations=0, residual=residual, converged=True)

    def residual_vec(x):
        return x - delta * impl_A(triple, grid, i, x, quad) - y

    x = y.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    r = residual_vec(x)
    rn = float(np.linalg.norm(r))
    omega = 1.0
    stall = 0
    for iteration in range(1, max_iter + 1):
        if rn <= target:
            return x, SolveReport(iterations=iteration - 1, residual=rn, converged=True)
        if stall >= 3 or omega < 1e-3:
            # finite-difference Newton on the residual map
            jac = np.eye(n)
            h = 1e-7 * (1.0 + np.abs(x))
            base = delta * impl_A(triple, grid, i, x, quad)
            for k in range(n):
                xk = x.copy()
                xk[k] += h[k]
                jac[:, k] -= (delta * impl_A(triple, grid, i, xk, quad) - base) / h[k]
            try:
                dx = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError as exc:
                raise ImplicitStepError(
                    "implicit step linearization is singular; increase m"
                ) from exc
            step = 1.0
            for _ in range(30):
                xn = x - step * dx
                r_new = residual_vec(xn)
                rn_new = float(np.linalg.norm(r_new))
                if rn_new < rn:
                    x, r, rn = xn, r_new, rn_new
                    break
                step *= 0.5
            else:
                raise ImplicitStepError(
                    "implicit step iteration cannot reduce the residual; increase m"
                )
            omega, stall = 1.0, 0
            continue
        xn = x - omega * r
        r_new = residual_vec(xn)
        rn_new = float(np.linalg.norm(r_new))
        if rn_new < rn:
            if rn_new > 0.5 * rn:
                stall += 1
            x, r, rn = xn, r_new, rn_new
            omega = min(1.0, omega * 1.5)
        else:
            omega *= 0.5
            stall += 1
    if rn <= target:
        return x, SolveReport(iterations=max_iter, residual=rn, converged=True)
    raise ImplicitStepError(
        f"implicit step did not converge within {max_iter} iterations "
        f"(residual {rn:.3e} > {target:.3e}); increase the number of time steps m"
    )


def run_implicit(space, triple, config, bundle, quad=DEFAULT_QUADRATURE):
    """Implicit scheme (plain or projected) driven by one noise bundle.

    The plain variant runs at the ambient resolution of the supplied
    space, the projected variant at config.n; within the nested basis the
    two share one code path since projection is coordinate truncation.
    """
    if config.kind not in (IMPLICIT, IMPLICIT_PROJECTED):
        raise ValueError(f"config kind {config.kind!r} is not implicit")
    _check_bundle(config, bundle)
    n, m, l = config.n, config.m, config.l
    space = restrict(space, n)
    grid = TimeGrid(bundle.T, m)
    delta = grid.delta
    modes = min(l, triple.wiener_modes)
    dw = coarsen_wiener(bundle, m, modes)
    partition = build_partition(bundle.marks, l)
    zeta = _resolve_initial(config, space, bundle.master_seed)

    values = np.zeros((m + 1, n))
    values[0] = zeta
    factorized = triple.jump_profile is not None
    if factorized:
        scalars = _jump_scalars(triple, grid, partition, bundle)
    traj = Trajectory(
        kind=config.kind, n=n, m=m, l=l, knots=grid.knots, values=values
    )
    lu = None
    if triple.linear_A is not None and triple.autonomous:
        lu = scipy.linalg.lu_factor(np.eye(n) - delta * triple.linear_A[:n, :n])
    knots = grid.knots
    autonomous = triple.autonomous
    x = values[0]
    for i in range(1, m + 1):
        y = x
        if i >= 2:
            if autonomous:
                tmid = 0.5 * (knots[i - 2] + knots[i - 1])
                if modes:
                    bmat = np.asarray(triple.eval_B(tmid, x), dtype=float)[:, :modes]
                    y = y + bmat @ dw[:, i - 1]
                if factorized:
                    y = y + scalars[i] * np.asarray(
                        triple.jump_profile(tmid, x), dtype=float
                    )
                else:
                    cols = tilde_F(triple, grid, partition, i, x, quad)
                    y = y + cols @ compensated_cell_increments(
                        bundle, partition, grid, i
                    )
            else:
                if modes:
                    bmat = tilde_B(triple, grid, i, x, modes, quad)
                    y = y + bmat @ dw[:, i - 1]
                t0, t1 = float(knots[i - 2]), float(knots[i - 1])
                if factorized:
                    profile = time_mean(
                        lambda s: triple.jump_profile(s, x), t0, t1, False, quad
                    )
                    y = y + scalars[i] * profile
                else:
                    cols = tilde_F(triple, grid, partition, i, x, quad)
                    y = y + cols @ compensated_cell_increments(
                        bundle, partition, grid, i
                    )
        x, report = solve_implicit_step(
            space,
            triple,
            grid,
            i,
            y,
            projected=config.kind == IMPLICIT_PROJECTED,
            tol=config.tol,
            max_iter=config.max_iter,
            quad=quad,
            _lu=lu,
        )
        values[i] = x
        traj.solver_iterations.append(report.iterations)
        traj.solver_residuals.append(report.residual)
    _diagnose(traj, space, triple.constants, grid)
    return traj


def run_scheme(space, triple, config, bundle, quad=DEFAULT_QUADRATURE):
    """Dispatch on the configured scheme kind."""
    if config.kind == EXPLICIT:
        return run_explicit(space, triple, config, bundle, quad)
    return run_implicit(space, triple, config, bundle, quad)
