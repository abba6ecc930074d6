"""Monte Carlo driver, coupled strong-error estimation, and suites.

Paths are embarrassingly parallel: path j draws its bundle from a key
derived from (master_seed, path tag, j), workers return completed per-path
results only, and aggregation always runs single-threaded in path order
with compensated summation, so the output is byte-identical no matter how
many workers computed it.

Strong errors are estimated at the terminal time only: per path one
bundle at the finest resolution drives both the coarse and the fine run,
and the squared H-distance of the terminal values (embedded into shared
coordinates by zero-padding) is averaged with a normal-approximation
confidence interval.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .coefficients import (
    BoxSampler,
    MarkIntegral,
    check_bf_bounds,
    check_coercivity,
    check_growth,
    check_monotonicity,
    probe_hemicontinuity,
)
from .noise import TimeGrid, sample_bundle
from .rng import TAG_PATH, TAG_TRIAL, derive_key, make_generator
from .schemes import EXPLICIT, run_scheme
from .space import c_b, embed, restrict

Z95 = 1.959963984540054


def neumaier_sum(values):
    """Compensated (Neumaier) summation over the leading axis."""
    values = np.asarray(values, dtype=float)
    total = np.zeros(values.shape[1:]) if values.ndim > 1 else 0.0
    comp = np.zeros_like(total)
    for row in values:
        t = total + row
        big = np.where(np.abs(total) >= np.abs(row), total, row)
        small = np.where(np.abs(total) >= np.abs(row), row, total)
        comp = comp + ((big - t) + small)
        total = t
    return total + comp


@dataclass
class MCStats:
    """Per-knot moments of the squared H-norm over completed paths."""

    knot_mean: np.ndarray
    knot_var: np.ndarray
    final_mean: float
    final_var: float
    paths: int
    blowups: int


def _path_seed(master_seed, j):
    return derive_key(master_seed, TAG_PATH, j)


def _mc_paths(space, triple, config, marks, master_seed, path_range):
    """Squared-H-norm rows for a contiguous range of path indices."""
    grid = TimeGrid(triple.constants.horizon, config.m)
    modes = min(config.l, triple.wiener_modes)
    rows = []
    blow = []
    for j in path_range:
        bundle = sample_bundle(_path_seed(master_seed, j), grid, modes, marks, config.l)
        traj = run_scheme(space, triple, config, bundle)
        if traj.blow_up_step is None:
            rows.append(np.einsum("ij,ij->i", traj.values, traj.values))
            blow.append(False)
        else:
            rows.append(np.full(config.m + 1, np.nan))
            blow.append(True)
    return np.asarray(rows), np.asarray(blow)


def _chunk_ranges(total, workers):
    sizes = [total // workers + (1 if r < total % workers else 0) for r in range(workers)]
    ranges = []
    start = 0
    for s in sizes:
        if s:
            ranges.append(range(start, start + s))
        start += s
    return ranges


def _run_chunked(fn, args, paths, workers):
    if workers <= 1:
        return [fn(*args, range(paths))]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(fn, *args, rng) for rng in _chunk_ranges(paths, workers)
        ]
        return [f.result() for f in futures]


def monte_carlo(space, triple, config, marks, paths, master_seed, workers=1):
    """Path statistics of one scheme configuration.

    Blown-up paths are counted and excluded from the moment aggregation.
    """
    if paths < 1:
        raise ValueError("need at least one path")
    parts = _run_chunked(
        _mc_paths, (space, triple, config, marks, master_seed), paths, workers
    )
    rows = np.concatenate([p[0] for p in parts], axis=0)
    blow = np.concatenate([p[1] for p in parts])
    ok = rows[~blow]
    if ok.size == 0:
        nan = np.full(config.m + 1, np.nan)
        return MCStats(nan, nan, float("nan"), float("nan"), paths, int(blow.sum()))
    count = ok.shape[0]
    mean = neumaier_sum(ok) / count
    if count > 1:
        var = neumaier_sum((ok - mean) ** 2) / (count - 1)
    else:
        var = np.zeros_like(mean)
    return MCStats(
        knot_mean=mean,
        knot_var=var,
        final_mean=float(mean[-1]),
        final_var=float(var[-1]),
        paths=paths,
        blowups=int(blow.sum()),
    )


def _coupled_paths(
    space, triple, config_coarse, config_fine, marks, master_seed, path_range
):
    """Squared terminal gaps for a contiguous range of coupled paths."""
    grid = TimeGrid(triple.constants.horizon, config_fine.m)
    modes = min(config_fine.l, triple.wiener_modes)
    dim = max(config_coarse.n, config_fine.n)
    gaps = []
    blow = []
    for j in path_range:
        bundle = sample_bundle(
            _path_seed(master_seed, j), grid, modes, marks, config_fine.l
        )
        coarse = run_scheme(space, triple, config_coarse, bundle)
        fine = run_scheme(space, triple, config_fine, bundle)
        if coarse.blow_up_step is None and fine.blow_up_step is None:
            diff = embed(coarse.final, dim) - embed(fine.final, dim)
            gaps.append(float(diff @ diff))
            blow.append(False)
        else:
            gaps.append(float("nan"))
            blow.append(True)
    return np.asarray(gaps), np.asarray(blow)


def _validate_coupling(config_coarse, config_fine):
    if config_fine.m % config_coarse.m != 0:
        raise ValueError(
            f"coarse m = {config_coarse.m} does not divide fine m = {config_fine.m}"
        )
    if config_coarse.l > config_fine.l:
        raise ValueError("coarse level exceeds fine level")
    if config_coarse.n > config_fine.n:
        raise ValueError("coarse dimension exceeds fine dimension")


def coupled_error(
    space, triple, config_coarse, config_fine, marks, paths, master_seed, workers=1
):
    """Mean and 95% half-width of ‖u_coarse(T) − u_fine(T)‖_H² over paths."""
    est, half, _, _ = coupled_error_stats(
        space, triple, config_coarse, config_fine, marks, paths, master_seed, workers
    )
    return est, half


def coupled_error_stats(
    space, triple, config_coarse, config_fine, marks, paths, master_seed, workers=1
):
    _validate_coupling(config_coarse, config_fine)
    parts = _run_chunked(
        _coupled_paths,
        (space, triple, config_coarse, config_fine, marks, master_seed),
        paths,
        workers,
    )
    gaps = np.concatenate([p[0] for p in parts])
    blow = np.concatenate([p[1] for p in parts])
    ok = gaps[~blow]
    blowups = int(blow.sum())
    if ok.size == 0:
        return float("nan"), float("nan"), blowups, paths
    count = ok.size
    mean = float(neumaier_sum(ok) / count)
    if count > 1:
        var = float(neumaier_sum((ok - mean) ** 2) / (count - 1))
        half = Z95 * np.sqrt(var / count)
    else:
        half = float("nan")
    return mean, half, blowups, paths


@dataclass(frozen=True)
class LadderSpec:
    """Resolution ladder for a convergence study.

    Rung coordinates (n, m, l) must increase strictly, every rung m must
    divide the reference m, and rung levels must not exceed the reference.
    With `strict_gate` the explicit-mode validation additionally requires
    the stability quotient C_B(n)/m to decrease along the ladder.
    """

    rungs: tuple
    reference: tuple
    paths: int
    master_seed: int
    kind: str = EXPLICIT
    strict_gate: bool = False

    def __post_init__(self):
        if not self.rungs:
            raise ValueError("ladder needs at least one rung")
        if self.paths < 1:
            raise ValueError("ladder needs at least one path")
        rungs = tuple(tuple(int(v) for v in r) for r in self.rungs)
        ref = tuple(int(v) for v in self.reference)
        object.__setattr__(self, "rungs", rungs)
        object.__setattr__(self, "reference", ref)
        for r in rungs + (ref,):
            if len(r) != 3 or min(r) < 1:
                raise ValueError(f"bad resolution triple {r}")
        for a, b in zip(rungs, rungs[1:]):
            if not (a[0] < b[0] and a[1] < b[1] and a[2] < b[2]):
                raise ValueError(
                    f"rung coordinates must increase strictly: {a} -> {b}"
                )
        for r in rungs:
            if ref[1] % r[1] != 0:
                raise ValueError(f"rung m = {r[1]} does not divide reference {ref[1]}")
            if r[0] > ref[0] or r[2] > ref[2]:
                raise ValueError(f"rung {r} exceeds the reference {ref}")


def validate_ladder(ladder, space_builder):
    """Explicit-mode stability gate: C_B(n)/m must decrease when strict."""
    if ladder.kind == EXPLICIT and ladder.strict_gate:
        quotients = [
            c_b(space_builder(n)) / m for (n, m, _) in ladder.rungs + (ladder.reference,)
        ]
        diffs = np.diff(quotients)
        if not (diffs < 0).all():
            raise ValueError(
                "explicit ladder violates the decreasing C_B(n)/m stability gate: "
                f"quotients {quotients}"
            )


@dataclass
class ConvergenceRow:
    n: int
    m: int
    l: int
    cb_over_m: float
    estimate: float
    half_width: float
    blowups: int
    seconds: float


@dataclass
class ConvergenceReport:
    """Per-rung strong-error estimates against the reference resolution."""

    rows: list
    monotone: bool
    separated: bool

    @property
    def verdict(self):
        return "pass" if (self.monotone and self.separated) else "fail"

    def to_csv(self, timing=False):
        lines = ["rung_n,rung_m,rung_l,cb_over_m,est_sq_error,ci_half_width,blowups,seconds"]
        for r in self.rows:
            seconds = r.seconds if timing else 0.0
            lines.append(
                f"{r.n},{r.m},{r.l},{r.cb_over_m:.17g},{r.estimate:.17g},"
                f"{r.half_width:.17g},{r.blowups},{seconds:.17g}"
            )
        return "\n".join(lines) + "\n"


def convergence_study(space, triple, marks, ladder, config_template, workers=1):
    """Coupled strong-error ladder against the reference resolution.

    The verdict is "pass" when the estimates decrease monotonically and
    the 95% intervals of the first and last rung do not overlap.
    """
    validate_ladder(ladder, lambda n: restrict(space, n))
    ref_n, ref_m, ref_l = ladder.reference
    ref_config = replace(config_template, kind=ladder.kind, n=ref_n, m=ref_m, l=ref_l)
    rows = []
    for n, m, l in ladder.rungs:
        rung_config = replace(config_template, kind=ladder.kind, n=n, m=m, l=l)
        started = time.perf_counter()
        est, half, blowups, _ = coupled_error_stats(
            space,
            triple,
            rung_config,
            ref_config,
            marks,
            ladder.paths,
            ladder.master_seed,
            workers,
        )
        rows.append(
            ConvergenceRow(
                n=n,
                m=m,
                l=l,
                cb_over_m=c_b(restrict(space, n)) / m,
                estimate=est,
                half_width=half,
                blowups=blowups,
                seconds=time.perf_counter() - started,
            )
        )
    estimates = [r.estimate for r in rows]
    monotone = all(b < a for a, b in zip(estimates, estimates[1:]))
    if len(rows) > 1:
        separated = (
            rows[0].estimate - rows[0].half_width
            > rows[-1].estimate + rows[-1].half_width
        )
    else:
        separated = True
    return ConvergenceReport(rows=rows, monotone=monotone, separated=separated)


@dataclass(frozen=True)
class SuiteConfig:
    """Trial counts and sampling ranges for the structural-condition suite."""

    trials: int = 10_000
    seed: int = 2024
    box: float = 5.0
    level: int = 2
    points_per_cell: int = 4
    tolerance: float = 1e-8


def run_condition_suite(triple, space, marks, config=SuiteConfig()):
    """All structural checks on one triple; returns the five reports."""
    sampler = BoxSampler(
        dim=space.dim, box=config.box, horizon=triple.constants.horizon
    )
    quadrature = MarkIntegral(marks, config.level, config.points_per_cell)
    reports = [
        check_monotonicity(
            triple, space, sampler, config.trials, quadrature,
            tolerance=config.tolerance, seed=config.seed,
        ),
        check_coercivity(
            triple, space, sampler, config.trials, quadrature,
            tolerance=config.tolerance, seed=config.seed + 1,
        ),
        check_growth(
            triple, space, sampler, config.trials, quadrature,
            tolerance=config.tolerance, seed=config.seed + 2,
        ),
    ]
    probe_rng = make_generator(derive_key(config.seed, TAG_TRIAL, 3))
    unit = BoxSampler(
        dim=space.dim, box=config.box, horizon=triple.constants.horizon, normalize=True
    )
    reports.append(
        probe_hemicontinuity(
            triple,
            space,
            unit.draw_x(probe_rng),
            unit.draw_x(probe_rng),
            unit.draw_x(probe_rng),
            unit.draw_t(probe_rng),
            epsilons=2.0 ** -np.arange(1, 41),
            tolerance=config.tolerance,
        )
    )
    reports.append(
        check_bf_bounds(
            triple, space, sampler, config.trials, quadrature,
            tolerance=config.tolerance, seed=config.seed + 4,
        )
    )
    return reports
