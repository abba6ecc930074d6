"""Operator triples (A, B, F), their structural constants, and verifiers.

The drift A maps into the dual space (returned as basis actions), the
Wiener coefficient B into Hilbert-Schmidt operators (returned as a
dim × modes matrix of H-coordinates, column k the image of the k-th noise
mode), and the jump coefficient F into H (one coordinate vector per mark;
evaluators must broadcast over a vector of marks into a dim × k matrix).

All evaluators are *dimension polymorphic along the nested basis family*:
called with a shorter coordinate vector they must return the projection of
the operator value onto that leading subspace.  This lets a single triple
drive simulations at every resolution of a coupled study.

The structural conditions (dissipativity, coercivity, growth,
hemicontinuity, and the derived bounds on the noise coefficients) quantify
over the whole space, so the checkers here are statistical: they sample
random inputs, evaluate the defining inequality, and report the worst
violation with a witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.integrate

from .noise import build_partition
from .rng import TAG_TRIAL, derive_key, make_generator
from .space import norms, pairing

DEFAULT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ConstantFn:
    """Constant function of time; picklable so triples cross process pools."""

    value: float

    def __call__(self, t):
        return self.value


@dataclass(frozen=True)
class ScaledFn:
    factor: float
    fn: object

    def __call__(self, t):
        return self.factor * self.fn(t)


def _as_time_fn(f):
    return ConstantFn(float(f)) if np.isscalar(f) else f


@dataclass(frozen=True)
class ConditionConstants:
    """Exponents and integrable weight functions entering the conditions.

    `lambda_fn` is the coercivity weight (strictly positive; must stay <= 1
    for the explicit scheme), `k1_fn` the additive coercivity allowance,
    `k1bar_fn` the H-norm growth allowance, `k2_fn` the drift growth
    allowance.  `horizon` is the time interval the functions live on.
    """

    p: float
    alpha: float
    lambda_fn: object
    k1_fn: object
    k1bar_fn: object
    k2_fn: object
    horizon: float = 1.0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("exponent p must be >= 2")
        if self.alpha < 1:
            raise ValueError("growth constant must be >= 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        for name in ("lambda_fn", "k1_fn", "k1bar_fn", "k2_fn"):
            object.__setattr__(self, name, _as_time_fn(getattr(self, name)))

    @property
    def q(self):
        return self.p / (self.p - 1.0)

    def k3_fn(self, t):
        """Combined allowance (2/q)·K2 + K1 from the noise-bound estimates."""
        return (2.0 / self.q) * self.k2_fn(t) + self.k1_fn(t)

    def lambda_max(self, probe=33):
        ts = np.linspace(0.0, self.horizon, probe)
        return max(float(self.lambda_fn(t)) for t in ts)


@dataclass(frozen=True)
class CoefficientTriple:
    """The operators (A, B, F) with their condition constants.

    `linear_A`, when set, is the matrix of an autonomous linear drift and
    unlocks direct implicit solves.  `jump_profile`, when set, declares the
    factorization F(t, x, ξ) = weight(ξ) · jump_profile(t, x) against the
    owning mark space's weight, which the averaged operators exploit with
    closed-form cell masses.
    """

    dim: int
    eval_A: object
    eval_B: object
    eval_F: object
    constants: ConditionConstants
    autonomous: bool = True
    wiener_modes: int = 1
    linear_A: np.ndarray | None = None
    jump_profile: object | None = None


@dataclass(frozen=True)
class BoxSampler:
    """Uniform coordinates in [−box, box]^dim and t uniform on [0, horizon].

    Pair draws mix independent box samples with single-mode bumps of one
    argument: conditions that fail only along individual basis directions
    would otherwise be invisible at desk-scale trial counts.
    """

    dim: int
    box: float = 5.0
    horizon: float = 1.0
    normalize: bool = False

    def draw_t(self, rng):
        return float(rng.uniform(0.0, self.horizon))

    def draw_x(self, rng):
        x = rng.uniform(-self.box, self.box, self.dim)
        if self.normalize:
            n = np.linalg.norm(x)
            if n > 0:
                x /= n
        return x

    def draw_pair(self, rng):
        x = self.draw_x(rng)
        if rng.random() < 0.5:
            return x, self.draw_x(rng)
        y = x.copy()
        mode = int(rng.integers(self.dim))
        y[mode] += rng.uniform(-2.0 * self.box, 2.0 * self.box)
        return x, y


class MarkIntegral:
    """Quadrature for ∫ ‖G(ξ)‖² ν(dξ) over the full mark space.

    Integrates over the level-l exhaustion set cell by cell and adds the
    analytic tail mass, extrapolated through the family's mark weight: the
    tail term is exact whenever G(ξ) = weight(ξ)·v, which covers the
    shipped coefficient families; otherwise it is the declared truncation
    estimate.
    """

    def __init__(self, marks, level=2, points_per_cell=4):
        self.marks = marks
        self.level = level
        partition = build_partition(marks, level)
        nodes, weights = marks.cell_rule(partition.lo, partition.hi, points_per_cell)
        self.nodes = nodes.ravel()
        self.weights = weights.ravel()
        self.tail_sq = marks.tail_mass_sq(level)
        self.ref_mark = float(partition.hi[-1])
        ref_w = float(np.asarray(marks.weight(self.ref_mark)))
        self.ref_scale = self.tail_sq / ref_w**2 if self.tail_sq > 0 else 0.0

    def integral_sq(self, g):
        """∫ ‖g(ξ)‖² ν(dξ); g maps a mark vector to a (dim, k) matrix."""
        vals = np.asarray(g(self.nodes), dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        total = float(np.einsum("ik,k->", vals**2, self.weights))
        if self.ref_scale:
            ref = np.asarray(g(np.array([self.ref_mark])), dtype=float)
            total += self.ref_scale * float(np.sum(ref**2))
        return total


@dataclass
class ConditionReport:
    """Outcome of one statistical condition check."""

    condition_id: str
    trials: int
    worst_violation: float
    witness: dict
    passed: bool
    tolerance: float = DEFAULT_TOLERANCE

    def __str__(self):
        state = "passed" if self.passed else "FAILED"
        return (
            f"{self.condition_id}: {state} "
            f"(worst violation {self.worst_violation:.3e} over {self.trials} trials)"
        )


def _report(condition_id, trials, worst, witness, tolerance):
    return ConditionReport(
        condition_id=condition_id,
        trials=trials,
        worst_violation=worst,
        witness=witness,
        passed=bool(worst <= tolerance),
        tolerance=tolerance,
    )


def _scan(condition_id, trials, seed, draw, evaluate, tolerance):
    worst = -math.inf
    witness = {}
    for trial in range(trials):
        rng = make_generator(derive_key(seed, TAG_TRIAL, trial))
        sample = draw(rng)
        value = evaluate(*sample)
        if not np.isfinite(value):
            raise ValueError(
                f"{condition_id}: non-finite evaluation at witness "
                f"{[np.asarray(s).tolist() for s in sample]}"
            )
        if value > worst:
            worst = value
            witness = {
                "trial": trial,
                "sample": [np.asarray(s).tolist() for s in sample],
            }
    return _report(condition_id, trials, worst, witness, tolerance)


def check_monotonicity(
    triple, space, sampler, trials, mark_quadrature, tolerance=DEFAULT_TOLERANCE, seed=0
):
    """Worst sampled value of the one-sided dissipativity inequality.

    Evaluates 2⟨A(x)−A(y), x−y⟩ + ‖B(x)−B(y)‖₂² + ∫‖F(x,ξ)−F(y,ξ)‖² ν(dξ),
    which must stay non-positive.
    """

    def draw(rng):
        t = sampler.draw_t(rng)
        x, y = sampler.draw_pair(rng)
        return t, x, y

    def evaluate(t, x, y):
        d = x - y
        drift = 2.0 * pairing(d, np.asarray(triple.eval_A(t, x)) - triple.eval_A(t, y))
        bdiff = np.asarray(triple.eval_B(t, x)) - np.asarray(triple.eval_B(t, y))
        noise = float(np.sum(bdiff**2))
        jump = mark_quadrature.integral_sq(
            lambda xi: np.asarray(triple.eval_F(t, x, xi))
            - np.asarray(triple.eval_F(t, y, xi))
        )
        return drift + noise + jump

    return _scan("C1", trials, seed, draw, evaluate, tolerance)


def check_coercivity(
    triple, space, sampler, trials, mark_quadrature, tolerance=DEFAULT_TOLERANCE, seed=0
):
    """Worst sampled violation of the energy-dissipation inequality.

    The origin is always probed first; random box samples follow.
    """
    c = triple.constants
    origin = {"left": True}

    def draw(rng):
        if origin.pop("left", False):
            return sampler.draw_t(rng), np.zeros(sampler.dim)
        return sampler.draw_t(rng), sampler.draw_x(rng)

    def evaluate(t, x):
        _, v, _ = norms(space, x)
        h2 = float(x @ x)
        lhs = 2.0 * pairing(x, np.asarray(triple.eval_A(t, x)))
        lhs += float(np.sum(np.asarray(triple.eval_B(t, x)) ** 2))
        lhs += mark_quadrature.integral_sq(lambda xi: triple.eval_F(t, x, xi))
        lhs += c.lambda_fn(t) * v**c.p
        return lhs - c.k1_fn(t) - c.k1bar_fn(t) * h2

    return _scan("C2", trials, seed, draw, evaluate, tolerance)


def check_growth(
    triple, space, sampler, trials, mark_quadrature=None, tolerance=DEFAULT_TOLERANCE, seed=0
):
    """Worst sampled violation of the dual-norm growth bound on the drift.

    The origin is always probed first: affine offsets with no additive
    allowance fail exactly there.
    """
    c = triple.constants
    origin = {"left": True}

    def draw(rng):
        if origin.pop("left", False):
            return sampler.draw_t(rng), np.zeros(sampler.dim)
        return sampler.draw_t(rng), sampler.draw_x(rng)

    def evaluate(t, x):
        _, v, _ = norms(space, x)
        a = np.asarray(triple.eval_A(t, x))
        _, _, dual = norms(space, a)
        lam = c.lambda_fn(t)
        return dual**c.q - c.alpha * lam**c.q * v**c.p - c.k2_fn(t) * lam ** (c.q - 1.0)

    return _scan("C3", trials, seed, draw, evaluate, tolerance)


def probe_hemicontinuity(
    triple,
    space,
    x,
    y,
    z,
    t,
    epsilons=None,
    tolerance=DEFAULT_TOLERANCE,
):
    """Gap |⟨A(x+εy), z⟩ − ⟨A(x), z⟩| along a vanishing ε ladder.

    Passes when the gap at the smallest ε is below tolerance and the gap
    sequence is eventually decreasing.
    """
    if epsilons is None:
        epsilons = 2.0 ** -np.arange(1, 21)
    epsilons = np.asarray(epsilons, dtype=float)
    if epsilons.ndim != 1 or epsilons.size < 2 or not (np.diff(epsilons) < 0).all():
        raise ValueError("epsilons must decrease strictly to 0")
    base = pairing(z, np.asarray(triple.eval_A(t, x)))
    gaps = np.array(
        [
            abs(pairing(z, np.asarray(triple.eval_A(t, x + eps * y))) - base)
            for eps in epsilons
        ]
    )
    if not np.isfinite(gaps).all():
        raise ValueError("non-finite drift evaluation in hemicontinuity probe")
    tail = gaps[-min(10, gaps.size) :]
    decreasing = bool(np.all(np.diff(tail) <= 1e-6 * tail[:-1] + 1e-15))
    worst = float(gaps[-1])
    return ConditionReport(
        condition_id="C4",
        trials=epsilons.size,
        worst_violation=worst,
        witness={"gaps": gaps.tolist(), "eventually_decreasing": decreasing},
        passed=bool(worst <= tolerance and decreasing),
        tolerance=tolerance,
    )


def check_bf_bounds(
    triple, space, sampler, trials, mark_quadrature, tolerance=DEFAULT_TOLERANCE, seed=0
):
    """Worst sampled violation of the two derived bounds on (B, F).

    The difference bound uses the constant (3α + 2/p)·λ(t) against
    ‖x‖_V^p + ‖y‖_V^p plus (4/q)·K2(t); the absolute bound uses
    2α·λ(t)‖x‖_V^p + K̄1(t)‖x‖_H² + K3(t).
    """
    c = triple.constants

    def draw(rng):
        t = sampler.draw_t(rng)
        x, y = sampler.draw_pair(rng)
        return t, x, y

    def evaluate(t, x, y):
        _, vx, _ = norms(space, x)
        _, vy, _ = norms(space, y)
        lam = c.lambda_fn(t)
        bx = np.asarray(triple.eval_B(t, x))
        by = np.asarray(triple.eval_B(t, y))
        diff_lhs = float(np.sum((bx - by) ** 2)) + mark_quadrature.integral_sq(
            lambda xi: np.asarray(triple.eval_F(t, x, xi))
            - np.asarray(triple.eval_F(t, y, xi))
        )
        diff_rhs = (3.0 * c.alpha + 2.0 / c.p) * lam * (
            vx**c.p + vy**c.p
        ) + (4.0 / c.q) * c.k2_fn(t)
        abs_lhs = float(np.sum(bx**2)) + mark_quadrature.integral_sq(
            lambda xi: triple.eval_F(t, x, xi)
        )
        abs_rhs = (
            2.0 * c.alpha * lam * vx**c.p
            + c.k1bar_fn(t) * float(x @ x)
            + c.k3_fn(t)
        )
        return max(diff_lhs - diff_rhs, abs_lhs - abs_rhs)

    return _scan("PropBF", trials, seed, draw, evaluate, tolerance)


class _GammaEvaluator:
    """exp(−½∫₀ᵗ K) with adaptive quadrature and per-knot caching."""

    def __init__(self, k_fn):
        self.k_fn = k_fn
        self._cache = {}

    def _k(self, s):
        value = float(self.k_fn(s))
        if value < 0:
            raise ValueError(f"rate function is negative at t={s}: {value}")
        return value

    def __call__(self, t):
        got = self._cache.get(t)
        if got is None:
            integral, _ = scipy.integrate.quad(
                self._k, 0.0, t, epsabs=0.0, epsrel=1e-10, limit=200
            )
            got = math.exp(-0.5 * integral)
            self._cache[t] = got
        return got


@dataclass(frozen=True)
class _TransformedA:
    base: object
    k_fn: object
    gamma: _GammaEvaluator

    def __call__(self, t, x):
        g = self.gamma(t)
        return np.asarray(self.base(t, g * np.asarray(x))) / g - (
            0.5 * self.k_fn(t)
        ) * np.asarray(x)


@dataclass(frozen=True)
class _TransformedB:
    base: object
    gamma: _GammaEvaluator

    def __call__(self, t, x):
        g = self.gamma(t)
        return np.asarray(self.base(t, g * np.asarray(x))) / g


@dataclass(frozen=True)
class _TransformedF:
    base: object
    gamma: _GammaEvaluator

    def __call__(self, t, x, xi):
        g = self.gamma(t)
        return np.asarray(self.base(t, g * np.asarray(x), xi)) / g


@dataclass(frozen=True)
class _TransformedProfile:
    base: object
    gamma: _GammaEvaluator

    def __call__(self, t, x):
        g = self.gamma(t)
        return np.asarray(self.base(t, g * np.asarray(x))) / g


def exponential_transform(triple, k_fn):
    """Absorb a relaxed-dissipativity rate K into the coefficients.

    Returns the triple (Ā, B̄, F̄) with Ā(x) = γ⁻¹A(γx) − ½Kx,
    B̄(x) = γ⁻¹B(γx), F̄(x, ξ) = γ⁻¹F(γx, ξ) and γ_t = exp(−½∫₀ᵗK): a
    triple satisfying the relaxed one-sided bound with rate K is turned
    into one satisfying the strict dissipativity inequality.
    """
    k_fn = _as_time_fn(k_fn)
    horizon = triple.constants.horizon
    probe = np.linspace(0.0, horizon, 33)
    k_vals = np.array([float(k_fn(t)) for t in probe])
    if (k_vals < 0).any():
        bad = probe[int(np.argmin(k_vals))]
        raise ValueError(f"rate function is negative at t={bad}")
    if (k_vals == 0).all():
        return replace(triple)
    gamma = _GammaEvaluator(k_fn)
    inflate = gamma(horizon) ** -2
    constants = replace(
        triple.constants,
        k1_fn=ScaledFn(inflate, triple.constants.k1_fn),
        k2_fn=ScaledFn(inflate, triple.constants.k2_fn),
    )
    profile = (
        _TransformedProfile(triple.jump_profile, gamma)
        if triple.jump_profile is not None
        else None
    )
    return replace(
        triple,
        eval_A=_TransformedA(triple.eval_A, k_fn, gamma),
        eval_B=_TransformedB(triple.eval_B, gamma),
        eval_F=_TransformedF(triple.eval_F, gamma),
        jump_profile=profile,
        constants=constants,
        autonomous=False,
        linear_A=None,
    )
