"""Initial value problems, time grids, and reproducible randomness.

Everything downstream (steppers, stability maps, Monte Carlo error studies)
works in terms of the types defined here: an `IVP` bundles the right-hand
side with optional structure (affine form, exact solution, regularity
constants), a `TimeGrid` fixes the uniform step, and a `TauStream` supplies
the i.i.d. uniform draws that make a scheme "randomized".
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad


def _norm(v) -> float:
    # plain Euclidean norm without BLAS so scalar/batch paths round identically
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.sum(v * v)))


class SchemeId(enum.Enum):
    """The six one-step maps handled by this package.

    `det-rk2` is the classical explicit midpoint scheme, `rand-expl-rk2` its
    randomized-evaluation-point variant.  `s1` solves an implicit Euler-type
    stage at the random time, `s2` takes the slope at a random point of the
    chord between consecutive states.  `det-s1`/`det-s2` are the same maps
    with the random fraction pinned to 1/2.
    """

    DET_RK2 = "det-rk2"
    RAND_EXPL_RK2 = "rand-expl-rk2"
    DET_S1 = "det-s1"
    DET_S2 = "det-s2"
    S1 = "s1"
    S2 = "s2"

    @property
    def randomized(self) -> bool:
        return self in (SchemeId.RAND_EXPL_RK2, SchemeId.S1, SchemeId.S2)

    @property
    def implicit(self) -> bool:
        return self in (SchemeId.S1, SchemeId.S2, SchemeId.DET_S1, SchemeId.DET_S2)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = a + j*h, j = 0..n, with h = (b - a)/n."""

    a: float
    b: float
    n: int

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    def times(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n + 1)


def make_grid(a: float, b: float, n: int) -> TimeGrid:
    """Build a uniform grid over [a, b] with n steps."""
    a = float(a)
    b = float(b)
    n = int(n)
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if n < 1:
        raise ValueError(f"need n >= 1, got n={n}")
    return TimeGrid(a, b, n)


class TauStream:
    """Reproducible stream of i.i.d. uniform draws on [0, 1).

    Streams are keyed by the pair (seed, path): the same pair always yields
    the same sequence regardless of what other streams are consumed, and
    distinct pairs are statistically independent.  Backed by the
    counter-based Philox generator with the pair as its 128-bit key.
    """

    def __init__(self, seed: int, path: int = 0):
        self.seed = int(seed)
        self.path = int(path)
        self.position = 0
        key = np.array([self.seed, self.path], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def next(self) -> float:
        self.position += 1
        return float(self._gen.random())

    def draw(self, n: int) -> np.ndarray:
        self.position += int(n)
        return self._gen.random(int(n))

    def __repr__(self):
        return f"TauStream(seed={self.seed}, path={self.path}, position={self.position})"


def tau_stream(seed: int, path: int = 0) -> TauStream:
    """Open the uniform stream for one Monte Carlo path."""
    return TauStream(seed, path)


class FixedTau:
    """Degenerate tau source: every draw returns the same constant.

    Forcing 1/2 turns the randomized schemes into their deterministic
    counterparts step for step.
    """

    def __init__(self, value: float = 0.5):
        value = float(value)
        if not 0.0 <= value < 1.0:
            raise ValueError("fixed tau must lie in [0, 1)")
        self.value = value
        self.position = 0

    def next(self) -> float:
        self.position += 1
        return self.value

    def draw(self, n: int) -> np.ndarray:
        self.position += int(n)
        return np.full(int(n), self.value)


@dataclass(frozen=True, eq=False)
class IVP:
    """An initial value problem x'(t) = rhs(t, x), x(t0) = eta, on [t0, t1].

    `affine`, when present, is a pair (A, b) of callables with the contract
    rhs(t, x) = A(t) @ x + b(t); it unlocks the direct linear stage solver.
    `exact`, when present, maps t to the true solution and is used as the
    error reference.  `lipschitz`, `growth`, and `holder` carry the constants
    (state Lipschitz, linear growth, time Hoelder exponent) that gate the
    fixed-point stage solver.
    """

    dim: int
    t0: float
    t1: float
    eta: np.ndarray
    rhs: Callable[[float, np.ndarray], np.ndarray]
    affine: Optional[tuple] = None
    exact: Optional[Callable[[float], np.ndarray]] = None
    lipschitz: Optional[float] = None
    growth: Optional[float] = None
    holder: Optional[float] = None
    rhs_vectorized: bool = False  # True iff rhs accepts stacked (paths, dim) states
    label: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.t0 < self.t1:
            raise ValueError("need t0 < t1")
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(self.dim))
        if self.exact is not None:
            d0 = _norm(np.asarray(self.exact(self.t0), dtype=float) - self.eta)
            if d0 > 1e-12:
                raise ValueError(f"exact(t0) differs from eta by {d0:.3e}")
        if self.affine is not None:
            self._check_affine()

    def _check_affine(self):
        A, b = self.affine
        rng = np.random.default_rng(0)
        for _ in range(100):
            t = self.t0 + (self.t1 - self.t0) * rng.random()
            x = rng.normal(scale=2.0, size=self.dim)
            lhs = np.asarray(self.rhs(t, x), dtype=float)
            rhs = np.asarray(A(t), dtype=float) @ x + np.asarray(b(t), dtype=float)
            if _norm(lhs - rhs) > 1e-10 * (1.0 + _norm(x)):
                raise ValueError("affine pair (A, b) does not reproduce rhs")


@dataclass
class Trajectory:
    """States V^0..V^n on a grid, the tau draws used, and solver diagnostics."""

    grid: TimeGrid
    scheme: SchemeId
    states: np.ndarray  # (n+1, dim)
    taus: np.ndarray  # (n,) for randomized schemes, (0,) otherwise
    stage_iters: np.ndarray  # (n,) iteration counts of the stage solver
    converged: bool


# ---------------------------------------------------------------------------
# built-in problem catalogue
# ---------------------------------------------------------------------------


def dahlquist(lam: complex, t1: float = 1.0) -> IVP:
    """Linear test equation x' = lam*x, x(0) = 1.

    A real lam gives a one-dimensional problem.  A complex lam is carried as
    the equivalent two-dimensional real system with the rotation-scaling
    matrix [[a, -b], [b, a]], state starting at (1, 0).
    """
    lam = complex(lam)
    a, b = lam.real, lam.imag
    mod = abs(lam)
    if b == 0.0:

        def rhs(t, x):
            return a * x

        def exact(t):
            return np.array([math.exp(a * t)])

        A = np.array([[a]])
        return IVP(
            dim=1, t0=0.0, t1=float(t1), eta=np.array([1.0]), rhs=rhs,
            affine=(lambda t: A, lambda t: np.zeros(1)),
            exact=exact, lipschitz=mod, growth=max(1.0, mod), holder=1.0,
            rhs_vectorized=True, label=f"dahlquist(lambda={a:g})",
        )

    A = np.array([[a, -b], [b, a]])

    def rhs(t, x):
        return x @ A.T

    def exact(t):
        r = math.exp(a * t)
        return np.array([r * math.cos(b * t), r * math.sin(b * t)])

    return IVP(
        dim=2, t0=0.0, t1=float(t1), eta=np.array([1.0, 0.0]), rhs=rhs,
        affine=(lambda t: A, lambda t: np.zeros(2)),
        exact=exact, lipschitz=mod, growth=max(1.0, mod), holder=1.0,
        rhs_vectorized=True, label=f"dahlquist(lambda={lam:g})",
    )


def stiff_problem(t1: float = 50.0) -> IVP:
    """Stiff benchmark x' = -50*(x - cos t), x(0) = 1.

    The solution hugs (2500*cos t + 50*sin t)/2501 after a fast transient;
    explicit second-order steps explode for h as small as 1/2 while the
    implicit ones stay on the curve.
    """

    def rhs(t, x):
        return -50.0 * (x - np.cos(t))

    def exact(t):
        return np.array([(math.exp(-50.0 * t) + 2500.0 * math.cos(t) + 50.0 * math.sin(t)) / 2501.0])

    A = np.array([[-50.0]])
    return IVP(
        dim=1, t0=0.0, t1=float(t1), eta=np.array([1.0]), rhs=rhs,
        affine=(lambda t: A, lambda t: np.array([50.0 * math.cos(t)])),
        exact=exact, lipschitz=50.0, growth=50.0, holder=1.0,
        rhs_vectorized=True, label="stiff",
    )


def holder_problem(lam: float = -2.0, exponent: float = 0.5, kink: float = 0.5,
                   t1: float = 1.0) -> IVP:
    """Linear problem with a Hoelder-continuous forcing: x' = lam*x + |t - kink|^exponent.

    The forcing is exponent-Hoelder in time but not differentiable at the
    kink, which caps deterministic one-step methods at order `exponent` and
    makes the randomized gain of 1/2 visible.  The exact solution is
    evaluated by variation of constants with the forcing integral done by
    adaptive quadrature split at the kink (absolute tolerance 1e-13).
    """
    lam = float(lam)
    exponent = float(exponent)
    kink = float(kink)
    if not 0.0 < exponent <= 1.0:
        raise ValueError("exponent must lie in (0, 1]")

    def rhs(t, x):
        return lam * x + np.abs(t - kink) ** exponent

    A = np.array([[lam]])
    cache: dict = {}

    def exact(t):
        t = float(t)
        if t not in cache:
            if t == 0.0:
                cache[t] = 1.0
            else:
                pts = ([kink] if 0.0 < kink < t else None)
                forced, _ = quad(
                    lambda s: math.exp(lam * (t - s)) * abs(s - kink) ** exponent,
                    0.0, t, points=pts, epsabs=1e-13, epsrel=1e-13, limit=200,
                )
                cache[t] = math.exp(lam * t) + forced
        return np.array([cache[t]])

    k_force = max(abs(kink), abs(t1 - kink)) ** exponent
    return IVP(
        dim=1, t0=0.0, t1=float(t1), eta=np.array([1.0]), rhs=rhs,
        affine=(lambda t: A, lambda t: np.array([abs(t - kink) ** exponent])),
        exact=exact, lipschitz=max(abs(lam), 1.0), growth=max(abs(lam), k_force, 1.0),
        holder=exponent, rhs_vectorized=True,
        label=f"holder(lambda={lam:g}, rho={exponent:g})",
    )
