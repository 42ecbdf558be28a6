"""One-step maps, implicit stage-equation solvers, and integration drivers.

Six schemes share the same skeleton: an intermediate stage followed by a
full step.  The explicit pair evaluates the stage directly; the implicit
pair (`s1`, `s2`) needs a stage equation solved each step.  Three solver
strategies are available:

* ``picard`` - fixed-point iteration started from the previous state; the
  faithful default, valid while the stage map is a contraction.
* ``affine`` - direct linear solve, exact for problems that declare an
  affine right-hand side.  This is the only route for genuinely stiff runs
  where the contraction condition fails.
* ``newton`` - damped Newton with a finite-difference Jacobian, for stiff
  nonlinear right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ivp import IVP, SchemeId, TimeGrid, Trajectory, _norm

PICARD = "picard"
AFFINE = "affine"
NEWTON = "newton"

# a stage iterate this far above the start value is treated as divergence
_DIVERGENCE_FACTOR = 1e12


class StageSolverError(RuntimeError):
    """Base class for stage-equation failures."""


class NonConvergence(StageSolverError):
    """Stage iteration diverged or exhausted its iteration budget."""


class ContractionViolated(StageSolverError):
    """Picard guard: L*h*tau (or L*h) is not below 1."""


class SingularStage(StageSolverError):
    """The linear stage system I - c1*h*A(theta) is singular."""


@dataclass
class StageSolverConfig:
    method: str = PICARD
    tol: float = 1e-12
    max_iter: int = 100
    lipschitz_guard: bool = True

    def __post_init__(self):
        if self.method not in (PICARD, AFFINE, NEWTON):
            raise ValueError(f"unknown stage solver method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class StepResult:
    """Next state, the stage value it came from, and solve diagnostics."""

    state: np.ndarray
    stage: np.ndarray
    iters: int
    residual: float


def _check_tau(tau: float):
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")


def solve_stage_picard(map_, start, cfg: StageSolverConfig):
    """Fixed-point iteration v <- map_(v) from `start`.

    Returns (v, iterations, residual) with the residual bounded by
    cfg.tol * (1 + ||v||).  Raises NonConvergence on divergence (iterate
    exceeding 1e12 * (1 + ||start||)) or when max_iter is exhausted.
    """
    start = np.asarray(start, dtype=float)
    cap = _DIVERGENCE_FACTOR * (1.0 + _norm(start))
    v = start
    for k in range(1, cfg.max_iter + 1):
        w = np.asarray(map_(v), dtype=float)
        wn = _norm(w)
        if not wn <= cap:  # catches NaN as well
            raise NonConvergence(f"picard iterate blew up after {k} iterations")
        delta = _norm(w - v)
        if delta <= cfg.tol * (1.0 + wn):
            return w, k, delta
        v = w
    raise NonConvergence(f"picard did not converge in {cfg.max_iter} iterations")


def solve_stage_newton(map_, start, cfg: StageSolverConfig):
    """Damped Newton on F(x) = x - map_(x) with a forward-difference Jacobian."""
    x = np.asarray(start, dtype=float).copy()
    d = x.size
    cap = _DIVERGENCE_FACTOR * (1.0 + _norm(start))
    sqrt_eps = np.sqrt(np.finfo(float).eps)
    for k in range(1, cfg.max_iter + 1):
        fx = x - np.asarray(map_(x), dtype=float)
        r = _norm(fx)
        if r <= cfg.tol * (1.0 + _norm(x)):
            return x, k, r
        jac = np.eye(d)
        for j in range(d):
            step = sqrt_eps * (1.0 + abs(x[j]))
            xp = x.copy()
            xp[j] += step
            jac[:, j] = (xp - np.asarray(map_(xp), dtype=float) - fx) / step
        try:
            dx = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"newton jacobian singular at iteration {k}") from exc
        alpha = 1.0
        while alpha > 2.0 ** -20:
            xn = x + alpha * dx
            rn = _norm(xn - np.asarray(map_(xn), dtype=float))
            if rn < r:
                break
            alpha *= 0.5
        else:
            raise NonConvergence(f"newton line search stalled at iteration {k}")
        x = xn
        if not _norm(x) <= cap:
            raise NonConvergence(f"newton iterate blew up after {k} iterations")
    raise NonConvergence(f"newton did not converge in {cfg.max_iter} iterations")


def solve_stage_affine(ivp: IVP, theta: float, c0, c1: float, h: float):
    """Exact solve of the linear stage equation x = c0 + c1*h*(A(theta) x + b(theta)).

    Requires ivp.affine.  Raises SingularStage when I - c1*h*A(theta) is
    singular to machine precision (the z*tau = 1 pole on the linear test
    equation).
    """
    if ivp.affine is None:
        raise ValueError("affine stage solve needs ivp.affine")
    A_fn, b_fn = ivp.affine
    A = np.asarray(A_fn(theta), dtype=float)
    b = np.asarray(b_fn(theta), dtype=float)
    c0 = np.asarray(c0, dtype=float)
    mat = np.eye(ivp.dim) - (c1 * h) * A
    if np.linalg.cond(mat) > 1e14:
        raise SingularStage(f"stage matrix singular at theta={theta}, c1*h={c1 * h}")
    try:
        return np.linalg.solve(mat, c0 + (c1 * h) * b)
    except np.linalg.LinAlgError as exc:
        raise SingularStage(f"stage matrix singular at theta={theta}") from exc


def step_det_rk2(ivp: IVP, t: float, V, h: float) -> StepResult:
    """Classical explicit midpoint step."""
    V = np.asarray(V, dtype=float)
    stage = V + 0.5 * h * np.asarray(ivp.rhs(t, V), dtype=float)
    state = V + h * np.asarray(ivp.rhs(t + 0.5 * h, stage), dtype=float)
    return StepResult(state, stage, 0, 0.0)


def step_rand_expl_rk2(ivp: IVP, t: float, V, h: float, tau: float) -> StepResult:
    """Explicit midpoint step with the interior evaluation time drawn at t + tau*h."""
    _check_tau(tau)
    V = np.asarray(V, dtype=float)
    stage = V + tau * h * np.asarray(ivp.rhs(t, V), dtype=float)
    state = V + h * np.asarray(ivp.rhs(t + tau * h, stage), dtype=float)
    return StepResult(state, stage, 0, 0.0)


def _guard_contraction(ivp: IVP, h: float, factor: float, cfg: StageSolverConfig, what: str):
    if cfg.lipschitz_guard and cfg.method == PICARD and ivp.lipschitz is not None:
        if ivp.lipschitz * h * factor >= 1.0:
            raise ContractionViolated(
                f"{what}: L*h{'*tau' if factor != 1.0 else ''} = "
                f"{ivp.lipschitz * h * factor:g} >= 1; use the affine or newton solver"
            )


def step_s1(ivp: IVP, t: float, V, h: float, tau: float, cfg: StageSolverConfig) -> StepResult:
    """Semi-implicit randomized step: implicit Euler stage at theta = t + tau*h."""
    _check_tau(tau)
    V = np.asarray(V, dtype=float)
    theta = t + tau * h
    _guard_contraction(ivp, h, tau, cfg, "s1 stage")

    def stage_map(x):
        return V + (tau * h) * np.asarray(ivp.rhs(theta, x), dtype=float)

    if cfg.method == PICARD:
        stage, iters, residual = solve_stage_picard(stage_map, V, cfg)
    elif cfg.method == AFFINE:
        stage = solve_stage_affine(ivp, theta, V, tau, h)
        iters, residual = 1, _norm(stage - stage_map(stage))
    else:
        stage, iters, residual = solve_stage_newton(stage_map, V, cfg)
    state = V + h * np.asarray(ivp.rhs(theta, stage), dtype=float)
    return StepResult(state, stage, iters, residual)


def step_s2(ivp: IVP, t: float, V, h: float, tau: float, cfg: StageSolverConfig) -> StepResult:
    """Implicit randomized step: slope at the point (1-tau)*V + tau*V' of the chord."""
    _check_tau(tau)
    V = np.asarray(V, dtype=float)
    theta = t + tau * h
    # the fixed-point map x -> V + h f(theta, (1-tau)V + tau x) is (L*h*tau)-
    # Lipschitz, bounded by L*h; the guard mirrors the existence condition
    _guard_contraction(ivp, h, 1.0, cfg, "s2 step")

    def state_map(x):
        return V + h * np.asarray(ivp.rhs(theta, (1.0 - tau) * V + tau * x), dtype=float)

    if cfg.method == PICARD:
        state, iters, residual = solve_stage_picard(state_map, V, cfg)
    elif cfg.method == AFFINE:
        c0 = V + (1.0 - tau) * h * np.asarray(ivp.rhs(theta, V), dtype=float)
        state = solve_stage_affine(ivp, theta, c0, tau, h)
        iters, residual = 1, _norm(state - state_map(state))
    else:
        state, iters, residual = solve_stage_newton(state_map, V, cfg)
    stage = (1.0 - tau) * V + tau * state
    return StepResult(state, stage, iters, residual)


def step_det_s1(ivp: IVP, t: float, V, h: float, cfg: StageSolverConfig) -> StepResult:
    """Deterministic counterpart of the semi-implicit step (tau pinned to 1/2)."""
    return step_s1(ivp, t, V, h, 0.5, cfg)


def step_det_s2(ivp: IVP, t: float, V, h: float, cfg: StageSolverConfig) -> StepResult:
    """Deterministic counterpart of the implicit step (tau pinned to 1/2); the midpoint rule."""
    return step_s2(ivp, t, V, h, 0.5, cfg)


def integrate(ivp: IVP, scheme: SchemeId, grid: TimeGrid, taus=None,
              cfg: StageSolverConfig | None = None) -> Trajectory:
    """Run one trajectory of `scheme` over `grid`.

    `taus` must be a TauStream (or FixedTau) for the randomized schemes and
    is ignored otherwise.  Stage-solver errors propagate annotated with the
    failing step index.  Explicit schemes are allowed to overflow; the
    trajectory then records non-finite states.
    """
    scheme = SchemeId(scheme)
    if cfg is None:
        cfg = StageSolverConfig()
    if scheme.randomized and taus is None:
        raise ValueError(f"{scheme.value} needs a tau source")
    if scheme.implicit and cfg.method == AFFINE and ivp.affine is None:
        raise ValueError("affine solver requested but ivp.affine is missing")

    n, h = grid.n, grid.h
    t = grid.times()
    states = np.empty((n + 1, ivp.dim))
    states[0] = ivp.eta
    tau_used = np.empty(n) if scheme.randomized else np.empty(0)
    iters = np.zeros(n, dtype=int)

    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n + 1):
            V = states[j - 1]
            try:
                if scheme is SchemeId.DET_RK2:
                    res = step_det_rk2(ivp, t[j - 1], V, h)
                elif scheme is SchemeId.RAND_EXPL_RK2:
                    tau_used[j - 1] = taus.next()
                    res = step_rand_expl_rk2(ivp, t[j - 1], V, h, tau_used[j - 1])
                elif scheme is SchemeId.DET_S1:
                    res = step_det_s1(ivp, t[j - 1], V, h, cfg)
                elif scheme is SchemeId.DET_S2:
                    res = step_det_s2(ivp, t[j - 1], V, h, cfg)
                elif scheme is SchemeId.S1:
                    tau_used[j - 1] = taus.next()
                    res = step_s1(ivp, t[j - 1], V, h, tau_used[j - 1], cfg)
                else:
                    tau_used[j - 1] = taus.next()
                    res = step_s2(ivp, t[j - 1], V, h, tau_used[j - 1], cfg)
            except StageSolverError as exc:
                raise type(exc)(f"step {j}: {exc}") from exc
            states[j] = res.state
            iters[j - 1] = res.iters

    return Trajectory(grid=grid, scheme=scheme, states=states, taus=tau_used,
                      stage_iters=iters, converged=True)


# ---------------------------------------------------------------------------
# vectorized multi-path driver (Monte Carlo hot path)
# ---------------------------------------------------------------------------


def _row_norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=1))


def _batch_picard(map_, start: np.ndarray, cfg: StageSolverConfig):
    """Per-path Picard iteration over stacked states (paths, dim).

    Each path stops updating the moment its own residual criterion is met,
    so lane i reproduces exactly what solve_stage_picard would have done on
    that path alone.
    """
    v = start.copy()
    npaths = v.shape[0]
    cap = _DIVERGENCE_FACTOR * (1.0 + _row_norm(start))
    iters = np.zeros(npaths, dtype=int)
    done = np.zeros(npaths, dtype=bool)
    for k in range(1, cfg.max_iter + 1):
        w = map_(v)
        act = ~done
        wn = _row_norm(w)
        if np.any(act & ~(wn <= cap)):
            lane = int(np.flatnonzero(act & ~(wn <= cap))[0])
            raise NonConvergence(f"picard iterate blew up (path {lane})")
        delta = _row_norm(w - v)
        v[act] = w[act]
        iters[act] = k
        done |= act & (delta <= cfg.tol * (1.0 + wn))
        if done.all():
            return v, iters
    lane = int(np.flatnonzero(~done)[0])
    raise NonConvergence(f"picard did not converge in {cfg.max_iter} iterations (path {lane})")


def integrate_paths(ivp: IVP, scheme: SchemeId, grid: TimeGrid, taus=None,
                    n_paths: int | None = None,
                    cfg: StageSolverConfig | None = None) -> np.ndarray:
    """Integrate many paths at once; returns states of shape (paths, n+1, dim).

    `taus` is a (paths, n) matrix of uniform draws (row i = the draws path i
    would consume step by step).  Requires a vectorized right-hand side; the
    implicit schemes run the per-path Picard solver, so the contraction
    condition must hold.  Used by the Monte Carlo error estimator.
    """
    scheme = SchemeId(scheme)
    if cfg is None:
        cfg = StageSolverConfig()
    if not ivp.rhs_vectorized:
        raise ValueError("integrate_paths needs ivp.rhs_vectorized")
    if scheme.implicit and cfg.method != PICARD:
        raise ValueError("integrate_paths supports the picard stage solver only")
    if scheme.randomized:
        if taus is None:
            raise ValueError(f"{scheme.value} needs a tau matrix")
        taus = np.asarray(taus, dtype=float)
        n_paths = taus.shape[0]
        if taus.shape != (n_paths, grid.n):
            raise ValueError(f"tau matrix must have shape (paths, {grid.n})")
    elif n_paths is None:
        n_paths = 1

    n, h = grid.n, grid.h
    t = grid.times()
    rhs = ivp.rhs
    states = np.empty((n_paths, n + 1, ivp.dim))
    states[:, 0, :] = ivp.eta
    V = states[:, 0, :].copy()

    if scheme.implicit and cfg.lipschitz_guard and ivp.lipschitz is not None:
        # tau < 1 makes L*h < 1 sufficient for both implicit schemes
        if ivp.lipschitz * h >= 1.0:
            raise ContractionViolated(
                f"L*h = {ivp.lipschitz * h:g} >= 1; the vectorized picard driver cannot run"
            )

    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(1, n + 1):
            tj = t[j - 1]
            if scheme is SchemeId.DET_RK2:
                stage = V + 0.5 * h * rhs(tj, V)
                V = V + h * rhs(tj + 0.5 * h, stage)
            elif scheme is SchemeId.RAND_EXPL_RK2:
                tau = taus[:, j - 1].reshape(-1, 1)
                stage = V + tau * h * rhs(tj, V)
                V = V + h * rhs(tj + tau * h, stage)
            elif scheme in (SchemeId.S1, SchemeId.DET_S1):
                if scheme is SchemeId.S1:
                    tau = taus[:, j - 1].reshape(-1, 1)
                    theta = tj + tau * h
                else:
                    tau, theta = 0.5, tj + 0.5 * h
                base = V
                stage, _ = _batch_picard(lambda x: base + tau * h * rhs(theta, x), V, cfg)
                V = V + h * rhs(theta, stage)
            else:  # S2 / DET_S2
                if scheme is SchemeId.S2:
                    tau = taus[:, j - 1].reshape(-1, 1)
                    theta = tj + tau * h
                else:
                    tau, theta = 0.5, tj + 0.5 * h
                base = V
                V, _ = _batch_picard(
                    lambda x: base + h * rhs(theta, (1.0 - tau) * base + tau * x), V, cfg)
            states[:, j, :] = V

    return states
