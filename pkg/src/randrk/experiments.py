"""Monte Carlo error estimation, convergence-order fitting, and the stiff demo.

The error functional is the L^p norm (over paths) of the max-over-grid
deviation from a reference solution, matching the quantity the randomized
schemes are analyzed with.  Randomized runs draw path i from
tau_stream(seed, i), so estimates are bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ivp import IVP, SchemeId, TimeGrid, make_grid, stiff_problem, tau_stream
from .schemes import (AFFINE, PICARD, StageSolverConfig, StageSolverError,
                      integrate, integrate_paths)


class DegenerateFit(RuntimeError):
    """Order fit impossible: some level produced a zero or non-finite error."""


class NotOnReferenceGrid(ValueError):
    """Fallback reference solution requested at a time off its grid."""


def worker_count() -> int:
    """Worker cap for per-path integration; RANDRK_THREADS overrides the CPU count."""
    env = os.environ.get("RANDRK_THREADS")
    if env is not None:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class ErrorEstimate:
    """L^p-over-paths estimate of the max-over-grid error, with its MC standard error."""

    scheme: SchemeId
    h: float
    p: float
    paths: int
    value: float
    std_error: float
    nonfinite_paths: int = 0


@dataclass
class OrderFit:
    """Least-squares slope of log(error) against log(h) over several levels."""

    levels: list  # [(h, ErrorEstimate)], h decreasing
    slope: float
    intercept: float
    r2: float


@functools.lru_cache(maxsize=8)
def _reference_trajectory(ivp: IVP, n_ref: int):
    cfg = StageSolverConfig(method=AFFINE) if ivp.affine is not None else StageSolverConfig()
    return integrate(ivp, SchemeId.DET_S2, make_grid(ivp.t0, ivp.t1, n_ref), None, cfg)


def reference_solution(ivp: IVP, t: float, n_max: int | None = None) -> np.ndarray:
    """True solution at time t: ivp.exact if present, else a fine det-s2 run.

    The fallback grid has 64 * n_max steps and is only read at grid-aligned
    times (no interpolation); `n_max` should be the largest step count used
    in the experiment that consumes the reference.
    """
    if ivp.exact is not None:
        return np.asarray(ivp.exact(t), dtype=float).reshape(ivp.dim)
    if n_max is None:
        raise ValueError("fallback reference needs n_max (largest experimental n)")
    n_ref = 64 * int(n_max)
    traj = _reference_trajectory(ivp, n_ref)
    k = (t - ivp.t0) / ((ivp.t1 - ivp.t0) / n_ref)
    kr = round(k)
    if abs(k - kr) > 1e-9 or not 0 <= kr <= n_ref:
        raise NotOnReferenceGrid(f"t={t} is not on the reference grid (index {k:.6f})")
    return traj.states[kr]


def _max_error(states: np.ndarray, ref: np.ndarray) -> float:
    diff = states - ref
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=-1))))


def mc_error(ivp: IVP, scheme: SchemeId, grid: TimeGrid, paths: int, p: float,
             seed: int, cfg: StageSolverConfig | None = None) -> ErrorEstimate:
    """Estimate || max_j || ref(t_j) - V^j || ||_p over `paths` Monte Carlo paths.

    Path i consumes tau_stream(seed, i).  Deterministic schemes are run once
    (paths is forced to 1, standard error 0).  Paths with non-finite states
    contribute +inf and are counted in `nonfinite_paths`; stage-solver
    failures abort the whole estimate, annotated with the path index.
    """
    scheme = SchemeId(scheme)
    if p < 2:
        raise ValueError("p must be >= 2")
    if paths < 1:
        raise ValueError("paths must be >= 1")
    if cfg is None:
        cfg = StageSolverConfig()

    ref = np.stack([reference_solution(ivp, tj, n_max=grid.n) for tj in grid.times()])

    if not scheme.randomized:
        traj = integrate(ivp, scheme, grid, None, cfg)
        errs = np.array([_max_error(traj.states, ref)])
    elif ivp.rhs_vectorized and cfg.method == PICARD:
        taus = np.empty((paths, grid.n))
        for i in range(paths):
            taus[i] = tau_stream(seed, i).draw(grid.n)
        states = integrate_paths(ivp, scheme, grid, taus, cfg=cfg)
        diff = states - ref[None, :, :]
        with np.errstate(invalid="ignore", over="ignore"):
            errs = np.max(np.sqrt(np.sum(diff * diff, axis=2)), axis=1)
    else:
        def one(i: int) -> float:
            try:
                traj = integrate(ivp, scheme, grid, tau_stream(seed, i), cfg)
            except StageSolverError as exc:
                raise type(exc)(f"path {i}: {exc}") from exc
            return _max_error(traj.states, ref)

        workers = min(worker_count(), paths)
        if workers == 1:
            errs = np.array([one(i) for i in range(paths)])
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                errs = np.array(list(pool.map(one, range(paths))))

    m = len(errs)
    nonfinite = int(np.sum(~np.isfinite(errs)))
    errs = np.where(np.isfinite(errs), errs, np.inf)
    moments = errs ** p
    mean_p = float(np.sum(moments) / m)  # summed in path order: bit-deterministic
    value = mean_p ** (1.0 / p)
    if m > 1 and math.isfinite(value) and value > 0.0:
        se_mean = float(np.std(moments, ddof=1)) / math.sqrt(m)
        std_error = se_mean / (p * value ** (p - 1.0))
    elif nonfinite:
        std_error = math.inf
    else:
        std_error = 0.0
    return ErrorEstimate(scheme=scheme, h=grid.h, p=float(p), paths=m,
                         value=value, std_error=std_error, nonfinite_paths=nonfinite)


def convergence_order(ivp: IVP, scheme: SchemeId, h_list, paths: int, p: float,
                      seed: int, cfg: StageSolverConfig | None = None) -> OrderFit:
    """Run mc_error at each step size and fit log(error) against log(h)."""
    hs = sorted((float(h) for h in h_list), reverse=True)
    if len(hs) < 3 or len(set(hs)) != len(hs):
        raise ValueError("need at least 3 distinct step sizes")
    span = ivp.t1 - ivp.t0
    levels = []
    for h in hs:
        n = round(span / h)
        if n < 1 or abs(span / h - n) > 1e-9:
            raise ValueError(f"h={h} does not divide the interval [{ivp.t0}, {ivp.t1}]")
        est = mc_error(ivp, scheme, make_grid(ivp.t0, ivp.t1, n), paths, p, seed, cfg)
        levels.append((h, est))

    values = np.array([est.value for _, est in levels])
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise DegenerateFit("zero or non-finite error at some level")
    logh = np.log([h for h, _ in levels])
    logv = np.log(values)
    slope, intercept = np.polyfit(logh, logv, 1)
    fitted = slope * logh + intercept
    ss_res = float(np.sum((logv - fitted) ** 2))
    ss_tot = float(np.sum((logv - np.mean(logv)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return OrderFit(levels=levels, slope=float(slope), intercept=float(intercept), r2=r2)


@dataclass
class StiffPath:
    """One sample path of the stiff benchmark: times, states, exact values, error."""

    scheme: SchemeId
    h: float
    path: int
    t: np.ndarray
    values: np.ndarray
    exact: np.ndarray
    error: np.ndarray  # values - exact; may be non-finite for explicit schemes

    @property
    def max_error(self) -> float:
        with np.errstate(invalid="ignore"):
            bad = ~np.isfinite(self.error)
            return math.inf if bad.any() else float(np.max(np.abs(self.error)))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.error)))


def stiff_demo(scheme: SchemeId, h: float, n_paths: int = 3, seed: int = 0,
               cfg: StageSolverConfig | None = None) -> list[StiffPath]:
    """Run the stiff benchmark x' = -50(x - cos t) on [0, 50] at step size h.

    Randomized schemes produce `n_paths` sample paths (path k drawn from
    tau_stream(seed, k)); deterministic schemes one.  Implicit schemes
    default to the direct affine stage solver, the only one usable at
    L*h = 50*h >= 1.  Explicit schemes may overflow; their tables then
    carry non-finite entries.
    """
    scheme = SchemeId(scheme)
    ivp = stiff_problem()
    span = ivp.t1 - ivp.t0
    n = round(span / h)
    if n < 1 or abs(span / h - n) > 1e-9:
        raise ValueError(f"h={h} does not divide [0, {span:g}]")
    if cfg is None:
        cfg = StageSolverConfig(method=AFFINE) if scheme.implicit else StageSolverConfig()
    grid = make_grid(ivp.t0, ivp.t1, n)
    t = grid.times()
    exact = np.array([ivp.exact(tj)[0] for tj in t])

    paths = n_paths if scheme.randomized else 1
    out = []
    for k in range(paths):
        taus = tau_stream(seed, k) if scheme.randomized else None
        traj = integrate(ivp, scheme, grid, taus, cfg)
        vals = traj.states[:, 0]
        out.append(StiffPath(scheme=scheme, h=grid.h, path=k, t=t,
                             values=vals, exact=exact, error=vals - exact))
    return out
