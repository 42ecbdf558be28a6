"""Probabilistic stability of the randomized implicit midpoint pair on x' = lam*x.

Both implicit schemes share the per-step multiplier 1 + z/(1 - z*tau) at
z = lam*h, with tau uniform on [0, 1).  Two functionals of z decide
stability of the product of such factors:

* mean-square gain  h(z) = E |1 + z/(1 - z*tau)|^2   (contraction in L2
  iff h(z) < 1); available in closed form and, as an independent oracle,
  by Gauss-Legendre quadrature;
* log-gain  l(z) = E log |1 + z/(1 - z*tau)|   (almost-sure / in-probability
  contraction iff l(z) < 0, which holds exactly on Re z < 0).

The mean-square region is a bounded open subset of the left half-plane
whose real-axis section is (-x0, 0) with x0 between 4.03 and 4.04; the
log-gain region is the entire left half-plane.  `scan_region` rasterizes
either functional and `contour_extract` traces the level-1 (or level-0)
boundary with marching squares.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .ivp import TauStream


class PoleAtStage(ZeroDivisionError):
    """The multiplier 1 + z/(1 - z*tau) is evaluated at its pole z*tau = 1."""


class NonIntegrable(ValueError):
    """The mean-square integrand has a non-integrable pole (real z >= 1)."""


class EmptyContour(RuntimeError):
    """No cell edge of the grid crosses the requested level."""


_GL_NODES: dict = {}

# points whose mean-square gain is this close to 1 sit on the region
# boundary and are not counted as members (the region is open)
MS_BOUNDARY_TOL = 1e-12


def amplification(z: complex, tau: float) -> complex:
    """Per-step multiplier 1 + z/(1 - z*tau) of both implicit schemes."""
    z = complex(z)
    den = 1.0 - z * tau
    if den == 0:
        raise PoleAtStage(f"multiplier pole at z={z}, tau={tau}")
    return 1.0 + z / den


def ms_interval_gap(a):
    """Excess mean-square gain on the real axis: h(a) - 1 = a^2/(1-a) - 2*log(1-a).

    Defined for real a < 1; negative exactly on the stable interval (-x0, 0).
    """
    a = np.asarray(a, dtype=float)
    if np.any(a >= 1.0):
        raise ValueError("ms_interval_gap needs a < 1")
    out = a * a / (1.0 - a) - 2.0 * np.log1p(-a)
    return float(out) if out.ndim == 0 else out


def ms_functional_quadrature(z: complex, nodes: int = 64) -> float:
    """Gauss-Legendre value of the mean-square gain integral over tau in [0, 1].

    Independent oracle for the closed form.  Raises NonIntegrable for real
    z >= 1, where the integrand has a second-order pole inside the range.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real >= 1.0:
        raise NonIntegrable(f"integrand pole at tau = 1/{z.real:g} is non-integrable")
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    if nodes not in _GL_NODES:
        x, w = leggauss(nodes)
        _GL_NODES[nodes] = ((x + 1.0) / 2.0, w / 2.0)
    t, w = _GL_NODES[nodes]
    amp = 1.0 + z / (1.0 - t * z)
    return float(np.sum(w * (amp.real ** 2 + amp.imag ** 2)))


def ms_functional_closed(z):
    """Closed-form mean-square gain E |1 + z/(1 - z*tau)|^2.

    Piecewise exact: the real-axis section uses the antiderivative behind
    `ms_interval_gap`; real z >= 1 gives +inf; off-axis z with Re z < 1 uses
    the log/arctan formula (valid there with the principal arctan); the
    remaining wedge Re z >= 1, Im z != 0 falls back to quadrature, where the
    integrand is pole-free but the compact arctan identity breaks.
    Accepts scalars or arrays.
    """
    zz = np.asarray(z, dtype=complex)
    scalar = zz.ndim == 0
    a = np.atleast_1d(zz.real).astype(float)
    b = np.atleast_1d(zz.imag).astype(float)
    out = np.empty(a.shape, dtype=float)

    axis = b == 0.0
    m = axis & (a < 1.0)
    if m.any():
        out[m] = 1.0 + ms_interval_gap(a[m])
    m = axis & (a >= 1.0)
    if m.any():
        out[m] = np.inf
    m = ~axis & (a < 1.0)
    if m.any():
        am, bm = a[m], b[m]
        absb = np.abs(bm)
        r2 = am * am + bm * bm
        one_m_a = 1.0 - am
        out[m] = (1.0 - np.log(one_m_a * one_m_a + bm * bm)
                  + (r2 / absb) * np.arctan(absb / one_m_a))
    m = ~axis & (a >= 1.0)
    if m.any():
        idx = np.flatnonzero(m.ravel())
        flat = out.reshape(-1)
        af, bf = a.reshape(-1), b.reshape(-1)
        for i in idx:
            flat[i] = ms_functional_quadrature(complex(af[i], bf[i]), nodes=256)

    if scalar:
        return float(out[0]) if out.shape == (1,) else float(out.reshape(()))
    return out.reshape(zz.shape)


def _log_abs_linear_integral(a, b):
    """J(a, b) = integral over t in [0, 1] of log |1 + (a + b*i) t| dt.

    Closed form from the antiderivative of log of a quadratic; on the real
    axis the lone zero of |1 + a*t| is log-integrable and the formula below
    is its finite limit.
    """
    out = np.empty(a.shape, dtype=float)
    offaxis = b != 0.0
    if offaxis.any():
        am, bm = a[offaxis], b[offaxis]
        absb = np.abs(bm)
        r2 = am * am + bm * bm
        q1 = (1.0 + am) ** 2 + bm * bm  # |1 + z|^2
        out[offaxis] = 0.5 * ((1.0 + am / r2) * np.log(q1) - 2.0
                              + (2.0 * absb / r2)
                              * (np.arctan((r2 + am) / absb) - np.arctan(am / absb)))
    m = ~offaxis
    if m.any():
        am = a[m]
        res = np.empty(am.shape, dtype=float)
        tiny = np.abs(am) < 1e-12
        res[tiny] = am[tiny] / 2.0
        at_root = (am == -1.0)
        res[at_root] = -1.0
        rest = ~(tiny | at_root)
        ar = am[rest]
        res[rest] = (1.0 + 1.0 / ar) * np.log(np.abs(1.0 + ar)) - 1.0
        out[m] = res
    return out


def as_functional(z):
    """Log-gain E log |1 + z/(1 - z*tau)|; negative exactly on Re z < 0.

    Computed as J(z) - J(-z) with J the log-modulus integral of 1 + z*t,
    so the antisymmetry in z is structural.  Accepts scalars or arrays.
    """
    zz = np.asarray(z, dtype=complex)
    scalar = zz.ndim == 0
    a = np.atleast_1d(zz.real).astype(float)
    b = np.atleast_1d(zz.imag).astype(float)
    out = _log_abs_linear_integral(a, b) - _log_abs_linear_integral(-a, b)
    if scalar:
        return float(out.reshape(-1)[0])
    return out.reshape(zz.shape)


def find_ms_interval_endpoint(tol: float = 1e-12) -> float:
    """Bisect for the left endpoint x0 of the real mean-square interval (-x0, 0).

    The gap function changes sign between -4.04 and -4.03; bisection to the
    given bracket width pins x0 with |gap(-x0)| well under 1e-11.
    """
    lo, hi = 4.03, 4.04
    if not (ms_interval_gap(-lo) < 0.0 < ms_interval_gap(-hi)):
        raise RuntimeError("sign change lost on [4.03, 4.04]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ms_interval_gap(-mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class StabilityVerdict:
    """Membership of one complex point z = lam*h in the three stability regions."""

    z: complex
    ms_value: float
    as_value: float
    in_ms: bool
    on_ms_boundary: bool
    in_as_sp: bool
    in_det_ref: bool


def classify_point(z: complex) -> StabilityVerdict:
    """Evaluate both functionals at z and report region membership.

    Mean-square membership is the strict inequality h(z) < 1; values within
    MS_BOUNDARY_TOL of 1 are flagged as boundary and not counted as members.
    The almost-sure / in-probability region and the deterministic reference
    region are both the open left half-plane.
    """
    z = complex(z)
    ms = ms_functional_closed(z)
    asv = as_functional(z)
    boundary = math.isfinite(ms) and abs(ms - 1.0) <= MS_BOUNDARY_TOL
    return StabilityVerdict(
        z=z, ms_value=ms, as_value=asv,
        in_ms=bool(ms < 1.0 and not boundary),
        on_ms_boundary=boundary,
        in_as_sp=z.real < 0.0,
        in_det_ref=z.real < 0.0,
    )


@dataclass
class RegionGrid:
    """Functional values sampled on the cell-center lattice of a rectangle."""

    rect: tuple  # (re_min, re_max, im_min, im_max)
    nx: int
    ny: int
    values: np.ndarray  # (nx, ny), values[i, j] at (re_axis[i], im_axis[j])
    level: float

    @property
    def re_axis(self) -> np.ndarray:
        re_min, re_max = self.rect[0], self.rect[1]
        return re_min + (np.arange(self.nx) + 0.5) * (re_max - re_min) / self.nx

    @property
    def im_axis(self) -> np.ndarray:
        im_min, im_max = self.rect[2], self.rect[3]
        return im_min + (np.arange(self.ny) + 0.5) * (im_max - im_min) / self.ny

    @property
    def cell_width(self) -> float:
        return max((self.rect[1] - self.rect[0]) / self.nx,
                   (self.rect[3] - self.rect[2]) / self.ny)


def scan_region(rect, nx: int, ny: int, functional: str = "ms") -> RegionGrid:
    """Sample the chosen functional ("ms" or "as") on an nx-by-ny center lattice."""
    re_min, re_max, im_min, im_max = (float(v) for v in rect)
    if nx < 2 or ny < 2:
        raise ValueError("need nx, ny >= 2")
    if not (re_min < re_max and im_min < im_max):
        raise ValueError("degenerate rectangle")
    if functional not in ("ms", "as"):
        raise ValueError(f"unknown functional {functional!r}")
    grid = RegionGrid(rect=(re_min, re_max, im_min, im_max), nx=nx, ny=ny,
                      values=np.empty((nx, ny)), level=1.0 if functional == "ms" else 0.0)
    re, im = np.meshgrid(grid.re_axis, grid.im_axis, indexing="ij")
    zz = re + 1j * im
    grid.values[:] = ms_functional_closed(zz) if functional == "ms" else as_functional(zz)
    return grid


# marching squares: cell corners are numbered bottom-left, bottom-right,
# top-right, top-left; entries list the pairs of crossed cell sides
# (B | R | T | L) connected inside the cell for each corner sign pattern
_MS_CASES = {
    1: [("L", "B")], 2: [("B", "R")], 3: [("L", "R")], 4: [("T", "R")],
    6: [("B", "T")], 7: [("L", "T")], 8: [("L", "T")], 9: [("B", "T")],
    11: [("T", "R")], 12: [("L", "R")], 13: [("B", "R")], 14: [("L", "B")],
}


def contour_extract(grid: RegionGrid, level: float | None = None):
    """Trace the iso-level polylines of a region grid (marching squares).

    Crossing points are linearly interpolated along lattice edges; edges with
    an infinite endpoint put the crossing at the finite end.  Returns a list
    of (k, 2) arrays of (re, im) vertices; closed loops repeat their first
    vertex.  Raises EmptyContour when no edge crosses the level.
    """
    if level is None:
        level = grid.level
    v = grid.values
    xs, ys = grid.re_axis, grid.im_axis
    above = ~(v < level)  # treats +inf as above

    code = (above[:-1, :-1].astype(np.int8) + 2 * above[1:, :-1]
            + 4 * above[1:, 1:] + 8 * above[:-1, 1:])
    cells = np.argwhere((code != 0) & (code != 15))
    if cells.size == 0:
        raise EmptyContour("grid never crosses the level")

    point_cache: dict = {}

    def edge_point(edge):
        if edge in point_cache:
            return point_cache[edge]
        kind, i, j = edge
        if kind == "h":  # between lattice points (i, j) and (i+1, j)
            v0, v1 = v[i, j], v[i + 1, j]
        else:  # between (i, j) and (i, j+1)
            v0, v1 = v[i, j], v[i, j + 1]
        if np.isinf(v1):
            f = 1.0 if np.isinf(v0) else 0.0
        elif np.isinf(v0):
            f = 1.0
        else:
            f = float(np.clip((level - v0) / (v1 - v0), 0.0, 1.0))
        if kind == "h":
            pt = (xs[i] + f * (xs[i + 1] - xs[i]), ys[j])
        else:
            pt = (xs[i], ys[j] + f * (ys[j + 1] - ys[j]))
        point_cache[edge] = pt
        return pt

    segments = []
    for i, j in cells:
        c = int(code[i, j])
        sides = {"B": ("h", i, j), "T": ("h", i, j + 1),
                 "L": ("v", i, j), "R": ("v", i + 1, j)}
        if c in (5, 10):
            center_above = bool(np.mean(v[i:i + 2, j:j + 2]) >= level)
            if (c == 5) == center_above:
                pairs = [("L", "T"), ("B", "R")]
            else:
                pairs = [("L", "B"), ("T", "R")]
        else:
            pairs = _MS_CASES[c]
        for sa, sb in pairs:
            segments.append((sides[sa], sides[sb]))

    # stitch segments into chains by shared edge endpoints
    node_segs = defaultdict(list)
    for idx, (ea, eb) in enumerate(segments):
        node_segs[ea].append(idx)
        node_segs[eb].append(idx)
    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        ea, eb = segments[start]
        used[start] = True
        chain = [ea, eb]
        closed = False
        for tail in (True, False):
            while True:
                node = chain[-1] if tail else chain[0]
                nxt = [s for s in node_segs[node] if not used[s]]
                if not nxt:
                    break
                s = nxt[0]
                used[s] = True
                a, b = segments[s]
                other = b if a == node else a
                if other == (chain[0] if tail else chain[-1]):
                    closed = True
                    (chain.append if tail else lambda e: chain.insert(0, e))(other)
                    break
                (chain.append if tail else lambda e: chain.insert(0, e))(other)
            if closed:
                break
        polylines.append(np.array([edge_point(e) for e in chain]))
    return polylines


# ---------------------------------------------------------------------------
# Monte Carlo checks of the two functionals
# ---------------------------------------------------------------------------


def sample_ms_gain(z: complex, draws: int, seed: int = 0, path: int = 0):
    """Sample mean and standard error of |1 + z/(1 - z*tau)|^2 over `draws` taus."""
    z = complex(z)
    taus = TauStream(seed, path).draw(int(draws))
    amp = 1.0 + z / (1.0 - z * taus)
    g = amp.real ** 2 + amp.imag ** 2
    return float(np.mean(g)), float(np.std(g, ddof=1) / math.sqrt(len(g)))


def empirical_decay_rate(z: complex, steps: int, seed: int = 0, path: int = 0) -> float:
    """Per-step decay rate (1/k) log |V^k| of one simulated multiplier product."""
    z = complex(z)
    taus = TauStream(seed, path).draw(int(steps))
    amp = 1.0 + z / (1.0 - z * taus)
    return float(np.mean(np.log(np.abs(amp))))
