"""Shared numerical kernels.

* :func:`integrate_adaptive` -- globally adaptive Gauss-Kronrod (7/15) quadrature
  for vectorized (optionally vector-valued) integrands.
* :func:`integrate_to_infinity` -- the same on ``[lo, inf)`` through an algebraic map.
* :func:`sum_with_tail` -- truncated series with a geometric tail bound.
* :func:`locate_minima` and :class:`PeakMap` -- resonance handling: locate the
  near-zeros of a smooth positive function and build a change of variables that
  flattens Lorentzian peaks of the reciprocal.

Every reduction is performed in a fixed interval (or index) order so that results
do not depend on how work is scheduled.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:15:2] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


class QuadratureError(RuntimeError):
    """Raised when adaptive subdivision hits its panel budget.

    The best available estimate is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SeriesError(RuntimeError):
    """Raised when a series fails to converge or stops decaying."""

    def __init__(self, message, value=None, tail_estimate=None):
        super().__init__(message)
        self.value = value
        self.tail_estimate = tail_estimate


@dataclass
class IntegrationResult:
    value: float | np.ndarray
    error_estimate: float | np.ndarray
    panels_used: int
    warnings: list[str] = field(default_factory=list)


@dataclass
class SeriesResult:
    value: float
    tail_estimate: float
    terms_used: int


def _gk15(f, a, b, noise=None):
    """Apply the 7/15 rule to every panel ``[a[i], b[i]]`` in one integrand call.

    Returns Kronrod estimates, QUADPACK-style error estimates and roundoff floors,
    each with shape ``(ncomp, npanels)``. ``noise(x)`` optionally gives the relative
    evaluation error of the integrand, which raises the floor. With
    ``noise="returned"`` the integrand itself returns ``(values, relative_error)``.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    if isinstance(noise, str):
        fx, rel = f(x.ravel())
        fx = np.asarray(fx, dtype=float).reshape(-1, a.size, 15)
    else:
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(-1, a.size, 15)
        rel = None if noise is None else noise(x.ravel())
    if not np.all(np.isfinite(fx)):
        raise FloatingPointError("integrand returned a non-finite value")
    kron = fx @ KRONROD_WEIGHTS
    gauss = fx @ GAUSS_WEIGHTS
    mean = kron / 2.0
    resasc = np.abs(fx - mean[..., None]) @ KRONROD_WEIGHTS
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    err = np.abs(kron - gauss)
    scale = np.where(resasc > 0, np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), 1.0)
    err = np.where((resasc > 0) & (err > 0), resasc * scale, err)
    # subnormal values carry too few bits for any relative accuracy
    roundoff = np.maximum(50.0 * _EPS * resabs, _TINY)
    if rel is not None:
        rel = np.asarray(rel, dtype=float).reshape(-1, a.size, 15)
        roundoff = roundoff + (np.abs(fx) * rel) @ KRONROD_WEIGHTS
    err = np.maximum(err, roundoff)
    h = np.abs(half)
    return kron * half, err * h, roundoff * h


def integrate_adaptive(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       rel_tol: float = 1e-10, abs_tol: float = 0.0, initial_panels: int = 1,
                       breakpoints: Sequence[float] | None = None, max_panels: int = 20000,
                       vectorized: bool = True, noise=None, joint: bool = False) -> IntegrationResult:
    """Integrate ``f`` over ``[lo, hi]``.

    ``f`` receives a 1-D array of abscissae and returns either an array of the
    same length or, for vector-valued integrands, an array of shape
    ``(ncomp, len(x))``. Each component must satisfy
    ``err <= max(abs_tol, rel_tol * |value|)``.

    Panels are refined by bisection. On every pass all panels whose error exceeds
    the average allotment ``tol / npanels`` are split, so a single integrand call
    evaluates a whole batch of new panels. Panels whose error is at the roundoff
    floor (raised by ``noise``, the relative evaluation error of ``f``) are not
    split; if that leaves the tolerance unmet a warning is recorded. ``noise`` is
    a callable of the abscissae, or ``"returned"`` when ``f`` returns the pair
    ``(values, relative_error)``. With ``joint`` the tolerance applies to the sum
    of the components rather than to each one, which is appropriate when only
    the sum matters and some components are negligible.
    """
    if not hi > lo:
        raise ValueError(f"integration requires lo < hi, got [{lo}, {hi}]")
    if not vectorized:
        g = f
        f = lambda x: np.array([g(xi) for xi in x])  # noqa: E731

    edges = np.linspace(lo, hi, max(1, int(initial_panels)) + 1)
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float)
        bp = bp[(bp > lo) & (bp < hi)]
        edges = np.unique(np.concatenate([edges, bp]))
    a = edges[:-1].copy()
    b = edges[1:].copy()
    val, err, rnd = _gk15(f, a, b, noise)
    probe = f(np.array([0.5 * (lo + hi)]))
    if isinstance(noise, str):
        probe = probe[0]
    scalar = val.shape[0] == 1 and np.ndim(probe) == 1
    warnings: list[str] = []

    while True:
        total = val.sum(axis=1)
        if joint:
            tol = np.full(total.shape, max(abs_tol, rel_tol * abs(total.sum())))
            tot_err = np.full(total.shape, err.sum())
        else:
            tol = np.maximum(abs_tol, rel_tol * np.abs(total))
            tot_err = err.sum(axis=1)
        if np.all(tot_err <= tol):
            break
        npan = a.size
        # panels at the roundoff floor or at floating-point resolution stay as they are
        wide = ((b - a) > 8 * _EPS * np.maximum(np.abs(a), np.abs(b)))[None, :]
        if joint:
            perr = err.sum(axis=0, keepdims=True)
            need = ((perr > tol[0] / npan) & (perr > rnd.sum(axis=0, keepdims=True) * 1.0000001) & wide)[0]
        else:
            splittable = (err > rnd * 1.0000001) & wide
            need = np.any((err > tol[:, None] / npan) & splittable, axis=0)
        if not np.any(need):
            warnings.append("roundoff limited: requested tolerance not reachable")
            break
        if npan + need.sum() > max_panels:
            order = np.argsort(a)
            res = IntegrationResult(_squeeze(val[:, order].sum(axis=1), scalar),
                                    _squeeze(err.sum(axis=1), scalar), npan, warnings)
            raise QuadratureError(f"maximum subdivision ({max_panels} panels) reached", res)
        nsplit = int(need.sum())
        m = 0.5 * (a[need] + b[need])
        na = np.concatenate([a[need], m])
        nb = np.concatenate([m, b[need]])
        v2, e2, r2 = _gk15(f, na, nb, noise)
        keep = ~need
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[:, keep], v2], axis=1)
        err = np.concatenate([err[:, keep], e2], axis=1)
        rnd = np.concatenate([rnd[:, keep], r2], axis=1)

    order = np.argsort(a, kind="stable")
    value = val[:, order].sum(axis=1)
    return IntegrationResult(_squeeze(value, scalar), _squeeze(err.sum(axis=1), scalar), a.size, warnings)


def _squeeze(arr, scalar):
    return float(arr[0]) if scalar else arr


def integrate_to_infinity(f, lo=0.0, rel_tol=1e-10, abs_tol=0.0, scale=1.0, **kw) -> IntegrationResult:
    """Integrate ``f`` over ``[lo, inf)`` with ``x = lo + scale * t / (1 - t)``."""

    def g(t):
        t = np.asarray(t)
        one_minus = 1.0 - t
        x = lo + scale * t / one_minus
        jac = scale / one_minus**2
        with np.errstate(over="ignore", invalid="ignore"):
            val = np.asarray(f(x)) * jac
        return np.where(np.isfinite(val), val, 0.0)

    return integrate_adaptive(g, 0.0, 1.0, rel_tol=rel_tol, abs_tol=abs_tol, **kw)


def sum_with_tail(term: Callable, tail_tol: float = 1e-9, max_terms: int = 100000, start: int = 0,
                  batch: int = 1, grace: int = 8, workers: int = 1) -> SeriesResult:
    """Sum ``term(l)`` for ``l = start, start + 1, ...`` until the series has converged.

    Summation stops at the first index ``L`` (past ``start + 1``) with
    ``|term(L)| <= tail_tol * |partial sum|``. The remainder is bounded by the
    geometric extrapolation ``|t_L| q / (1 - q)`` with ``q = |t_L / t_{L-1}|``.

    With ``batch > 1``, ``term`` is called with an integer array of indices and
    must return an array. ``workers > 1`` evaluates several batches concurrently;
    summation is always done in index order, so the result is independent of
    ``workers``.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")

    def evaluate(first):
        idx = np.arange(first, min(first + batch, start + max_terms))
        if batch == 1:
            return np.array([float(term(int(idx[0])))])
        return np.asarray(term(idx), dtype=float)

    total = 0.0
    comp = 0.0
    prev = None
    # window of recent magnitudes; growth is judged against the term ``grace`` steps back
    # so per-term quadrature noise on slowly varying series is not mistaken for divergence
    recent: deque[float] = deque(maxlen=grace)
    n = 0
    next_first = start
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while next_first < start + max_terms:
            firsts = [next_first + k * batch for k in range(max(1, workers))]
            firsts = [s for s in firsts if s < start + max_terms]
            if pool is not None:
                chunks = list(pool.map(evaluate, firsts))
            else:
                chunks = [evaluate(s) for s in firsts]
            next_first = firsts[-1] + batch
            for chunk in chunks:
                for t in chunk:
                    t = float(t)
                    if not math.isfinite(t):
                        raise SeriesError(f"non-finite term at index {start + n}", total)
                    # Kahan summation keeps long Matsubara sums reproducible to the last bits
                    yk = t - comp
                    tk = total + yk
                    comp = (tk - total) - yk
                    total = tk
                    n += 1
                    if prev is not None and n > 1:
                        if abs(t) <= tail_tol * abs(total):
                            if abs(prev) > 0 and abs(t) < abs(prev):
                                q = abs(t) / abs(prev)
                                tail = abs(t) * q / (1.0 - q)
                            elif t == 0.0:
                                tail = 0.0
                            else:
                                tail = abs(t)
                            return SeriesResult(total, tail, n)
                        if len(recent) == grace and abs(t) > recent[0] * (1 + 1e-6):
                            raise SeriesError(f"terms stopped decaying at index {start + n - 1}", total)
                    prev = t
                    if n > grace:
                        recent.append(abs(t))
    finally:
        if pool is not None:
            pool.shutdown()
    raise SeriesError(f"series not converged after {max_terms} terms", total,
                      abs(prev) if prev is not None else None)


# ---------------------------------------------------------------------------
# Resonance handling

def locate_minima_rows(g: Callable[[np.ndarray, np.ndarray], np.ndarray], grid: np.ndarray,
                       nrows: int, iterations: int = 30, points: int = 9):
    """Find local minima of ``nrows`` positive functions sampled on a common grid.

    ``g(rows, x)`` evaluates row ``rows[i]`` at ``x[i]``. Every discrete minimum
    of the samples (end points included) is refined by repeated zooming: the
    bracket is sampled on ``points`` points and replaced by the neighbours of the
    smallest sample, shrinking it by ``(points - 1) / 2`` per iteration, until it
    is small compared with the local peak width. All minima of all rows are
    refined together.

    Returns ``(row, x0, g0, width)`` where ``width`` estimates the half width of
    the peak of ``1/g`` from ``g0`` and the curvature at a quarter of the grid
    spacing.
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    rows_all = np.repeat(np.arange(nrows), n)
    vals = np.asarray(g(rows_all, np.tile(grid, nrows)), dtype=float).reshape(nrows, n)
    pad = np.full((nrows, 1), np.inf)
    left = np.concatenate([pad, vals[:, :-1]], axis=1)
    right = np.concatenate([vals[:, 1:], pad], axis=1)
    r, idx = np.nonzero((vals <= left) & (vals < right))
    if idx.size == 0:
        empty = np.empty(0)
        return np.empty(0, dtype=int), empty, empty, empty
    lo = grid[np.maximum(idx - 1, 0)]
    hi = grid[np.minimum(idx + 1, n - 1)]
    span = hi - lo
    frac = np.linspace(0.0, 1.0, points)
    best_x = grid[idx]
    best_g = vals[r, idx]
    active = np.ones(idx.size, dtype=bool)
    for _ in range(iterations):
        act = np.nonzero(active)[0]
        if act.size == 0:
            break
        sel = np.arange(act.size)
        xs = lo[act, None] + (hi - lo)[act, None] * frac[None, :]
        gs = np.asarray(g(np.repeat(r[act], points), xs.ravel()), dtype=float).reshape(xs.shape)
        j = np.argmin(gs, axis=1)
        gj = gs[sel, j]
        better = gj < best_g[act]
        best_x[act] = np.where(better, xs[sel, j], best_x[act])
        best_g[act] = np.where(better, gj, best_g[act])
        jm, jp = np.maximum(j - 1, 0), np.minimum(j + 1, points - 1)
        lo[act] = xs[sel, jm]
        hi[act] = xs[sel, jp]
        # parabola through the three samples around the minimum gives the peak width
        step = xs[:, 1] - xs[:, 0]
        curv = (gs[sel, jm] + gs[sel, jp] - 2.0 * gj) / (2.0 * step**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            local_w = np.sqrt(np.maximum(gj, 0.0) / curv)
        resolved = (curv > 0) & (j > 0) & (j < points - 1) & (hi[act] - lo[act] < 0.02 * local_w)
        tiny = hi[act] - lo[act] <= 4 * _EPS * np.maximum(np.abs(best_x[act]), 1e-300)
        active[act[resolved | tiny]] = False
    h = 0.25 * span / 2
    gp = np.asarray(g(r, np.clip(best_x + h, grid[0], grid[-1])), dtype=float)
    gm = np.asarray(g(r, np.clip(best_x - h, grid[0], grid[-1])), dtype=float)
    curv = np.maximum(np.maximum(gp, gm) - best_g, 0.0) / h**2
    with np.errstate(divide="ignore", invalid="ignore"):
        width = np.sqrt(np.maximum(best_g, 0.0) / curv)
    width = np.where(np.isfinite(width), width, span)
    width = np.clip(width, 1e-300, None)
    return r, best_x, best_g, width


def locate_minima(g: Callable[[np.ndarray], np.ndarray], grid: np.ndarray, iterations: int = 30,
                  points: int = 9):
    """Single-function form of :func:`locate_minima_rows`; returns ``(x0, g0, width)``."""
    _, x0, g0, width = locate_minima_rows(lambda rows, x: g(x), grid, 1, iterations, points)
    return x0, g0, width


def _apply_map(kind, centre, sign, width, p0, p1, frac):
    """Evaluate panel maps elementwise; ``kind < 0`` marks padding with zero Jacobian."""
    q = p0 + frac * (p1 - p0)
    dq = p1 - p0
    x = np.where(kind <= 0, np.where(kind == 0, q, p0), 0.0)
    jac = np.where(kind == 0, dq, 0.0)
    m1 = kind == 1
    if np.any(m1):
        tq = np.tan(q[m1])
        x[m1] = centre[m1] + sign[m1] * width[m1] * tq
        jac[m1] = dq[m1] * width[m1] * (1.0 + tq * tq)
    m2 = kind == 2
    if np.any(m2):
        eq = np.exp(q[m2])
        x[m2] = centre[m2] + sign[m2] * eq
        jac[m2] = dq[m2] * eq
    return x, jac


def _map_noise(kind, centre, x):
    off = np.abs(x - centre)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(kind >= 1, _EPS * np.abs(x) / off, 0.0)
    return np.minimum(np.nan_to_num(rel, nan=1.0, posinf=1.0), 1.0)


@dataclass
class PeakMap:
    """Change of variables over ``[lo, hi]`` adapted to Lorentzian peaks.

    The domain is split half-way between neighbouring peak centres. Around each
    centre ``c`` with half width ``w`` the coordinate ``x = c + w tan(phi)`` is used
    out to ``|x - c| = reach * w`` and ``x = c + exp(tau)`` beyond, which makes both
    the peak and its ``1/(x-c)^2`` wings smooth in the new variable. Panel ``j``
    of the virtual coordinate ``v`` is ``[j, j + 1]``.
    """

    kind: np.ndarray    # 0 plain, 1 tan, 2 log
    centre: np.ndarray
    sign: np.ndarray
    width: np.ndarray
    p0: np.ndarray
    p1: np.ndarray

    @classmethod
    def build(cls, lo, hi, centres=(), widths=(), reach=10.0, min_ratio=0.05):
        centres = np.asarray(centres, dtype=float)
        widths = np.asarray(widths, dtype=float)
        order = np.argsort(centres)
        centres, widths = centres[order], widths[order]
        rows = []

        def side(c, w, s, d0, d1):
            knee = reach * w
            if d0 < knee:
                rows.append((1, c, s, w, math.atan(d0 / w), math.atan(min(d1, knee) / w)))
            if d1 > knee:
                rows.append((2, c, s, w, math.log(max(d0, knee)), math.log(d1)))

        bounds = [lo] + [0.5 * (centres[k] + centres[k + 1]) for k in range(centres.size - 1)] + [hi]
        if centres.size == 0:
            rows.append((0, 0.0, 1.0, 1.0, lo, hi))
        for k in range(centres.size):
            c, w = centres[k], widths[k]
            left, right = max(bounds[k], lo), min(bounds[k + 1], hi)
            if right <= left:
                continue
            seg = right - left
            dist = max(left - c, c - right, 0.0)
            if w >= min_ratio * seg or dist > seg:
                rows.append((0, 0.0, 1.0, 1.0, left, right))
            elif c <= left:
                side(c, w, 1.0, left - c, right - c)
            elif c >= right:
                side(c, w, -1.0, c - right, c - left)
            else:
                side(c, w, -1.0, 0.0, c - left)
                side(c, w, 1.0, 0.0, right - c)
        cols = list(zip(*rows))
        return cls(np.asarray(cols[0], dtype=int), *(np.asarray(col, dtype=float) for col in cols[1:]))

    @property
    def npanels(self) -> int:
        return int(self.kind.size)

    def transform(self, v):
        """Map virtual coordinates to ``(x, dx/dv)``."""
        v = np.asarray(v, dtype=float)
        j = np.clip(np.floor(v).astype(int), 0, self.npanels - 1)
        return _apply_map(self.kind[j], self.centre[j], self.sign[j], self.width[j],
                          self.p0[j], self.p1[j], v - j)

    def noise(self, v):
        """Relative jitter of ``x - centre`` caused by representing ``x`` in floating point."""
        v = np.asarray(v, dtype=float)
        j = np.clip(np.floor(v).astype(int), 0, self.npanels - 1)
        x, _ = self.transform(v)
        return _map_noise(self.kind[j], self.centre[j], x)


def integrate_with_peaks(f, lo, hi, centres=(), widths=(), rel_tol=1e-10, abs_tol=0.0,
                         max_panels=20000, reach=10.0) -> IntegrationResult:
    """Integrate ``f`` over ``[lo, hi]`` where ``f`` has narrow peaks at ``centres``."""
    pm = PeakMap.build(lo, hi, centres, widths, reach=reach)
    if pm.npanels == 0:
        return IntegrationResult(0.0, 0.0, 0)

    def g(v):
        x, jac = pm.transform(v)
        return np.asarray(f(x)) * jac

    return integrate_adaptive(g, 0.0, float(pm.npanels), rel_tol=rel_tol, abs_tol=abs_tol,
                              initial_panels=pm.npanels, max_panels=max_panels, noise=pm.noise)


def integrate_rows_with_peaks(f, lo, hi, centres, widths, rel_tol=1e-10, abs_tol=0.0,
                              max_panels=20000, reach=10.0, reports_noise=False) -> IntegrationResult:
    """Integrate several peaked functions over ``[lo, hi]`` in one vector-valued quadrature.

    ``centres[k]`` and ``widths[k]`` describe the peaks of row ``k``.
    ``f(x)`` receives an array of shape ``(nrows, n)`` and returns one of the same
    shape. Each row gets its own :class:`PeakMap`; the maps are padded to a common
    number of unit panels so that all rows share the virtual coordinate.
    With ``reports_noise`` the integrand returns ``(values, relative_error)``.
    """
    maps = [PeakMap.build(lo, hi, c, w, reach=reach) for c, w in zip(centres, widths)]
    nrows = len(maps)
    npan = max(m.npanels for m in maps)
    fields = ("kind", "centre", "sign", "width", "p0", "p1")
    stacked = {}
    for name in fields:
        # padding is evaluated at the midpoint (with zero Jacobian) to stay clear of end-point singularities
        fill = -1 if name == "kind" else (0.5 * (lo + hi) if name == "p0" else 0.0)
        arr = np.full((nrows, npan), fill, dtype=int if name == "kind" else float)
        for k, m in enumerate(maps):
            arr[k, : m.npanels] = getattr(m, name)
        stacked[name] = arr
    rows = np.arange(nrows)[:, None]

    def lookup(v):
        v = np.asarray(v, dtype=float)
        j = np.clip(np.floor(v).astype(int), 0, npan - 1)[None, :]
        params = [stacked[name][rows, j] for name in fields]
        return params, np.broadcast_to(v[None, :] - j, params[0].shape)

    def g(v):
        params, frac = lookup(v)
        x, jac = _apply_map(*params, frac)
        rel = _map_noise(params[0], params[1], x)
        if reports_noise:
            fx, frel = f(x)
            return np.asarray(fx) * jac, rel + frel
        return np.asarray(f(x)) * jac, rel

    return integrate_adaptive(g, 0.0, float(npan), rel_tol=rel_tol, abs_tol=abs_tol,
                              initial_panels=npan, max_panels=max_panels, noise="returned")
