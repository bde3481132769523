"""Deterministic numerical kernel: quadrature, root finding, ODE stepping,
derivative checks, scalar function families, and counter-based random streams.

Everything here is pure: results depend only on the arguments, so all
functions and objects are safe to use from multiple threads.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, ToleranceNotMetError

__all__ = [
    "ScalarFn",
    "constant",
    "affine",
    "sinusoid",
    "polynomial",
    "piecewise_linear",
    "lincomb",
    "scalarfn_from_spec",
    "scalarfn_to_spec",
    "antiderivative",
    "integrate",
    "find_roots",
    "rk4_flow",
    "derivative_check",
    "RngStream",
]

ROOT_SCAN_PANELS = 1024  # default sign-change scan resolution


# ---------------------------------------------------------------------------
# Scalar functions on an interval (default [0, 1])
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarFn:
    """A real function with a known derivative.

    ``eval`` and ``deriv`` accept a float or a numpy array and return the
    matching kind.  ``breakpoints`` lists interior points where higher
    derivatives jump (quadrature panels are pre-split there).  ``params`` is
    set by the serializable factories and is None for derived functions.
    """

    eval: Callable
    deriv: Callable
    family: str
    params: tuple | None = None
    breakpoints: tuple = ()

    def __call__(self, t):
        return self.eval(t)


def constant(c: float) -> ScalarFn:
    c = float(c)

    def ev(t):
        if isinstance(t, np.ndarray):
            return np.full(t.shape, c)
        return c

    def dv(t):
        if isinstance(t, np.ndarray):
            return np.zeros(t.shape)
        return 0.0

    return ScalarFn(ev, dv, "constant", params=(c,))


def affine(intercept: float, slope: float) -> ScalarFn:
    a, b = float(intercept), float(slope)

    def ev(t):
        return a + b * t

    def dv(t):
        if isinstance(t, np.ndarray):
            return np.full(t.shape, b)
        return b

    return ScalarFn(ev, dv, "affine", params=(a, b))


def sinusoid(amplitude: float, frequency: int, phase: float = 0.0,
             offset: float = 0.0) -> ScalarFn:
    """``amplitude * sin(pi * frequency * t + phase) + offset``.

    Frequency counts half-turns on [0, 1], so both half-period profiles
    (frequency 1) and full-period ones (frequency 2) have integer frequency.
    """
    a, c, ph = float(amplitude), float(offset), float(phase)
    w = math.pi * float(frequency)

    def ev(t):
        if isinstance(t, np.ndarray):
            return a * np.sin(w * t + ph) + c
        return a * math.sin(w * t + ph) + c

    def dv(t):
        if isinstance(t, np.ndarray):
            return a * w * np.cos(w * t + ph)
        return a * w * math.cos(w * t + ph)

    return ScalarFn(ev, dv, "sinusoid",
                    params=(a, float(frequency), ph, c))


def polynomial(coeffs: Sequence[float]) -> ScalarFn:
    """Polynomial with ascending coefficients c0 + c1*t + c2*t^2 + ..."""
    cs = tuple(float(c) for c in coeffs)
    if not cs:
        cs = (0.0,)
    ds = tuple(i * c for i, c in enumerate(cs) if i > 0) or (0.0,)

    def _horner(cfs, t):
        acc = cfs[-1]
        for c in reversed(cfs[:-1]):
            acc = acc * t + c
        return acc

    def ev(t):
        if isinstance(t, np.ndarray):
            return np.polynomial.polynomial.polyval(t, cs)
        return _horner(cs, t)

    def dv(t):
        if isinstance(t, np.ndarray):
            return np.polynomial.polynomial.polyval(t, ds)
        return _horner(ds, t)

    return ScalarFn(ev, dv, "poly", params=cs)


def piecewise_linear(knots: Sequence[float], values: Sequence[float]) -> ScalarFn:
    """Piecewise-linear interpolant through (knots, values).

    Knots must be strictly increasing; they become quadrature breakpoints.
    The derivative uses the slope of the segment to the right of each knot
    (left segment at the final knot).
    """
    ts = tuple(float(t) for t in knots)
    vs = tuple(float(v) for v in values)
    if len(ts) != len(vs) or len(ts) < 2:
        raise ValueError("need matching knot/value sequences of length >= 2")
    if any(t1 <= t0 for t0, t1 in zip(ts, ts[1:])):
        raise ValueError("knots must be strictly increasing")
    ts_arr = np.array(ts)
    vs_arr = np.array(vs)
    slopes = np.diff(vs_arr) / np.diff(ts_arr)

    def ev(t):
        if isinstance(t, np.ndarray):
            return np.interp(t, ts_arr, vs_arr)
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        i = bisect_right(ts, t) - 1
        return vs[i] + slopes[i] * (t - ts[i])

    def dv(t):
        if isinstance(t, np.ndarray):
            idx = np.clip(np.searchsorted(ts_arr, t, side="right") - 1,
                          0, len(slopes) - 1)
            return slopes[idx]
        i = bisect_right(ts, t) - 1
        return float(slopes[min(max(i, 0), len(slopes) - 1)])

    params = tuple(x for pair in zip(ts, vs) for x in pair)
    return ScalarFn(ev, dv, "pwl", params=params, breakpoints=ts[1:-1])


def lincomb(ca: float, fa: ScalarFn, cb: float, fb: ScalarFn) -> ScalarFn:
    """ca*fa + cb*fb as a new ScalarFn (not serializable)."""
    ca, cb = float(ca), float(cb)

    def ev(t):
        return ca * fa.eval(t) + cb * fb.eval(t)

    def dv(t):
        return ca * fa.deriv(t) + cb * fb.deriv(t)

    bps = tuple(sorted(set(fa.breakpoints) | set(fb.breakpoints)))
    return ScalarFn(ev, dv, "combination", breakpoints=bps)


_FAMILIES = {
    "constant": (constant, 1),
    "affine": (affine, 2),
    "sinusoid": (sinusoid, 4),
    "poly": (polynomial, None),
    "pwl": (piecewise_linear, None),
}


def scalarfn_from_spec(spec: dict) -> ScalarFn:
    """Build a ScalarFn from a {family, params} record."""
    family = spec.get("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown function family {family!r}")
    params = list(spec.get("params", []))
    factory, arity = _FAMILIES[family]
    if family == "poly":
        return factory(params)
    if family == "pwl":
        if len(params) % 2 != 0:
            raise ValueError("pwl params must be [t0, v0, t1, v1, ...]")
        return factory(params[0::2], params[1::2])
    if arity is not None and len(params) > arity:
        raise ValueError(f"{family} takes at most {arity} params")
    return factory(*params)


def scalarfn_to_spec(fn: ScalarFn) -> dict:
    if fn.params is None:
        raise ValueError(f"family {fn.family!r} is not serializable")
    name = fn.family if fn.family in _FAMILIES else None
    if name is None:
        raise ValueError(f"family {fn.family!r} is not serializable")
    return {"family": name, "params": list(fn.params)}


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

MAX_SIMPSON_DEPTH = 30


def _simpson_panel(fa, fm, fb, width):
    return ((fa + 4.0 * fm + fb) / 6.0) * width


def _checked(fn, t):
    v = fn(t)
    v = float(v)
    if not math.isfinite(v):
        raise EvaluationError(t, v)
    return v


def _adaptive_simpson(fn, a, b, tol, max_depth=MAX_SIMPSON_DEPTH):
    """Adaptive Simpson on one smooth panel.  Returns (value, unmet_bound);
    unmet_bound is 0.0 when every subpanel converged."""
    fa = _checked(fn, a)
    fb = _checked(fn, b)
    m = 0.5 * (a + b)
    fm = _checked(fn, m)
    whole = _simpson_panel(fa, fm, fb, b - a)
    total = 0.0
    unmet = 0.0
    # stack entries: (a, m, b, fa, fm, fb, S, tol, depth)
    stack = [(a, m, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a0, m0, b0, f0, f1, f2, s_whole, tol0, depth = stack.pop()
        lm = 0.5 * (a0 + m0)
        rm = 0.5 * (m0 + b0)
        flm = _checked(fn, lm)
        frm = _checked(fn, rm)
        s_left = _simpson_panel(f0, flm, f1, m0 - a0)
        s_right = _simpson_panel(f1, frm, f2, b0 - m0)
        s2 = s_left + s_right
        err = (s2 - s_whole) / 15.0
        if abs(err) <= tol0:
            total += s2 + err
        elif depth >= max_depth:
            total += s2 + err
            unmet += abs(err)
        else:
            half_tol = 0.5 * tol0
            stack.append((a0, lm, m0, f0, flm, f1, s_left, half_tol, depth + 1))
            stack.append((m0, rm, b0, f1, frm, f2, s_right, half_tol, depth + 1))
    return total, unmet


def integrate(fn, a: float = 0.0, b: float = 1.0, *,
              breakpoints: Sequence[float] = (), tol: float = 1e-9) -> float:
    """Adaptive Simpson quadrature of ``fn`` over [a, b].

    The interval is pre-split at each breakpoint so kinks (of |f|,
    min(|f|,|g|), piecewise-linear knots, ...) never sit inside a panel.
    Absolute error is at most ``tol`` for piecewise-smooth integrands;
    failure to converge raises ToleranceNotMetError carrying the best
    estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a > b:
        return -integrate(fn, b, a, breakpoints=breakpoints, tol=tol)
    if a == b:
        return 0.0
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *cuts, b]
    length = b - a
    total = 0.0
    unmet = 0.0
    for lo, hi in zip(edges, edges[1:]):
        if hi <= lo:
            continue
        seg_tol = tol * (hi - lo) / length
        value, bad = _adaptive_simpson(fn, lo, hi, seg_tol)
        total += value
        unmet += bad
    if unmet > tol:
        raise ToleranceNotMetError(total, unmet)
    return total


def _node_integrals(fn: ScalarFn, grid, node_tol: float):
    """Panel integrals over consecutive grid nodes: one vectorized two-level
    Simpson pass with Richardson acceptance, falling back to the scalar
    adaptive routine on panels that contain a breakpoint or miss node_tol."""
    nodes = len(grid) - 1
    lo, hi = grid[0], grid[-1]
    try:
        fine = np.linspace(lo, hi, 4 * nodes + 1)
        vals = np.asarray(fn.eval(fine), dtype=float)
        if vals.shape != fine.shape or not np.all(np.isfinite(vals)):
            raise ValueError
    except (TypeError, ValueError):
        vals = None
    widths = np.diff(np.asarray(grid))
    panels = np.empty(nodes)
    needs_scalar = np.ones(nodes, dtype=bool)
    if vals is not None:
        fa = vals[0:-1:4]
        f1 = vals[1::4]
        fm = vals[2::4]
        f3 = vals[3::4]
        fb = vals[4::4]
        s1 = ((fa + 4.0 * fm + fb) / 6.0) * widths
        half = 0.5 * widths
        s2 = (((fa + 4.0 * f1 + fm) / 6.0) * half
              + ((fm + 4.0 * f3 + fb) / 6.0) * half)
        err = (s2 - s1) / 15.0
        panels = s2 + err
        needs_scalar = np.abs(err) > node_tol
    for p in fn.breakpoints:
        if lo < p < hi:
            k = min(int((p - lo) / (hi - lo) * nodes), nodes - 1)
            needs_scalar[k] = True
    for k in np.nonzero(needs_scalar)[0]:
        t0, t1 = float(grid[k]), float(grid[k + 1])
        inner = [p for p in fn.breakpoints if t0 < p < t1]
        panels[k] = integrate(fn.eval, t0, t1, breakpoints=inner,
                              tol=node_tol)
    return panels


def _smooth_panel_quad(f, a, b):
    """Two-level Simpson with Richardson on one narrow smooth panel."""
    w = b - a
    m = 0.5 * (a + b)
    fa = _checked(f, a)
    fm = _checked(f, m)
    fb = _checked(f, b)
    s1 = ((fa + 4.0 * fm + fb) / 6.0) * w
    flm = _checked(f, 0.5 * (a + m))
    frm = _checked(f, 0.5 * (m + b))
    hw = 0.5 * w
    s2 = (((fa + 4.0 * flm + fm) / 6.0) * hw
          + ((fm + 4.0 * frm + fb) / 6.0) * hw)
    return s2 + (s2 - s1) / 15.0


def antiderivative(fn: ScalarFn, *, nodes: int = 1024,
                   node_tol: float = 1e-15, tol: float = 1e-13,
                   domain: tuple = (0.0, 1.0)) -> ScalarFn:
    """t -> integral of fn from domain[0] to t, by quadrature.

    Cumulative values are cached on a uniform node grid; an evaluation only
    integrates the remainder panel (at most one node wide), so pointwise
    cost stays small.  The derivative of the result is fn itself.
    """
    lo, hi = float(domain[0]), float(domain[1])
    width = (hi - lo) / nodes
    grid = [lo + width * k for k in range(nodes + 1)]
    grid[-1] = hi
    bps = fn.breakpoints
    cum = [0.0]
    acc = 0.0
    for panel in _node_integrals(fn, grid, node_tol):
        acc += float(panel)
        cum.append(acc)

    def ev(t):
        if isinstance(t, np.ndarray):
            return np.array([ev(float(x)) for x in t.ravel()]).reshape(t.shape)
        if t <= lo:
            return -integrate(fn.eval, t, lo, breakpoints=bps, tol=tol)
        k = min(int((t - lo) / width), nodes)
        tk = grid[k]
        if t == tk:
            return cum[k]
        if t > hi:
            return cum[nodes] + integrate(fn.eval, hi, t, tol=tol)
        inner = [p for p in bps if tk < p < t]
        if inner:
            return cum[k] + integrate(fn.eval, tk, t, breakpoints=inner,
                                      tol=tol)
        return cum[k] + _smooth_panel_quad(fn.eval, tk, t)

    return ScalarFn(ev, fn.eval, "antiderivative", breakpoints=fn.breakpoints)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def _eval_grid(fn, grid: np.ndarray) -> np.ndarray:
    try:
        vals = fn(grid)
        vals = np.asarray(vals, dtype=float)
        if vals.shape == grid.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(t)) for t in grid])


def _bisect_root(fn, lo, hi, flo, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = float(fn(mid))
        if fmid == 0.0:
            return mid
        if (flo < 0) != (fmid < 0):
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def find_roots(fn, a: float = 0.0, b: float = 1.0, *, tol: float = 1e-12,
               panels: int = ROOT_SCAN_PANELS) -> list:
    """All sign-change roots of ``fn`` on [a, b], isolated on a uniform scan
    grid and refined by bisection to within ``tol``.  Endpoints are included
    when |fn| < tol there.  Returns a sorted list (possibly empty).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = np.linspace(a, b, panels + 1)
    vals = _eval_grid(fn, grid)
    roots = []
    if abs(vals[0]) < tol:
        roots.append(float(grid[0]))
    if abs(vals[-1]) < tol:
        roots.append(float(grid[-1]))
    zero_mask = vals == 0.0
    for i in np.nonzero(zero_mask)[0]:
        roots.append(float(grid[i]))
    prods = vals[:-1] * vals[1:]
    for i in np.nonzero(prods < 0.0)[0]:
        roots.append(_bisect_root(fn, float(grid[i]), float(grid[i + 1]),
                                  float(vals[i]), tol))
    roots.sort()
    merged: list = []
    gap = max(tol, 1e-11) * max(1.0, abs(b - a))
    for r in roots:
        if not merged or r - merged[-1] > gap:
            merged.append(r)
    return merged


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------

def rk4_flow(field, x0, duration: float, step: float, *, record: bool = False):
    """Classic fourth-order Runge-Kutta for an autonomous field.

    Angular coordinates are never reduced modulo 2*pi here, so winding
    counts stay recoverable from the trajectory.  Returns the final state,
    or (final, trajectory) when ``record`` is set.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x0, dtype=float).copy()
    scalar_state = x.ndim == 0
    if scalar_state:
        x = x.reshape(1)

    def f(state):
        v = np.asarray(field(state[0] if scalar_state else state), dtype=float)
        v = v.reshape(x.shape)
        if not np.all(np.isfinite(v)):
            raise EvaluationError(state.tolist(), v.tolist())
        return v

    n = max(1, int(round(abs(duration) / step)))
    h = duration / n
    traj = [x.copy()] if record else None
    for _ in range(n):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
        if record:
            traj.append(x.copy())
    final = x[0] if scalar_state else x
    if record:
        return final, np.array(traj)
    return final


# ---------------------------------------------------------------------------
# Derivative verification
# ---------------------------------------------------------------------------

def derivative_check(fn: ScalarFn, grid_size: int = 101, h: float = 1e-5,
                     domain: tuple = (0.0, 1.0)) -> float:
    """Max mismatch between fn.deriv and finite differences of fn.eval.

    Centered differences at interior points; second-order one-sided stencils
    at the endpoints (so quadratics check out to rounding).
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if not 0 < h < 1e-3:
        raise ValueError("h must lie in (0, 1e-3)")
    lo, hi = domain
    grid = np.linspace(lo, hi, grid_size)
    ev = fn.eval
    worst = 0.0
    for t in grid:
        t = float(t)
        if t - h < lo:
            fd = (-3.0 * ev(t) + 4.0 * ev(t + h) - ev(t + 2 * h)) / (2.0 * h)
        elif t + h > hi:
            fd = (3.0 * ev(t) - 4.0 * ev(t - h) + ev(t - 2 * h)) / (2.0 * h)
        else:
            fd = (ev(t + h) - ev(t - h)) / (2.0 * h)
        worst = max(worst, abs(float(fn.deriv(t)) - fd))
    return worst


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Sample i of a stream is a pure function of (seed, stream_id, i), so any
    worker partitioning reproduces the same sequence.  Distinct stream_ids
    give statistically independent sequences.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _U64, self.stream_id & _U64],
                       dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id ^ (k * 0x9E3779B97F4A7C15))
