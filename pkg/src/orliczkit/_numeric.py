"""Vectorized numerical kernels: monotone bisection, golden section, log grids."""
import math

import numpy as np

from .errors import ConvergenceError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

# absolute 1e-12 / relative 1e-9 on function values; arguments are resolved
# to near machine precision because small-argument callers divide by x.
XTOL_REL = 4e-16
MAXITER = 200


def bracket_increasing(fn, target, start=1.0, max_steps=2100):
    """Find ``lo < hi`` with ``fn(lo) < target <= fn(hi)`` elementwise.

    ``fn`` must be nondecreasing with ``fn(0) == 0``; entries with
    ``target <= 0`` get the degenerate bracket ``[0, 0]``.
    """
    target = np.asarray(target, dtype=float)
    if np.any(np.isnan(target)):
        raise ConvergenceError("NaN target in bracketing")
    if np.any(np.isposinf(target)):
        raise ConvergenceError("target exceeds the representable range")
    hi = np.full(target.shape, float(start))
    positive = target > 0
    for _ in range(max_steps):
        grow = positive & (fn(hi) < target)
        if not grow.any():
            break
        hi = np.where(grow, hi * 2.0, hi)
        if np.any(np.isinf(hi) & grow):
            raise ConvergenceError("target exceeds the representable range")
    else:
        raise ConvergenceError("bracketing did not terminate")
    lo = hi / 2.0
    for _ in range(max_steps):
        shrink = positive & (lo > 0) & (fn(lo) >= target)
        if not shrink.any():
            break
        hi = np.where(shrink, lo, hi)
        lo = np.where(shrink, lo / 2.0, lo)
    lo = np.where(positive & (fn(lo) < target), lo, 0.0)
    hi = np.where(positive, hi, 0.0)
    return lo, hi


def bisect_increasing(fn, target, lo, hi, xtol_rel=XTOL_REL, xtol_abs=0.0, maxiter=MAXITER):
    """Solve ``fn(x) = target`` on a bracket for nondecreasing ``fn``, elementwise."""
    target = np.asarray(target, dtype=float)
    lo = np.array(np.broadcast_to(lo, target.shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, target.shape), dtype=float)
    for _ in range(maxiter):
        active = (hi - lo) > xtol_abs + xtol_rel * np.abs(hi)
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        below = fn(mid) < target
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    return 0.5 * (lo + hi)


def solve_increasing(fn, target, start=1.0):
    """Bracket-then-bisect root of ``fn(x) = target`` for ``x >= 0``."""
    lo, hi = bracket_increasing(fn, target, start=start)
    return bisect_increasing(fn, target, lo, hi)


def golden_max(fn, a, b, iters=60):
    """Elementwise golden-section maximization of ``fn`` on ``[a, b]``.

    Returns ``(x_best, f_best)``.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = fn(c)
    fd = fn(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        # the surviving interior point is reused; only one new evaluation
        probe = np.where(left, new_c, new_d)
        fp = fn(probe)
        c, fc, d, fd = (
            np.where(left, probe, d),
            np.where(left, fp, fd),
            np.where(left, c, probe),
            np.where(left, fc, fp),
        )
    take_c = fc >= fd
    return np.where(take_c, c, d), np.where(take_c, fc, fd)


def log2_grid(lo=1e-8, hi=1e8, per_octave=4):
    """Points ``2**(k/per_octave)`` covering ``[lo, hi]``."""
    k0 = math.floor(math.log2(lo) * per_octave)
    k1 = math.ceil(math.log2(hi) * per_octave)
    return np.exp2(np.arange(k0, k1 + 1) / per_octave)


def extremum_on_log_grid(fn, n_rows, *, mode="sup", lo=1e-8, hi=1e8, per_octave=4,
                         divergence_factor=1.25, refine_iters=40):
    """Sup or inf over ``a > 0`` of ``fn(a)`` for ``n_rows`` independent rows.

    ``fn`` receives an array of shape ``(n_rows, k)`` and returns values of
    the same shape; row ``i`` always belongs to the same problem.  A row whose extremum
    sits on a grid boundary while the values there still move geometrically
    (by more than ``divergence_factor`` per octave over the last two octaves)
    is reported as diverged: ``+inf`` for ``mode="sup"``, ``0`` for
    ``mode="inf"``.

    Returns ``(values, argmins_or_argmaxes, diverged)``.
    """
    if mode not in ("sup", "inf"):
        raise ValueError(f"unknown mode {mode!r}")
    grid = log2_grid(lo, hi, per_octave)
    m = grid.size
    alpha = np.broadcast_to(grid, (n_rows, m))
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(alpha), dtype=float)
    sign = 1.0 if mode == "sup" else -1.0
    work = sign * vals
    work = np.where(np.isnan(work), -np.inf, work)
    idx = np.argmax(work, axis=1)
    rows = np.arange(n_rows)
    best = vals[rows, idx]
    arg = grid[idx]
    po = per_octave
    f = divergence_factor

    def _moving(v0, v1, v2):
        # v0 at the boundary, v1 one octave in, v2 two octaves in
        if mode == "sup":
            return (v0 > 0) & (v0 > f * v1) & (v1 > f * v2) & (v2 > 0)
        return (v0 >= 0) & (v0 * f < v1) & (v1 * f < v2)

    diverged = np.zeros(n_rows, dtype=bool)
    if m > 2 * po:
        left = (idx == 0) & _moving(vals[:, 0], vals[:, po], vals[:, 2 * po])
        right = (idx == m - 1) & _moving(vals[:, -1], vals[:, -1 - po], vals[:, -1 - 2 * po])
        diverged = left | right
    if mode == "sup":
        diverged |= np.isposinf(best)

    interior = (~diverged) & (idx > 0) & (idx < m - 1) & np.isfinite(best)
    if refine_iters and interior.any():
        r = rows[interior]
        la = np.log(grid[idx[r] - 1])
        lb = np.log(grid[idx[r] + 1])

        def objective(logx):
            # fn always sees a (n_rows, k) array; unrefined rows get a dummy 1.0
            full = np.ones((n_rows, 1))
            full[r, 0] = np.exp(logx)
            with np.errstate(all="ignore"):
                out = np.asarray(fn(full), dtype=float)[r, 0]
            return sign * np.where(np.isnan(out), -np.inf, out)

        lx, fx = golden_max(objective, la, lb, iters=refine_iters)
        better = fx > sign * best[r]
        best[r] = np.where(better, sign * fx, best[r])
        arg[r] = np.where(better, np.exp(lx), arg[r])

    if mode == "sup":
        best = np.where(diverged, np.inf, best)
    else:
        best = np.where(diverged, 0.0, best)
    return best, arg, diverged
