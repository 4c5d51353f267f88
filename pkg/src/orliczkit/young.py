"""Young functions: evaluation, inverse, complementary function, Δ₂ diagnostics.

A Young function here is an even, convex ``Φ`` with ``Φ(0) = 0`` and
``Φ(x)/x → ∞``.  Every class evaluates elementwise on numpy arrays and
folds negative arguments through ``|x|``.  Instances are immutable.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _numeric
from .errors import ConfigError, ConvergenceError

__all__ = [
    "YoungFunction", "Power", "ExpMinusLinear", "PiecewiseLinearConvex", "Scaled",
    "Conjugate", "Diagnostic", "Delta2Estimate",
    "evaluate", "inverse", "conjugate", "delta2_index", "validate", "young_from_config",
]

_EXP_OVERFLOW = math.log(np.finfo(float).max)


def _as_array(x):
    return np.abs(np.asarray(x, dtype=float))


def _maybe_scalar(x, out):
    return float(out) if np.ndim(x) == 0 else out


class YoungFunction:
    """Common interface.  Subclasses implement ``_eval`` and ``_deriv``."""

    kind = "abstract"

    def __call__(self, x):
        xa = _as_array(x)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._eval(xa)
        return _maybe_scalar(x, out)

    def eval_checked(self, x):
        """``(Φ(x), saturated)`` where ``saturated`` marks overflow to ``inf``."""
        value = np.asarray(self(x), dtype=float)
        saturated = np.isinf(value)
        if np.ndim(x) == 0:
            return float(value), bool(saturated)
        return value, saturated

    def derivative(self, x):
        """Right derivative ``Φ'(x+)`` for ``x >= 0``."""
        xa = _as_array(x)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._deriv(xa)
        return _maybe_scalar(x, out)

    def _deriv(self, x):
        # forward difference; only used by kinds without a closed form
        h = 1e-7 * np.maximum(x, 1e-6)
        return (self._eval(x + h) - self._eval(x)) / h

    def inverse(self, y):
        """``x >= 0`` with ``Φ(x) = y``, by monotone bracketing and bisection."""
        ya = np.asarray(y, dtype=float)
        if np.any(ya < 0):
            raise ValueError("inverse needs y >= 0")
        out = _numeric.solve_increasing(lambda t: self._eval(t), ya)
        return _maybe_scalar(y, out)

    @property
    def superlinear_tail(self):
        """Whether ``Φ(x)/x → ∞`` is known structurally (``None``: unknown)."""
        return None

    @property
    def domain_hint(self):
        return (1e-3, 1e3)

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class Power(YoungFunction):
    """``Φ(x) = c·|x|^p`` with ``p > 1``."""

    p: float
    c: float = None
    hint: tuple = (1e-3, 1e3)

    kind = "power"

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError(f"power exponent must exceed 1, got {self.p}")
        if self.c is None:
            object.__setattr__(self, "c", 1.0 / self.p)
        if not self.c > 0:
            raise ConfigError(f"power coefficient must be positive, got {self.c}")

    def _eval(self, x):
        return self.c * x ** self.p

    def _deriv(self, x):
        return self.c * self.p * x ** (self.p - 1.0)

    def inverse(self, y):
        ya = np.asarray(y, dtype=float)
        if np.any(ya < 0):
            raise ValueError("inverse needs y >= 0")
        return _maybe_scalar(y, (ya / self.c) ** (1.0 / self.p))

    @property
    def superlinear_tail(self):
        return True

    @property
    def domain_hint(self):
        return tuple(self.hint)

    def to_config(self):
        return {"kind": "power", "p": self.p, "c": self.c}


@dataclass(frozen=True, eq=True)
class ExpMinusLinear(YoungFunction):
    """``Φ(x) = e^|x| − |x| − 1``; saturates to ``inf`` beyond ``log(max float)``."""

    hint: tuple = (1e-3, 50.0)

    kind = "exp_minus_linear"

    def _eval(self, x):
        small = x < 1e-3
        series = x * x * (0.5 + x * (1.0 / 6 + x * (1.0 / 24 + x / 120.0)))
        big = np.expm1(np.minimum(x, _EXP_OVERFLOW)) - x
        out = np.where(small, series, big)
        return np.where(x > _EXP_OVERFLOW, np.inf, out)

    def _deriv(self, x):
        return np.expm1(x)

    def inverse(self, y):
        """Newton from an upper bound; monotone convergence since Φ is convex."""
        ya = np.asarray(y, dtype=float)
        if np.any(ya < 0):
            raise ValueError("inverse needs y >= 0")
        if np.any(np.isnan(ya)) or np.any(np.isposinf(ya)):
            raise ConvergenceError("inverse target is not finite")
        # Φ(x) >= x²/2, and Φ(L + log1p(L)) >= y for L = log1p(y), y >= 1
        L = np.log1p(ya)
        x = np.sqrt(2.0 * np.minimum(ya, 1e300))
        x = np.where(ya >= 1, np.minimum(x, L + np.log1p(L)), x)
        x = np.array(np.minimum(x, _EXP_OVERFLOW), dtype=float).reshape(-1)
        yf = ya.reshape(-1)
        idx = np.nonzero(x > 0)[0]
        for _ in range(_numeric.MAXITER):
            if idx.size == 0:
                break
            xi = x[idx]
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                step = (self._eval(xi) - yf[idx]) / self._deriv(xi)
            step = np.where(np.isfinite(step), np.maximum(step, 0.0), 0.0)
            x[idx] = xi - step
            idx = idx[step > _numeric.XTOL_REL * 4 * x[idx]]
        return _maybe_scalar(y, x.reshape(np.shape(ya)))

    @property
    def superlinear_tail(self):
        return True

    @property
    def domain_hint(self):
        return tuple(self.hint)

    def to_config(self):
        return {"kind": "exp_minus_linear"}


_TAIL_RULES = ("constant", "linear", "geometric")


@dataclass(frozen=True, eq=False)
class PiecewiseLinearConvex(YoungFunction):
    """Linear interpolation through ``points`` starting at ``(0, 0)``.

    Past the last breakpoint the function continues with segments of the
    last segment's width whose slopes follow ``tail_slope_growth``:

    ``constant``  every further slope equals the last one;
    ``linear``    slopes grow by the last slope increment;
    ``geometric`` slopes grow by the last slope ratio.

    A virtual slope ``0`` precedes the first segment, so a single segment with
    ``linear`` growth continues with slopes ``2s, 3s, ...`` and with
    ``geometric`` growth with ratio 2.  Convexity is not enforced here;
    :func:`validate` reports violations.
    """

    points: tuple
    tail_slope_growth: str = "linear"

    kind = "piecewise"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ConfigError("piecewise points must be at least two [x, y] pairs")
        if pts[0, 0] != 0.0 or pts[0, 1] != 0.0:
            raise ConfigError("piecewise points must start at [0, 0]")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ConfigError("piecewise x coordinates must be strictly increasing")
        if self.tail_slope_growth not in _TAIL_RULES:
            raise ConfigError(f"tail_slope_growth must be one of {_TAIL_RULES}")
        object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))
        slopes = np.diff(pts[:, 1]) / np.diff(pts[:, 0])
        object.__setattr__(self, "_xs", pts[:, 0])
        object.__setattr__(self, "_ys", pts[:, 1])
        object.__setattr__(self, "_slopes", slopes)
        last = slopes[-1]
        prev = slopes[-2] if slopes.size > 1 else 0.0
        object.__setattr__(self, "_step", last - prev)
        object.__setattr__(self, "_ratio", last / prev if prev > 0 else 2.0)

    def _tail_slope(self, i):
        s = self._slopes[-1]
        if self.tail_slope_growth == "constant":
            return np.full_like(i, s)
        if self.tail_slope_growth == "linear":
            return s + i * self._step
        return s * self._ratio ** i

    def _tail_slope_sum(self, k):
        s = self._slopes[-1]
        if self.tail_slope_growth == "constant":
            return k * s
        if self.tail_slope_growth == "linear":
            return k * s + self._step * k * (k + 1) / 2.0
        r = self._ratio
        if r == 1.0:
            return k * s
        return s * r * (r ** k - 1.0) / (r - 1.0)

    def _eval(self, x):
        xs, ys = self._xs, self._ys
        inside = np.interp(x, xs, ys)
        width = xs[-1] - xs[-2]
        m = np.maximum(x - xs[-1], 0.0) / width
        k = np.floor(m)
        frac = m - k
        tail = ys[-1] + width * (self._tail_slope_sum(k) + frac * self._tail_slope(k + 1))
        return np.where(x <= xs[-1], inside, tail)

    def _deriv(self, x):
        xs = self._xs
        seg = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, self._slopes.size - 1)
        inside = self._slopes[seg]
        width = xs[-1] - xs[-2]
        k = np.floor(np.maximum(x - xs[-1], 0.0) / width)
        return np.where(x < xs[-1], inside, self._tail_slope(k + 1))

    @property
    def breakpoints(self):
        return self._xs

    @property
    def superlinear_tail(self):
        if self.tail_slope_growth == "constant":
            return False
        if self.tail_slope_growth == "linear":
            return bool(self._step > 0)
        return bool(self._ratio > 1)

    @property
    def domain_hint(self):
        return (self._xs[1] / 10.0, self._xs[-1] * 10.0)

    def to_config(self):
        return {"kind": "piecewise", "points": [list(p) for p in self.points],
                "tail_slope_growth": self.tail_slope_growth}


@dataclass(frozen=True, eq=True)
class Scaled(YoungFunction):
    """``x ↦ b·Φ(a·x)``."""

    inner: YoungFunction
    a: float = 1.0
    b: float = 1.0

    kind = "scaled"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("scaled Young function needs a > 0 and b > 0")

    def _eval(self, x):
        return self.b * self.inner._eval(self.a * x)

    def _deriv(self, x):
        return self.b * self.a * self.inner._deriv(self.a * x)

    def inverse(self, y):
        ya = np.asarray(y, dtype=float)
        return _maybe_scalar(y, np.asarray(self.inner.inverse(ya / self.b)) / self.a)

    @property
    def superlinear_tail(self):
        return self.inner.superlinear_tail

    @property
    def domain_hint(self):
        lo, hi = self.inner.domain_hint
        return (lo / self.a, hi / self.a)

    def to_config(self):
        return {"kind": "scaled", "inner": self.inner.to_config(), "a": self.a, "b": self.b}


@dataclass(frozen=True, eq=True)
class Conjugate(YoungFunction):
    """Complementary function ``Ψ(y) = sup_{x≥0} (x|y| − Φ(x))``, evaluated lazily.

    The supremum is located by solving ``Φ'(x) = y`` with bisection on the
    monotone right derivative; the maximizer is also ``Ψ'(y)``.  If the
    derivative search fails the value falls back to golden-section search.
    ``Ψ(y) = inf`` whenever ``y`` exceeds ``sup Φ'``.
    """

    inner: YoungFunction

    kind = "conjugate"

    def argmax(self, y):
        """Maximizer ``x*(y)`` of ``x·y − Φ(x)``; ``inf`` where none exists."""
        ya = _as_array(y)
        d = self.inner._deriv
        x = np.zeros(ya.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            need = d(np.zeros(ya.shape)) < ya
            hi = np.ones(ya.shape)
            for _ in range(1100):
                grow = need & (d(hi) < ya)
                if not grow.any():
                    break
                hi = np.where(grow, hi * 2.0, hi)
                if np.all(np.isinf(hi[grow])):
                    break
            unreachable = need & ~(d(hi) >= ya)
            solve = need & ~unreachable
            if solve.any():
                lo = np.where(solve, hi / 2.0, 0.0)
                lo = np.where(solve & (d(lo) >= ya), 0.0, lo)
                root = _numeric.bisect_increasing(d, np.where(solve, ya, 0.0), lo,
                                                  np.where(solve, hi, 0.0))
                x = np.where(solve, root, x)
            x = np.where(unreachable, np.inf, x)
        return _maybe_scalar(y, x)

    def _eval(self, y):
        x = np.asarray(self.argmax(y), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            val = x * y - self.inner._eval(x)
        val = np.where(x == 0, 0.0, val)
        val = np.where(np.isinf(x), np.inf, val)
        bad = ~np.isfinite(val) & np.isfinite(x)
        if np.any(bad):
            val = val.copy()
            val[bad] = self._golden_fallback(y[bad])
        return np.maximum(val, 0.0)

    def _golden_fallback(self, y):
        hi = np.maximum(np.asarray(self.inner.inverse(np.maximum(y, 1.0) * 4.0)), 1.0)

        def objective(x):
            with np.errstate(over="ignore", invalid="ignore"):
                v = x * y - self.inner._eval(x)
            return np.where(np.isfinite(v), v, -np.inf)

        _, best = _numeric.golden_max(objective, np.zeros_like(y), hi, iters=200)
        if np.any(~np.isfinite(best)):
            raise ConvergenceError("conjugate evaluation did not converge")
        return best

    def _deriv(self, y):
        return np.asarray(self.argmax(y), dtype=float)

    @property
    def superlinear_tail(self):
        # the conjugate of a finite-valued function is superlinear
        return True

    @property
    def domain_hint(self):
        lo, hi = self.inner.domain_hint
        dlo = float(self.inner.derivative(lo))
        dhi = float(self.inner.derivative(hi))
        if not (dlo > 0 and np.isfinite(dhi) and dhi > dlo):
            return (1e-3, 1e3)
        return (dlo, dhi)

    def to_config(self):
        return {"kind": "conjugate", "inner": self.inner.to_config()}


def evaluate(phi, x):
    """``Φ(|x|)``; overflow saturates to ``inf`` (see :meth:`YoungFunction.eval_checked`)."""
    return phi(x)


def inverse(phi, y):
    return phi.inverse(y)


def conjugate(phi):
    """Complementary Young function of ``phi`` (lazy, evaluated per query)."""
    return Conjugate(phi)


@dataclass(frozen=True)
class Delta2Estimate:
    """Sampled estimate of ``sup Φ(2x)/Φ(x)``.

    ``sup_ratio`` is ``inf`` when the ratio is still growing at the top of the
    range.  The ``*_from_x0`` fields restrict the sup to ``x >= x0``.
    """

    sup_ratio: float
    unbounded: bool
    satisfies_delta2: bool
    x0: float = None
    sup_ratio_from_x0: float = None
    satisfies_from_x0: bool = None


def delta2_index(phi, x_range=None, x0=None, threshold=1e6, growth_margin=0.05,
                 per_octave=8):
    """Estimate the Δ₂ constant of ``phi`` on a log-spaced grid."""
    lo, hi = x_range if x_range is not None else phi.domain_hint
    if hi <= 0:
        raise ValueError("x_range must have a positive upper end")
    if lo <= 0:
        lo = hi * 1e-6
    grid = _numeric.log2_grid(lo, hi, per_octave)
    grid = grid[(grid >= lo * (1 - 1e-12)) & (grid <= hi * (1 + 1e-12))]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = np.asarray(phi(2.0 * grid)) / np.asarray(phi(grid))
    ratio = np.where(np.isnan(ratio), np.inf, ratio)

    def summarize(r):
        if r.size == 0:
            return float("nan"), False
        top = r[-1]
        growing = r.size > per_octave and (
            not np.isfinite(top) or top > r[-1 - per_octave] * (1 + growth_margin))
        return (math.inf if growing else float(np.max(r))), bool(growing)

    sup, unbounded = summarize(ratio)
    est = dict(sup_ratio=sup, unbounded=unbounded, satisfies_delta2=(not unbounded and sup <= threshold))
    if x0 is not None:
        sup0, unb0 = summarize(ratio[grid >= x0])
        est.update(x0=float(x0), sup_ratio_from_x0=sup0,
                   satisfies_from_x0=(not unb0 and sup0 <= threshold))
    return Delta2Estimate(**est)


@dataclass(frozen=True)
class Diagnostic:
    check: str
    passed: bool
    point: float = None
    detail: str = ""


def _sample_points(phi):
    lo, hi = phi.domain_hint
    pts = [np.linspace(0.0, hi, 1025)[1:], _numeric.log2_grid(lo, hi, 8)]
    bps = getattr(phi, "breakpoints", None)
    if bps is not None:
        width = np.min(np.diff(bps))
        pts.append(np.concatenate([bps[1:] - width / 3, bps[1:], bps[1:] + width / 3]))
    x = np.unique(np.concatenate(pts))
    return x[(x > 0) & (x <= hi)]


def validate(phi, tol=1e-10):
    """Check the Young-function invariants on samples; returns diagnostics, never raises."""
    out = []
    zero = phi(0.0)
    out.append(Diagnostic("zero_at_origin", zero == 0.0, 0.0, f"Φ(0) = {zero!r}"))
    x = _sample_points(phi)
    with np.errstate(over="ignore", invalid="ignore"):
        y = np.asarray(phi(x), dtype=float)
    finite = np.isfinite(y)
    x, y = x[finite], y[finite]

    nonpos = np.nonzero(y <= 0)[0]
    out.append(Diagnostic("positive_off_origin", nonpos.size == 0,
                          float(x[nonpos[0]]) if nonpos.size else None,
                          "Φ(x) > 0 for sampled x > 0"))

    drops = np.nonzero(np.diff(y) < -tol * np.maximum(1.0, np.abs(y[:-1])))[0]
    out.append(Diagnostic("nondecreasing", drops.size == 0,
                          float(x[drops[0] + 1]) if drops.size else None,
                          "Φ nondecreasing on samples"))

    bad = None
    for step in (1, 2):
        a, b = x[:-step], x[step:]
        mid = 0.5 * (a + b)
        with np.errstate(over="ignore", invalid="ignore"):
            lhs = np.asarray(phi(mid))
            rhs = 0.5 * (np.asarray(phi(a)) + np.asarray(phi(b)))
        viol = np.nonzero(lhs > rhs + tol * np.maximum(1.0, np.abs(rhs)))[0]
        if viol.size:
            cand = float(mid[viol[0]])
            bad = cand if bad is None else min(bad, cand)
    out.append(Diagnostic("midpoint_convex", bad is None, bad,
                          "Φ((x+y)/2) <= (Φ(x)+Φ(y))/2 on sample pairs"))

    ratio = y / x
    lo_r, hi_r = ratio[0], ratio[-1]
    dips = np.nonzero(np.diff(ratio) < -tol * np.maximum(1.0, ratio[:-1]))[0]
    declared = phi.superlinear_tail
    ok = dips.size == 0 and hi_r > lo_r and declared is not False
    if dips.size:
        point, detail = float(x[dips[0] + 1]), "Φ(x)/x decreases"
    elif not hi_r > lo_r:
        point, detail = float(x[-1]), "Φ(x)/x does not grow over the sampled range"
    elif declared is False:
        point, detail = float(x[-1]), "declared tail growth keeps Φ(x)/x bounded"
    else:
        point, detail = None, "Φ(x)/x nondecreasing and growing"
    out.append(Diagnostic("superlinear", ok, point if not ok else None, detail))
    return out


def young_from_config(cfg, context="phi"):
    """Build a Young function from its config mapping."""
    if not isinstance(cfg, dict):
        raise ConfigError("Young function spec must be an object", context)
    kind = cfg.get("kind")
    try:
        if kind == "power":
            p = float(cfg["p"])
            c = cfg.get("c")
            return Power(p, None if c is None else float(c))
        if kind == "exp_minus_linear":
            return ExpMinusLinear()
        if kind == "piecewise":
            return PiecewiseLinearConvex(tuple(map(tuple, cfg["points"])),
                                         cfg.get("tail_slope_growth", "linear"))
        if kind == "scaled":
            return Scaled(young_from_config(cfg["inner"], f"{context}.inner"),
                          float(cfg.get("a", 1.0)), float(cfg.get("b", 1.0)))
        if kind == "conjugate":
            return Conjugate(young_from_config(cfg["inner"], f"{context}.inner"))
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}", context) from None
    except ConfigError as exc:
        if exc.context:
            raise
        raise ConfigError(str(exc), context) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), context) from None
    raise ConfigError(f"unknown Young function kind {kind!r}", f"{context}.kind")
