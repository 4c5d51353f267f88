"""σ-finite measure spaces ``Ω = B ∪ {A_j}`` and measurable functions on them.

A :class:`MeasureSpace` carries an optional Lebesgue interval ``B``, explicit
atoms ``A_1..A_N`` with weights ``a_j``, and an optional tail rule giving the
weights of ``A_j`` for ``j > N`` in closed form.  A
:class:`MeasurableFunction` has one channel per component: an evaluator on
the interval, one value per explicit atom and a closed form on tail atoms.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError
from .expr import as_expression

PROBE_CAP = 2 ** 20
BLOCK_RATIO_CONVERGED = 0.8
TAIL_RTOL = 1e-12

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1]
_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
GAUSS_W = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    n_grid: int = 4096

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigError(f"interval needs lo < hi, got [{self.lo}, {self.hi})")
        if self.n_grid < 2:
            raise ConfigError("grid_resolution must be at least 2")

    @property
    def length(self):
        return self.hi - self.lo

    def grid(self):
        """Cell midpoints of the analysis grid."""
        w = self.length / self.n_grid
        return self.lo + w * (np.arange(self.n_grid) + 0.5)

    @property
    def cell_measure(self):
        return self.length / self.n_grid


@dataclass(frozen=True, eq=False)
class TailRule:
    """Weights ``a_j`` of the tail atoms ``j > N`` and an optional declared limit."""

    weight_fn: Callable
    limit: Optional[float] = None

    def weights(self, j):
        w = np.asarray(self.weight_fn(np.asarray(j, dtype=float)), dtype=float)
        return np.broadcast_to(w, np.shape(j)).copy()


class MeasureSpace:
    """Partitioned σ-finite space: interval + explicit atoms ``1..N`` + tail ``j > N``."""

    def __init__(self, interval=None, atoms=(), tail=None):
        self.interval = interval
        self.weights = np.asarray(atoms, dtype=float).reshape(-1)
        self.tail = tail
        if np.any(~(self.weights > 0)) or np.any(~np.isfinite(self.weights)):
            raise ConfigError("atom weights must be finite and strictly positive")
        if interval is None and self.weights.size == 0 and tail is None:
            raise ConfigError("measure space is empty")
        if tail is not None:
            probe = self.tail_probes(per_octave=2, cap=2 ** 12)
            if probe.size and np.any(~(tail.weights(probe) > 0)):
                raise ConfigError("tail weight_fn must be positive on probed atoms")

    @property
    def n_atoms(self):
        return self.weights.size

    @property
    def has_tail(self):
        return self.tail is not None

    def atom_weights(self, ids):
        """Weights of atoms ``ids`` (1-based), explicit or tail."""
        ids = np.asarray(ids)
        out = np.empty(ids.shape, dtype=float)
        explicit = ids <= self.n_atoms
        if np.any(ids < 1):
            raise DomainError("atom ids start at 1")
        out[explicit] = self.weights[ids[explicit].astype(int) - 1]
        if np.any(~explicit):
            if self.tail is None:
                raise DomainError(f"atom id beyond the {self.n_atoms} atoms of a finite space")
            out[~explicit] = self.tail.weights(ids[~explicit])
        return out

    def tail_probes(self, per_octave=8, cap=PROBE_CAP):
        """Geometrically spaced tail atom ids in ``(N, cap]``."""
        if self.tail is None:
            return np.zeros(0, dtype=np.int64)
        start = max(self.n_atoms, 1)
        if cap <= start:
            return np.zeros(0, dtype=np.int64)
        octaves = math.log2(cap / start)
        k = np.arange(1, int(math.floor(octaves * per_octave)) + 1)
        j = np.unique(np.round(start * np.exp2(k / per_octave)).astype(np.int64))
        return j[(j > self.n_atoms) & (j <= cap)]

    def truncated(self, n, keep_interval=False):
        """Finite space of the first ``n`` atoms (explicit ones and tail ones)."""
        ids = np.arange(1, n + 1)
        return MeasureSpace(self.interval if keep_interval else None, self.atom_weights(ids))

    def nonatomic_measure(self):
        return 0.0 if self.interval is None else self.interval.length


Evaluator = Callable[[np.ndarray], np.ndarray]


def _zero(x):
    return np.zeros(np.shape(x))


@dataclass(frozen=True, eq=False)
class MeasurableFunction:
    """Point evaluator on a :class:`MeasureSpace`.

    ``breakpoints`` lists interval points where the interval channel may be
    discontinuous or kinked; quadrature splits there.
    """

    on_interval: Optional[Evaluator] = None
    atom_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail_fn: Optional[Evaluator] = None
    tail_limit: Optional[float] = None
    breakpoints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atom_values",
                           np.asarray(self.atom_values, dtype=float).reshape(-1))

    # --- constructors -----------------------------------------------------
    @classmethod
    def from_expr(cls, mu, spec, tail_limit=None):
        """Build from one expression for every channel, or a per-channel mapping.

        ``spec`` is an expression (string, number, :class:`Expression`) or a
        mapping with keys ``interval``, ``atoms``, ``tail`` and optionally
        ``tail_limit``; a missing ``tail`` reuses ``atoms``.
        """
        if isinstance(spec, dict):
            interval_e = spec.get("interval")
            atoms_e = spec.get("atoms")
            tail_e = spec.get("tail", atoms_e)
            tail_limit = spec.get("tail_limit", tail_limit)
        else:
            interval_e = atoms_e = tail_e = spec
        on_interval = None
        if mu.interval is not None:
            if interval_e is None:
                raise ConfigError("function needs an interval expression on this space")
            e_int = as_expression(interval_e)
            on_interval = lambda t, e=e_int: e(t=t)
        values = np.zeros(mu.n_atoms)
        if mu.n_atoms:
            if atoms_e is None:
                raise ConfigError("function needs an atom expression on this space")
            values = as_expression(atoms_e)(j=np.arange(1, mu.n_atoms + 1, dtype=float))
        tail_fn = None
        if mu.has_tail:
            if tail_e is None:
                raise ConfigError("function needs a tail expression on this space")
            e_tail = as_expression(tail_e)
            tail_fn = e_tail
        if tail_limit is not None:
            tail_limit = float(tail_limit)
        return cls(on_interval, values, _TailExpr(tail_fn) if tail_fn is not None else None,
                   tail_limit)

    @classmethod
    def constant(cls, mu, c):
        c = float(c)
        return cls(
            (lambda t: np.full(np.shape(t), c)) if mu.interval is not None else None,
            np.full(mu.n_atoms, c),
            (lambda j: np.full(np.shape(j), c)) if mu.has_tail else None,
            c if mu.has_tail else None,
        )

    @classmethod
    def zero(cls, mu):
        return cls.constant(mu, 0.0)

    @classmethod
    def on_atoms(cls, mu, values):
        """Finitely supported function on the explicit atoms (zero elsewhere)."""
        values = np.asarray(values, dtype=float)
        full = np.zeros(mu.n_atoms)
        full[: values.size] = values
        if values.size > mu.n_atoms:
            raise DomainError("more values than explicit atoms")
        return cls(_zero if mu.interval is not None else None, full,
                   _zero if mu.has_tail else None, 0.0 if mu.has_tail else None)

    @classmethod
    def atom_indicator(cls, mu, ids, value=1.0):
        ids = np.atleast_1d(np.asarray(ids, dtype=np.int64))
        if np.any(ids < 1) or np.any(ids > mu.n_atoms):
            raise DomainError("indicator ids must be explicit atoms")
        vals = np.zeros(mu.n_atoms)
        vals[ids - 1] = value
        return cls.on_atoms(mu, vals)

    @classmethod
    def interval_indicator(cls, mu, a, b, value=1.0):
        if mu.interval is None:
            raise DomainError("space has no interval")
        value = float(value)
        return cls(lambda t: np.where((t >= a) & (t < b), value, 0.0), np.zeros(mu.n_atoms),
                   _zero if mu.has_tail else None, 0.0 if mu.has_tail else None,
                   breakpoints=(float(a), float(b)))

    # --- evaluation -------------------------------------------------------
    def at_atoms(self, ids):
        """Values at atom ids (1-based), explicit or tail."""
        ids = np.asarray(ids)
        out = np.empty(ids.shape, dtype=float)
        n = self.atom_values.size
        explicit = ids <= n
        out[explicit] = self.atom_values[ids[explicit].astype(np.int64) - 1]
        if np.any(~explicit):
            if self.tail_fn is None:
                raise DomainError("function has no tail closed form")
            out[~explicit] = np.asarray(self.tail_fn(ids[~explicit].astype(float)), dtype=float)
        return out

    def check_on(self, mu):
        if self.atom_values.size != mu.n_atoms:
            raise DomainError(f"function has {self.atom_values.size} atom values, "
                              f"space has {mu.n_atoms} atoms")
        if mu.interval is not None and self.on_interval is None:
            raise DomainError("function has no interval evaluator")
        if mu.has_tail and self.tail_fn is None:
            raise DomainError("space has a tail but the function has no tail_fn")

    def map(self, fn, limit_fn=None):
        """Apply an elementwise ``fn`` to every channel."""
        return MeasurableFunction(
            None if self.on_interval is None else (lambda t, g=self.on_interval: fn(g(t))),
            fn(self.atom_values),
            None if self.tail_fn is None else (lambda j, g=self.tail_fn: fn(g(j))),
            None if (self.tail_limit is None or limit_fn is None) else limit_fn(self.tail_limit),
            self.breakpoints,
        )

    def scaled(self, c):
        c = float(c)
        return self.map(lambda v: c * v, lambda L: c * L)

    def abs(self):
        return self.map(np.abs, abs)

    def is_zero(self, mu, threshold=1e-300, n_probe=257):
        """All probed values below ``threshold`` in modulus."""
        if np.any(np.abs(self.atom_values) >= threshold):
            return False
        if mu.interval is not None and self.on_interval is not None:
            iv = mu.interval
            t = np.concatenate([np.linspace(iv.lo, iv.hi, n_probe, endpoint=False),
                                iv.grid()[:: max(1, iv.n_grid // 1024)],
                                np.asarray(self.breakpoints, dtype=float)])
            t = t[(t >= iv.lo) & (t < iv.hi)]
            bps = np.asarray(self.breakpoints, dtype=float)
            if bps.size:
                # probe the pieces between breakpoints at their midpoints
                edges = np.unique(np.clip(np.concatenate([[iv.lo, iv.hi], bps]), iv.lo, iv.hi))
                t = np.concatenate([t, 0.5 * (edges[1:] + edges[:-1])])
            if np.any(np.abs(self.on_interval(t)) >= threshold):
                return False
        if mu.has_tail and self.tail_fn is not None:
            j = mu.tail_probes(per_octave=4)
            if j.size and np.any(np.abs(self.tail_fn(j.astype(float))) >= threshold):
                return False
        return True


class _TailExpr:
    """Tail closed form backed by an :class:`Expression` (keeps its source)."""

    def __init__(self, expr):
        self.expr = expr

    def __call__(self, j):
        return self.expr(j=j)

    @property
    def source(self):
        return self.expr.source


def pointwise(fn, *fs):
    """Combine functions channel by channel: ``fn(f1(x), f2(x), ...)``."""
    intervals = [f.on_interval for f in fs]
    tails = [f.tail_fn for f in fs]
    bps = tuple(sorted({b for f in fs for b in f.breakpoints}))
    on_interval = None
    if all(g is not None for g in intervals):
        on_interval = lambda t: fn(*[g(t) for g in intervals])
    tail_fn = None
    if all(g is not None for g in tails):
        tail_fn = lambda j: fn(*[g(j) for g in tails])
    sizes = {f.atom_values.size for f in fs}
    if len(sizes) != 1:
        raise DomainError("functions live on spaces with different atom counts")
    return MeasurableFunction(on_interval, fn(*[f.atom_values for f in fs]), tail_fn, None, bps)


@dataclass(frozen=True)
class Integral:
    value: float
    abs_error: float
    converged: bool
    interval_part: float = 0.0
    atom_part: float = 0.0
    tail_part: float = 0.0


def adaptive_gk15(fn, a, b, breakpoints=(), atol=1e-12, rtol=1e-10, initial_panels=16,
                  max_levels=64, max_panels=50000):
    """Globally adaptive Gauss–Kronrod (7, 15) quadrature of a vectorized ``fn``.

    Panels whose |K15 − G7| exceeds their length-proportional share of the
    tolerance are bisected.  Returns ``(value, error_estimate, converged)``.
    """
    edges = np.linspace(a, b, initial_panels + 1)
    bps = [x for x in breakpoints if a < x < b]
    edges = np.unique(np.concatenate([edges, bps]))
    lo, hi = edges[:-1], edges[1:]
    total_len = b - a
    done_val = 0.0
    done_err = 0.0
    for _ in range(max_levels):
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        x = c[:, None] + h[:, None] * NODES[None, :]
        fx = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
        if np.any(np.isnan(fx)):
            raise DomainError("integrand evaluated to NaN")
        if np.any(np.isposinf(fx)):
            return math.inf, 0.0, True
        if np.any(np.isneginf(fx)):
            return -math.inf, 0.0, True
        K = h * (fx @ KRONROD_W)
        G = h * (fx[:, _GAUSS_IDX] @ GAUSS_W)
        err = np.abs(K - G)
        estimate = done_val + K.sum()
        tol = max(atol, rtol * abs(estimate))
        share = tol * (hi - lo) / total_len
        floor = 64 * np.finfo(float).eps * np.abs(h * (np.abs(fx) @ KRONROD_W))
        accept = (err <= share) | (err <= floor)
        done_val += K[accept].sum()
        done_err += err[accept].sum()
        if accept.all():
            return float(done_val), float(done_err), True
        lo, hi = lo[~accept], hi[~accept]
        mid = 0.5 * (lo + hi)
        if 2 * lo.size > max_panels or np.any(mid <= lo) or np.any(mid >= hi):
            return _finish(done_val + K[~accept].sum(), done_err + err[~accept].sum(), tol)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
    return _finish(done_val + K[~accept].sum(), done_err + err[~accept].sum(), tol)


def _finish(value, err, tol):
    # refinement stopped early (float resolution or panel budget): judge by the error left
    ok = err <= max(tol, 1e-9 * max(1.0, abs(value)))
    return float(value), float(err), bool(ok)


def _quiet_beyond(fn, mu, start, cap, atol, per_octave=4):
    """Sparse look-ahead: would any later block plausibly exceed ``atol``?

    Guards against terms that vanish early and grow later.
    """
    if start >= cap:
        return True
    octaves = math.log2(cap / start)
    j = np.unique(np.round(start * np.exp2(np.arange(1, int(octaves * per_octave) + 1)
                                           / per_octave)))
    if j.size == 0:
        return True
    with np.errstate(invalid="ignore", over="ignore"):
        est = np.abs(np.asarray(fn(j), dtype=float) * mu.tail.weights(j)) * j / 2
    return bool(np.all(est <= atol))


def _tail_blocks(fn, mu, atol, mode, cap, probes_per_block=16):
    """Sum ``fn(j)·a_j`` over ``j > N`` in blocks ``(N·2^k, N·2^(k+1)]``."""
    n = mu.n_atoms
    lo, hi = n, max(2 * n, 1)
    total = 0.0
    blocks = []
    while lo < cap:
        hi = min(hi, cap)
        if mode == "exact":
            j = np.arange(lo + 1, hi + 1, dtype=float)
            vals = np.asarray(fn(j), dtype=float) * mu.tail.weights(j)
            block = float(np.sum(vals))
        else:
            j = np.unique(np.round(np.geomspace(lo + 1, hi, probes_per_block)))
            vals = np.asarray(fn(j), dtype=float) * mu.tail.weights(j)
            block = float(np.mean(vals)) * (hi - lo)
        if np.any(np.isnan(vals)):
            raise DomainError("tail evaluated to NaN")
        if np.any(np.isinf(vals)):
            return math.inf, 0.0, True
        total += block
        blocks.append(abs(block))
        # relative stop: an absolute floor would let a harmonic-type tail at a
        # small enough scale pass as convergent
        thresh = max(atol, TAIL_RTOL * abs(total))
        if abs(block) <= thresh and _quiet_beyond(fn, mu, hi, cap, thresh):
            return total, abs(block), True
        lo, hi = hi, 2 * hi
    if len(blocks) >= 2 and blocks[-1] == 0.0 and blocks[-2] == 0.0:
        return total, 0.0, True
    if len(blocks) >= 2 and blocks[-2] > 0:
        r = blocks[-1] / blocks[-2]
        if r <= BLOCK_RATIO_CONVERGED:
            remainder = blocks[-1] * r / (1.0 - r)
            return total + math.copysign(remainder, total), remainder, True
    return total, math.inf, False


def integrate(f, mu, atol=1e-12, rtol=1e-10, tail_mode="exact", tail_cap=PROBE_CAP,
              tail_atol=0.0):
    """``∫ f dμ`` over interval, explicit atoms and tail.

    The tail is summed in geometric blocks until a block contributes less than
    ``max(tail_atol, 1e-12·|partial sum|)`` and a sparse look-ahead stays
    below that too; if the probe cap is reached first, the sum counts as converged
    only when the last blocks shrink by at least ``BLOCK_RATIO_CONVERGED`` and
    the geometric remainder is added.  ``tail_mode="sampled"`` estimates each
    block from a few geometrically spaced probes (for costly closed forms).
    """
    f.check_on(mu)
    interval_part = 0.0
    err = 0.0
    converged = True
    if mu.interval is not None:
        iv = mu.interval
        interval_part, e, ok = adaptive_gk15(f.on_interval, iv.lo, iv.hi, f.breakpoints,
                                             atol=atol, rtol=rtol)
        err += e
        converged &= ok
    atom_vals = f.atom_values * mu.weights
    if np.any(np.isnan(atom_vals)):
        raise DomainError("atom value is NaN")
    atom_part = float(np.sum(atom_vals)) if atom_vals.size else 0.0
    tail_part = 0.0
    if mu.has_tail:
        tail_part, e, ok = _tail_blocks(f.tail_fn, mu, tail_atol, tail_mode, tail_cap)
        err += e
        converged &= ok
    value = interval_part + atom_part + tail_part
    return Integral(value, err, bool(converged), interval_part, atom_part, tail_part)


@dataclass(frozen=True)
class TailLimsup:
    value: float
    confidence: str  # "declared" or "probed"

    @property
    def infinite(self):
        return math.isinf(self.value)


def tail_limsup(f, mu, per_octave=8, cap=PROBE_CAP, factor=1.25):
    """``limsup_{j→∞} f(A_j)`` over the tail atoms.

    Finite atom lists have an empty tail (``0``, declared).  A declared
    ``tail_limit`` is returned as is.  Otherwise ``f`` is probed on octave
    blocks up to ``cap``: block maxima still growing (shrinking) by more than
    ``factor`` per octave over the last two octaves give ``inf`` (``0``); else
    the maximum over the last octave is the estimate.
    """
    if not mu.has_tail:
        return TailLimsup(0.0, "declared")
    if f.tail_limit is not None:
        return TailLimsup(float(f.tail_limit), "declared")
    if f.tail_fn is None:
        raise DomainError("space has a tail but the function has no tail_fn")
    j = mu.tail_probes(per_octave=per_octave, cap=cap)
    if j.size == 0:
        return TailLimsup(0.0, "probed")
    vals = np.asarray(f.tail_fn(j.astype(float)), dtype=float)
    if np.any(np.isnan(vals)):
        raise DomainError("tail evaluated to NaN")
    start = max(mu.n_atoms, 1)
    block = np.floor(np.log2(j / start) - 1e-12).astype(int)
    maxima = np.array([vals[block == b].max() for b in np.unique(block)])
    if np.any(np.isposinf(maxima)):
        return TailLimsup(math.inf, "probed")
    if maxima.size >= 3:
        m0, m1, m2 = maxima[-1], maxima[-2], maxima[-3]
        if m2 > 0 and m0 > factor * m1 and m1 > factor * m2:
            return TailLimsup(math.inf, "probed")
        if m0 >= 0 and m0 * factor < m1 and m1 * factor < m2:
            return TailLimsup(0.0, "probed")
    return TailLimsup(float(maxima[-1]), "probed")


def space_from_config(cfg, context="space"):
    """``{"interval": {...}, "atoms": [{"id":1,"w":1.0}, ...], "tail": {...}}``."""
    if not isinstance(cfg, dict):
        raise ConfigError("space spec must be an object", context)
    interval = None
    if cfg.get("interval") is not None:
        ic = cfg["interval"]
        try:
            interval = Interval(float(ic["lo"]), float(ic["hi"]), int(ic.get("grid", 4096)))
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", f"{context}.interval") from None
        except ConfigError as exc:
            raise ConfigError(str(exc), f"{context}.interval") from None
    weights = []
    for i, atom in enumerate(cfg.get("atoms", []) or []):
        ctx = f"{context}.atoms[{i}]"
        if not isinstance(atom, dict) or "w" not in atom:
            raise ConfigError("atom needs a weight 'w'", ctx)
        aid = int(atom.get("id", i + 1))
        if aid != i + 1:
            raise ConfigError(f"atom ids must be dense 1..N, got {aid} at position {i + 1}", ctx)
        w = float(atom["w"])
        if not w > 0:
            raise ConfigError(f"atom weight must be positive, got {w}", f"{ctx}.w")
        weights.append(w)
    tail = None
    if cfg.get("tail") is not None:
        tc = cfg["tail"]
        ctx = f"{context}.tail"
        try:
            expr = as_expression(tc.get("weight", "1"))
        except ConfigError as exc:
            raise ConfigError(str(exc), f"{ctx}.weight") from None
        horizon = tc.get("horizon")
        if weights:
            if horizon is not None and int(horizon) != len(weights):
                raise ConfigError("horizon must equal the number of explicit atoms", ctx)
        else:
            if horizon is None or int(horizon) < 1:
                raise ConfigError("tail without explicit atoms needs a horizon >= 1", ctx)
            ids = np.arange(1, int(horizon) + 1, dtype=float)
            weights = list(np.broadcast_to(expr(j=ids), ids.shape))
        limit = tc.get("limit")
        if isinstance(limit, str) and limit.strip().lower() in ("inf", "+inf", "infinity"):
            limit = math.inf
        tail = TailRule(lambda j, e=expr: e(j=j), None if limit is None else float(limit))
    try:
        return MeasureSpace(interval, weights, tail)
    except ConfigError as exc:
        raise ConfigError(str(exc), context) from None
