"""Multiplication operators ``M_u f = u·f`` and composition operators ``C_φ f = f∘φ``.

A :class:`Transformation` maps atoms to atoms through an integer closed form
and the interval to itself through strictly monotone differentiable
branches.  :func:`radon_nikodym` builds ``h = dμ∘φ⁻¹/dμ`` from preimage
sums on atoms and from ``Σ 1/|φ'(φ⁻¹(s))|`` on the interval.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _numeric
from .errors import ConfigError, ConvergenceError, DomainError
from .expr import as_expression
from .measure import MeasurableFunction, adaptive_gk15, pointwise
from .orlicz import modular, weighted_modular

__all__ = [
    "Multiplier", "Branch", "Transformation", "RadonNikodym", "Multiplication", "Composition",
    "apply_multiplication", "apply_composition", "radon_nikodym", "change_of_variables_check",
    "operator_from_config",
]

MAX_PREIMAGE_RUN = 4096
DENSE_TABLE = 2 ** 21


@dataclass(frozen=True, eq=False)
class Multiplier:
    """``u`` split into modulus and sign; analysis only ever looks at the modulus."""

    modulus: MeasurableFunction
    phase: Optional[MeasurableFunction] = None

    @classmethod
    def from_function(cls, u):
        return cls(u.abs(), u.map(np.sign))

    @property
    def u(self):
        if self.phase is None:
            return self.modulus
        return pointwise(np.multiply, self.modulus, self.phase)


def apply_multiplication(m, f):
    """Pointwise ``u·f`` on every channel."""
    u = m.u if isinstance(m, Multiplier) else m
    return pointwise(np.multiply, u, f)


@dataclass(frozen=True, eq=False)
class Branch:
    """Strictly monotone ``C¹`` piece of φ on ``[lo, hi)``."""

    lo: float
    hi: float
    forward: Callable
    derivative: Callable
    inverse_fn: Optional[Callable] = None

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigError("branch needs lo < hi")
        t = np.linspace(self.lo, self.hi, 65)[1:-1]
        d = np.asarray(self.derivative(t), dtype=float)
        if np.any(d == 0) or not (np.all(d > 0) or np.all(d < 0)):
            raise DomainError("branch derivative vanishes or changes sign at a probed point")

    @property
    def increasing(self):
        return float(self.derivative(np.array([0.5 * (self.lo + self.hi)]))[0]) > 0

    @property
    def image(self):
        a, b = (float(v) for v in self.forward(np.array([self.lo, self.hi])))
        return (min(a, b), max(a, b))

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        if self.inverse_fn is not None:
            return np.asarray(self.inverse_fn(s), dtype=float)
        sign = 1.0 if self.increasing else -1.0
        g = lambda t: sign * np.asarray(self.forward(t), dtype=float)
        # bisection on the monotone forward map inside [lo, hi]
        target = sign * s
        return _numeric.bisect_increasing(
            lambda t: g(np.clip(t, self.lo, self.hi)), target,
            np.full(s.shape, self.lo), np.full(s.shape, self.hi), xtol_rel=1e-15,
            maxiter=1100)


@dataclass(frozen=True, eq=False)
class Transformation:
    """Measurable φ: integer ``atom_map`` on atoms, monotone branches on the interval."""

    atom_map: Optional[Callable] = None
    branches: tuple = ()
    surjective: bool = False

    def map_atoms(self, ids, mu=None):
        if self.atom_map is None:
            raise DomainError("transformation has no atom map")
        ids = np.asarray(ids, dtype=float)
        img = np.asarray(self.atom_map(ids), dtype=float)
        img = np.broadcast_to(img, ids.shape)
        r = np.round(img)
        if np.any(~np.isfinite(img)) or np.any(np.abs(img - r) > 1e-9) or np.any(r < 1):
            raise DomainError("atom_map must send atoms to integer ids >= 1")
        if mu is not None and not mu.has_tail and np.any(r > mu.n_atoms):
            raise DomainError(f"atom_map leaves the {mu.n_atoms} atoms of the space")
        return r.astype(np.int64)

    def map_interval(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, np.nan)
        for br in self.branches:
            sel = (t >= br.lo) & (t < br.hi)
            if np.any(sel):
                out[sel] = np.asarray(br.forward(t[sel]), dtype=float)
        return out

    def check_on(self, mu):
        """Validate the map against the space (range and nonsingularity)."""
        if mu.n_atoms or mu.has_tail:
            self.map_atoms(np.arange(1, mu.n_atoms + 1), mu)
        if mu.interval is not None:
            if not self.branches:
                raise DomainError("space has an interval but the map has no interval branches")
            iv = mu.interval
            grid = iv.grid()
            covered = np.zeros(grid.shape, dtype=bool)
            for br in self.branches:
                covered |= (grid >= br.lo) & (grid < br.hi)
                a, b = br.image
                if a < iv.lo - 1e-12 or b > iv.hi + 1e-12:
                    raise DomainError("interval branch maps outside the interval")
            if not covered.all():
                raise DomainError("interval branches do not cover the interval")


def _compose_breakpoints(t, f):
    pts = set()
    for br in t.branches:
        pts.update((br.lo, br.hi))
        a, b = br.image
        bps = np.array([x for x in f.breakpoints if a < x < b])
        if bps.size:
            pts.update(float(v) for v in br.inverse(bps))
    return tuple(sorted(pts))


def apply_composition(t, f, mu=None):
    """``f∘φ``: atom ``j`` gets ``f(A_φ(j))``, interval point ``s`` gets ``f(φ(s))``."""
    n = f.atom_values.size
    ids = np.arange(1, n + 1)
    if t.atom_map is not None and n:
        atom_values = f.at_atoms(t.map_atoms(ids, mu))
    else:
        atom_values = np.zeros(n)
    tail_fn = None
    if f.tail_fn is not None and t.atom_map is not None:
        tail_fn = lambda j: f.at_atoms(t.map_atoms(j))
    on_interval = None
    if f.on_interval is not None and t.branches:
        on_interval = lambda s: f.on_interval(t.map_interval(s))
    return MeasurableFunction(on_interval, atom_values, tail_fn, None,
                              _compose_breakpoints(t, f) if t.branches else ())


@dataclass(frozen=True, eq=False)
class RadonNikodym:
    h: MeasurableFunction
    provenance: str  # "computed" or "declared"


class _TailPreimages:
    """Preimage weights ``μ(φ⁻¹(A_j))`` for a nondecreasing unbounded tail map."""

    def __init__(self, t, mu):
        self.t = t
        self.mu = mu
        self.start = mu.n_atoms + 1
        k = np.unique(np.concatenate([
            np.arange(self.start, self.start + 4096),
            mu.tail_probes(per_octave=4, cap=2 ** 40) + 1,
        ]))
        img = t.map_atoms(k)
        if np.any(np.diff(img) < 0):
            raise DomainError("tail atom map is not monotone; declare h instead")
        if img[-1] <= img[0] and k.size > 1:
            raise DomainError("tail atom map is bounded; preimages are infinite")

    def _dense(self):
        # φ on a dense run of tail atoms, so most lookups are one searchsorted
        if getattr(self, "_table", None) is None:
            k = np.arange(self.start, self.start + DENSE_TABLE, dtype=np.int64)
            img = self.t.map_atoms(k)
            if np.any(np.diff(img) < 0):
                raise DomainError("tail atom map is not monotone; declare h instead")
            self._table = img
        return self._table

    def first_at_least(self, j):
        """Smallest tail ``k`` with ``φ(k) >= j`` (table lookup, else integer bisection)."""
        j = np.asarray(j, dtype=np.int64)
        table = self._dense()
        out = np.empty(j.shape, dtype=np.int64)
        inside = j <= table[-1]
        out[inside] = self.start + np.searchsorted(table, j[inside], side="left")
        if not inside.all():
            out[~inside] = self._search(j[~inside])
        return out

    def _search(self, j):
        lo = np.full(j.shape, self.start, dtype=np.int64)
        hi = np.full(j.shape, self.start, dtype=np.int64)
        step = np.ones(j.shape, dtype=np.int64)
        for _ in range(62):
            need = self.t.map_atoms(hi) < j
            if not need.any():
                break
            lo = np.where(need, hi + 1, lo)
            hi = np.where(need, hi + step, hi)
            step = np.where(need, step * 2, step)
        else:
            raise DomainError("tail atom map does not reach the requested atoms")
        # invariant: answer in [lo, hi]
        for _ in range(64):
            open_ = lo < hi
            if not open_.any():
                break
            mid = (lo + hi) // 2
            ok = self.t.map_atoms(mid) >= j
            hi = np.where(open_ & ok, mid, hi)
            lo = np.where(open_ & ~ok, mid + 1, lo)
        return lo

    def weight(self, j):
        j = np.asarray(j, dtype=np.int64)
        a = self.first_at_least(j)
        b = self.first_at_least(j + 1)
        count = b - a
        if count.size == 0:
            return np.zeros(0)
        longest = int(count.max())
        if longest > MAX_PREIMAGE_RUN:
            raise DomainError("tail preimage runs too long to sum; declare h instead")
        total = np.zeros(j.shape)
        for i in range(longest):
            sel = count > i
            if not sel.any():
                break
            total[sel] += self.mu.atom_weights(a[sel] + i)
        return total


def _explicit_preimages(t, mu):
    """Preimage weight sums contributed by explicit atoms: (array over 1..N, dict beyond)."""
    n = mu.n_atoms
    acc = np.zeros(n)
    extra = {}
    if n == 0:
        return acc, extra
    img = t.map_atoms(np.arange(1, n + 1), mu)
    inside = img <= n
    np.add.at(acc, img[inside] - 1, mu.weights[inside])
    for target, w in zip(img[~inside], mu.weights[~inside]):
        extra[int(target)] = extra.get(int(target), 0.0) + float(w)
    return acc, extra


def _interval_density(t, s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    for br in t.branches:
        a, b = br.image
        sel = (s >= a) & (s < b)
        if np.any(sel):
            x = br.inverse(s[sel])
            with np.errstate(divide="ignore"):
                out[sel] += 1.0 / np.abs(np.asarray(br.derivative(x), dtype=float))
    return out


def _preimage_measures(t, mu):
    """Callable ``ids -> μ(φ⁻¹(A_j))`` over explicit and tail atoms."""
    acc, extra = _explicit_preimages(t, mu)
    tail = _TailPreimages(t, mu) if (mu.has_tail and t.atom_map is not None) else None

    keys = np.array(sorted(extra), dtype=np.int64)
    vals = np.array([extra[k] for k in keys.tolist()], dtype=float)

    def measure_of(ids):
        ids = np.asarray(ids, dtype=np.int64)
        out = np.zeros(ids.shape)
        explicit = ids <= mu.n_atoms
        out[explicit] = acc[ids[explicit] - 1]
        if keys.size and np.any(~explicit):
            rest = ids[~explicit]
            pos = np.minimum(np.searchsorted(keys, rest), keys.size - 1)
            out[~explicit] = np.where(keys[pos] == rest, vals[pos], 0.0)
        if tail is not None:
            out += tail.weight(ids)
        return out

    return measure_of


def _cached(fn, size=64):
    # tail sums probe the same geometric blocks over and over
    cache = {}

    def wrapped(j):
        j = np.asarray(j)
        key = (j.dtype.str, j.shape, j.tobytes())
        if key not in cache:
            if len(cache) >= size:
                cache.clear()
            cache[key] = np.asarray(fn(j), dtype=float)
        return cache[key].copy()

    return wrapped


def radon_nikodym(t, mu, declared=None, rtol=1e-6):
    """``h = dμ∘φ⁻¹/dμ``, computed from preimages or validated when ``declared``."""
    t.check_on(mu)
    if declared is not None:
        declared.check_on(mu)
        _validate_declared(t, mu, declared, rtol)
        return RadonNikodym(declared, "declared")
    measure_of = _preimage_measures(t, mu) if t.atom_map is not None else None
    n = mu.n_atoms
    atom_values = np.zeros(n)
    if n and measure_of is not None:
        atom_values = measure_of(np.arange(1, n + 1)) / mu.weights
    tail_fn = None
    if mu.has_tail and measure_of is not None:
        tail_fn = _cached(lambda j: measure_of(np.asarray(j, dtype=np.int64)) / mu.atom_weights(j))
    on_interval = None
    bps = ()
    if mu.interval is not None:
        on_interval = lambda s: _interval_density(t, s)
        bps = tuple(sorted({v for br in t.branches for v in br.image}))
    return RadonNikodym(MeasurableFunction(on_interval, atom_values, tail_fn, None, bps),
                        "computed")


def _validate_declared(t, mu, h, rtol):
    if t.atom_map is not None and mu.n_atoms:
        try:
            measure_of = _preimage_measures(t, mu)
        except DomainError:
            acc, _ = _explicit_preimages(t, mu)
            measure_of = lambda ids: acc[np.asarray(ids) - 1]
        ids = np.arange(1, mu.n_atoms + 1)
        expect = measure_of(ids)
        got = h.atom_values * mu.weights
        if np.any(np.abs(got - expect) > rtol * np.maximum(1.0, np.abs(expect))):
            bad = int(ids[np.argmax(np.abs(got - expect))])
            raise DomainError(f"declared h disagrees with μ(φ⁻¹(A_{bad}))")
    if mu.interval is not None:
        iv = mu.interval
        edges = np.linspace(iv.lo, iv.hi, 17)
        for a, b in zip(edges[:-1], edges[1:]):
            lhs, _, _ = adaptive_gk15(h.on_interval, a, b, h.breakpoints)
            rhs = 0.0
            for br in t.branches:
                ia, ib = br.image
                lo_, hi_ = max(a, ia), min(b, ib)
                if hi_ > lo_:
                    x = br.inverse(np.array([lo_, hi_]))
                    rhs += abs(float(x[1] - x[0]))
            if abs(lhs - rhs) > rtol * max(1.0, abs(rhs)):
                raise DomainError(f"declared h disagrees with μ(φ⁻¹([{a:g}, {b:g})))")


def change_of_variables_check(t, phi2, f, mu, h=None):
    """``|I_Φ₂(f∘φ) − ∫ h·Φ₂(|f|) dμ|``, the self-test of ``h``."""
    if h is None:
        h = radon_nikodym(t, mu).h
    elif isinstance(h, RadonNikodym):
        h = h.h
    lhs = modular(phi2, apply_composition(t, f, mu), mu)
    rhs = weighted_modular(phi2, f, h, mu)
    if math.isinf(lhs) and math.isinf(rhs):
        return 0.0
    return abs(lhs - rhs)


@dataclass(frozen=True, eq=False)
class Multiplication:
    multiplier: Multiplier
    source: dict = field(default_factory=dict)

    mode = "multiplication"

    def weight(self, mu):
        """The pointwise weight ``w`` entering the criteria: ``|u|``."""
        return self.multiplier.modulus

    def apply(self, f, mu=None):
        return apply_multiplication(self.multiplier, f)


@dataclass(frozen=True, eq=False)
class Composition:
    transformation: Transformation
    rn: Optional[RadonNikodym] = None
    source: dict = field(default_factory=dict)

    mode = "composition"

    def weight(self, mu):
        """The pointwise weight ``w`` entering the criteria: ``h``."""
        if self.rn is None:
            object.__setattr__(self, "rn", radon_nikodym(self.transformation, mu))
        return self.rn.h

    def apply(self, f, mu=None):
        return apply_composition(self.transformation, f, mu)


def _branch_from_config(cfg, ctx):
    try:
        fwd = as_expression(cfg["map"])
        der = as_expression(cfg["derivative"])
        inv = as_expression(cfg["inverse"]) if cfg.get("inverse") is not None else None
        return Branch(float(cfg["lo"]), float(cfg["hi"]),
                      lambda t, e=fwd: e(t=t), lambda t, e=der: e(t=t),
                      None if inv is None else (lambda s, e=inv: e(s=s)))
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}", ctx) from None
    except (ConfigError, DomainError) as exc:
        raise ConfigError(str(exc), ctx) from None


def operator_from_config(cfg, mu, context="operator"):
    """``{"op": "mult", "u": ...}`` or ``{"op": "comp", "atom_map": ..., ...}``."""
    if not isinstance(cfg, dict):
        raise ConfigError("operator spec must be an object", context)
    op = cfg.get("op")
    try:
        if op == "mult":
            if "u" not in cfg:
                raise ConfigError("missing field 'u'", context)
            u = MeasurableFunction.from_expr(mu, cfg["u"])
            return Multiplication(Multiplier.from_function(u), dict(cfg))
        if op == "comp":
            amap = cfg.get("atom_map")
            atom_map = None
            if amap is not None:
                e = as_expression(amap)
                atom_map = lambda j, e=e: e(j=j)
            branches = tuple(_branch_from_config(b, f"{context}.interval_map[{i}]")
                             for i, b in enumerate(cfg.get("interval_map", []) or []))
            t = Transformation(atom_map, branches, bool(cfg.get("surjective", False)))
            t.check_on(mu)
            rn = None
            if cfg.get("h") is not None:
                h = MeasurableFunction.from_expr(mu, cfg["h"])
                if cfg.get("declared", True):
                    rn = radon_nikodym(t, mu, declared=h)
                else:
                    rn = RadonNikodym(h, "declared")
            return Composition(t, rn, dict(cfg))
    except DomainError as exc:
        raise ConfigError(str(exc), context) from None
    except ConfigError as exc:
        if exc.context and str(exc.context).startswith(context):
            raise
        raise ConfigError(str(exc), context) from None
    raise ConfigError(f"unknown operator kind {op!r} (expected 'mult' or 'comp')", f"{context}.op")
