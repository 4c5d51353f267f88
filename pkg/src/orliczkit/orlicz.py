"""Modulars ``I_Φ``, weighted modulars and the Luxemburg norm ``N_Φ``."""
import math

import numpy as np

from . import _numeric
from .errors import ConvergenceError, DomainError
from .measure import integrate, pointwise

__all__ = ["modular", "weighted_modular", "luxemburg_norm", "luxemburg_norm_discrete",
           "modular_discrete", "indicator_norm"]

NORM_RTOL = 1e-9
DIVERGENT_DOUBLINGS = 64


def _integrand(phi, f, scale, weight):
    a = abs(scale)
    if weight is None:
        return f.map(lambda v: np.asarray(phi(a * np.abs(v)), dtype=float))

    def combine(v, w):
        with np.errstate(invalid="ignore"):
            out = np.asarray(phi(a * np.abs(v)), dtype=float) * w
        # h = 0 kills the integrand even where Φ saturates
        return np.where(w == 0, 0.0, out)

    return pointwise(combine, f, weight)


def modular(phi, f, mu, scale=1.0, tail_mode="exact"):
    """``I_Φ(scale·f) = ∫ Φ(|scale·f|) dμ``; ``inf`` when the tail sum diverges."""
    res = integrate(_integrand(phi, f, scale, None), mu, tail_mode=tail_mode)
    return res.value if res.converged else math.inf


def _check_weight(h, mu):
    if np.any(h.atom_values < 0):
        raise DomainError("weight is negative on an atom")
    if mu.interval is not None and h.on_interval is not None:
        t = mu.interval.grid()[:: max(1, mu.interval.n_grid // 512)]
        if np.any(np.asarray(h.on_interval(t)) < 0):
            raise DomainError("weight is negative on the interval")
    if mu.has_tail and h.tail_fn is not None:
        j = mu.tail_probes(per_octave=2)
        if j.size and np.any(np.asarray(h.tail_fn(j.astype(float))) < 0):
            raise DomainError("weight is negative on tail atoms")


def weighted_modular(phi, f, h, mu, scale=1.0, tail_mode="exact"):
    """``∫ h·Φ(|scale·f|) dμ`` for a nonnegative weight ``h``."""
    h.check_on(mu)
    _check_weight(h, mu)
    res = integrate(_integrand(phi, f, scale, h), mu, tail_mode=tail_mode)
    return res.value if res.converged else math.inf


def modular_discrete(phi, values, weights):
    """``Σ_i w_i Φ(|v_i|)`` along the last axis."""
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.asarray(phi(np.abs(values)), dtype=float) * weights
    return np.where(weights == 0, 0.0, terms).sum(axis=-1)


def luxemburg_norm_discrete(phi, values, weights, rtol=NORM_RTOL):
    """Luxemburg norms of rows of ``values`` on atoms with ``weights``.

    Vectorized over leading axes; ``weights`` broadcasts against ``values``
    (one weight vector for all rows, or one per row).  Rows that vanish get
    norm 0.
    """
    values = np.abs(np.asarray(values, dtype=float))
    weights = np.asarray(weights, dtype=float)
    lead = values.shape[:-1]
    flat = values.reshape(-1, values.shape[-1])
    wflat = np.broadcast_to(weights, values.shape).reshape(flat.shape)
    zero = ~np.any((flat > 1e-300) & (wflat > 0), axis=-1)
    out = np.zeros(flat.shape[0])
    rows = np.nonzero(~zero)[0]
    if rows.size:
        v = flat[rows]
        wv = wflat[rows]
        # solve Σ w Φ(s·v) = 1 for s = 1/k

        def fn(s):
            return modular_discrete(phi, s[:, None] * v, wv)

        lo, hi = _numeric.bracket_increasing(fn, np.ones(rows.size), start=1.0)
        s = _numeric.bisect_increasing(fn, np.ones(rows.size), lo, hi, xtol_rel=rtol * 1e-3)
        out[rows] = 1.0 / s
    return out.reshape(lead) if lead else float(out[0])


def luxemburg_norm(phi, f, mu, rtol=NORM_RTOL, tail_mode="exact"):
    """``N_Φ(f) = inf{k > 0 : I_Φ(f/k) <= 1}``.

    Bracketing doubles or halves ``k`` from 1; a divergent modular counts as
    ``> 1``.  Returns ``inf`` when no finite ``k`` works and 0 for ``f ≡ 0``.
    """
    f.check_on(mu)
    if f.is_zero(mu):
        return 0.0
    if mu.interval is None and not mu.has_tail:
        return luxemburg_norm_discrete(phi, f.atom_values, mu.weights, rtol=rtol)

    samples = []

    def over(k):
        val = modular(phi, f, mu, scale=1.0 / k, tail_mode=tail_mode)
        if math.isnan(val):
            raise ConvergenceError("modular evaluated to NaN")
        samples.append((k, val))
        return val > 1.0

    top = _probe_sup(f, mu)
    k = 1.0
    if over(k):
        lo = k
        divergent = 0
        while True:
            k *= 2.0
            if k > 1e300:
                return math.inf
            if not over(k):
                hi = k
                break
            lo = k
            # past sup|f| nothing saturates, so a modular that keeps diverging
            # is a divergent tail; waiting for underflow would fake convergence
            divergent = divergent + 1 if (k >= top and math.isinf(samples[-1][1])) else 0
            if divergent >= DIVERGENT_DOUBLINGS:
                return math.inf
    else:
        hi = k
        while True:
            k /= 2.0
            if k < 1e-300:
                return 0.0
            if over(k):
                lo = k
                break
            hi = k
    for _ in range(200):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if over(mid):
            lo = mid
        else:
            hi = mid
    _check_monotone(samples)
    return 0.5 * (lo + hi)


def _probe_sup(f, mu):
    """sup |f| over the interval grid, explicit atoms and tail probes."""
    parts = [np.abs(f.atom_values)]
    if mu.interval is not None:
        parts.append(np.abs(np.asarray(f.on_interval(mu.interval.grid()), dtype=float)))
    if mu.has_tail:
        j = mu.tail_probes(per_octave=2)
        if j.size:
            parts.append(np.abs(np.asarray(f.tail_fn(j.astype(float)), dtype=float)))
    vals = np.concatenate([np.atleast_1d(p) for p in parts])
    vals = vals[np.isfinite(vals)]
    return float(vals.max()) if vals.size else math.inf


def _check_monotone(samples, tol=1e-6):
    samples.sort()
    vals = np.array([v for _, v in samples])
    finite = np.isfinite(vals)
    v = vals[finite]
    if v.size > 1 and np.any(np.diff(v) > tol * np.maximum(1.0, v[:-1])):
        raise ConvergenceError("modular is not monotone in the scale")


def indicator_norm(phi, measure):
    """Closed form ``N_Φ(χ_A) = 1/Φ⁻¹(1/μ(A))`` for ``0 < μ(A) < ∞``."""
    measure = np.asarray(measure, dtype=float)
    return 1.0 / np.asarray(phi.inverse(1.0 / measure), dtype=float)

