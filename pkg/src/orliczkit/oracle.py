"""Brute-force finite-dimensional evidence: norm lower bounds, truncation distances, separation.

Every number produced here is an empirical lower bound obtained by evaluating
``N_Φ₂(Tf)/N_Φ₁(f)`` on concrete nonnegative finitely supported ``f``.
Composition operators are modelled through preimage measures obtained by
scanning the atom map directly, so nothing here relies on the
Radon–Nikodym derivative computed in :mod:`orliczkit.operators`.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError
from .measure import MeasurableFunction
from .orlicz import luxemburg_norm, luxemburg_norm_discrete

__all__ = [
    "OracleEstimate", "operator_norm_estimate", "truncation_distance", "truncation_distances",
    "WitnessSeparation", "witness_separation",
]

LABEL = "empirical lower bound"
ASCENT_FACTORS = np.array([0.5, 0.9, 1.1, 2.0])
ASCENT_SWEEPS = 50
INTERVAL_CELLS = 16
SCAN_FACTOR = 16
FINE_GRID = 1 << 16


@dataclass(frozen=True, eq=False)
class OracleEstimate:
    lower: float
    maximizer: MeasurableFunction
    source: str
    label: str = LABEL


def _scan_limit(mu, top):
    return max(SCAN_FACTOR * int(top), mu.n_atoms)


def _preimage_weights(op, mu, ids):
    """``μ(φ⁻¹(A_j))`` for target atoms ``ids`` by scanning ``k = 1..K_scan``."""
    t = op.transformation
    if t.atom_map is None:
        return np.zeros(ids.shape)
    top = int(ids.max())
    K = _scan_limit(mu, top) if mu.has_tail else mu.n_atoms
    k = np.arange(1, K + 1)
    img = t.map_atoms(k, mu)
    a = mu.atom_weights(k)
    out = np.zeros(top + 1)
    sel = img <= top
    np.add.at(out, img[sel], a[sel])
    return out[ids]


def _finite_model(op, mu, ids):
    """``(w1, scale, w2)``: ``N_Φ₁`` uses weights ``w1``; ``N_Φ₂(Tf)`` uses ``scale·f`` on ``w2``."""
    w1 = mu.atom_weights(ids)
    if op.mode == "multiplication":
        scale = np.abs(op.multiplier.modulus.at_atoms(ids))
        return w1, scale, w1
    return w1, np.ones(ids.shape), _preimage_weights(op, mu, ids)


class _Ratio:
    def __init__(self, phi1, phi2, w1, scale, w2):
        self.phi1, self.phi2 = phi1, phi2
        self.w1, self.scale, self.w2 = w1, scale, w2

    def __call__(self, rows):
        rows = np.atleast_2d(rows)
        n1 = np.atleast_1d(luxemburg_norm_discrete(self.phi1, rows, self.w1))
        n2 = np.atleast_1d(luxemburg_norm_discrete(self.phi2, rows * self.scale, self.w2))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(n1 > 0, n2 / n1, 0.0)
        return r

    def indicators(self):
        # one column per atom keeps the batch linear in the number of atoms
        v = np.ones((self.w1.size, 1))
        n1 = np.atleast_1d(luxemburg_norm_discrete(self.phi1, v, self.w1[:, None]))
        n2 = np.atleast_1d(luxemburg_norm_discrete(self.phi2, v * self.scale[:, None],
                                                   self.w2[:, None]))
        return n2 / n1


def _random_rows(rng, m, samples):
    rows = np.zeros((samples, m))
    for i in range(samples):
        if i % 2 == 0:
            k = min(m, 1 + int(rng.geometric(0.3)))
        else:
            k = int(rng.integers(1, m + 1))
        pos = rng.choice(m, size=k, replace=False)
        rows[i, pos] = rng.exponential(1.0, size=k)
    return rows


def _coordinate_ascent(ratio, x, value, sweeps=ASCENT_SWEEPS):
    """Multiply single coordinates by 0.5, 0.9, 1.1 or 2 while the ratio improves."""
    x = x.copy()
    for _ in range(sweeps):
        support = np.nonzero(x > 0)[0]
        if support.size == 0:
            break
        cand = np.repeat(x[None, :], support.size * ASCENT_FACTORS.size, axis=0)
        rows = np.arange(cand.shape[0])
        coords = np.repeat(support, ASCENT_FACTORS.size)
        factors = np.tile(ASCENT_FACTORS, support.size)
        cand[rows, coords] *= factors
        r = ratio(cand).reshape(support.size, ASCENT_FACTORS.size)
        best_f = np.argmax(r, axis=1)
        best_r = r[np.arange(support.size), best_f]
        if best_r.max() <= value * (1 + 1e-12):
            break
        # try all individually improving moves at once, else the single best one
        combined = x.copy()
        improving = best_r > value
        combined[support[improving]] *= ASCENT_FACTORS[best_f[improving]]
        rc = float(ratio(combined)[0])
        if rc > best_r.max():
            x, value = combined, rc
        else:
            i = int(np.argmax(best_r))
            x[support[i]] *= ASCENT_FACTORS[best_f[i]]
            value = float(best_r[i])
    return x, value


def _support_function(mu, ids, values):
    """Finitely supported function taking ``values`` on atoms ``ids``."""
    explicit = np.zeros(mu.n_atoms)
    inside = ids <= mu.n_atoms
    explicit[ids[inside] - 1] = values[inside]
    beyond = dict(zip(ids[~inside].tolist(), values[~inside].tolist()))
    tail_fn = None
    if mu.has_tail:
        tail_fn = lambda j: np.array([beyond.get(int(k), 0.0) for k in np.ravel(j)]).reshape(
            np.shape(j))
    zero = (lambda t: np.zeros(np.shape(t))) if mu.interval is not None else None
    return MeasurableFunction(zero, explicit, tail_fn, 0.0 if mu.has_tail else None)


def _interval_cell_ratios(phi1, phi2, op, mu, n_cells=INTERVAL_CELLS):
    iv = mu.interval
    edges = np.linspace(iv.lo, iv.hi, n_cells + 1)
    out = []
    if op.mode == "composition":
        t = iv.lo + (iv.hi - iv.lo) * (np.arange(FINE_GRID) + 0.5) / FINE_GRID
        img = op.transformation.map_interval(t)
        dt = (iv.hi - iv.lo) / FINE_GRID
    for a, b in zip(edges[:-1], edges[1:]):
        n1 = 1.0 / float(phi1.inverse(1.0 / (b - a)))
        if op.mode == "multiplication":
            f = MeasurableFunction.interval_indicator(mu, a, b)
            n2 = luxemburg_norm(phi2, op.apply(f, mu), mu)
        else:
            m = np.count_nonzero((img >= a) & (img < b)) * dt
            n2 = 1.0 / float(phi2.inverse(1.0 / m)) if m > 0 else 0.0
        out.append(((a, b), n2 / n1))
    return out


def _estimate_on(phi1, phi2, op, mu, ids, samples, seed, with_interval=True):
    best_val, best_fn, best_src = 0.0, None, "none"
    if ids.size:
        ratio = _Ratio(phi1, phi2, *_finite_model(op, mu, ids))
        r_ind = ratio.indicators()
        i = int(np.argmax(r_ind))
        best_x = np.zeros(ids.size)
        best_x[i] = 1.0
        best_val, best_src = float(r_ind[i]), "indicator"
        rng = np.random.default_rng(seed)
        if samples:
            rows = _random_rows(rng, ids.size, samples)
            r = ratio(rows)
            k = int(np.argmax(r))
            if r[k] > best_val:
                best_val, best_x, best_src = float(r[k]), rows[k].copy(), "random"
        if best_val > 0:
            x, v = _coordinate_ascent(ratio, best_x, best_val)
            if v > best_val:
                best_val, best_x, best_src = v, x, best_src + "+ascent"
        best_fn = _support_function(mu, ids, best_x)
    if with_interval and mu.interval is not None:
        for (a, b), r in _interval_cell_ratios(phi1, phi2, op, mu):
            if r > best_val:
                best_val, best_src = r, "interval_cell"
                best_fn = MeasurableFunction.interval_indicator(mu, a, b)
    if best_fn is None:
        best_fn = MeasurableFunction.zero(mu)
    return OracleEstimate(best_val, best_fn, best_src)


def _atom_ids(mu, lo, hi):
    """Atom ids in ``(lo, hi]`` that exist in the space."""
    top = hi if mu.has_tail else min(hi, mu.n_atoms)
    return np.arange(lo + 1, top + 1, dtype=np.int64)


def operator_norm_estimate(phi1, phi2, op, mu, trunc_atoms=128, samples=200, seed=0):
    """Best ``N_Φ₂(Tf)/N_Φ₁(f)`` over indicators, seeded random vectors and ascent.

    ``f`` ranges over nonnegative functions on the first ``trunc_atoms``
    atoms (and interval cell indicators when the space has an interval).
    """
    return _estimate_on(phi1, phi2, op, mu, _atom_ids(mu, 0, trunc_atoms), samples, seed)


def truncation_distance(phi1, phi2, op, mu, keep_atoms, samples=200, seed=0, window=128):
    """Lower estimate of ``‖T − T_N‖`` where ``T_N`` only sees the first ``keep_atoms`` atoms.

    ``T − T_N`` acts on functions supported off the first ``keep_atoms``
    atoms, so candidates live on atoms ``keep+1 .. keep+window`` (and the
    interval, which ``T_N`` drops entirely).
    """
    ids = _atom_ids(mu, keep_atoms, keep_atoms + window)
    return _estimate_on(phi1, phi2, op, mu, ids, samples, seed).lower


def truncation_distances(phi1, phi2, op, mu, keeps, samples=200, seed=0, window=128):
    """:func:`truncation_distance` for several ``keep`` values, made monotone.

    A candidate supported beyond ``keep'`` is also admissible for every
    smaller ``keep``, with the same ratio, so a suffix maximum keeps every
    entry a valid lower bound.
    """
    keeps = sorted(int(k) for k in keeps)
    raw = [truncation_distance(phi1, phi2, op, mu, k, samples, seed, window) for k in keeps]
    out = list(np.maximum.accumulate(np.array(raw[::-1]))[::-1]) if raw else []
    return dict(zip(keeps, (float(v) for v in out)))


@dataclass(frozen=True)
class WitnessSeparation:
    min_pairwise: float
    min_image_norm: float
    n: int
    label: str = LABEL


def _two_level_norms(phi, c, m):
    """Norms of disjointly supported ``c_k·χ`` on pieces of measure ``m_k``, and of pair differences."""
    c = np.asarray(c, dtype=float)
    m = np.asarray(m, dtype=float)
    single = np.atleast_1d(luxemburg_norm_discrete(phi, c[:, None], m[:, None]))
    pairs = list(combinations(range(c.size), 2))
    if not pairs:
        return single, np.array([np.inf])
    i, j = np.array(pairs).T
    vals = np.stack([c[i], c[j]], axis=1)
    weights = np.stack([m[i], m[j]], axis=1)
    pair = np.atleast_1d(luxemburg_norm_discrete(phi, vals, weights))
    return single, pair


def witness_separation(phi1, phi2, op, mu, region, n):
    """Separation of ``T f_k`` for normalized indicators ``f_k = χ_{B_k}/N_Φ₁(χ_{B_k})``.

    ``region`` is a list of atom ids or ``("interval", a, b)``, which is
    split into ``n`` equal subintervals.  Returns the minimum over pairs of
    ``N_Φ₂(Tf_k − Tf_m)`` and the minimum of ``N_Φ₂(Tf_k)``.
    """
    if isinstance(region, (tuple, list)) and len(region) == 3 and region[0] == "interval":
        return _interval_separation(phi1, phi2, op, mu, float(region[1]), float(region[2]), n)
    ids = np.asarray(region, dtype=np.int64)
    if np.unique(ids).size < n:
        raise DomainError(f"region has fewer than {n} distinct atoms")
    ids = np.unique(ids)[:n]
    if not mu.has_tail and ids.max() > mu.n_atoms:
        raise DomainError("region names atoms outside the space")
    w1, scale, w2 = _finite_model(op, mu, ids)
    c = np.asarray(phi1.inverse(1.0 / w1), dtype=float)  # 1/N_Φ₁(χ_j)
    # T f_k = scale_k·c_k on atom k (multiplication) or c_k on φ⁻¹(A_k) (composition)
    single, pair = _two_level_norms(phi2, c * scale, w2)
    return WitnessSeparation(float(pair.min()), float(single.min()), int(n))


def _interval_separation(phi1, phi2, op, mu, a, b, n):
    if mu.interval is None:
        raise DomainError("space has no interval")
    iv = mu.interval
    if not (iv.lo <= a < b <= iv.hi):
        raise DomainError("interval region must lie inside the interval")
    edges = np.linspace(a, b, n + 1)
    c = np.array([float(phi1.inverse(1.0 / (hi - lo))) for lo, hi in zip(edges[:-1], edges[1:])])
    if op.mode == "composition":
        t = iv.lo + iv.length * (np.arange(FINE_GRID) + 0.5) / FINE_GRID
        img = op.transformation.map_interval(t)
        m = np.array([np.count_nonzero((img >= lo) & (img < hi)) for lo, hi in
                      zip(edges[:-1], edges[1:])]) * iv.length / FINE_GRID
        single, pair = _two_level_norms(phi2, c, m)
        pos = m > 0
        single = np.where(pos, single, 0.0)
        return WitnessSeparation(float(pair.min()), float(single.min()), int(n))
    images = []
    for (lo, hi), ck in zip(zip(edges[:-1], edges[1:]), c):
        f = MeasurableFunction.interval_indicator(mu, lo, hi, ck)
        images.append(op.apply(f, mu))
    single = [luxemburg_norm(phi2, g, mu) for g in images]
    pair = []
    for i, j in combinations(range(n), 2):
        gi, gj = images[i], images[j]
        diff = MeasurableFunction(
            lambda t, p=gi.on_interval, q=gj.on_interval: p(t) - q(t),
            gi.atom_values - gj.atom_values,
            None if gi.tail_fn is None else (lambda k: np.zeros(np.shape(k))),
            0.0 if mu.has_tail else None,
            tuple(sorted(set(gi.breakpoints) | set(gj.breakpoints))))
        pair.append(luxemburg_norm(phi2, diff, mu))
    return WitnessSeparation(float(min(pair)) if pair else float("inf"), float(min(single)), int(n))
