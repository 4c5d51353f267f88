"""Decision criteria for ``M_u`` and ``C_φ`` between Orlicz spaces.

Everything is driven by a pointwise weight ``w`` (``|u|`` for multiplication,
``h`` for composition) and the critical level

    ε(α) = Φ₁⁻¹(Φ₂(w·α)) / α        (multiplication)
    ε(α) = Φ₁⁻¹(w·Φ₂(α)) / α        (composition)

whose sup over ``α > 0`` (``ε*_∃``) and inf (``ε*_∀``) bracket the two
readings of the ``N_ε`` sets.  Both are always reported.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _numeric
from .errors import DomainError
from .measure import MeasurableFunction, integrate, tail_limsup
from .young import delta2_index

__all__ = [
    "AlphaGrid", "critical_epsilon", "CriticalEpsilonProfile", "epsilon_profile",
    "NEpsilonSet", "n_epsilon_set", "EssentialNormBounds", "essential_norm_bounds",
    "BoundednessCertificate", "boundedness_certificate", "Verdict", "compactness_verdict",
    "AnalysisReport", "analyze", "M_LADDER",
]

M_LADDER = 2.0 ** np.arange(-20, 41)
EPS_BAND = 1e-6
G_NOISE = 1e-12
V_FLOOR = 1e-200


@dataclass(frozen=True)
class AlphaGrid:
    """Log grid for the α (or v) searches and the divergence threshold."""

    lo: float = 1e-8
    hi: float = 1e8
    per_octave: int = 4
    divergence_factor: float = 1.25
    refine_iters: int = 40

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "per_octave": self.per_octave,
                "divergence_factor": self.divergence_factor}


def _check_mode(mode):
    if mode not in ("multiplication", "composition"):
        raise ValueError(f"mode must be 'multiplication' or 'composition', got {mode!r}")


def _eps_fn(phi1, phi2, w, mode):
    w = w[:, None]

    def fn(alpha):
        with np.errstate(all="ignore"):
            if mode == "multiplication":
                y = np.asarray(phi2(w * alpha), dtype=float)
            else:
                y = w * np.asarray(phi2(alpha), dtype=float)
        y = np.broadcast_to(y, np.broadcast_shapes(y.shape, np.shape(alpha)))
        x = np.full(y.shape, np.nan)
        ok = np.isfinite(y)
        if ok.any():
            x[ok] = phi1.inverse(y[ok])
        return x / alpha

    return fn


def critical_epsilon(phi1, phi2, w, mode="multiplication", quantifier="exists",
                     grid=AlphaGrid()):
    """``sup_α ε(α)`` (``exists``) or ``inf_α ε(α)`` (``forall``), elementwise in ``w``.

    A sup still rising (or an inf still falling) geometrically at the edge of
    the α grid is reported as ``inf`` (or ``0``).

    >>> from orliczkit.young import Power
    >>> round(float(critical_epsilon(Power(2), Power(2), 3.0)), 9)
    3.0
    """
    _check_mode(mode)
    if quantifier not in ("exists", "forall"):
        raise ValueError(f"quantifier must be 'exists' or 'forall', got {quantifier!r}")
    w = np.asarray(w, dtype=float)
    flat = w.reshape(-1)
    if np.any(~np.isfinite(flat)) or np.any(flat < 0):
        raise DomainError("critical_epsilon needs finite weights w >= 0")
    if flat.size == 0:
        return w.copy()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals, _, _ = _numeric.extremum_on_log_grid(
        _eps_fn(phi1, phi2, uniq, mode), uniq.size,
        mode="sup" if quantifier == "exists" else "inf",
        lo=grid.lo, hi=grid.hi, per_octave=grid.per_octave,
        divergence_factor=grid.divergence_factor, refine_iters=grid.refine_iters)
    if np.any(np.isnan(vals)):
        bad = uniq[np.isnan(vals)][0]
        raise DomainError(f"Φ₂ overflows on the whole α grid for w = {bad:g}")
    out = vals[inv].reshape(w.shape)
    return float(out) if out.ndim == 0 else out


def _memo(fn):
    cache = {}

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        key = (x.shape, x.tobytes())
        if key not in cache:
            if len(cache) > 64:
                cache.clear()
            cache[key] = fn(x)
        return cache[key].copy()

    return wrapped


@dataclass(frozen=True, eq=False)
class CriticalEpsilonProfile:
    """``ε*_∃`` and ``ε*_∀`` as functions on the space (``0 <= ε*_∀ <= ε*_∃``)."""

    eps_exists: MeasurableFunction
    eps_forall: MeasurableFunction
    alpha_grid: AlphaGrid
    mode: str
    space: object
    weight: MeasurableFunction
    phi1: object = None
    phi2: object = None

    def get(self, quantifier):
        if quantifier == "exists":
            return self.eps_exists
        if quantifier == "forall":
            return self.eps_forall
        raise ValueError(f"unknown quantifier {quantifier!r}")


def _profile_function(phi1, phi2, w, mode, quantifier, grid):
    ce = lambda v: np.asarray(critical_epsilon(phi1, phi2, np.abs(v), mode, quantifier, grid),
                              dtype=float)
    on_interval = None
    if w.on_interval is not None:
        on_interval = _memo(lambda t: ce(w.on_interval(t)))
    tail_fn = None
    if w.tail_fn is not None:
        tail_fn = _memo(lambda j: ce(w.tail_fn(j)))
    limit = None
    if w.tail_limit is not None and math.isfinite(w.tail_limit):
        limit = float(ce(np.array([w.tail_limit]))[0])
    return MeasurableFunction(on_interval, ce(w.atom_values), tail_fn, limit, w.breakpoints)


def epsilon_profile(phi1, phi2, op, mu, grid=AlphaGrid()):
    """Critical-ε profile of an operator spec (anything with ``mode`` and ``weight(mu)``)."""
    w = op.weight(mu)
    w.check_on(mu)
    return CriticalEpsilonProfile(
        _profile_function(phi1, phi2, w, op.mode, "exists", grid),
        _profile_function(phi1, phi2, w, op.mode, "forall", grid),
        grid, op.mode, mu, w, phi1, phi2)


@dataclass(frozen=True)
class NEpsilonSet:
    explicit_atoms: list
    tail_verdict: str  # empty | finite | infinite | unknown
    nonatomic_measure: float


def _interval_values(f, mu):
    if mu.interval is None or f.on_interval is None:
        return np.zeros(0)
    return np.asarray(f.on_interval(mu.interval.grid()), dtype=float)


def n_epsilon_set(profile, eps, quantifier="exists"):
    """The set ``{x : ε*(x) > eps}`` split into explicit atoms, tail and interval.

    Comparisons use a relative slack of 1e-9 on explicit atoms; the tail
    verdict is ``unknown`` when its limsup is within ``±1e-6`` of ``eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    f = profile.get(quantifier)
    mu = profile.space
    above = f.atom_values > eps * (1 + 1e-9)
    atoms = [int(i) + 1 for i in np.nonzero(above)[0]]
    if not mu.has_tail:
        verdict = "empty"
    else:
        L = tail_limsup(f, mu).value
        if L < eps - EPS_BAND:
            verdict = "finite"
        elif L > eps + EPS_BAND:
            verdict = "infinite"
        else:
            verdict = "unknown"
    measure = 0.0
    vals = _interval_values(f, mu)
    if vals.size:
        measure = float(np.count_nonzero(vals > eps * (1 + 1e-9)) * mu.interval.cell_measure)
    return NEpsilonSet(atoms, verdict, measure)


@dataclass(frozen=True)
class EssentialNormBounds:
    beta_forall: float
    beta_exists: float
    notes: tuple = ()


def _beta(f, mu):
    vals = _interval_values(f, mu)
    ess = float(np.max(vals)) if vals.size else 0.0
    tail = tail_limsup(f, mu).value if mu.has_tail else 0.0
    return max(ess, tail, 0.0)


def _total_measure(mu):
    total = mu.nonatomic_measure() + float(np.sum(mu.weights))
    if mu.has_tail:
        res = integrate(MeasurableFunction.constant(mu, 1.0), mu, tail_mode="sampled")
        return res.value if res.converged else math.inf
    return total


def _atom_weight_note(mu):
    if not mu.has_tail:
        return "atom-weight hypothesis: finitely many atoms, not needed"
    wf = MeasurableFunction(None, np.zeros(mu.n_atoms), mu.tail.weights)
    if mu.interval is not None:
        wf = MeasurableFunction(lambda t: np.zeros(np.shape(t)), np.zeros(mu.n_atoms),
                                mu.tail.weights)
    L = tail_limsup(wf, mu).value
    if L == 0.0:
        return "atom-weight hypothesis: tail weights tend to 0 (probed, heuristic)"
    if math.isinf(L):
        return "atom-weight hypothesis: tail weights diverge, no convergent subsequence (probed, heuristic)"
    return ("atom-weight hypothesis: not met, tail weights accumulate at "
            f"{L:.6g} (probed, heuristic); the lower bound beta_forall <= ||T||_e is not certified")


def essential_norm_bounds(profile, mu=None):
    """``β = max(ess-sup over the interval grid, tail limsup, 0)`` for both readings."""
    mu = profile.space if mu is None else mu
    b_forall = _beta(profile.eps_forall, mu)
    b_exists = _beta(profile.eps_exists, mu)
    notes = ["upper bound ||T||_e <= beta_exists uses the exists-reading profile"]
    if profile.phi1 is not None:
        d2 = delta2_index(profile.phi1)
        if d2.satisfies_delta2:
            notes.append(f"Phi1 in Delta2: yes (sampled constant {d2.sup_ratio:.6g})")
        else:
            notes.append("Phi1 in Delta2: no (sampled ratio Phi(2x)/Phi(x) unbounded); "
                         "the lower bound beta_forall <= ||T||_e is not certified")
    total = _total_measure(mu)
    notes.append("finite measure: " + ("yes" if math.isfinite(total) else "no"))
    notes.append(_atom_weight_note(mu))
    if mu.has_tail:
        notes.append("the atoms C_n of the lower-bound hypothesis are read as the atoms of "
                     "N_{beta - eps}")
    return EssentialNormBounds(b_forall, b_exists, tuple(notes))


# --- boundedness ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundednessCertificate:
    """``Φ₂(w(x)·v) <= Φ₁(M·v) + g(x)`` (or ``w·Φ₂(v)`` for composition) with ``∫g = g_norm``.

    On an atom the inequality is only needed, and only checked, for
    ``v <= Φ₁⁻¹(1/a_j)/M``, the largest value a function of norm ``<= 1/M``
    can take there.  ``bound = M·M_prime`` bounds the operator norm.
    """

    status: str  # bounded_with_certificate | unbounded_with_witness | inconclusive
    M: Optional[float] = None
    g_norm: Optional[float] = None
    g: Optional[MeasurableFunction] = None
    M_prime: Optional[float] = None
    witness: Optional[dict] = None
    detail: str = ""

    @property
    def bound(self):
        if self.status != "bounded_with_certificate":
            return None
        return self.M * self.M_prime

    def to_dict(self):
        return {
            "status": self.status,
            "M": self.M,
            "g_norm": self.g_norm,
            "M_prime": self.M_prime,
            "bound": self.bound,
            "witness": self.witness,
            "detail": self.detail,
        }


def _g_values(phi1, phi2, w, vmax, M, mode, grid):
    """``g_M = sup_{0<v<=vmax} [lhs(v) − Φ₁(M·v)]₊`` elementwise in ``(w, vmax)``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    vmax = np.broadcast_to(np.asarray(vmax, dtype=float), w.shape).reshape(-1)
    if w.size == 0:
        return np.zeros(0)
    pairs, inv = np.unique(np.stack([np.abs(w), vmax], axis=1), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    out = np.zeros(pairs.shape[0])
    live = pairs[:, 0] > 0
    if live.any():
        ww = pairs[live, 0][:, None]
        vm = pairs[live, 1][:, None]

        def fn(v):
            v = np.minimum(v, vm)
            with np.errstate(all="ignore"):
                lhs = np.asarray(phi2(ww * v), dtype=float) if mode == "multiplication" \
                    else ww * np.asarray(phi2(v), dtype=float)
                rhs = np.asarray(phi1(M * v), dtype=float)
                d = lhs - rhs
                floor = G_NOISE * np.maximum(lhs, rhs)
            return np.where(d <= floor, 0.0, d)

        vals, _, _ = _numeric.extremum_on_log_grid(
            fn, int(live.sum()), mode="sup", lo=grid.lo, hi=grid.hi,
            per_octave=grid.per_octave, divergence_factor=grid.divergence_factor,
            refine_iters=grid.refine_iters)
        vals = np.where(np.isnan(vals), np.inf, np.maximum(vals, 0.0))
        # the positive part may live below the grid (e.g. Φ₁ flatter than Φ₂
        # at the origin puts the bump near v ~ M^-p); probe decades down to
        # V_FLOOR and search finely wherever the difference is positive
        probes = np.logspace(np.log10(grid.lo), np.log10(V_FLOOR), 2 * 192 + 1)[1:]
        with np.errstate(all="ignore"):
            pv = fn(np.broadcast_to(probes, (ww.shape[0], probes.size)))
        low = np.nonzero(np.any(pv > 0, axis=1))[0]
        if low.size:
            deepest = probes[np.max(np.where(pv[low] > 0, np.arange(probes.size), -1), axis=1)]
            bottom = max(float(np.min(deepest)) / 100.0, V_FLOOR)
            with np.errstate(all="ignore"):
                ext, _, _ = _numeric.extremum_on_log_grid(
                    fn, int(live.sum()), mode="sup", lo=bottom, hi=grid.lo,
                    per_octave=grid.per_octave, divergence_factor=np.inf,
                    refine_iters=grid.refine_iters)
            ext = np.nan_to_num(ext, nan=0.0, posinf=0.0)
            vals[low] = np.maximum(vals[low], ext[low])
        out[live] = vals
    return out[inv]


def _atom_vmax(phi1, weights, M):
    return np.asarray(phi1.inverse(1.0 / np.asarray(weights, dtype=float)), dtype=float) / M


def _g_function(phi1, phi2, w, mu, M, mode, grid):
    atoms = _g_values(phi1, phi2, w.atom_values, _atom_vmax(phi1, mu.weights, M), M, mode, grid)
    on_interval = None
    if mu.interval is not None:
        on_interval = _memo(lambda t: _g_values(phi1, phi2, w.on_interval(t), np.inf, M, mode,
                                                grid).reshape(np.shape(t)))
    tail_fn = None
    if mu.has_tail:
        tail_fn = lambda j: _g_values(phi1, phi2, w.tail_fn(j),
                                      _atom_vmax(phi1, mu.tail.weights(j), M),
                                      M, mode, grid).reshape(np.shape(j))
    return MeasurableFunction(on_interval, atoms, tail_fn, None, w.breakpoints)


def _g_integral(g, mu):
    """``∫ g dμ``: midpoint rule on the interval grid, exact atoms, sampled tail."""
    total = float(np.sum(g.atom_values * mu.weights)) if mu.n_atoms else 0.0
    diverging = None
    if mu.n_atoms and np.any(np.isinf(g.atom_values)):
        diverging = {"atom": int(np.argmax(np.isinf(g.atom_values))) + 1}
    if mu.interval is not None:
        t = mu.interval.grid()
        vals = g.on_interval(t)
        if np.any(np.isinf(vals)):
            diverging = diverging or {"point": float(t[np.argmax(np.isinf(vals))])}
            return math.inf, diverging
        total += float(np.sum(vals) * mu.interval.cell_measure)
    if diverging is not None:
        return math.inf, diverging
    if mu.has_tail:
        tail_only = MeasurableFunction(
            None if mu.interval is None else (lambda t: np.zeros(np.shape(t))),
            np.zeros(mu.n_atoms), g.tail_fn)
        # no absolute floor: a per-atom constant of 1e-19 still sums to infinity
        res = integrate(tail_only, mu, tail_mode="sampled")
        if not res.converged or not math.isfinite(res.value):
            return math.inf, None
        total += res.tail_part
    return total, None


def _indicator_ratio(phi1, phi2, w, a, mode):
    """``N_Φ₂(T χ_j) / N_Φ₁(χ_j)`` from the closed-form indicator norms."""
    w = np.asarray(w, dtype=float)
    a = np.asarray(a, dtype=float)
    num = np.asarray(phi1.inverse(1.0 / a), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if mode == "multiplication":
            den = np.asarray(phi2.inverse(1.0 / a), dtype=float)
            r = np.abs(w) * num / den
        else:
            r = np.zeros(w.shape)
            pos = w > 0
            if pos.any():
                r[pos] = num[pos] / np.asarray(phi2.inverse(1.0 / (w[pos] * a[pos])), dtype=float)
    return r


def _tail_witness(phi1, phi2, w, mu, mode):
    if not mu.has_tail:
        return None
    ratio = MeasurableFunction(
        None if mu.interval is None else (lambda t: np.zeros(np.shape(t))),
        np.zeros(mu.n_atoms),
        lambda j: _indicator_ratio(phi1, phi2, w.tail_fn(j), mu.tail.weights(j), mode))
    if not tail_limsup(ratio, mu).infinite:
        return None
    j = mu.tail_probes()
    r = ratio.tail_fn(j.astype(float))
    k = int(np.argmax(r))
    return {"atom": int(j[k]),
            "v": float(phi1.inverse(float(mu.tail.weights(np.array([j[k]]))[0]) ** -1)),
            "ratio": float(r[k])}


def boundedness_certificate(phi1, phi2, op, mu, grid=AlphaGrid(), ladder=M_LADDER):
    """Search ``M`` over ``2^k`` (``k = −20..40``) for a summable ``g_M``.

    Among convergent candidates the one minimizing ``M·(1 + ‖g_M‖₁)`` is kept.
    An indicator ratio ``N_Φ₂(Tχ_j)/N_Φ₁(χ_j)`` that diverges along the tail
    is checked first and is a witness of unboundedness, as is ``g_M = ∞`` on
    the interval for every ``M``.
    """
    mode = op.mode
    w = op.weight(mu)
    w.check_on(mu)
    # every ladder step probes the same points; preimage weights are costly
    w = MeasurableFunction(None if w.on_interval is None else _memo(w.on_interval),
                           w.atom_values, None if w.tail_fn is None else _memo(w.tail_fn),
                           w.tail_limit, w.breakpoints)
    # ‖T‖ >= N(Tχ_j)/N(χ_j) for every j, so a divergent ratio rules out any
    # certificate, including ones that only look valid up to the probe cap
    witness = _tail_witness(phi1, phi2, w, mu, mode)
    if witness is not None:
        return BoundednessCertificate(
            "unbounded_with_witness", witness=witness,
            detail="indicator ratio N(T chi_j)/N(chi_j) diverges along the tail")
    best = None
    diverged_everywhere = True
    first_divergence = None
    for M in ladder:
        M = float(M)
        if best is not None and M >= best[0]:
            break  # M·(1 + ‖g‖) >= M can no longer beat the best score
        g = _g_function(phi1, phi2, w, mu, M, mode, grid)
        norm, diverging = _g_integral(g, mu)
        if diverging is None:
            diverged_everywhere = False
        elif first_divergence is None:
            first_divergence = dict(diverging, M=M)
        if math.isfinite(norm):
            score = M * (1.0 + norm)
            if best is None or score < best[0]:
                best = (score, M, norm, g)
    label = "Thm 2.1" if mode == "composition" else "Thm 2.4"
    if best is not None:
        _, M, norm, g = best
        return BoundednessCertificate("bounded_with_certificate", M, norm, g, 1.0 + norm,
                                      detail=f"pointwise domination with summable g ({label})")
    if diverged_everywhere and first_divergence is not None and "point" in first_divergence:
        label = "Thm 2.1" if mode == "composition" else "Cor 2.5"
        return BoundednessCertificate(
            "unbounded_with_witness", witness=first_divergence,
            detail=f"g_M is infinite on the nonatomic part for every M ({label})")
    return BoundednessCertificate("inconclusive",
                                  detail="no M in the ladder gives a summable g_M")


# --- compactness ------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    verdict: str  # compact | noncompact | unknown
    reasons: tuple
    rule: str


def _nonatomic_support(w, mu):
    vals = _interval_values(w, mu)
    if vals.size == 0:
        return 0.0
    return float(np.count_nonzero(np.abs(vals) > 0) * mu.interval.cell_measure)


def compactness_verdict(profile, certificate=None, bounds=None):
    """Decision ladder: unbounded, nonatomic part, ``β_∃ = 0``, ``β_∀ > 0``, else unknown."""
    mu = profile.space
    bounds = essential_norm_bounds(profile) if bounds is None else bounds
    comp = profile.mode == "composition"
    if certificate is not None and certificate.status == "unbounded_with_witness":
        return Verdict("noncompact", (
            "unbounded: " + certificate.detail + ", so T is not compact",),
            "unbounded")
    support = _nonatomic_support(profile.weight, mu)
    if support > 0:
        label = "Cor 3.2" if comp else "Cor 3.4"
        return Verdict("noncompact", (
            f"nonatomic Corollary ({label}): the weight is nonzero on a part of the "
            f"nonatomic interval of measure {support:.6g}",), "nonatomic")
    if bounds.beta_exists == 0.0:
        which = "Thm 3.1" if comp else "Thm 3.3"
        if not mu.has_tail and mu.interval is None:
            why = "finite atomic: every N_eps consists of finitely many atoms"
        else:
            why = f"beta_exists = 0: every N_eps (exists-reading) consists of finitely many atoms ({which})"
        return Verdict("compact", (why + ", so beta = 0 (Cor 4.4)",), "beta_exists_zero")
    if bounds.beta_forall > 0.0:
        which = "Thm 3.1" if comp else "Thm 3.3"
        return Verdict("noncompact", (
            f"beta_forall = {bounds.beta_forall:.6g} > 0: N_eps (forall-reading) has "
            f"infinitely many atoms for eps < beta_forall ({which}, necessity)",), "beta_forall_positive")
    return Verdict("unknown", (
        f"criteria inconclusive: beta_forall = {bounds.beta_forall:.6g}, "
        f"beta_exists = {bounds.beta_exists:.6g}; run the oracle",), "inconclusive")


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    bounded: BoundednessCertificate
    verdict: Verdict
    bounds: EssentialNormBounds
    profile: CriticalEpsilonProfile = field(repr=False)

    @property
    def compact_sufficient(self):
        return self.bounds.beta_exists == 0.0

    @property
    def compact_necessary(self):
        return self.bounds.beta_forall == 0.0

    @property
    def beta_exists(self):
        return self.bounds.beta_exists

    @property
    def beta_forall(self):
        return self.bounds.beta_forall

    def to_dict(self):
        return {
            "bounded": self.bounded.to_dict(),
            "compact": self.verdict.verdict,
            "compact_sufficient": self.compact_sufficient,
            "compact_necessary": self.compact_necessary,
            "beta": {"forall": self.beta_forall, "exists": self.beta_exists},
            "notes": list(self.bounds.notes),
            "rules": {"compact": self.verdict.rule, "reasons": list(self.verdict.reasons)},
        }


def analyze(phi1, phi2, op, mu, grid=AlphaGrid()):
    """Profile, certificate, β bounds and verdict in one pass."""
    profile = epsilon_profile(phi1, phi2, op, mu, grid)
    cert = boundedness_certificate(phi1, phi2, op, mu, grid)
    bounds = essential_norm_bounds(profile, mu)
    return AnalysisReport(cert, compactness_verdict(profile, cert, bounds), bounds, profile)
