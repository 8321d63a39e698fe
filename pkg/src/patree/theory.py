"""Limit objects of the tree process: regime, Malthusian parameter, limit
edge measures, degree laws and the companion jump process."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CapError, DomainError, PreconditionError
from .fitness import g_tilde, g_tilde_star, sup_g_tilde, sup_increment
from .weightlaw import Interval, IntervalUnion, closed

BOUNDARY_TOL = 1e-6
NON_CONDENSATION = "non_condensation"
CONDENSATION = "condensation"
BOUNDARY = "boundary"


def _json_num(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class TheoryReport:
    regime: str
    criterion_value: float
    g_tilde_star: float
    lambda_star: float | None = None
    condensate_mass: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        for k in ("criterion_value", "g_tilde_star", "lambda_star", "condensate_mass"):
            d[k] = _json_num(d[k])
        d["diagnostics"] = {k: _json_num(v) if isinstance(v, float) else v
                            for k, v in self.diagnostics.items()}
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


@dataclass
class CompanionPath:
    w0: float
    values: np.ndarray


def full_support(law):
    return IntervalUnion.of(closed(0.0, law.w_star))


def _ratio(hv, den):
    if hv == 0:
        return 0.0
    if den <= 0:
        return math.inf
    return hv / den


def criterion(model, law, tol=1e-12):
    """E[h(W) / (g~* - g~(W))], +inf when the integral diverges."""
    gs = g_tilde_star(model, law)
    scale = max(1.0, abs(gs))

    def f(w):
        den = gs - g_tilde(model, law, w)
        if den <= 1e-14 * scale:
            den = 0.0
        return _ratio(float(model.h(w)), den)

    return law.expect(f, tol), gs


def classify_regime(model, law, boundary_tol=BOUNDARY_TOL):
    value, gs = criterion(model, law)
    if value < 1.0 - boundary_tol:
        regime = CONDENSATION
    elif value > 1.0 + boundary_tol:
        regime = NON_CONDENSATION
    else:
        regime = BOUNDARY
    return TheoryReport(regime=regime, criterion_value=value, g_tilde_star=gs)


def _psi_integrand(model, law, lam):
    def f(w):
        return _ratio(float(model.h(w)), lam - g_tilde(model, law, w))
    return f


def psi_mass(model, law, A=None, lam=None, tol=1e-12):
    """E[h(W) / (lam - g~(W)); W in A]."""
    if A is None:
        A = full_support(law)
    if isinstance(A, Interval):
        A = IntervalUnion.of(A)
    top = _sup_g_tilde_on(model, law, A)
    if lam < top - 1e-12 * max(1.0, top):
        raise PreconditionError(f"lambda = {lam} lies below sup g~ = {top} on the set")
    return law.expect(_psi_integrand(model, law, lam), tol, region=A)


def _sup_g_tilde_on(model, law, A):
    if law.is_atomic:
        vals = law.values[(law.probs > 0) & A.contains(law.values)]
        return float(np.max(g_tilde(model, law, vals))) if vals.size else 0.0
    pts = []
    for iv in A:
        pts += [iv.lo, iv.hi]
    lo, hi = law.support_bounds()
    pts = np.clip(np.array(pts), lo, hi)
    return float(np.max(g_tilde(model, law, pts)))


def malthusian(model, law, tol=1e-10, report=None, max_iter=200):
    """The root lambda* > g~* of E[h/(lambda - g~)] = 1, by bisection.

    Returns (lambda_star, diagnostics).
    """
    report = report or classify_regime(model, law)
    if report.regime != NON_CONDENSATION:
        raise PreconditionError(f"Malthusian parameter needs the non-condensation regime, got {report.regime}")
    gs = report.g_tilde_star
    lo = gs + 1e-9 * (1.0 + gs)
    hi = gs + model.h_max

    def resid(lam):
        return law.expect(_psi_integrand(model, law, lam), tol * 1e-2) - 1.0

    r_hi = resid(hi)
    if r_hi > tol:
        raise PreconditionError(f"integral exceeds 1 at the upper bracket (residual {r_hi:g})")
    if abs(r_hi) <= tol:
        return hi, {"iterations": 0, "residual": r_hi, "bracket": [lo, hi]}
    it = 0
    mid, r_mid = hi, r_hi
    while it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        r_mid = resid(mid)
        if abs(r_mid) <= tol:
            break
        if r_mid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return mid, {"iterations": it, "residual": r_mid, "bracket": [lo, hi]}


def theory_report(model, law, boundary_tol=BOUNDARY_TOL, tol=1e-10):
    rep = classify_regime(model, law, boundary_tol)
    if rep.regime == NON_CONDENSATION:
        lam, diag = malthusian(model, law, tol, rep)
        rep.lambda_star = lam
        rep.condensate_mass = 0.0
        rep.diagnostics.update(solver_iterations=diag["iterations"], solver_residual=diag["residual"])
        rep.diagnostics["limit_z_over_n"] = lam
    elif rep.regime == CONDENSATION:
        rep.condensate_mass = 1.0 - rep.criterion_value
        rep.diagnostics["limit_z_over_n"] = rep.g_tilde_star
    rep.diagnostics["h_max"] = model.h_max
    rep.diagnostics["g_max"] = model.g_max
    rep.diagnostics["boundary_tol"] = boundary_tol
    return rep


def limit_lambda(model, law, report=None):
    """lambda* in the non-condensation regime, g~* under condensation."""
    report = report or classify_regime(model, law)
    if report.regime == NON_CONDENSATION:
        return malthusian(model, law, report=report)[0]
    if report.regime == CONDENSATION:
        return report.g_tilde_star
    raise PreconditionError("no limit prediction at the regime boundary")


def predicted_edge2(model, law, A, B, lam=None):
    if lam is None:
        lam = limit_lambda(model, law)
    if isinstance(B, Interval):
        B = IntervalUnion.of(B)
    return psi_mass(model, law, A, lam) * law.measure(B)


def condensate_mass(model, law, report=None):
    report = report or classify_regime(model, law)
    if report.regime != CONDENSATION:
        raise PreconditionError(f"condensate mass needs the condensation regime, got {report.regime}")
    return 1.0 - psi_mass(model, law, None, report.g_tilde_star)


# companion process and degree laws ---------------------------------------------

def companion_sample(model, law, w, k, rng):
    if k < 0:
        raise DomainError("k must be nonnegative")
    ys = law.sample(rng, k)
    inc = np.asarray(model.g(np.full(k, w), ys), dtype=float) if k else np.zeros(0)
    vals = float(model.h(w)) + np.concatenate([[0.0], np.cumsum(inc)])
    return CompanionPath(float(w), vals)


def _deterministic_increment(model, law, w):
    """The constant increment g(w, .) when it does not depend on the child weight."""
    if model.table is not None:
        row = model.table[model._index(w)][law.probs > 0]
        return float(row[0]) if np.all(row == row[0]) else None
    a = float(model.a(w))
    if (a == 0 or model.b.is_constant) and model.e.is_constant:
        return float(a * float(model.b(0.0)) + float(model.c(w)) + float(model.e(0.0)))
    return None


def _path_products(model, law, w0, lam, kmax, rng, chunk=2000):
    """Per-sample running products P_k = prod_{i<k} S_i/(S_i+lam) for k=1..kmax.

    Returns an array of shape (n, kmax).
    """
    n = w0.size
    out = np.empty((n, kmax))
    for s in range(0, n, chunk):
        ws = w0[s:s + chunk]
        m = ws.size
        S = np.asarray(model.h(ws), dtype=float).reshape(m).copy()
        if kmax > 1:
            ys = law.sample(rng, (kmax - 1) * m).reshape(kmax - 1, m)
            inc = np.asarray(model.g(np.broadcast_to(ws, ys.shape), ys), dtype=float)
            S = np.vstack([S[None, :], S[None, :] + np.cumsum(inc, axis=0)])
        else:
            S = S[None, :]
        out[s:s + m] = np.cumprod(S / (S + lam), axis=0).T
    return out


def degree_limit_mc(model, law, k, B=None, lam=None, n_samples=100_000, rng=None):
    """Monte-Carlo estimate of E[prod_{i<k} S_i(W0)/(S_i(W0)+lam); W0 in B]."""
    if not lam > 0 or k < 0:
        raise DomainError("need lam > 0 and k >= 0")
    rng = rng if rng is not None else np.random.default_rng()
    w0 = law.sample(rng, n_samples)
    inside = np.ones(n_samples, dtype=bool) if B is None else B.contains(w0)
    if k == 0:
        vals = inside.astype(float)
    else:
        vals = np.zeros(n_samples)
        idx = np.flatnonzero(inside)
        if idx.size:
            vals[idx] = _path_products(model, law, w0[idx], lam, k, rng)[:, k - 1]
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
    return est, se


def degree_limit_exact_series(model, law, kmax, B=None, lam=None, state_cap=200_000):
    """Exact values of the degree functional for k = 0..kmax on an atomic law.

    A state is the multiset of increments received so far (a count per distinct
    increment value), so equal fitness sums reached in different orders merge
    exactly.
    """
    if not law.is_atomic:
        raise DomainError("the exact degree functional needs an atomic law")
    live = np.flatnonzero(law.probs > 0)
    vals = law.values[live]
    probs = law.probs[live]
    out = np.zeros(kmax + 1)
    for w0, p0 in zip(vals, probs):
        if B is not None and not bool(B.contains(w0)):
            continue
        incs = np.asarray(model.g(np.full(vals.size, w0), vals), dtype=float)
        uniq, inv = np.unique(incs, return_inverse=True)
        step_p = np.zeros(uniq.size)
        np.add.at(step_p, inv, probs)
        h0 = float(model.h(w0))
        states = {tuple([0] * uniq.size): 1.0}
        out[0] += p0
        for k in range(1, kmax + 1):
            new = {}
            for counts, mass in states.items():
                S = h0 + float(np.dot(counts, uniq))
                m = mass * S / (S + lam)
                if m == 0.0:
                    continue
                for j in range(uniq.size):
                    key = counts[:j] + (counts[j] + 1,) + counts[j + 1:]
                    new[key] = new.get(key, 0.0) + m * step_p[j]
            if len(new) > state_cap:
                raise CapError(f"degree DP exceeded {state_cap} states at k = {k}")
            # P_k only needs the factors i < k, so the mass before the
            # increment split is what gets recorded
            out[k] += p0 * sum(new.values())
            states = new
    return out


def degree_limit_exact(model, law, k, B=None, lam=None, state_cap=200_000):
    return float(degree_limit_exact_series(model, law, k, B, lam, state_cap)[k])


# companion path identity ----------------------------------------------------------

def worst_path_tail(a, b, lam, K):
    """sum_{k>K} prod_{i<k} (a+ib)/(a+ib+lam): the tail along the fastest path.

    The path S_i = a + i b dominates every companion path when a = h(w) and b is
    the largest single increment, so this bounds the tail of the series.
    """
    if a == 0:
        return 0.0
    if lam <= b:
        return math.inf
    return math.exp(_log_worst_product(a, b, lam, K)) * (a + K * b) / (lam - b)


def _log_worst_product(a, b, lam, k):
    """log prod_{i<k} (a+ib)/(a+ib+lam)."""
    if k == 0:
        return 0.0
    if b == 0:
        return k * math.log(a / (a + lam))
    x, y = a / b, (a + lam) / b
    return math.lgamma(x + k) - math.lgamma(x) + math.lgamma(y) - math.lgamma(y + k)


def tail_cutoff(a, b, lam, target, k_cap=10**7):
    """Smallest K with worst_path_tail(a, b, lam, K) < target."""
    if worst_path_tail(a, b, lam, 0) < target:
        return 0
    if math.isinf(worst_path_tail(a, b, lam, 0)):
        raise PreconditionError("tail bound is infinite: lambda does not exceed the largest increment")
    hi = 1
    while worst_path_tail(a, b, lam, hi) >= target:
        hi *= 2
        if hi > k_cap:
            raise CapError(f"tail bound needs K > {k_cap}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if worst_path_tail(a, b, lam, mid) < target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class CompanionPathResult:
    lhs_partial: float
    tail_bound: float
    rhs: float
    gap: float
    std_error: float
    K: int
    exact_path: bool

    @property
    def consistent(self):
        return self.gap <= self.tail_bound + 3 * self.std_error + 1e-12


def companion_path_check(model, law, w, lam, K=None, n_samples=100_000, rng=None, tail_target=1e-3):
    """Compare sum_{k=1}^K E[prod_{i<k} S_i(w)/(S_i(w)+lam)] with h(w)/(lam - g~(w))."""
    top = sup_g_tilde(model, law)
    if lam < top - 1e-12 * max(1.0, top):
        raise PreconditionError(f"lambda = {lam} is below sup g~ = {top}")
    a = float(model.h(w))
    b = sup_increment(model, law, w)
    if K is None:
        K = tail_cutoff(a, b, lam, tail_target)
    tail = worst_path_tail(a, b, lam, K)
    gt = g_tilde(model, law, w)
    rhs = _ratio(a, lam - gt)
    step = _deterministic_increment(model, law, w)
    if step is not None:
        S = a + step * np.arange(K)
        lhs = float(np.cumprod(S / (S + lam)).sum()) if K else 0.0
        se = 0.0
    else:
        rng = rng if rng is not None else np.random.default_rng()
        sums = np.zeros(n_samples)
        chunk = max(1, min(n_samples, 4_000_000 // max(K, 1)))
        for s in range(0, n_samples, chunk):
            m = min(chunk, n_samples - s)
            sums[s:s + m] = _path_products(model, law, np.full(m, float(w)), lam, K, rng).sum(axis=1)
        lhs = float(sums.mean())
        se = float(sums.std(ddof=1) / math.sqrt(n_samples))
    return CompanionPathResult(lhs, tail, rhs, abs(lhs - rhs), se, int(K), step is not None)


# exponents ------------------------------------------------------------------------

def power_law_exponent(model, law, w, lam):
    gt = g_tilde(model, law, w)
    if gt == 0:
        return math.inf
    return 1.0 + lam / gt


def growth_exponent(model, law, w, report=None):
    report = report or classify_regime(model, law)
    gt = g_tilde(model, law, w)
    if report.regime == NON_CONDENSATION:
        lam = report.lambda_star or malthusian(model, law, report=report)[0]
        return gt / lam
    if report.regime == CONDENSATION:
        return gt / report.g_tilde_star
    raise PreconditionError("growth exponent is not predicted at the regime boundary")


# continuous-time companion process --------------------------------------------------

@dataclass
class OracleResult:
    mean: float
    std_error: float
    predicted: float
    horizon: str


def ct_predicted(model, law, w, t=None, rate=None):
    a = float(model.h(w))
    gt = g_tilde(model, law, w)
    if rate is not None:
        return _ratio(a, rate - gt)
    if gt == 0:
        return a * t
    return a / gt * math.expm1(gt * t)


def ct_oracle(model, law, w, t=None, rate=None, n_reps=100_000, rng=None, rel_trunc=1e-3):
    """Simulate the counting process Y_w whose jump rate after i jumps is S_i(w).

    With a fixed horizon t this reports the mean of Y_w(t).  With an independent
    Exp(rate) horizon it reports E[Y_w(Lambda)] through the conditional estimator
    sum_n exp(-rate * tau_n), where tau_n are the jump times; this integrates the
    horizon out exactly and keeps the variance finite even when Y_w(Lambda) has
    a heavy tail.  The series is cut once the conditional remainder, which lies
    in exp(-rate tau) [S/rate, S/(rate - b)], is narrower than rel_trunc times the
    prediction; the midpoint of that bracket is added.
    """
    if (t is None) == (rate is None):
        raise DomainError("give exactly one of t or rate")
    rng = rng if rng is not None else np.random.default_rng()
    a = float(model.h(w))
    b = sup_increment(model, law, w)
    if rate is not None:
        top = sup_g_tilde(model, law)
        if rate <= top:
            raise PreconditionError(f"rate {rate} must exceed sup g~ = {top}")
        predicted = ct_predicted(model, law, w, rate=rate)
    else:
        if not t > 0:
            raise DomainError("t must be positive")
        predicted = ct_predicted(model, law, w, t=t)

    S = np.full(n_reps, a)
    tau = np.zeros(n_reps)
    acc = np.zeros(n_reps)
    alive = np.flatnonzero(S > 0)
    bounded = rate is not None and rate > b
    thresh = rel_trunc * max(predicted, 1e-300)
    guard = 0
    while alive.size:
        guard += 1
        if guard > 10**7:
            raise CapError("jump process did not terminate")
        Sa = S[alive]
        if rate is not None and bounded:
            disc = np.exp(-rate * tau[alive])
            lo_rem = disc * Sa / rate
            hi_rem = disc * Sa / (rate - b)
            done = (hi_rem - lo_rem) < thresh
            if np.any(done):
                idx = alive[done]
                acc[idx] += 0.5 * (lo_rem[done] + hi_rem[done])
                alive = alive[~done]
                Sa = Sa[~done]
                if not alive.size:
                    break
        step = rng.exponential(1.0, alive.size) / Sa
        tau[alive] += step
        if rate is None:
            ok = tau[alive] <= t
            alive = alive[ok]
            if not alive.size:
                break
            acc[alive] += 1.0
        elif bounded:
            acc[alive] += np.exp(-rate * tau[alive])
        else:
            raise PreconditionError("exponential horizon needs rate above the largest increment")
        ys = law.sample(rng, alive.size)
        S[alive] += np.asarray(model.g(np.full(alive.size, w), ys), dtype=float)
        alive = alive[S[alive] > 0]
    mean = float(acc.mean())
    se = float(acc.std(ddof=1) / math.sqrt(n_reps)) if n_reps > 1 else math.inf
    return OracleResult(mean, se, predicted, "fixed" if rate is None else "exponential")
