"""Weight distributions on a bounded interval [0, w_star].

Four families are supported: finite atoms, uniform, the polynomial beta law
with density (alpha + 1)(1 - w)^alpha on [0, 1], and piecewise-constant
densities.  Laws are immutable; sampling takes an external numpy Generator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError

EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.hi < self.lo:
            raise DomainError(f"empty interval bounds ({self.lo}, {self.hi})")

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        left = x >= self.lo if self.lo_closed else x > self.lo
        right = x <= self.hi if self.hi_closed else x < self.hi
        return left & right

    @property
    def empty(self):
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def __str__(self):
        return "%s%g, %g%s" % ("[" if self.lo_closed else "(", self.lo, self.hi,
                               "]" if self.hi_closed else ")")


def closed(lo, hi):
    return Interval(float(lo), float(hi), True, True)


def left_open(lo, hi):
    """The interval (lo, hi]."""
    return Interval(float(lo), float(hi), False, True)


def point(x):
    return Interval(float(x), float(x), True, True)


class IntervalUnion:
    """A finite union of intervals, stored sorted by left endpoint.

    The members are assumed pairwise disjoint; `disjoint_check` verifies it.
    """

    def __init__(self, intervals=()):
        parts = [iv for iv in intervals if not iv.empty]
        self.intervals = tuple(sorted(parts, key=lambda iv: (iv.lo, not iv.lo_closed)))

    @classmethod
    def of(cls, *intervals):
        return cls(intervals)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for iv in self.intervals:
            out |= iv.contains(x)
        return out

    def disjoint_check(self):
        for a, b in zip(self.intervals, self.intervals[1:]):
            if a.hi > b.lo or (a.hi == b.lo and a.hi_closed and b.lo_closed):
                return False
        return True

    def union(self, other):
        return IntervalUnion(self.intervals + other.intervals)

    def subset_of(self, other, probes=None):
        """Containment test on the interval endpoints and interior probes."""
        pts = []
        for iv in self.intervals:
            pts.extend([iv.lo, iv.hi, 0.5 * (iv.lo + iv.hi)])
            if probes:
                pts.extend(np.linspace(iv.lo, iv.hi, probes)[1:-1])
        pts = np.array(pts)
        inside = self.contains(pts)
        return bool(np.all(other.contains(pts[inside])))

    @property
    def bounds(self):
        if not self.intervals:
            return None
        return self.intervals[0].lo, max(iv.hi for iv in self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __repr__(self):
        if not self.intervals:
            return "IntervalUnion(empty)"
        return "IntervalUnion(" + " u ".join(str(iv) for iv in self.intervals) + ")"


class DyadicPartition:
    """2^m equal cells of [0, x]: the first closed, the rest open on the left."""

    def __init__(self, m, x):
        if m < 0 or int(m) != m:
            raise DomainError("level m must be a nonnegative integer")
        if not x > 0:
            raise DomainError("range x must be positive")
        self.m = int(m)
        self.x = float(x)
        self.size = 2 ** self.m
        self.width = self.x / self.size

    def cell(self, i):
        """Cell with 1-based index i."""
        if not 1 <= i <= self.size:
            raise DomainError(f"cell index {i} outside 1..{self.size}")
        lo = (i - 1) * self.width
        hi = self.x if i == self.size else i * self.width
        return Interval(lo, hi, i == 1, True)

    @property
    def cells(self):
        return [self.cell(i) for i in range(1, self.size + 1)]

    def locate(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < 0) or np.any(v > self.x):
            raise DomainError(f"value outside [0, {self.x}]")
        idx = np.ceil(v * self.size / self.x).astype(np.int64)
        idx = np.clip(idx, 1, self.size)
        return int(idx) if idx.ndim == 0 else idx

    def refines(self, coarser):
        """True when every cell here sits inside exactly one cell of `coarser`."""
        if not math.isclose(self.x, coarser.x) or self.m < coarser.m:
            return False
        ratio = self.size // coarser.size
        for i in range(1, self.size + 1):
            c = self.cell(i)
            hits = [j for j in range(1, coarser.size + 1)
                    if _interval_within(c, coarser.cell(j))]
            if len(hits) != 1 or hits[0] != (i - 1) // ratio + 1:
                return False
        return True


def _interval_within(a, b):
    left = a.lo > b.lo or (a.lo == b.lo and (b.lo_closed or not a.lo_closed))
    right = a.hi < b.hi or (a.hi == b.hi and (b.hi_closed or not a.hi_closed))
    return left and right


def dyadic_cells(m, x):
    return DyadicPartition(m, x)


class WeightLaw:
    """A probability law supported in [0, w_star]."""

    KINDS = ("atoms", "uniform", "beta_poly", "piecewise_density")

    def __init__(self, kind, w_star, *, values=None, probs=None, alpha=None,
                 breakpoints=None, densities=None):
        if kind not in self.KINDS:
            raise DomainError(f"unknown law kind {kind!r}")
        if not w_star > 0:
            raise DomainError("w_star must be positive")
        self.kind = kind
        self.w_star = float(w_star)
        self.alpha = None
        self.values = self.probs = None
        self.breakpoints = self.densities = None

        if kind == "atoms":
            values = np.asarray(values, dtype=float)
            probs = np.asarray(probs, dtype=float)
            if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
                raise DomainError("atoms need matching nonempty value/prob lists")
            if np.any(probs < 0):
                raise DomainError("atom probabilities must be nonnegative")
            if np.unique(values).size != values.size:
                raise DomainError("atom values must be distinct")
            if np.any(values < 0) or np.any(values > self.w_star):
                raise DomainError("atom values must lie in [0, w_star]")
            total = probs.sum()
            if abs(total - 1.0) > 1e-9:
                raise DomainError(f"atom probabilities sum to {total}, not 1")
            if abs(total - 1.0) > 0:
                probs = probs / total
            order = np.argsort(values)
            self.values = values[order]
            self.probs = probs[order]
            self._cum = np.cumsum(self.probs)
        elif kind == "uniform":
            pass
        elif kind == "beta_poly":
            if alpha is None or not alpha > -1:
                raise DomainError("beta_poly needs alpha > -1")
            if self.w_star != 1.0:
                raise DomainError("beta_poly is defined on [0, 1]")
            self.alpha = float(alpha)
        else:
            bp = np.asarray(breakpoints, dtype=float)
            dens = np.asarray(densities, dtype=float)
            if bp.ndim != 1 or bp.size < 2 or dens.size != bp.size - 1:
                raise DomainError("piecewise density needs k+1 breakpoints and k densities")
            if np.any(np.diff(bp) <= 0) or bp[0] < 0 or bp[-1] > self.w_star:
                raise DomainError("breakpoints must increase inside [0, w_star]")
            if np.any(dens < 0):
                raise DomainError("densities must be nonnegative")
            self.breakpoints = bp
            self.densities = dens
            self._piece_mass = dens * np.diff(bp)
            self._piece_cum = np.concatenate([[0.0], np.cumsum(self._piece_mass)])

        if kind != "atoms":
            self._check_normalized()

    # constructors -----------------------------------------------------------
    @classmethod
    def atoms(cls, values, probs, w_star=None):
        values = list(values)
        if w_star is None:
            w_star = max(max(values), 1.0)
        return cls("atoms", w_star, values=values, probs=probs)

    @classmethod
    def uniform(cls, w_star=1.0):
        return cls("uniform", w_star)

    @classmethod
    def beta_poly(cls, alpha):
        return cls("beta_poly", 1.0, alpha=alpha)

    @classmethod
    def piecewise(cls, breakpoints, densities, w_star=None):
        if w_star is None:
            w_star = breakpoints[-1]
        return cls("piecewise_density", w_star, breakpoints=breakpoints, densities=densities)

    def describe(self):
        d = {"kind": self.kind, "w_star": self.w_star}
        if self.kind == "atoms":
            d.update(values=self.values.tolist(), probs=self.probs.tolist())
        elif self.kind == "beta_poly":
            d["alpha"] = self.alpha
        elif self.kind == "piecewise_density":
            d.update(breakpoints=self.breakpoints.tolist(), densities=self.densities.tolist())
        return d

    def __repr__(self):
        return f"WeightLaw({self.describe()})"

    @property
    def is_atomic(self):
        return self.kind == "atoms"

    # structure --------------------------------------------------------------
    def pieces(self):
        """Intervals on which the density is smooth and positive."""
        if self.kind == "atoms":
            return []
        if self.kind == "uniform":
            return [(0.0, self.w_star)]
        if self.kind == "beta_poly":
            return [(0.0, 1.0)]
        return [(a, b) for a, b, d in zip(self.breakpoints[:-1], self.breakpoints[1:],
                                          self.densities) if d > 0]

    def support_points(self):
        """Endpoints of the closed support (atoms: the atoms with mass)."""
        if self.kind == "atoms":
            return self.values[self.probs > 0]
        pts = sorted({p for piece in self.pieces() for p in piece})
        return np.array(pts)

    def support_bounds(self):
        pts = self.support_points()
        return float(pts.min()), float(pts.max())

    def density(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "atoms":
            raise DomainError("atomic law has no density")
        inside = (w >= 0) & (w <= self.w_star)
        if self.kind == "uniform":
            return np.where(inside, 1.0 / self.w_star, 0.0)
        if self.kind == "beta_poly":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = (self.alpha + 1.0) * np.power(np.clip(1.0 - w, 0.0, None), self.alpha)
            return np.where(inside, val, 0.0)
        idx = np.searchsorted(self.breakpoints, w, side="right") - 1
        ok = (idx >= 0) & (idx < self.densities.size)
        val = np.where(ok, self.densities[np.clip(idx, 0, self.densities.size - 1)], 0.0)
        # right endpoint of the last piece belongs to it
        val = np.where(w == self.breakpoints[-1], self.densities[-1], val)
        return val

    def cdf(self, t):
        """P(W <= t)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "atoms":
            idx = np.searchsorted(self.values, t, side="right")
            out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        elif self.kind == "uniform":
            out = np.clip(t / self.w_star, 0.0, 1.0)
        elif self.kind == "beta_poly":
            s = np.clip(1.0 - t, 0.0, 1.0)
            out = 1.0 - np.power(s, self.alpha + 1.0)
        else:
            bp = self.breakpoints
            idx = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, self.densities.size - 1)
            partial = self._piece_cum[idx] + self.densities[idx] * (np.clip(t, bp[0], bp[-1]) - bp[idx])
            out = np.clip(np.where(t < bp[0], 0.0, partial), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def _cdf_left(self, t):
        """P(W < t); differs from cdf only at atoms."""
        if self.kind != "atoms":
            return self.cdf(t)
        idx = np.searchsorted(self.values, t, side="left")
        return float(self._cum[idx - 1]) if idx > 0 else 0.0

    def _check_normalized(self):
        total = 0.0
        for a, b in self.pieces():
            if self.kind == "beta_poly":
                # reflected coordinate keeps the (1-w)^alpha singularity at the origin
                val, _ = integrate.quad(lambda s: (self.alpha + 1.0) * s ** self.alpha, 0.0, 1.0,
                                        epsabs=1e-13, epsrel=1e-12, limit=200)
            else:
                mid = 0.5 * (a + b)
                val = float(self.density(mid)) * (b - a)
            total += val
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"density integrates to {total}, not 1")

    # operations ---------------------------------------------------------------
    def sample(self, rng, size=None):
        """Draw i.i.d. weights.  Returns a float when size is None."""
        u = rng.random(size)
        w = self.quantile(u)
        return float(w) if size is None else w

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "atoms":
            idx = np.searchsorted(self._cum, u, side="right")
            idx = np.minimum(idx, self.values.size - 1)
            # never return a zero-probability atom
            bad = self.probs[idx] <= 0
            if np.any(bad):
                pos = np.flatnonzero(self.probs > 0)
                idx = np.where(bad, pos[np.searchsorted(pos, idx).clip(0, pos.size - 1)], idx)
            return self.values[idx]
        if self.kind == "uniform":
            return u * self.w_star
        if self.kind == "beta_poly":
            # 1 - U^(1/(alpha+1)) with 1-U in place of U keeps draws strictly below 1
            return 1.0 - np.power(1.0 - u, 1.0 / (self.alpha + 1.0))
        cum = self._piece_cum
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, self.densities.size - 1)
        # skip zero-mass pieces
        while True:
            zero = self._piece_mass[idx] <= 0
            if not np.any(zero):
                break
            idx = np.where(zero, np.minimum(idx + 1, self.densities.size - 1), idx)
        return self.breakpoints[idx] + (u - cum[idx]) / self.densities[idx]

    def measure(self, A):
        """mu(A) for an Interval or IntervalUnion inside [0, w_star]."""
        if isinstance(A, Interval):
            A = IntervalUnion.of(A)
        total = 0.0
        for iv in A:
            if iv.lo < -EDGE_TOL or iv.hi > self.w_star + EDGE_TOL:
                raise DomainError(f"{iv} is not inside [0, {self.w_star}]")
            if self.kind == "atoms":
                mask = iv.contains(self.values)
                total += float(self.probs[mask].sum())
            else:
                total += self.cdf(iv.hi) - self.cdf(iv.lo)
        return min(max(total, 0.0), 1.0)

    def expect(self, f, tol=1e-10, cap=1e12, region=None):
        """E[f(W)] (or E[f(W); W in region]) for a nonnegative or bounded f.

        Returns +inf when the integral diverges: either f is infinite on a set
        of positive mass, or the partial integrals towards a singular endpoint
        grow without the geometric decay of an integrable singularity.
        """
        if isinstance(region, Interval):
            region = IntervalUnion.of(region)
        if self.kind == "atoms":
            mask = self.probs > 0
            if region is not None:
                mask &= region.contains(self.values)
            vals = np.array([f(float(v)) for v in self.values[mask]], dtype=float)
            if np.any(np.isnan(vals)):
                raise QuadratureError("integrand is NaN at an atom")
            if np.any(np.isposinf(vals)):
                return math.inf
            return float(np.dot(self.probs[mask], vals))
        total = 0.0
        dens = self._density_fn()
        for a, b in self._restricted_pieces(region):
            val = _integrate_piece(lambda w: f(w) * dens(w), a, b, tol, cap)
            if math.isinf(val):
                return math.inf
            total += val
            if total > cap:
                return math.inf
        return total

    def _restricted_pieces(self, region):
        pieces = self.pieces()
        if region is None:
            return pieces
        out = []
        for iv in region:
            if iv.lo < -EDGE_TOL or iv.hi > self.w_star + EDGE_TOL:
                raise DomainError(f"{iv} is not inside [0, {self.w_star}]")
            for a, b in pieces:
                lo, hi = max(a, iv.lo), min(b, iv.hi)
                if hi > lo:
                    out.append((lo, hi))
        return out

    def _density_fn(self):
        if self.kind == "uniform":
            c = 1.0 / self.w_star
            return lambda w: c
        if self.kind == "beta_poly":
            a1, al = self.alpha + 1.0, self.alpha
            return lambda w: a1 * (1.0 - w) ** al if w < 1.0 else (a1 if al == 0 else (0.0 if al > 0 else math.inf))
        return lambda w: float(self.density(w))


# quadrature ------------------------------------------------------------------

_PROBES = 9
_SLIVER_START = 1.0 / 64
_MAX_SLIVERS = 400
_RESOLUTION = 1e-9


def _safe(fn, x):
    try:
        with np.errstate(all="ignore"):
            v = float(fn(x))
    except ZeroDivisionError:
        return math.inf
    return v


def _quad(fn, a, b, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(fn, a, b, epsabs=tol * 0.1, epsrel=1e-12,
                                        limit=400, full_output=1)[:3]
    if not math.isfinite(val):
        return math.inf, err
    if err > max(100 * tol, 1e-6 * abs(val)):
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge (error estimate {err:g})")
    return val, err


def _integrate_piece(fn, a, b, tol, cap):
    width = b - a
    interior = [a + width * (k + 1) / (_PROBES + 1) for k in range(_PROBES)]
    vals = [_safe(fn, x) for x in interior]
    if any(math.isnan(v) for v in vals):
        raise QuadratureError("integrand is NaN inside the support")
    if any(math.isinf(v) for v in vals):
        # infinite on an interval of positive length
        return math.inf
    left_sing = not math.isfinite(_safe(fn, a))
    right_sing = not math.isfinite(_safe(fn, b))
    if not (left_sing or right_sing):
        return _quad(fn, a, b, tol)[0]
    d0 = min(_SLIVER_START, 0.25) * width
    lo = a + d0 if left_sing else a
    hi = b - d0 if right_sing else b
    total = _quad(fn, lo, hi, tol)[0]
    if left_sing:
        total += _sliver_series(lambda t: fn(a + t), d0, tol, cap)
    if right_sing:
        total += _sliver_series(lambda t: fn(b - t), d0, tol, cap)
    return total


def _sliver_series(g, d0, tol, cap):
    """Sum of integrals of g over dyadic slivers (d/2, d], d = d0, d0/2, ...

    An integrable endpoint singularity gives geometrically shrinking increments,
    whose remainder is added as a geometric tail; increments that stop
    shrinking flag divergence.
    """
    total = 0.0
    incs = []
    d = d0
    floor = d0 * _RESOLUTION
    for _ in range(_MAX_SLIVERS):
        if d < floor or len(incs) >= 5 and math.isinf(_safe(g, d / 2)):
            # the endpoint can no longer be resolved in floating point: settle
            # on the geometric tail if the increments are clearly shrinking
            return _geometric_finish(total, incs)
        inc, _ = _quad(g, d / 2, d, tol * 1e-2)
        if math.isinf(inc):
            return math.inf
        total += inc
        incs.append(inc)
        if total > cap:
            return math.inf
        d /= 2
        if len(incs) >= 5:
            recent = incs[-5:]
            if recent[0] <= 0:
                if all(x == 0 for x in recent):
                    return total
                continue
            ratios = [y / x for x, y in zip(recent, recent[1:]) if x > 0]
            rho = max(ratios)
            if min(ratios) >= 1.0 - 1e-3:
                return math.inf
            if rho < 1.0:
                tail = inc * rho / (1.0 - rho)
                # error of the geometric extrapolation scales with the ratio drift
                drift = (rho - min(ratios)) / (1.0 - rho)
                if tail < tol * 1e-2 or tail * drift < tol * 1e-2:
                    return total + tail
        if d < 1e-300:
            break
    raise QuadratureError("endpoint singularity did not settle within the sliver budget")


def _geometric_finish(total, incs):
    recent = [x for x in incs[-5:] if x > 0]
    if len(recent) < 2:
        return total
    ratios = [y / x for x, y in zip(recent, recent[1:])]
    rho = max(ratios)
    if rho >= 1.0 - 1e-3:
        return math.inf
    return total + recent[-1] * rho / (1.0 - rho)
