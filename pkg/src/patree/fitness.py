"""Fitness pairs (g, h) and the quantities derived from them.

A vertex of weight x whose children have weights y_1..y_k has fitness
h(x) + sum_i g(x, y_i).  The increment kernel is stored in the separable shape

    g(x, y) = a(x) * b(y) + c(x) + e(y)

built from monotone component functions, or as an explicit table over the
atoms of a finite law.  Every named form maps onto one of these two shapes,
which is what makes sup_x g(x, W) available in closed form.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, PreconditionError, UnsupportedFormError
from .weightlaw import Interval, IntervalUnion, WeightLaw, point


# component functions -----------------------------------------------------------

class Phi:
    """Bounded monotone function of the weight."""

    name = "phi"
    increasing = True

    def __call__(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise UnsupportedFormError(f"{self.name} has no registered inverse")

    @property
    def is_constant(self):
        return False

    def sup_on(self, lo, hi):
        v1, v2 = float(self(lo)), float(self(hi))
        return max(v1, v2)

    def inf_on(self, lo, hi):
        v1, v2 = float(self(lo)), float(self(hi))
        return min(v1, v2)

    def argmax_on(self, lo, hi):
        return hi if self.increasing else lo

    def describe(self):
        return {"kind": self.name}

    def superlevel(self, level, lo, hi, strict=True):
        """{x in [lo, hi] : phi(x) > level} (or >= when strict is False)."""
        if self.is_constant:
            c = float(self(lo))
            ok = c > level if strict else c >= level
            return Interval(lo, hi) if ok else None
        top = self.sup_on(lo, hi)
        bottom = self.inf_on(lo, hi)
        if (level < bottom) or (not strict and level <= bottom):
            return Interval(lo, hi)
        if level > top or (strict and level >= top):
            return None
        t = float(np.clip(self.inverse(level), lo, hi))
        if self.increasing:
            return Interval(t, hi, not strict, True)
        return Interval(lo, t, True, not strict)

    def preimage(self, interval, lo, hi):
        """{x in [lo, hi] : phi(x) in interval} as an Interval, or None."""
        if self.is_constant:
            return Interval(lo, hi) if bool(interval.contains(float(self(lo)))) else None
        a = self._cut(interval.lo, interval.lo_closed, lo, hi, lower=True)
        b = self._cut(interval.hi, interval.hi_closed, lo, hi, lower=False)
        if a is None or b is None:
            return None
        if self.increasing:
            (x0, c0), (x1, c1) = a, b
        else:
            (x1, c1), (x0, c0) = a, b
        if x1 < x0 or (x1 == x0 and not (c0 and c1)):
            return None
        return Interval(x0, x1, c0, c1)

    def _cut(self, y, closed_end, lo, hi, lower):
        # endpoint of {phi >= y} (lower) or {phi <= y} (upper) in x-space
        vlo, vhi = float(self(lo)), float(self(hi))
        vmin, vmax = min(vlo, vhi), max(vlo, vhi)
        if lower:
            if y < vmin or (closed_end and y <= vmin):
                return (lo, True) if self.increasing else (hi, True)
            if y > vmax or (not closed_end and y >= vmax):
                return None
        else:
            if y > vmax or (closed_end and y >= vmax):
                return (hi, True) if self.increasing else (lo, True)
            if y < vmin or (not closed_end and y <= vmin):
                return None
        return float(np.clip(self.inverse(y), lo, hi)), closed_end


class Identity(Phi):
    name = "identity"

    def __call__(self, x):
        return np.asarray(x, dtype=float) * 1.0

    def inverse(self, y):
        return y


class Constant(Phi):
    name = "constant"

    def __init__(self, value):
        if value < 0:
            raise DomainError("component functions must be nonnegative")
        self.value = float(value)

    def __call__(self, x):
        return np.full(np.shape(x), self.value) if np.ndim(x) else self.value

    @property
    def is_constant(self):
        return True

    def describe(self):
        return {"kind": "constant", "value": self.value}


class Power(Phi):
    """x -> scale * x**p with p > 0."""

    name = "power"

    def __init__(self, p, scale=1.0):
        if not p > 0 or scale < 0:
            raise DomainError("power needs p > 0 and scale >= 0")
        self.p = float(p)
        self.scale = float(scale)

    def __call__(self, x):
        return self.scale * np.power(np.asarray(x, dtype=float), self.p)

    def inverse(self, y):
        return (max(y, 0.0) / self.scale) ** (1.0 / self.p)

    def describe(self):
        return {"kind": "power", "p": self.p, "scale": self.scale}


class Affine(Phi):
    """x -> offset + slope * x; must stay nonnegative on the support."""

    name = "affine"

    def __init__(self, offset, slope):
        self.offset = float(offset)
        self.slope = float(slope)
        self.increasing = self.slope >= 0

    def __call__(self, x):
        return self.offset + self.slope * np.asarray(x, dtype=float)

    @property
    def is_constant(self):
        return self.slope == 0

    def inverse(self, y):
        return (y - self.offset) / self.slope

    def describe(self):
        return {"kind": "affine", "offset": self.offset, "slope": self.slope}


class Clamped(Phi):
    """A component replaced by a constant on a region.

    Used for the regularised kernels, where the row of a weight inside the
    near-maximal set is replaced by the row of the maximiser.
    """

    name = "clamped"

    def __init__(self, base, region, value):
        self.base = base
        self.region = region
        self.value = float(value)
        self.increasing = base.increasing

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(self.region.contains(x), self.value, self.base(x))
        return float(out) if out.ndim == 0 else out

    def _candidates(self, lo, hi):
        pts = [lo, hi]
        for iv in self.region:
            pts += [p for p in (iv.lo, iv.hi) if lo <= p <= hi]
        vals = [float(self.base(p)) for p in pts if not bool(self.region.contains(p))]
        # limits of the base at region boundaries count as well
        vals += [float(self.base(p)) for p in pts]
        if any(iv.hi >= lo and iv.lo <= hi for iv in self.region):
            vals.append(self.value)
        return vals

    def sup_on(self, lo, hi):
        return max(self._candidates(lo, hi))

    def inf_on(self, lo, hi):
        return min(self._candidates(lo, hi))

    def inverse(self, y):
        raise UnsupportedFormError("clamped components are not invertible")

    def describe(self):
        return {"kind": "clamped", "base": self.base.describe(), "value": self.value,
                "region": repr(self.region)}


def phi_from_spec(spec):
    """Build a component from a config fragment such as {"kind": "power", "p": 2}."""
    if isinstance(spec, (int, float)):
        return Constant(spec)
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "identity":
        return Identity()
    if kind == "constant":
        return Constant(spec["value"])
    if kind == "power":
        return Power(spec["p"], spec.get("scale", 1.0))
    if kind == "affine":
        return Affine(spec["offset"], spec["slope"])
    raise DomainError(f"unknown component kind {kind!r}")


ZERO = Constant(0.0)


# the model -------------------------------------------------------------------

FORMS = ("constant", "random_recursive", "classic_pa", "bianconi_barabasi", "additive",
         "product", "separable_sum", "table", "regularized")


class FitnessModel:
    """The pair (g, h).  Use the named constructors rather than __init__."""

    def __init__(self, form, h, a=ZERO, b=ZERO, c=ZERO, e=ZERO, *, table=None,
                 atom_values=None, h_table=None, w_star=1.0, params=None,
                 witness=None):
        if form not in FORMS:
            raise DomainError(f"unknown form {form!r}")
        self.form = form
        self.w_star = float(w_star)
        self.params = dict(params or {})
        self.witness = witness
        self.h_phi = h
        self.a, self.b, self.c, self.e = a, b, c, e
        self.table = None
        if table is not None:
            table = np.asarray(table, dtype=float)
            atom_values = np.asarray(atom_values, dtype=float)
            if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] != atom_values.size:
                raise DomainError("table must be s x s for s atoms")
            if np.any(table < 0):
                raise DomainError("table entries must be nonnegative")
            self.table = table
            self.atom_values = atom_values
            self.h_table = np.asarray(h_table, dtype=float)
            if self.h_table.shape != atom_values.shape or np.any(self.h_table < 0):
                raise DomainError("table form needs one nonnegative h value per atom")
        self.h_max, self.g_max = self._bounds()

    # constructors
    @classmethod
    def constant(cls, c_g, c_h):
        return cls("constant", Constant(c_h), c=Constant(c_g), params={"c_g": c_g, "c_h": c_h})

    @classmethod
    def random_recursive(cls, c=1.0):
        return cls("random_recursive", Constant(c), params={"c": c})

    @classmethod
    def classic_pa(cls, c=1.0):
        return cls("classic_pa", Constant(c), c=Constant(c), params={"c": c})

    @classmethod
    def bianconi_barabasi(cls, w_star=1.0):
        return cls("bianconi_barabasi", Identity(), a=Identity(), b=Constant(1.0), w_star=w_star)

    @classmethod
    def additive(cls, w_star=1.0):
        return cls("additive", Identity(), c=Constant(1.0), w_star=w_star)

    @classmethod
    def product(cls, phi1, phi2, h=None, w_star=1.0, bound=None):
        h = h if h is not None else Identity()
        return cls("product", h, a=phi1, b=phi2, w_star=w_star,
                   witness=_witness(bound, phi1, phi2, w_star))

    @classmethod
    def separable_sum(cls, alpha, beta, phi1, phi2, h=None, w_star=1.0, bound=None):
        if alpha < 0 or beta < 0:
            raise DomainError("separable_sum needs nonnegative coefficients")
        h = h if h is not None else Identity()
        c = _scaled(phi1, alpha)
        e = _scaled(phi2, beta)
        return cls("separable_sum", h, c=c, e=e, w_star=w_star,
                   params={"alpha": alpha, "beta": beta},
                   witness=_witness(bound, phi1, phi2, w_star))

    @classmethod
    def from_table(cls, matrix, law, h_values):
        if not law.is_atomic:
            raise DomainError("table forms need an atomic law")
        return cls("table", ZERO, table=matrix, atom_values=law.values, h_table=h_values,
                   w_star=law.w_star)

    # evaluation
    def _index(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.atom_values, x)
        idx = np.clip(idx, 0, self.atom_values.size - 1)
        if np.any(self.atom_values[idx] != x):
            raise DomainError("table form evaluated off the atoms")
        return idx

    def h(self, x):
        if self.table is not None:
            out = self.h_table[self._index(x)]
        else:
            out = self.h_phi(x)
        return float(out) if np.ndim(out) == 0 else out

    def g(self, x, y):
        if self.table is not None:
            out = self.table[self._index(x), self._index(y)]
        else:
            out = self.a(x) * self.b(y) + self.c(x) + self.e(y)
        return float(out) if np.ndim(out) == 0 else out

    def _bounds(self):
        if self.table is not None:
            return float(self.h_table.max()), float(self.table.max())
        lo, hi = 0.0, self.w_star
        for comp in (self.h_phi, self.a, self.b, self.c, self.e):
            if comp.inf_on(lo, hi) < -1e-15:
                raise DomainError("component functions must be nonnegative on [0, w_star]")
        g_max = (self.a.sup_on(lo, hi) * self.b.sup_on(lo, hi)
                 + self.c.sup_on(lo, hi) + self.e.sup_on(lo, hi))
        return float(self.h_phi.sup_on(lo, hi)), float(g_max)

    @property
    def g_is_zero(self):
        if self.table is not None:
            return not np.any(self.table)
        return all(p.is_constant and float(p(0.0)) == 0.0 for p in (self.c, self.e)) and (
            (self.a.is_constant and float(self.a(0.0)) == 0.0)
            or (self.b.is_constant and float(self.b(0.0)) == 0.0))

    def describe(self):
        d = {"form": self.form, "h_max": self.h_max, "g_max": self.g_max}
        d.update(self.params)
        if self.table is not None:
            d["table"] = self.table.tolist()
            d["h"] = self.h_table.tolist()
        else:
            d.update({"h": self.h_phi.describe(), "a": self.a.describe(), "b": self.b.describe(),
                      "c": self.c.describe(), "e": self.e.describe()})
        return d

    def __repr__(self):
        return f"FitnessModel({self.form})"

    def vertex_arrays(self, w):
        """Per-vertex arrays consumed by the growth kernels."""
        w = np.asarray(w, dtype=float)
        n = w.size
        if self.table is not None:
            z = np.zeros(n)
            return (self.h_table[self._index(w)].astype(float), z, z.copy(), z.copy(), z.copy(),
                    self._index(w).astype(np.int64), self.table.copy())
        full = lambda comp: np.broadcast_to(np.asarray(comp(w), dtype=float), (n,)).copy()
        return (full(self.h_phi), full(self.a), full(self.b), full(self.c), full(self.e),
                np.zeros(n, dtype=np.int64), np.zeros((1, 1)))

    def probe_bounds(self, law, rng, n=10_000):
        """Check 0 <= h <= h_max and 0 <= g <= g_max on random weights."""
        x = law.sample(rng, n)
        y = law.sample(rng, n)
        hv = np.asarray(self.h(x))
        gv = np.asarray(self.g(x, y))
        tol = 1e-12 * max(1.0, self.g_max, self.h_max)
        return bool(np.all(hv >= 0) and np.all(hv <= self.h_max + tol)
                    and np.all(gv >= 0) and np.all(gv <= self.g_max + tol))

    def positive_h_mass(self, law, rng=None, n=10_000):
        """mu({h > 0}), exact for atoms, else estimated by sampling."""
        if law.is_atomic:
            hv = np.asarray(self.h(law.values))
            return float(law.probs[hv > 0].sum())
        rng = rng if rng is not None else np.random.default_rng(0)
        x = law.sample(rng, n)
        return float(np.mean(np.asarray(self.h(x)) > 0))


def _scaled(phi, k):
    if k == 0:
        return ZERO
    if k == 1:
        return phi
    if isinstance(phi, Constant):
        return Constant(k * phi.value)
    if isinstance(phi, Identity):
        return Power(1.0, k)
    if isinstance(phi, Power):
        return Power(phi.p, phi.scale * k)
    if isinstance(phi, Affine):
        return Affine(k * phi.offset, k * phi.slope)
    raise UnsupportedFormError("cannot rescale this component")


def _witness(bound, phi1, phi2, w_star):
    """Decomposition witness: both factors bounded by J on [0, w_star]."""
    top = max(phi1.sup_on(0.0, w_star), phi2.sup_on(0.0, w_star))
    if bound is None:
        bound = top
    if top > bound + 1e-12:
        raise DomainError(f"component exceeds the stated bound J = {bound}")
    return {"J": float(bound)}


# derived quantities -------------------------------------------------------------

class _Moments:
    """Cache of E[b(W)], E[e(W)] per (model, law) pair."""

    def __init__(self):
        self._store = {}

    def get(self, model, law, tol):
        key = (id(model), id(law))
        hit = self._store.get(key)
        if hit is None or hit[0] is not model or hit[1] is not law:
            eb = _mean(model.b, law, tol)
            ee = _mean(model.e, law, tol)
            hit = (model, law, eb, ee)
            self._store[key] = hit
        return hit[2], hit[3]


def _mean(phi, law, tol):
    if phi.is_constant:
        return float(phi(0.0))
    if law.is_atomic:
        return float(np.dot(law.probs, phi(law.values)))
    return law.expect(lambda y: float(phi(y)), tol)


_MOMENTS = _Moments()


def g_tilde(model, law, x, tol=1e-12):
    """E[g(x, W)] for a weight x (scalar or array)."""
    if model.table is not None:
        out = model.table[model._index(x)] @ law.probs
        return float(out) if np.ndim(out) == 0 else out
    eb, ee = _MOMENTS.get(model, law, tol)
    out = model.a(x) * eb + model.c(x) + ee
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def g_tilde_quadrature(model, law, x, tol=1e-12):
    """E[g(x, W)] through the generic expectation route (for cross-checks)."""
    return law.expect(lambda y: model.g(x, y), tol)


def _sup_structure(model, lo, hi):
    """Return (A*, C*) with sup_x [a(x) b + c(x)] = A* b + C* for every b >= 0."""
    a, c = model.a, model.c
    if a.is_constant or c.is_constant or a.argmax_on(lo, hi) == c.argmax_on(lo, hi):
        return a.sup_on(lo, hi), c.sup_on(lo, hi)
    raise UnsupportedFormError(
        "sup over the first argument has no closed form when a and c peak at different weights")


def g_tilde_star(model, law, tol=1e-12):
    """E[sup_x g(x, W)], the sup running over the closed support of the law."""
    if model.table is not None:
        live = law.probs > 0
        col_max = model.table[live].max(axis=0)
        return float(np.dot(law.probs, col_max))
    lo, hi = law.support_bounds()
    a_star, c_star = _sup_structure(model, lo, hi)
    eb, ee = _MOMENTS.get(model, law, tol)
    return float(a_star * eb + c_star + ee)


def g_tilde_star_quadrature(model, law, tol=1e-12):
    if model.table is not None:
        live = law.probs > 0
        col_max = model.table[live].max(axis=0)
        return law.expect(lambda y: float(col_max[model._index(y)]), tol)
    lo, hi = law.support_bounds()
    a_star, c_star = _sup_structure(model, lo, hi)
    return law.expect(lambda y: a_star * float(model.b(y)) + c_star + float(model.e(y)), tol)


def sup_g_tilde(model, law, tol=1e-12):
    """sup over the support of g~(x)."""
    if model.table is not None:
        live = law.probs > 0
        return float((model.table[live] @ law.probs).max())
    lo, hi = law.support_bounds()
    eb, ee = _MOMENTS.get(model, law, tol)
    a, c = model.a, model.c
    if a.is_constant or c.is_constant or a.argmax_on(lo, hi) == c.argmax_on(lo, hi) or eb == 0:
        return float(a.sup_on(lo, hi) * eb + c.sup_on(lo, hi) + ee)
    raise UnsupportedFormError("sup of g~ has no closed form for this kernel")


def sup_increment(model, law, x):
    """sup over the support of y of g(x, y): the largest single fitness gain at weight x."""
    if model.table is not None:
        live = law.probs > 0
        return float(model.table[model._index(x)][live].max())
    lo, hi = law.support_bounds()
    ax = float(model.a(x))
    bsup = model.b.sup_on(lo, hi) if ax >= 0 else model.b.inf_on(lo, hi)
    return float(ax * bsup + float(model.c(x)) + model.e.sup_on(lo, hi))


# dominating structure --------------------------------------------------------------

class DominatingStructure:
    """The maximiser x* of the row kernel and its near-maximal sets M_eps.

    Product kernels phi1(x) phi2(y) use M_eps = {phi1(x*) - phi1(x) < eps} and
    u_eps = eps * phi2.  Table kernels need a dominating row x*; they use the
    relative slack u_eps(j) = eps * g(x*, j).
    """

    def __init__(self, model, law):
        self.model = model
        self.law = law
        lo, hi = law.support_bounds()
        if model.table is not None:
            live = np.flatnonzero(law.probs > 0)
            rows = model.table[np.ix_(live, live)]
            dom = [i for i in range(live.size) if np.all(rows[i] >= rows - 1e-15)]
            if not dom:
                raise PreconditionError("no atom's row dominates every other row")
            self.x_star_index = int(live[dom[0]])
            self.x_star = float(law.values[self.x_star_index])
            self.row_star = model.table[self.x_star_index].copy()
            self.phi1_max = 1.0
            self.kind = "table"
        elif model.form in ("product", "bianconi_barabasi") or (
                model.c.is_constant and model.e.is_constant
                and float(model.c(0.0)) == 0.0 and float(model.e(0.0)) == 0.0):
            if model.b.inf_on(lo, hi) < 0:
                raise PreconditionError("second factor must be nonnegative")
            self.phi1 = model.a
            self.phi2 = model.b
            self.x_star = float(model.a.argmax_on(lo, hi))
            if law.is_atomic:
                vals = law.values[law.probs > 0]
                self.x_star = float(vals[np.argmax(model.a(vals))])
            self.phi1_max = float(model.a(self.x_star))
            self.kind = "product"
        else:
            raise UnsupportedFormError(
                f"near-maximal sets are only constructed for product and table forms, not {model.form}")

    def u_eps(self, eps):
        if self.kind == "table":
            row = eps * self.row_star
            return lambda y: row[self.model._index(y)]
        return lambda y: eps * self.phi2(y)

    def m_epsilon(self, eps):
        if not eps > 0:
            raise DomainError("eps must be positive")
        law = self.law
        if self.kind == "table":
            live = np.flatnonzero(law.probs > 0)
            slack = eps * self.row_star[live]
            keep = []
            for i in range(law.values.size):
                diff = self.row_star[live] - self.model.table[i, live]
                ok = np.where(slack > 0, diff < slack, diff == 0)
                if np.all(ok):
                    keep.append(point(law.values[i]))
            return IntervalUnion(keep)
        level = self.phi1_max - eps
        if law.is_atomic:
            vals = law.values
            keep = vals[np.asarray(self.phi1(vals)) > level]
            return IntervalUnion([point(v) for v in keep])
        iv = self.phi1.superlevel(level, 0.0, law.w_star, strict=True)
        return IntervalUnion([iv] if iv is not None else [])

    def check_positive_mass(self, eps_grid):
        return all(self.law.measure(self.m_epsilon(e)) > 0 for e in eps_grid)


def m_epsilon(dom, model, eps):
    if dom.model is not model:
        raise DomainError("dominating structure was built for a different model")
    return dom.m_epsilon(eps)
