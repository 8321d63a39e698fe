"""The edge urn and the neighbourhood urn built from a discretised model, and
the closed forms of their leading eigenvectors."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import CapError, DomainError
from .urn import UrnSpec

URN_D_CAP = 10**5


def build_urn_e(disc):
    """Types: singletons i (a vertex, activity h_max(i)), pairs (i, j) (an edge
    from a cell-i parent to a cell-j child, activity g_max(i, j)) and overflow
    pairs (D, j) carrying the slack, activity g*(j)."""
    D, p = disc.D, disc.p
    types = ([("single", (i,)) for i in range(D)]
             + [("pair", (i, j)) for i in range(D) for j in range(D)]
             + [("overflow", (j,)) for j in range(D)])
    T = len(types)
    single = np.arange(D)
    pair = lambda i, j: D + i * D + j
    overflow = D + D * D + np.arange(D)
    a = np.concatenate([disc.h_max, disc.g_max.ravel(), disc.g_star])
    low = np.concatenate([disc.h_min, disc.g_min.ravel(), np.zeros(D)])
    gamma = np.divide(low, a, out=np.zeros(T), where=a > 0)
    ext = np.full((T, D), -1, dtype=np.int64)
    M = np.zeros((T, T))
    for x, (kind, key) in enumerate(types):
        ga = gamma[x] * a[x]
        M[single, x] += a[x] * p
        M[overflow, x] += (a[x] - ga) * p
        if kind != "overflow":
            i = key[0]
            targets = pair(i, np.arange(D))
            ext[x] = targets
            M[targets, x] += ga * p
    rule = {"single": single, "ext": ext, "overflow": overflow, "removes": False}
    return UrnSpec("E", types, a, gamma, M, disc, rule)


def build_urn_d(disc, k_prime):
    """Types: tuples (u_0, ..., u_k), k <= K', recording a cell-u_0 vertex and
    the cells of its first k children, plus overflow types (D, l).  Tuples of
    length K' + 1 are frozen (gamma' = 0)."""
    if k_prime < 1:
        raise DomainError("K' must be at least 1")
    D, p = disc.D, disc.p
    if D ** (k_prime + 1) * (k_prime + 2) > URN_D_CAP:
        raise CapError(f"D^(K'+1)(K'+2) = {D ** (k_prime + 1) * (k_prime + 2)} exceeds {URN_D_CAP}")
    tuples = [u for k in range(1, k_prime + 2) for u in itertools.product(range(D), repeat=k)]
    types = [("tuple", u) for u in tuples] + [("overflow", (j,)) for j in range(D)]
    T = len(types)
    pos = {u: i for i, u in enumerate(tuples)}
    overflow = len(tuples) + np.arange(D)
    single = np.array([pos[(l,)] for l in range(D)])
    a = np.zeros(T)
    low = np.zeros(T)
    for i, u in enumerate(tuples):
        a[i] = disc.h_max[u[0]] + sum(disc.g_max[u[0], c] for c in u[1:])
        if len(u) <= k_prime:
            low[i] = disc.h_min[u[0]] + sum(disc.g_min[u[0], c] for c in u[1:])
    a[overflow] = disc.g_star
    gamma = np.divide(low, a, out=np.zeros(T), where=a > 0)
    ext = np.full((T, D), -1, dtype=np.int64)
    M = np.zeros((T, T))
    for x in range(T):
        ga = gamma[x] * a[x]
        M[single, x] += a[x] * p
        M[overflow, x] += (a[x] - ga) * p
        kind, u = types[x]
        if kind == "tuple" and len(u) <= k_prime:
            M[x, x] -= ga
            targets = np.array([pos[u + (l,)] for l in range(D)])
            ext[x] = targets
            M[targets, x] += ga * p
    rule = {"single": single, "ext": ext, "overflow": overflow, "removes": True}
    return UrnSpec("D", types, a, gamma, M, disc, rule, k_prime=k_prime)


# closed forms ----------------------------------------------------------------

@dataclass
class UrnEReport:
    lam: float
    residual_singletons: float
    residual_pairs: float
    residual_overflow: float
    B: float
    E: float
    residual_slack: float
    eigvec_residual: float

    @property
    def max_residual(self):
        return max(self.residual_singletons, self.residual_pairs, self.residual_overflow,
                   self.residual_slack)

    def to_dict(self):
        d = asdict(self)
        d["max_residual"] = self.max_residual
        return d


def check_urn_e_formulas(urn, eig):
    """Compare the eigenvector with its closed forms:
    u(l) = p_l / lambda on singletons,
    lambda u(i, j) = p_j p_i h_min(i) / (lambda - g~_-(i)) on pairs,
    lambda u(D, j) = p_j (B + E) on overflow types, and
    B = g~*_+ E / (lambda - g~*_+)."""
    disc, lam, v = urn.disc, eig.lam, eig.v
    D, p = disc.D, disc.p
    vs = v[:D]
    vp = v[D:D + D * D].reshape(D, D)
    vo = v[D + D * D:]
    r27 = float(np.max(np.abs(vs - p / lam)))
    gm = disc.g_tilde_minus
    pred = np.outer(p * disc.h_min / (lam - gm), p) / lam
    r30 = float(np.max(np.abs(vp - pred)))
    B = float(disc.g_star @ vo)
    E = float(np.sum((disc.g_max - disc.g_min) * vp) + np.sum((disc.h_max - disc.h_min) * vs))
    r31 = float(np.max(np.abs(lam * vo - p * (B + E))))
    gs = disc.g_tilde_star_plus
    r32 = abs(B - gs * E / (lam - gs))
    return UrnEReport(lam, r27, r30, r31, B, E, r32, eig.residual)


@dataclass
class UrnDReport:
    lam: float
    residual_closed_form: float
    R: float
    E: float
    F: float
    residual_overflow: float
    degree: np.ndarray
    degree_companion: np.ndarray
    residual_degree: float
    residual_degree_exact: float | None
    eigvec_residual: float

    @property
    def max_residual(self):
        return max(self.residual_closed_form, self.residual_overflow, self.residual_degree)

    def to_dict(self):
        d = asdict(self)
        d["degree"] = self.degree.tolist()
        d["degree_companion"] = self.degree_companion.tolist()
        d["max_residual"] = self.max_residual
        return d


def urn_d_closed_form(urn, lam):
    """V on tuple types from the recursion along prefixes:
    V(u) = p_{u_0} prod_{i=1}^{k} [p_{u_i} ga(u|_i)] / prod_{j=1}^{k+1} (lambda + ga(u|_j))
    for a length-(k+1) tuple with k < K' (ga = gamma' a', u|_j the length-j
    prefix), and for frozen tuples
    lambda V(u) = p_{u_0} prod_{i=1}^{K'} [p_{u_i} ga(u|_i) / (ga(u|_i) + lambda)]."""
    disc, K = urn.disc, urn.k_prime
    p = disc.p
    ga = urn.gamma * urn.a
    out = np.zeros(len(urn.types))
    for x, (kind, u) in enumerate(urn.types):
        if kind != "tuple":
            continue
        pref = [ga[urn.index[("tuple", u[:j])]] for j in range(1, len(u) + 1)]
        num = p[u[0]]
        for i in range(1, len(u)):
            num *= p[u[i]] * pref[i - 1]
        if len(u) <= K:
            out[x] = num / np.prod([lam + g for g in pref])
        else:
            out[x] = num / np.prod([lam + g for g in pref[:-1]]) / lam
    return out


def _companion_degree(disc, lam, kmax):
    """E[prod_{i<k} S_i / (S_i + lam); W in cell l] for the lower envelope
    companion S_0 = h_min, S_{i+1} = S_i + g_min(l, child cell)."""
    D, p = disc.D, disc.p
    out = np.zeros((kmax + 1, D))
    for l in range(D):
        S = np.array([disc.h_min[l]])
        w = np.array([p[l]])
        out[0, l] = p[l]
        for k in range(1, kmax + 1):
            w = w * S / (S + lam)
            out[k, l] = w.sum()
            S = (S[:, None] + disc.g_min[l][None, :]).ravel()
            w = (w[:, None] * p[None, :]).ravel()
    return out


def check_urn_d_formulas(urn, eig, exact_degree=True):
    """Closed-form eigenvector, the overflow balance
    R = g~*_+ (E + F) / (lambda' - g~*_+), and the degree functional
    sum over tuples of length >= k + 1 starting in cell l of lambda' V, which
    must equal the lower-envelope companion product (and, for atoms, the exact
    degree law evaluated at lambda')."""
    disc, lam, v, K = urn.disc, eig.lam, eig.v, urn.k_prime
    closed = urn_d_closed_form(urn, lam)
    tup = np.array([k == "tuple" for k, _ in urn.types])
    r46 = float(np.max(np.abs(v[tup] - closed[tup])))
    lengths = np.array([len(u) if k == "tuple" else 0 for k, u in urn.types])
    ov = ~tup
    R = float(urn.a[ov] @ v[ov])
    E = float(((urn.a - urn.gamma * urn.a) * v)[tup & (lengths <= K)].sum())
    F = float((urn.a * v)[lengths == K + 1].sum())
    gs = disc.g_tilde_star_plus
    r47 = abs(R - gs * (E + F) / (lam - gs))
    D = disc.D
    degree = np.zeros((K + 1, D))
    for x, (kind, u) in enumerate(urn.types):
        if kind == "tuple":
            degree[:len(u), u[0]] += lam * v[x]
    comp = _companion_degree(disc, lam, K)
    r56 = float(np.max(np.abs(degree - comp)))
    r_exact = None
    if exact_degree and disc.exact:
        from ..theory import degree_limit_exact_series
        from ..weightlaw import IntervalUnion
        r_exact = 0.0
        for l, cell in enumerate(disc.cells):
            ref = degree_limit_exact_series(disc.model, disc.law, K, IntervalUnion.of(cell), lam=lam)
            r_exact = max(r_exact, float(np.max(np.abs(ref - degree[:, l]))))
    return UrnDReport(lam, r46, R, E, F, r47, degree, comp, r56, r_exact, eig.residual)
