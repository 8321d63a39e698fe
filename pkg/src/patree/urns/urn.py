"""Generalised Polya urns with finitely many types: structure, leading
eigen-system and simulation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import ConstructionError, SpectralError


@dataclass
class UrnSpec:
    """A finite-type urn.

    M[x', x] is the expected number of type-x' balls added (negative on the
    diagonal for a removal) per unit activity of a drawn type-x ball, scaled by
    that activity, i.e. the convention A_{ij} = a_j E[xi_ji].  `rule` holds the
    arrays that drive the randomised replacement in `simulate_urn`.
    """

    kind: str
    types: list
    a: np.ndarray
    gamma: np.ndarray
    M: np.ndarray
    disc: object
    rule: dict
    k_prime: int | None = None
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.types)}
        self.R, self.U1, self.U2 = classes(self)

    @property
    def type_count(self):
        return len(self.types)

    def check(self):
        bad = []
        off = self.M - np.diag(np.diag(self.M))
        if np.any(off < 0):
            bad.append("negative off-diagonal replacement")
        with np.errstate(invalid="ignore", divide="ignore"):
            per_draw = np.where(self.a > 0, np.diag(self.M) / np.where(self.a > 0, self.a, 1), 0.0)
        if np.any(per_draw < -1 - 1e-12):
            bad.append("a draw removes more than one ball")
        if np.any(self.gamma < 0) or np.any(self.gamma > 1):
            bad.append("gamma outside [0, 1]")
        if self.R.size and not _strongly_connected(self.M, self.R):
            bad.append("restriction to R is not irreducible")
        return bad


def classes(urn):
    """(R, U1, U2): R is the set of positive-activity types reachable from the
    positive-mass singletons, U1 the reachable zero-activity types, U2 the
    unreachable rest."""
    n = len(urn.types)
    start = np.asarray(urn.rule["single"], dtype=np.int64)
    start = start[urn.disc.p > 0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    stack = list(start)
    off = urn.M.copy()
    np.fill_diagonal(off, 0.0)
    while stack:
        x = stack.pop()
        for y in np.flatnonzero(off[:, x] > 0):
            if not seen[y]:
                seen[y] = True
                stack.append(y)
    live = urn.a > 0
    R = np.flatnonzero(seen & live)
    U1 = np.flatnonzero(seen & ~live)
    U2 = np.flatnonzero(~seen)
    return R, U1, U2


def _strongly_connected(M, R):
    sub = M[np.ix_(R, R)].copy()
    np.fill_diagonal(sub, 0.0)
    adj = sub > 0
    for mat in (adj, adj.T):
        seen = np.zeros(R.size, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            x = stack.pop()
            for y in np.flatnonzero(mat[:, x]):
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
        if not seen.all():
            return False
    return True


@dataclass
class LeadingEig:
    lam: float
    v: np.ndarray
    residual: float
    iterations: int


def leading_eig(urn, tol=1e-12, max_iter=10**5):
    """Perron root and right eigenvector of M on R, by shifted power iteration
    polished with inverse iteration.  The vector is extended to U1 by
    M_{U1,R} v_R / lambda, set to 0 on U2 and normalised so that a . v = 1."""
    R = urn.R
    if R.size == 0:
        raise SpectralError("no live types reachable from the singletons")
    A = urn.M[np.ix_(R, R)]
    shift = max(0.0, -float(np.min(np.diag(A)))) + 1e-3 * max(1.0, float(np.abs(A).max()))
    B = A + shift * np.eye(R.size)
    x = np.ones(R.size) / R.size
    lam, res, it = 0.0, np.inf, 0

    def estimate(x):
        y = A @ x
        k = int(np.argmax(np.abs(x)))
        lam = y[k] / x[k]
        return lam, float(np.max(np.abs(y - lam * x)) / np.max(np.abs(x)))

    while it < max_iter:
        for _ in range(50):
            y = B @ x
            x = y / np.abs(y).sum()
        it += 50
        lam, res = estimate(x)
        if res < max(1e-8, tol):
            break
    else:
        raise SpectralError(f"power iteration did not converge in {max_iter} steps (residual {res:.3g})")
    for _ in range(8):
        if res < tol * max(1.0, abs(lam)) * 0.01:
            break
        try:
            y = np.linalg.solve(A - (lam + 1e-14 * max(1.0, abs(lam))) * np.eye(R.size), x)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(y)):
            break
        y = y / np.abs(y).sum()
        if y.sum() < 0:
            y = -y
        lam2, res2 = estimate(y)
        if res2 < res:
            x, lam, res = y, lam2, res2
        else:
            break
    if res > tol * max(1.0, abs(lam)) or np.any(x < -1e-12):
        raise SpectralError(f"eigenvector residual {res:.3g} above tolerance")
    x = np.maximum(x, 0.0)
    v = np.zeros(len(urn.types))
    v[R] = x
    if urn.U1.size:
        v[urn.U1] = urn.M[np.ix_(urn.U1, R)] @ x / lam
    v /= float(urn.a @ v)
    full = float(np.max(np.abs(urn.M @ v - lam * v)))
    return LeadingEig(float(lam), v, full, it)


@njit(cache=True)
def _urn_kernel(n, counts, a, gamma, single, ext, overflow, removes, p_cum, u):
    T = a.shape[0]
    D = p_cum.shape[0]
    total_balls = np.zeros(n + 1, dtype=np.int64)
    total_balls[0] = counts.sum()
    for s in range(n):
        act = 0.0
        for x in range(T):
            act += counts[x] * a[x]
        if act <= 0.0:
            return counts, total_balls, s
        target = u[s, 0] * act
        x = 0
        acc = counts[0] * a[0]
        while acc <= target and x < T - 1:
            x += 1
            acc += counts[x] * a[x]
        while counts[x] == 0 or a[x] == 0.0:
            x -= 1
        ell = 0
        while ell < D - 1 and p_cum[ell] <= u[s, 1]:
            ell += 1
        counts[single[ell]] += 1
        if u[s, 2] < gamma[x] and ext[x, ell] >= 0:
            counts[ext[x, ell]] += 1
            if removes:
                counts[x] -= 1
        else:
            counts[overflow[ell]] += 1
        total_balls[s + 1] = counts.sum()
    return counts, total_balls, n


def simulate_urn(urn, n, rng, start=None):
    """Run the urn for n draws from one ball of a live singleton type; returns
    (X_n / n, total ball count after each draw).

    Each draw picks a ball with probability proportional to activity, adds a
    singleton of a fresh cell l ~ p, and with probability gamma of the drawn
    type extends it by l (removing the drawn ball in the neighbourhood urn);
    otherwise it adds the overflow ball of l.
    """
    rule = urn.rule
    counts = np.zeros(len(urn.types), dtype=np.int64)
    if start is None:
        live = [rule["single"][l] for l in range(urn.disc.D) if rule["single"][l] in set(urn.R)]
        if not live:
            raise ConstructionError("no live singleton to start from")
        start = int(live[int(np.argmax(urn.disc.p[[urn.types[x][1][0] for x in live]]))])
    counts[start] = 1
    u = rng.random((n, 3))
    p_cum = np.cumsum(urn.disc.p)
    p_cum[-1] = 1.0
    counts, total, steps = _urn_kernel(n, counts, urn.a, urn.gamma, np.asarray(rule["single"]),
                                       rule["ext"], np.asarray(rule["overflow"]),
                                       bool(rule["removes"]), p_cum, u)
    if steps < n:
        raise ConstructionError(f"urn activity died out after {steps} draws")
    return counts / n, total
