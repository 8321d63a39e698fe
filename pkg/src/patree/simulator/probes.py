"""Monte Carlo probes: the normalised-fitness martingale and the edge mass
collected near the maximiser."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, PreconditionError, UnsupportedFormError
from ..fitness import g_tilde
from ..theory import BOUNDARY, CONDENSATION, classify_regime, condensate_mass, limit_lambda, psi_mass
from .runner import grow_one, parallel_map, replica_rng


@dataclass
class MartingaleSeries:
    checkpoints: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    fitness_mean: np.ndarray
    fitness_se: np.ndarray
    replicas: int

    def max_pairwise_z(self):
        """Largest |m_i - m_j| / sqrt(se_i^2 + se_j^2) over checkpoint pairs."""
        z = 0.0
        for i in range(self.mean.size):
            for j in range(i + 1, self.mean.size):
                s = np.hypot(self.std_error[i], self.std_error[j])
                d = abs(self.mean[i] - self.mean[j])
                z = max(z, d / s if s > 0 else (0.0 if d == 0 else np.inf))
        return z


def default_checkpoints(v, n):
    pts = {v, n}
    k = 1
    while k < n:
        if k > v:
            pts.add(k)
        k *= 10
    return sorted(pts)


def martingale_probe(model, law, v, n, replicas, rng, checkpoints=None):
    """Per replica, M_v(t) = f_v(t) / prod_{s=v}^{t-1} (Z_s + g~(w_v)) / Z_s along
    the realised Z path; returns mean and standard error at each checkpoint."""
    if not 0 <= v <= n:
        raise DomainError("need 0 <= v <= n")
    cps = np.asarray(checkpoints if checkpoints is not None else default_checkpoints(v, n),
                     dtype=np.int64)
    if np.any(cps < v) or np.any(cps > n) or np.any(np.diff(cps) <= 0):
        raise DomainError("checkpoints must increase within [v, n]")
    M = np.empty((replicas, cps.size))
    F = np.empty((replicas, cps.size))
    for r in range(replicas):
        run = grow_one(model, law, n, rng, bins=1, k_max=1, stride=n, keep_edges=False,
                       probe_v=v, probe_at=cps)
        F[r] = run.probe_f
        M[r] = run.probe_f * np.exp(-run.probe_log)
    se = lambda x: x.std(axis=0, ddof=1) / np.sqrt(replicas) if replicas > 1 else np.zeros(cps.size)
    return MartingaleSeries(cps, M.mean(axis=0), se(M), F.mean(axis=0), se(F), replicas)


def deterministic_z_recursion(model, checkpoints):
    """E f_0(t) for constant kernels, where Z_t = h + t (g + h) is deterministic:
    iterate E f_0(t+1) = E f_0(t) (Z_t + g) / Z_t."""
    if model.form not in ("constant", "classic_pa", "random_recursive"):
        raise UnsupportedFormError("the partition function is random for this form")
    gv, hv = model.g(0.0, 0.0), model.h(0.0)
    cps = np.asarray(checkpoints, dtype=np.int64)
    out = np.empty(cps.size)
    f, Z, t, k = hv, hv, 0, 0
    while k < cps.size:
        while k < cps.size and cps[k] == t:
            out[k] = f
            k += 1
        f *= (Z + gv) / Z
        Z += gv + hv
        t += 1
    return out


@dataclass
class CondensateRow:
    eps: float
    n: int
    empirical: float
    std_error: float
    predicted: float
    excess: float


@dataclass
class CondensateTable:
    rows: list
    regime: str
    lam: float
    condensate_mass: float | None
    monotone: dict

    def row(self, eps, n):
        for r in self.rows:
            if r.eps == eps and r.n == n:
                return r
        raise KeyError((eps, n))


def condensate_probe(model, dom, law, eps_list, n_list, replicas, master_seed=0, threads=None):
    """Fraction of edges whose parent weight lies in M_eps, at each n in n_list,
    against psi_mu(M_eps) evaluated at the limit growth rate.

    Under condensation the rate is g~* and the limiting condensate mass is
    reported; a non-condensing model serves as a control with rate lambda*.
    Checkpoints are prefixes of the same trees.
    """
    report = classify_regime(model, law)
    if report.regime == BOUNDARY:
        raise PreconditionError("no prediction at the regime boundary")
    lam = limit_lambda(model, law, report)
    n_list = sorted(int(x) for x in n_list)
    n_max = n_list[-1]
    sets = [dom.m_epsilon(e) for e in eps_list]
    predicted = [psi_mass(model, law, s, lam) for s in sets]

    def one(r):
        run = grow_one(model, law, n_max, replica_rng(master_seed, r), bins=1, k_max=1,
                       keep_edges=True)
        w, par = run.tree.weight, run.tree.parent
        pw = w[par[1:]]
        res = np.empty((len(sets), len(n_list)))
        for i, s in enumerate(sets):
            cum = np.cumsum(np.asarray(s.contains(pw), dtype=np.int64))
            res[i] = [cum[t - 1] / t for t in n_list]
        return res

    data = np.array(parallel_map(one, range(replicas), threads))
    rows, mono = [], {}
    for i, e in enumerate(eps_list):
        excess_seq = []
        for j, t in enumerate(n_list):
            vals = data[:, i, j]
            se = float(vals.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else 0.0
            emp = float(vals.mean())
            ex = emp / predicted[i] if predicted[i] > 0 else np.inf
            rows.append(CondensateRow(float(e), t, emp, se, float(predicted[i]), float(ex)))
            excess_seq.append(ex)
        mono[float(e)] = bool(np.all(np.diff(excess_seq) >= 0))
    mass = condensate_mass(model, law, report) if report.regime == CONDENSATION else None
    return CondensateTable(rows, report.regime, float(lam), mass, mono)
