"""Acceptance checks shared by the test suite and the `validate` subcommand.

Every check runs at its stated scale and returns a CheckResult; tolerances can
be overridden per check through a suite file.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as beta_fn

from .errors import ConfigError
from .fitness import DominatingStructure, FitnessModel
from .simulator import RunConfig, condensate_probe, coupled_grow, deterministic_z_recursion, grow, martingale_probe, replica_rng
from .sweep import alpha_sweep, phase_boundary
from .theory import CONDENSATION, NON_CONDENSATION, criterion, ct_oracle, ct_predicted, companion_path_check, malthusian, psi_mass
from .urns import build_urn_d, build_urn_e, check_urn_d_formulas, check_urn_e_formulas, discretize, leading_eig
from .weightlaw import IntervalUnion, WeightLaw, closed

# root of lam * ln(lam / (lam - 1)) = 2, computed with mpmath.findroot at 30 digits
BB_UNIFORM_ROOT = 1.2550009749159752657749


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str
    target: str
    tolerance: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} {self.name}: measured {self.measured}; target {self.target}; "
                f"tolerance {self.tolerance} ({self.seconds:.1f} s)")


def _g(x):
    return f"{x:.6g}"


def _pa():
    return FitnessModel.classic_pa()


def _bb():
    return FitnessModel.bianconi_barabasi()


def _rrt():
    return FitnessModel.random_recursive()


def _path_configs():
    u = WeightLaw.uniform()
    lam_bb = malthusian(_bb(), u)[0]
    return [("rrt", _rrt(), u, 1.0), ("pa", _pa(), u, 2.0), ("bb", _bb(), u, lam_bb)]


# individual checks ------------------------------------------------------------

def check_rrt(tol, seed, threads):
    model, law = _rrt(), WeightLaw.uniform()
    lam = malthusian(model, law)[0]
    t0 = time.perf_counter()
    res = grow(RunConfig(model, law, 200_000, 20, seed, bins=1, k_max=16), threads)
    elapsed = time.perf_counter() - t0
    k = np.arange(1, 9)
    err = float(np.max(np.abs(res.measures.degree_tail()[k] - 0.5 ** k)))
    ok = abs(lam - 1.0) <= tol["lambda"] and err <= tol["tail"] and elapsed < tol["runtime"]
    return CheckResult("rrt", ok, f"lambda={lam!r}, max tail error={_g(err)}, {elapsed:.1f} s",
                       "lambda=1, N>=k/n=2^-k (k<=8)",
                       f"{tol['lambda']}, {tol['tail']}, <{tol['runtime']} s",
                       details={"lambda": lam, "tail_error": err, "runtime": elapsed})


def check_pa(tol, seed, threads):
    model, law = _pa(), WeightLaw.uniform()
    n = 200_000
    res = grow(RunConfig(model, law, n, 20, seed, bins=1, k_max=64), threads, retain=True)
    z_exact = all(t.Z == 2 * n + 1 for t in res.trees)
    tail = res.measures.degree_tail()
    k = np.arange(1, 11)
    err = float(np.max(np.abs(tail[k] - 2.0 / ((k + 1) * (k + 2)))))
    # graph degree d = children + 1 (the edge to the parent), d in [5, 50]
    d = np.arange(5, 51)
    pmf = tail[d - 1] - tail[d]
    keep = pmf > 0
    slope = float(np.polyfit(np.log(d[keep]), np.log(pmf[keep]), 1)[0])
    ok = z_exact and err <= tol["tail"] and abs(slope + 3.0) <= tol["slope"]
    return CheckResult("pa", ok, f"Z exact={z_exact}, max tail error={_g(err)}, slope={_g(slope)}",
                       "Z_n=2n+1, N>=k/n=2/((k+1)(k+2)) (k<=10), slope -3",
                       f"exact, {tol['tail']}, {tol['slope']}",
                       details={"z_exact": z_exact, "tail_error": err, "slope": slope})


def check_bb_lambda(tol, seed, threads):
    model, law = _bb(), WeightLaw.uniform()
    lam = malthusian(model, law)[0]
    res = grow(RunConfig(model, law, 1_000_000, 1, seed, bins=1, k_max=1), threads)
    z = float(res.measures.z_path[1][-1])
    ok = abs(lam - BB_UNIFORM_ROOT) <= tol["lambda"] and abs(z - lam) <= tol["z"]
    return CheckResult("bb_lambda", ok, f"lambda*={_g(lam)}, Z/n={_g(z)}",
                       f"root {BB_UNIFORM_ROOT:.10f}, Z/n=lambda*",
                       f"{tol['lambda']}, {tol['z']}", details={"lambda": lam, "z_over_n": z})


def check_edge_measure(tol, seed, threads):
    model, law = _bb(), WeightLaw.uniform()
    lam = malthusian(model, law)[0]
    A = IntervalUnion.of(closed(0.0, 0.5))
    psi = psi_mass(model, law, A, lam)
    target2 = psi * law.measure(A)
    res = grow(RunConfig(model, law, 1_000_000, 10, seed, bins=64, k_max=1), threads)
    m = res.measures
    emp, emp2 = m.mass(0.0, 0.5), m.mass2((0.0, 0.5), (0.0, 0.5))
    ok = abs(emp - psi) <= tol["xi"] and abs(emp2 - target2) < tol["xi2"]
    return CheckResult("edge_measure", ok, f"Xi/n={_g(emp)}, Xi2/n={_g(emp2)}",
                       f"{_g(psi)}, {_g(target2)}", f"{tol['xi']}, {tol['xi2']}",
                       details={"xi": emp, "xi2": emp2, "psi": psi, "psi_mu": target2})


def check_companion_path(tol, seed, threads):
    rng = replica_rng(seed, 0)
    ok, parts, details = True, [], {}
    for name, model, law, lam in _path_configs():
        r = companion_path_check(model, law, 0.5, lam, n_samples=100_000, rng=rng, tail_target=1e-3)
        good = r.tail_bound < 1e-3 and r.gap <= r.tail_bound + tol["sigma"] * r.std_error + 1e-12
        details[name] = {"gap": r.gap, "tail_bound": r.tail_bound, "se": r.std_error, "K": r.K}
        if name in ("rrt", "pa"):
            sharp = companion_path_check(model, law, 0.5, lam, tail_target=tol["closed"] / 2)
            closed_err = max(sharp.gap, abs(sharp.rhs - 1.0))
            good = good and closed_err <= tol["closed"]
            details[name]["closed_error"] = closed_err
        ok = ok and good
        parts.append(f"{name} gap={_g(r.gap)}")
    return CheckResult("companion_path", ok, ", ".join(parts),
                       "gap <= tail + 3 se; rrt and pa equal 1",
                       f"tail<1e-3, {tol['sigma']} se, {tol['closed']}", details=details)


def check_regime(tol, seed, threads):
    model = _bb()
    worst = 0.0
    for alpha in (0.5, 1.0, 2.0, 4.0):
        crit = criterion(model, WeightLaw.beta_poly(alpha))[0]
        oracle = (alpha + 1.0) * beta_fn(2.0, alpha)
        worst = max(worst, abs(crit - oracle), abs(oracle - 1.0 / alpha))
    grid = np.round(np.arange(0.2, 4.0 + 1e-9, 0.1), 10)
    rows = alpha_sweep(grid, model)
    edge = phase_boundary(rows)
    by = {r.param: r for r in rows}
    rows_ok = (by[0.5].regime == NON_CONDENSATION and by[2.0].regime == CONDENSATION
               and abs(by[2.0].condensate_mass - 0.5) <= tol["criterion"])
    ok = worst <= tol["criterion"] and edge is not None and abs(edge - 1.0) <= tol["grid"] and rows_ok
    return CheckResult("regime", ok, f"max criterion error={_g(worst)}, boundary at {edge}",
                       "criterion=1/alpha, boundary alpha=1",
                       f"{tol['criterion']}, {tol['grid']}",
                       details={"criterion_error": worst, "boundary": edge})


def check_condensation(tol, seed, threads):
    model = _bb()
    ns = [10_000, 100_000, 1_000_000]
    eps = 0.05
    law = WeightLaw.beta_poly(2.0)
    tab = condensate_probe(model, DominatingStructure(model, law), law, [eps], ns, 10, seed, threads)
    excess = [tab.row(eps, n).excess for n in ns]
    u = WeightLaw.uniform()
    ctrl = condensate_probe(model, DominatingStructure(model, u), u, [eps], [ns[-1]], 10, seed + 1,
                            threads)
    c = ctrl.row(eps, ns[-1]).excess
    mono = bool(np.all(np.diff(excess) >= 0))
    ok = excess[-1] >= tol["factor"] and mono and tol["control_lo"] <= c <= tol["control_hi"]
    return CheckResult("condensation", ok,
                       f"excess {', '.join(_g(e) for e in excess)}, monotone={mono}, control={_g(c)}",
                       f"excess >= {tol['factor']} at n=1e6 and increasing; control in "
                       f"[{tol['control_lo']}, {tol['control_hi']}]",
                       "as stated", details={"excess": excess, "monotone": mono, "control": c,
                                             "predicted_mass": tab.condensate_mass})


def check_urn_e(tol, seed, threads):
    model = _bb()
    law = WeightLaw.atoms([0.5, 1.0], [0.5, 0.5])
    lam_star = malthusian(model, law)[0]
    urn = build_urn_e(discretize(model, law, 2))
    eig = leading_eig(urn)
    rep = check_urn_e_formulas(urn, eig)
    resid = max(rep.residual_singletons, rep.residual_pairs)
    atom_ok = abs(eig.lam - lam_star) <= tol["lambda"] and resid < tol["residual"] and rep.B == 0 and rep.E == 0
    lams, slack = [], []
    for m in (2, 3, 4):
        u = build_urn_e(discretize(model, WeightLaw.uniform(), m))
        e = leading_eig(u)
        r = check_urn_e_formulas(u, e)
        lams.append(e.lam)
        slack.append(r.B + r.E)
    mono = bool(np.all(np.diff(lams) <= 0) and np.all(np.diff(slack) <= 0))
    ok = atom_ok and mono
    return CheckResult("urn_e", ok,
                       f"|lambda-lambda*|={_g(abs(eig.lam - lam_star))}, residual={_g(resid)}, "
                       f"B={rep.B}, E={rep.E}, lambda_m={[round(x, 6) for x in lams]}, "
                       f"B+E={[round(x, 6) for x in slack]}",
                       "lambda=lambda*, B=E=0, both sequences nonincreasing",
                       f"{tol['lambda']}, {tol['residual']}",
                       details={"lambda_m": lams, "slack": slack, "residual": resid})


def check_urn_d(tol, seed, threads):
    model = FitnessModel.constant(1.0, 1.0)
    law = WeightLaw.atoms([1.0], [1.0])
    disc = discretize(model, law, 1)
    lams, rep4 = [], None
    for k in (2, 4, 6):
        urn = build_urn_d(disc, k)
        eig = leading_eig(urn)
        lams.append(eig.lam)
        if k == 4:
            rep4 = check_urn_d_formulas(urn, eig)
    slack = 1e-12
    dist = [abs(x - 2.0) for x in lams]
    trend = (all(b <= a + slack for a, b in zip(lams, lams[1:])) and min(lams) >= 2.0 - slack
             and all(b <= a + slack for a, b in zip(dist, dist[1:])))
    ok = (rep4.residual_closed_form < tol["closed"] and rep4.residual_overflow < tol["overflow"]
          and rep4.residual_degree_exact is not None and rep4.residual_degree_exact <= tol["degree"]
          and trend)
    return CheckResult("urn_d", ok,
                       f"closed-form residual={_g(rep4.residual_closed_form)}, overflow residual="
                       f"{_g(rep4.residual_overflow)}, degree residual={_g(rep4.residual_degree_exact)}, "
                       f"lambda'={[float(x) for x in lams]}",
                       "closed forms hold; lambda' nonincreasing toward 2",
                       f"{tol['closed']}, {tol['overflow']}, {tol['degree']}",
                       details={"lambda": lams, "report": rep4.to_dict()})


def check_coupling(tol, seed, threads):
    model = _bb()
    law = WeightLaw.beta_poly(2.0)
    dom = DominatingStructure(model, law)
    t0 = time.perf_counter()
    bad = 0
    worst = 0.0
    for s in range(50):
        ct = coupled_grow(model, dom, 0.05, 10_000, replica_rng(seed, s))
        bad += ct.violations + ct.final_violations
        worst = max(worst, ct.worst_ratio)
    elapsed = time.perf_counter() - t0
    ok = bad <= tol["violations"] and elapsed < tol["runtime"]
    return CheckResult("coupling", ok, f"violations={bad}, worst ratio={_g(worst)}, {elapsed:.1f} s",
                       "0 violations over 50 seeds", f"<={tol['violations']}, <{tol['runtime']} s",
                       details={"violations": bad, "runtime": elapsed})


def check_martingale(tol, seed, threads):
    model, law = _pa(), WeightLaw.uniform()
    cps = [10, 100, 1000, 10_000]
    s = martingale_probe(model, law, 0, 10_000, 10_000, replica_rng(seed, 0), cps)
    pair = s.max_pairwise_z()
    ref = deterministic_z_recursion(model, cps)
    z_f = float(np.max(np.abs(s.fitness_mean - ref) / s.fitness_se))
    z_m = float(np.max(np.abs(s.mean - float(model.h(0.0))) / s.std_error))
    ok = pair <= tol["sigma"] and z_f <= tol["sigma"] and z_m <= tol["sigma"]
    return CheckResult("martingale", ok,
                       f"means=[{', '.join(_g(x) for x in s.mean)}], pairwise z={_g(pair)}, "
                       f"recursion z={_g(max(z_f, z_m))}",
                       "constant mean, matches recursion", f"{tol['sigma']} se",
                       details={"pairwise_z": pair, "fitness_z": z_f, "mean_z": z_m})


def check_ct_oracle(tol, seed, threads):
    worst, parts = 0.0, []
    for i, (name, model, law, lam) in enumerate(_path_configs()):
        rng = replica_rng(seed, i)
        exp_h = ct_oracle(model, law, 0.5, rate=lam, n_reps=100_000, rng=rng)
        fixed = ct_oracle(model, law, 0.5, t=1.0, n_reps=tol["fixed_reps"], rng=rng)
        e1 = abs(exp_h.mean / exp_h.predicted - 1.0)
        e2 = abs(fixed.mean / ct_predicted(model, law, 0.5, t=1.0) - 1.0)
        worst = max(worst, e1, e2)
        parts.append(f"{name} {_g(e1)}/{_g(e2)}")
    ok = worst <= tol["rel"]
    return CheckResult("ct_oracle", ok, "relative errors (exp/fixed) " + ", ".join(parts),
                       "h/(lambda-g~) and fixed-horizon mean", f"{tol['rel']} relative",
                       details={"worst": worst})


CHECKS = {
    "rrt": (check_rrt, {"lambda": 1e-10, "tail": 0.01, "runtime": 30.0}),
    "pa": (check_pa, {"tail": 0.01, "slope": 0.3}),
    "bb_lambda": (check_bb_lambda, {"lambda": 1e-4, "z": 0.02}),
    "edge_measure": (check_edge_measure, {"xi": 0.02, "xi2": 0.02}),
    "companion_path": (check_companion_path, {"sigma": 3.0, "closed": 1e-6}),
    "regime": (check_regime, {"criterion": 1e-6, "grid": 0.1}),
    "condensation": (check_condensation, {"factor": 3.0, "control_lo": 0.8, "control_hi": 1.2}),
    "urn_e": (check_urn_e, {"lambda": 1e-8, "residual": 1e-8}),
    "urn_d": (check_urn_d, {"closed": 1e-8, "overflow": 1e-10, "degree": 1e-6}),
    "coupling": (check_coupling, {"violations": 0, "runtime": 60.0}),
    "martingale": (check_martingale, {"sigma": 3.0}),
    "ct_oracle": (check_ct_oracle, {"rel": 0.01, "fixed_reps": 400_000}),
}
CHECK_ORDER = list(CHECKS)


def tolerances_for(name, overrides=None):
    base = dict(CHECKS[name][1])
    for k, v in (overrides or {}).items():
        if k not in base:
            raise ConfigError(f"check {name!r} has no tolerance {k!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
            raise ConfigError(f"check {name!r}: tolerance {k!r} must be a number")
        base[k] = type(base[k])(v) if isinstance(base[k], int) and float(v).is_integer() else v
    return base


def run_check(name, overrides=None, seed=0, threads=None):
    if name not in CHECKS:
        raise ConfigError(f"unknown check {name!r}")
    fn, _ = CHECKS[name]
    tol = tolerances_for(name, overrides)
    t0 = time.perf_counter()
    res = fn(tol, seed + CHECK_ORDER.index(name), threads)
    res.seconds = time.perf_counter() - t0
    return res


def parse_suite(text, path=None):
    """A suite is {"checks": [names] | "all", "tolerances": {name: {key: value}}}."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, path=path, line=exc.lineno, column=exc.colno) from None
    if not isinstance(raw, dict):
        raise ConfigError("suite must be an object", path=path, line=1, column=1)
    unknown = set(raw) - {"checks", "tolerances", "seed"}
    if unknown:
        raise ConfigError(f"unknown suite keys {sorted(unknown)}", path=path)
    checks = raw.get("checks", [])
    if checks == "all":
        checks = list(CHECK_ORDER)
    if not isinstance(checks, list) or not checks:
        raise ConfigError("no checks", path=path)
    for c in checks:
        if c not in CHECKS:
            raise ConfigError(f"unknown check {c!r}", path=path)
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("tolerances must be an object", path=path)
    for name, over in tols.items():
        if name not in CHECKS or not isinstance(over, dict):
            raise ConfigError(f"bad tolerance entry {name!r}", path=path)
        tolerances_for(name, over)
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer", path=path)
    return {"checks": checks, "tolerances": tols, "seed": seed}


def run_suite(checks, tolerances=None, seed=0, threads=None, report=None):
    results = []
    for name in checks:
        r = run_check(name, (tolerances or {}).get(name), seed, threads)
        if report is not None:
            report(r)
        results.append(r)
    return results


def format_table(results):
    head = ("check", "measured", "target", "tolerance", "verdict")
    rows = [head] + [(r.name, r.measured, r.target, r.tolerance, "PASS" if r.passed else "FAIL")
                     for r in results]
    return "\n".join(" | ".join(row) for row in rows)
