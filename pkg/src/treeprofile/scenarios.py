"""The named verification scenarios behind ``treeprofile check``.

Each scenario returns a :class:`ScenarioResult` with the measured values and
a pass/fail flag. The CLI and the acceptance tests run the same code.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (
    cauchy_inversion,
    estimate_amplitude,
    mean_profile_asymptotic,
    second_moment_exponent_check,
)
from .exact import (
    enumerate_profile_distribution,
    expected_profile_table,
    expected_W_many,
    second_moment_W,
)
from .limit import (
    empirical_distance,
    mc_profile_ratio,
    sample_Y_many,
    variance_denominator,
    variance_Y,
    variance_Y_depth,
)
from .model import ModelParams, sample_profile, sample_type_profile
from .rng import DEFAULT_SEED, run_replicates
from .spectral import (
    arc_monotonicity_probe,
    beta_of_alpha,
    critical_constants,
    lambda1,
    lambda1_derivs,
)

BST = ModelParams(2, 0)
ORACLE_MODELS = ((2, 0), (2, 1), (3, 0))
ORACLE_Z = (0.5 + 0.5j, -0.7 + 0.2j, 1.3 - 0.4j, 2j, -1.1 + 0j)
ORACLE_REAL_Z = (0.5, 1.5, -0.8)
EXPONENT_PROBES = (1.2, 0.8, 1.5, 1j, 0.7 + 0.7j, 2.0)
ARC_PHIS = 0.2 * np.arange(1, 16)
EXTERNAL_ALPHA = 0.8
LADDER = (10**3, 10**4, 10**5)


@dataclass
class ScenarioResult:
    number: int
    name: str
    passed: bool = True
    measured: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    seconds: float = 0.0

    def gate(self, label, ok, **values):
        self.passed = self.passed and bool(ok)
        self.measured[label] = {"ok": bool(ok), **values}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [k for k, v in self.measured.items() if not v.get("ok", True)]
        tail = f"; failed gates: {', '.join(failed)}" if failed else ""
        return f"criterion {self.number:2d} [{self.name}] {status} ({self.seconds:.1f}s{tail})"


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if a.size else 0.0


def oracle(seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    res = ScenarioResult(1, "oracle")
    worst_mean = worst_w = worst_w2 = 0.0
    for m, t in ORACLE_MODELS:
        p = ModelParams(m, t)
        tab = expected_profile_table(p, 10)
        G = expected_W_many(p, ORACLE_Z, 10)
        sm = {z: second_moment_W(p, z, 10) for z in ORACLE_REAL_Z}
        for n in range(11):
            dist = enumerate_profile_distribution(p, n)
            mean = np.array([float(x) for x in dist.mean()])
            worst_mean = max(worst_mean, _rel(tab.mean[n, : mean.size], mean),
                             float(np.max(np.abs(tab.mean[n, mean.size:]), initial=0.0)))
            for j, z in enumerate(ORACLE_Z):
                worst_w = max(worst_w, _rel(G[n, j], dist.moment_W(z)))
            for z in ORACLE_REAL_Z:
                worst_w2 = max(worst_w2, _rel(sm[z].g2[n], dist.second_moment_W(z)))
    res.gate("mean", worst_mean <= 1e-12, max_rel=worst_mean)
    res.gate("W", worst_w <= 1e-12, max_rel=worst_w)
    res.gate("W2", worst_w2 <= 1e-12, max_rel=worst_w2)
    return res


def bst_closed_forms(seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    res = ScenarioResult(2, "bst-closed-forms")
    rng = np.random.default_rng(seed)
    pts = list(rng.uniform(0.05, 3.0, 10)) + list(
        rng.uniform(0.1, 2.5, 10) * np.exp(1j * rng.uniform(-3.0, 3.0, 10)))
    err = max(abs(lambda1(BST, z) - 2 * z) for z in pts)
    res.gate("lambda1", err <= 1e-10, max_abs=err)
    d1 = d2 = 0.0
    for b in np.linspace(0.1, 3.0, 12):
        l1, l2 = lambda1_derivs(BST, b)
        d1, d2 = max(d1, abs(l1 - 2)), max(d2, abs(l2))
    res.gate("derivatives", d1 <= 1e-8 and d2 <= 1e-8, lambda1p_err=d1, lambda1pp_abs=d2)
    return res


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def constants(seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    res = ScenarioResult(3, "critical-constants")
    cc = critical_constants(BST)
    res.gate("alpha0", cc.alpha0 == 1.0, value=cc.alpha0)
    res.gate("alpha_max", cc.alpha_max == 2.0, value=cc.alpha_max)

    def f(x):
        return math.log(x / 2) - (x - 1) / x

    lm, lp = _bisect(f, 1e-6, 1.0), _bisect(f, 2.0, 20.0)
    res.gate("alpha_pm", abs(cc.alpha_minus - lm) <= 1e-8 and abs(cc.alpha_plus - lp) <= 1e-8,
             alpha_minus=cc.alpha_minus, alpha_plus=cc.alpha_plus, oracle=(lm, lp))
    r2 = math.sqrt(2)
    e1 = max(abs(cc.I_prime[0] - r2), abs(cc.I_prime[1] - 2 - r2))
    e2 = max(abs(cc.J_prime[0] - 2 + r2), abs(cc.J_prime[1] - 2 - r2))
    res.gate("I_prime", e1 <= 1e-9, value=cc.I_prime, err=e1)
    res.gate("J_prime", e2 <= 1e-9, value=cc.J_prime, err=e2)
    return res


def inversion_levels(params, n):
    """Levels 0..K with K = ceil(alpha_+ log n), the non-negligible part of the profile."""
    ap = critical_constants(params).alpha_plus
    return min(n - 1, math.ceil(ap * math.log(n))) if n > 1 else 0


def inversion(seed=DEFAULT_SEED, workers=1, models=ORACLE_MODELS, nmax=200) -> ScenarioResult:
    res = ScenarioResult(4, "cauchy-inversion")
    for m, t in models:
        p = ModelParams(m, t)
        tab = expected_profile_table(p, nmax)
        worst = 0.0
        for n in range(1, nmax + 1):
            K = inversion_levels(p, n)
            dp = tab.mean[n, : K + 1]
            for beta in (0.5, 1.0, 1.5):
                inv = cauchy_inversion(p, beta, n, K)
                worst = max(worst, float(np.max(np.abs(inv - dp)) / np.max(np.abs(dp))))
        res.gate(f"m{m}t{t}", worst < 1e-9, max_rel=worst)
    return res


def saddle(seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    res = ScenarioResult(5, "saddle-trend")
    tabs = {n: expected_profile_table(BST, n, 40) for n in (300, 3000)}
    for alpha in (1.5, 2.0, 2.5):
        ratio = {}
        for n in (300, 3000):
            k = math.floor(alpha * math.log(n))
            est = mean_profile_asymptotic(BST, n, k)
            ratio[n] = est.prediction / tabs[n].mean[n, k]
        band = 0.7 <= ratio[3000] <= 1.3
        closer = abs(ratio[3000] - 1) < abs(ratio[300] - 1)
        res.gate(f"alpha={alpha}", band and closer, ratio_300=ratio[300], ratio_3000=ratio[3000],
                 in_band=band, closer=closer)
    return res


def exponent(seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    res = ScenarioResult(6, "second-moment-exponent")
    for m, t in ((2, 0), (2, 1)):
        p = ModelParams(m, t)
        for z in EXPONENT_PROBES:
            chk = second_moment_exponent_check(p, z, 2000)
            res.gate(f"m{m}t{t} z={complex(z)}", chk.slack <= 0.15,
                     slope=chk.slope, bound=chk.bound, slack=chk.slack)
    return res


def mc_dp(seed=DEFAULT_SEED, workers=1, n=2000, reps=20000) -> ScenarioResult:
    res = ScenarioResult(7, "mc-vs-dp")
    k = math.floor(2 * math.log(n))
    mean = expected_profile_table(BST, n, k).mean[n, k]
    x = np.array(run_replicates(lambda g: sample_profile(BST, n, g, kmax=k)[k], reps, seed, workers),
                 dtype=float)
    se = x.std(ddof=1) / math.sqrt(reps)
    z = (x.mean() - mean) / se
    res.gate("mean", abs(z) <= 4, k=k, mc=x.mean(), dp=mean, se=se, z=z)
    return res


def _var_se(y):
    c = y - y.mean()
    v = np.mean(c * c)
    return math.sqrt(max(np.mean(c**4) - v * v, 0.0) / y.size)


def limit(seed=DEFAULT_SEED, workers=1, reps=100000, K=12) -> ScenarioResult:
    res = ScenarioResult(8, "limit-process")
    for j, beta in enumerate((0.9, 1.2)):
        y = sample_Y_many(BST, beta, K, reps, seed + 101 + j, workers).values.real
        se = y.std(ddof=1) / math.sqrt(reps)
        zm = (y.mean() - 1) / se
        res.gate(f"mean beta={beta}", abs(zm) <= 3, mean=y.mean(), se=se, z=zm)
        v, sev = y.var(ddof=1), _var_se(y)
        target = variance_Y(BST, beta)
        zv = (v - target) / sev
        res.gate(f"variance beta={beta}", abs(zv) <= 3, mc=v, closed_form=target, se=sev, z=zv,
                 depth_K_variance=variance_Y_depth(BST, beta, K))
    v1 = variance_Y(BST, 1.0)
    res.gate("variance at 1", abs(v1) <= 1e-12, value=v1)
    cc = critical_constants(BST)
    flips = []
    for edge in cc.J:
        lo, hi = variance_denominator(BST, edge - 1e-6), variance_denominator(BST, edge + 1e-6)
        flips.append(bool(lo * hi < 0))
    res.gate("denominator sign flip", all(flips), J=cc.J, flips=flips)
    return res


def _ks_ladder(res, params, alpha, beta, depth, reps, y_reps, seed, workers, external, final=None):
    y = sample_Y_many(params, beta, depth, y_reps, seed + 1, workers).values.real
    ks = []
    for j, n in enumerate(LADDER):
        r = mc_profile_ratio(params, n, alpha, reps, seed + 10 * (j + 1), workers, external=external)
        d = empirical_distance(r.ratios, y, 2.0)
        ks.append(d.ks)
        res.measured[f"n={n}"] = {"k": r.k, "ks": d.ks, "ell_2": d.ell_s, "ratio_var": r.ratios.var()}
    dec = all(b < a for a, b in zip(ks, ks[1:]))
    res.gate("ks decreasing", dec, ks=ks)
    if final is not None:
        res.gate("final ks", ks[-1] < final, ks=ks[-1], threshold=final)


def functional_proxy(seed=DEFAULT_SEED, workers=1, reps=5000, y_reps=100000) -> ScenarioResult:
    res = ScenarioResult(9, "limit-proxy")
    _ks_ladder(res, BST, 2.4, 1.2, 14, reps, y_reps, seed, workers, False, final=0.08)
    return res


def arc(seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    res = ScenarioResult(10, "arc-monotonicity")
    phis = np.concatenate([[0.0], ARC_PHIS])
    for m, t in ((2, 1), (3, 0)):
        p = ModelParams(m, t)
        for beta in (0.8, 1.0, 1.5):
            vals, dom, dec = arc_monotonicity_probe(p, beta, phis)
            steps = np.diff(vals[dom])
            res.gate(f"m{m}t{t} beta={beta}", dec, min_decrement=float(-steps.max()),
                     dominant_points=int(dom.sum()))
    return res


def external(seed=DEFAULT_SEED, workers=1, reps=5000, y_reps=100000) -> ScenarioResult:
    res = ScenarioResult(11, "external-and-types")
    bad = 0
    for j, (m, t) in enumerate(((2, 0), (3, 0), (3, 1), (4, 1))):
        p = ModelParams(m, t)

        def one(g, p=p):
            types, counts = sample_type_profile(p, 300, g)
            return int(np.count_nonzero(np.arange(p.m) @ types - counts))

        bad += sum(run_replicates(one, 2500, seed + 1000 + j, workers))
    res.gate("type identity", bad == 0, draws=10000, mismatched_levels=bad)
    amp = estimate_amplitude(BST, 1.0, 4000, external=True)
    g = expected_W_many(BST, [1.0], 4000, external=True)[:, 0].real
    ns = np.array([250, 500, 1000, 2000])
    e = g / np.maximum(np.arange(g.size), 1)
    diffs = np.abs(e[2 * ns] - e[ns])
    stab = bool(np.all(np.diff(diffs) < 0))
    res.gate("external amplitude", amp.E_real > 0 and stab, E_hat=amp.E_real, diffs=diffs)
    beta, _ = beta_of_alpha(BST, EXTERNAL_ALPHA)
    cc = critical_constants(BST)
    inside = cc.J_prime[0] < EXTERNAL_ALPHA < cc.J_prime[1] and not (
        cc.I_prime[0] < EXTERNAL_ALPHA < cc.I_prime[1])
    res.gate("alpha in J' minus I'", inside, alpha=EXTERNAL_ALPHA, beta=beta)
    _ks_ladder(res, BST, EXTERNAL_ALPHA, beta, 12, reps, y_reps, seed + 5000, workers, True)
    return res


SCENARIOS = {
    1: oracle,
    2: bst_closed_forms,
    3: constants,
    4: inversion,
    5: saddle,
    6: exponent,
    7: mc_dp,
    8: limit,
    9: functional_proxy,
    10: arc,
    11: external,
}
NAMES = {
    "oracle": 1,
    "bst-closed-forms": 2,
    "critical-constants": 3,
    "cauchy-inversion": 4,
    "saddle-trend": 5,
    "second-moment-exponent": 6,
    "mc-vs-dp": 7,
    "limit-process": 8,
    "limit-proxy": 9,
    "arc-monotonicity": 10,
    "external-and-types": 11,
}


def resolve(name) -> int:
    """Scenario number from a number or a name."""
    if isinstance(name, int) or str(name).isdigit():
        num = int(name)
        if num not in SCENARIOS:
            raise KeyError(name)
        return num
    return NAMES[str(name)]


# wall-clock budget per scenario in seconds
BUDGETS = {1: 10, 2: 1, 3: 1, 4: 30, 5: 60, 6: 60, 7: 60, 8: 60, 9: 300, 10: 5, 11: 180}


def run(number, seed=DEFAULT_SEED, workers=1) -> ScenarioResult:
    t0 = time.perf_counter()
    res = SCENARIOS[number](seed=seed, workers=workers)
    res.seconds = time.perf_counter() - t0
    res.gate("runtime", res.seconds < BUDGETS[number], seconds=res.seconds, budget=BUDGETS[number])
    return res
