"""``treeprofile`` command line: constants, exact tables, simulation and checks.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage
errors (bad flags, violated preconditions, refused parameter ranges).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .io import RunManifest, to_json, write_csv, write_json
from .model import ModelParams
from .rng import DEFAULT_SEED

EXACT_CAP = 20000
SIM_CAP = 10**6


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """``"re,im"`` or ``"re"`` to a complex number."""
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    m: int
    t: int
    seed: int
    workers: int
    out: str | None
    n: int | None = None
    nmax: int | None = None
    k: int | None = None
    kmax: int | None = None
    alpha: float | None = None
    beta: float | None = None
    z: complex | None = None
    reps: int | None = None
    depth: int | None = None
    tol: float = 1e-12
    external: bool = False
    types: bool = False
    override_range: bool = False
    scenarios: tuple = ()

    @classmethod
    def from_args(cls, ns):
        d = {k: v for k, v in vars(ns).items() if k in cls.__dataclass_fields__}
        d["scenarios"] = tuple(getattr(ns, "scenarios", ()) or ())
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        for name in ("n", "nmax", "reps"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"--{name} must be >= 1")
        for name in ("k", "kmax", "depth"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise UsageError(f"--{name} must be >= 0")
        if self.beta is not None and not self.beta > 0:
            raise UsageError("--beta must be > 0")
        if self.alpha is not None and not self.alpha > 0:
            raise UsageError("--alpha must be > 0")
        if not self.tol > 0:
            raise UsageError("--tol must be > 0")

    def echo(self):
        d = dict(self.__dict__)
        if d["z"] is not None:
            d["z"] = [d["z"].real, d["z"].imag]
        d["scenarios"] = list(d["scenarios"])
        return d

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.m, self.t)


def _outdir(cfg: RunConfig) -> Path:
    return Path(cfg.out) if cfg.out else Path("treeprofile-out") / cfg.command


# -- commands --------------------------------------------------------------------


def cmd_constants(cfg: RunConfig, man: RunManifest):
    from .spectral import all_roots, alpha_of_beta, critical_constants, lambda1_derivs, lambda1_real

    p = cfg.params
    cc = critical_constants(p, cfg.tol)
    out = cc.as_dict()
    rows = []
    for beta in np.round(np.linspace(0.1, 3.0, 30), 10):
        lp, lpp = lambda1_derivs(p, beta)
        rows.append([beta, lambda1_real(p, beta), alpha_of_beta(p, beta), lp, lpp])
    out["lambda1_table"] = {"columns": ["beta", "lambda1", "alpha", "lambda1_p", "lambda1_pp"], "rows": rows}
    probes = [cfg.z] if cfg.z is not None else [complex(-0.3, 0.2), complex(0.5, 0.5), complex(-1.0, 0.0)]
    out["dominant_root_probes"] = []
    for z in probes:
        dr = all_roots(p, z, cfg.tol)
        out["dominant_root_probes"].append({
            "z": [z.real, z.imag], "lambda1": [dr.lambda1.real, dr.lambda1.imag],
            "gap": dr.gap, "simple": dr.simple, "max_residual": float(dr.residuals.max()),
        })
    man.add_check("ordering", cc.alpha_minus < cc.alpha0 < cc.alpha_max < cc.alpha_plus)
    print(to_json(out))
    if cfg.out:
        man.add_file(write_json(_outdir(cfg) / "constants.json", out))


def cmd_exact(cfg: RunConfig, man: RunManifest):
    from .exact import expected_external_table, expected_profile_table, second_moment_W, expected_W_many

    p = cfg.params
    N = cfg.nmax if cfg.nmax is not None else (cfg.n if cfg.n is not None else 100)
    if N > EXACT_CAP:
        raise UsageError(f"--nmax {N} exceeds the exact-table cap {EXACT_CAP}")
    K = cfg.kmax if cfg.kmax is not None else N
    tab = (expected_external_table if cfg.external else expected_profile_table)(p, N, K)
    out = _outdir(cfg)
    top = (lambda n: n + 1) if cfg.external else (lambda n: n - 1)
    rows = ([n, k, tab.mean[n, k]] for n in range(N + 1) for k in range(min(K, max(top(n), 0)) + 1))
    name = "external_mean.csv" if cfg.external else "mean.csv"
    man.add_file(write_csv(out / name, ["n", "k", "mean"], rows))
    if not cfg.external and K >= N - 1:
        err = float(np.max(np.abs(tab.mean.sum(axis=1) - np.arange(N + 1))))
        man.add_check("row sums", err <= 1e-9 * max(N, 1), max_abs=err)
    if cfg.z is not None:
        g = expected_W_many(p, [cfg.z], N, external=cfg.external)[:, 0]
        man.add_file(write_csv(out / "w.csv", ["n", "re", "im"], ([n, g[n]] for n in range(N + 1))))
        if not cfg.external:
            sm = second_moment_W(p, cfg.z, N)
            man.add_file(write_csv(out / "m2.csv", ["n", "m2"], ([n, sm.g2[n]] for n in range(N + 1))))
            cs = bool(np.all(np.abs(sm.g) ** 2 <= sm.g2 * (1 + 1e-9) + 1e-12))
            man.add_check("cauchy-schwarz", cs)
    print(to_json({"out": str(out), "files": man.files}))


def cmd_simulate(cfg: RunConfig, man: RunManifest):
    from .exact import expected_external_table, expected_profile_table
    from .model import sample_external_profile, sample_profile, sample_type_profile
    from .rng import run_replicates

    p = cfg.params
    n = cfg.n if cfg.n is not None else 1000
    reps = cfg.reps if cfg.reps is not None else 1000
    if n > SIM_CAP:
        raise UsageError(f"--n {n} exceeds the simulation cap {SIM_CAP}")
    kmax = cfg.kmax if cfg.kmax is not None else (n if cfg.external else max(n - 1, 0))
    out = _outdir(cfg)
    if cfg.types:
        def one(g):
            types, counts = sample_type_profile(p, n, g, kmax)
            return np.vstack([types, counts[None, :]])
        data = np.array(run_replicates(one, reps, cfg.seed, cfg.workers), dtype=float)
        types, counts = data[:, :-1, :], data[:, -1, :]
        ident = np.tensordot(np.arange(p.m), types, axes=([0], [1])) - counts
        resid = np.abs(ident).max(axis=0)
        rows = []
        for k in range(kmax + 1):
            rows.append([k] + [types[:, j, k].mean() for j in range(p.m)] + [counts[:, k].mean(), resid[k]])
        header = ["k"] + [f"type{j}" for j in range(p.m)] + ["keys", "identity_residual"]
        man.add_file(write_csv(out / "types.csv", header, rows))
        man.add_check("type identity", bool(np.all(resid == 0)))
        print(to_json({"out": str(out), "files": man.files, "identity_max": float(resid.max())}))
        return
    draw = sample_external_profile if cfg.external else sample_profile
    data = np.array(run_replicates(lambda g: draw(p, n, g, kmax=kmax), reps, cfg.seed, cfg.workers),
                    dtype=float)
    table = (expected_external_table if cfg.external else expected_profile_table)(p, n, kmax)
    mean, var = data.mean(axis=0), data.var(axis=0, ddof=1) if reps > 1 else np.zeros(kmax + 1)
    se = np.sqrt(var / reps)
    rows = [[k, mean[k], var[k], se[k], table.mean[n, k]] for k in range(kmax + 1)]
    man.add_file(write_csv(out / ("external_profile.csv" if cfg.external else "profile.csv"),
                           ["k", "mc_mean", "mc_var", "se", "dp_mean"], rows))
    k = cfg.k if cfg.k is not None else min(kmax, int(math.floor(2 * math.log(max(n, 2)))))
    z = (mean[k] - table.mean[n, k]) / se[k] if se[k] > 0 else 0.0
    ok = abs(z) <= 4 if se[k] > 0 else mean[k] == table.mean[n, k]
    man.add_check("mc vs dp", ok, k=k, mc=mean[k], dp=table.mean[n, k], se=se[k], z=z)
    print(to_json({"out": str(out), "files": man.files, "k": k, "z": z}))


def cmd_limit(cfg: RunConfig, man: RunManifest):
    from .limit import sample_Y_many, variance_Y, variance_Y_depth
    from .spectral import critical_constants

    p = cfg.params
    z = cfg.z if cfg.z is not None else complex(cfg.beta if cfg.beta is not None else 1.0)
    K = cfg.depth if cfg.depth is not None else 12
    reps = cfg.reps if cfg.reps is not None else 10000
    ys = sample_Y_many(p, z, K, reps, cfg.seed, cfg.workers).values
    out = _outdir(cfg)
    if np.iscomplexobj(ys) and np.any(ys.imag != 0):
        man.add_file(write_csv(out / "samples.csv", ["re", "im"], ([y] for y in ys)))
    else:
        ys = ys.real
        man.add_file(write_csv(out / "samples.csv", ["y"], ([y] for y in ys)))
    mean = complex(ys.mean())
    report = {"z": [z.real, z.imag], "depth": K, "reps": reps,
              "mean": mean.real if not np.iscomplexobj(ys) else mean}
    se = float(np.sqrt(np.var(ys, ddof=1) / reps)) if reps > 1 else 0.0
    if z.imag == 0 and z.real > 0:
        beta = z.real
        report["variance"] = float(np.var(ys, ddof=1)) if reps > 1 else 0.0
        report["variance_depth_K"] = variance_Y_depth(p, beta, K)
        lo, hi = critical_constants(p).J
        report["variance_closed_form"] = variance_Y(p, beta) if lo < beta < hi else math.inf
    zm = abs(mean - 1) / se if se > 0 else 0.0
    man.add_check("mean one", zm <= 4 if se > 0 else abs(mean - 1) <= 1e-12,
                  z_score=zm)
    man.add_file(write_json(out / "report.json", report))
    print(to_json(report))


def cmd_compare(cfg: RunConfig, man: RunManifest):
    from .limit import empirical_distance, mc_profile_ratio, sample_Y_many
    from .spectral import beta_of_alpha, critical_constants

    p = cfg.params
    if cfg.alpha is None:
        raise UsageError("compare needs --alpha")
    cc = critical_constants(p)
    lo, hi = cc.J_prime if cfg.external else cc.I_prime
    label = "J'" if cfg.external else "I'"
    if not lo < cfg.alpha < hi and not cfg.override_range:
        raise UsageError(
            f"alpha = {cfg.alpha} is outside {label} = ({lo:.6g}, {hi:.6g}); the normalised "
            f"{'external' if cfg.external else 'internal'} profile converges to Y(beta(alpha)) only "
            f"for alpha in {label} (functional limit theorem range). Pass --override-range to run anyway.")
    beta, _ = beta_of_alpha(p, cfg.alpha)
    nmax = cfg.nmax if cfg.nmax is not None else 10**5
    ladder = [n for n in (10**3, 10**4, 10**5, 10**6) if n <= nmax] or [nmax]
    reps = cfg.reps if cfg.reps is not None else 2000
    K = cfg.depth if cfg.depth is not None else 12
    out = _outdir(cfg)
    y = sample_Y_many(p, beta, K, max(reps, 100) * 4, cfg.seed + 1, cfg.workers).values.real
    man.add_file(write_csv(out / "limit_samples.csv", ["y"], ([v] for v in y)))
    report = {"alpha": cfg.alpha, "beta": beta, "depth": K, "ladder": []}
    ks = []
    for j, n in enumerate(ladder):
        r = mc_profile_ratio(p, n, cfg.alpha, reps, cfg.seed + 10 * (j + 1), cfg.workers,
                             external=cfg.external)
        d = empirical_distance(r.ratios, y, 2.0)
        ks.append(d.ks)
        man.add_file(write_csv(out / f"ratios_n{n}.csv", ["ratio"], ([v] for v in r.ratios)))
        report["ladder"].append({"n": n, "k": r.k, "ks": d.ks, "ell_2": d.ell_s, "mean": r.ratios.mean()})
    man.add_check("ks decreasing", all(b < a for a, b in zip(ks, ks[1:])), ks=ks)
    man.add_file(write_json(out / "distances.json", report))
    print(to_json(report))


def cmd_invert(cfg: RunConfig, man: RunManifest):
    from .asymptotics import cauchy_inversion
    from .exact import expected_profile_table
    from .scenarios import inversion_levels

    p = cfg.params
    n = cfg.n if cfg.n is not None else 200
    if n > EXACT_CAP:
        raise UsageError(f"--n {n} exceeds the exact-table cap {EXACT_CAP}")
    K = cfg.kmax if cfg.kmax is not None else inversion_levels(p, n)
    dp = expected_profile_table(p, n, K).mean[n, : K + 1]
    radii = [cfg.beta] if cfg.beta is not None else [0.5, 1.0, 1.5]
    rows, worst = [], 0.0
    for beta in radii:
        inv = cauchy_inversion(p, beta, n, K)
        err = float(np.max(np.abs(inv - dp)) / max(np.max(np.abs(dp)), 1e-300))
        worst = max(worst, err)
        rows += [[beta, k, inv[k], dp[k]] for k in range(K + 1)]
    out = _outdir(cfg)
    man.add_file(write_csv(out / "inversion.csv", ["beta", "k", "inverted", "dp"], rows))
    man.add_check("inversion", worst < 1e-9, max_rel=worst)
    print(to_json({"n": n, "K": K, "max_rel_error": worst}))


def cmd_check(cfg: RunConfig, man: RunManifest):
    from . import scenarios

    names = cfg.scenarios or ("all",)
    nums = sorted(scenarios.SCENARIOS) if "all" in names else []
    try:
        nums = nums or [scenarios.resolve(s) for s in names]
    except KeyError as exc:
        raise UsageError(f"unknown scenario {exc}; choose from {sorted(scenarios.NAMES)}") from None
    for num in nums:
        res = scenarios.run(num, cfg.seed, cfg.workers)
        print(res.line(), flush=True)
        man.add_check(f"{num}:{res.name}", res.passed, seconds=res.seconds, **res.measured)
    if cfg.out:
        man.write(_outdir(cfg))


COMMANDS = {
    "constants": cmd_constants,
    "exact": cmd_exact,
    "simulate": cmd_simulate,
    "limit": cmd_limit,
    "compare": cmd_compare,
    "invert": cmd_invert,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, default=2, help="branching factor (default 2)")
    common.add_argument("--t", type=int, default=0, help="pivot parameter (default 0)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"default {DEFAULT_SEED}")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--n", type=int)
    common.add_argument("--nmax", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--kmax", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--z", type=parse_complex, help="complex point as 're,im'")
    common.add_argument("--reps", type=int)
    common.add_argument("--depth", type=int)
    common.add_argument("--tol", type=float, default=1e-12)
    common.add_argument("--external", action="store_true")
    common.add_argument("--types", action="store_true")
    common.add_argument("--override-range", action="store_true")

    parser = argparse.ArgumentParser(prog="treeprofile", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "constants": "critical constants and dominant-root probes (JSON)",
        "exact": "exact mean profile, E W_n(z) and E|W_n(z)|^2 tables (CSV)",
        "simulate": "Monte Carlo profiles against the exact means",
        "limit": "draws of the fixed-point process Y",
        "compare": "distance of normalised profiles to Y over an n ladder",
        "invert": "Cauchy inversion of E W_n against the exact table",
        "check": "run named verification scenarios",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        if name == "check":
            sp.add_argument("scenarios", nargs="*", help="numbers or names; default all")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(ns)
        man = RunManifest(cfg.command, cfg.echo())
        COMMANDS[cfg.command](cfg, man)
    except (UsageError, PreconditionError) as exc:
        print(f"treeprofile {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    if cfg.command != "check" and (cfg.out or man.files):
        man.write(_outdir(cfg))
    for c in man.checks:
        if not c["passed"]:
            print(f"check failed: {c['name']}", file=sys.stderr)
    return 0 if man.passed else 1


if __name__ == "__main__":
    sys.exit(main())
