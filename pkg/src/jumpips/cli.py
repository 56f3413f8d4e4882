"""Command line entry point: ``jumpips <subcommand> --config run.ini``.

simulate / thinning / glauber write trajectory.csv, events.csv, summary.json;
energy, verify and conditions write summary.json and report.json.  Exit code
is 0 iff every requested check passed, 1 on failed checks or errors (with a
JSON error record on stderr), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import dynamics as dyn
from . import functionals as fn
from .config import DEFAULT_CONFIG, ConfigError, RunConfig, parse_config
from .geometry import Configuration, lattice_configuration
from .kernels import default_envelope, make_proposal, validate_kernel
from .potentials import hamiltonian
from .rates import detailed_balance_residual, grand_canonical_residual, random_move_case

SUBCOMMANDS = ("simulate", "thinning", "glauber", "energy", "verify", "conditions")


def _header(cfg: RunConfig, seed: int) -> str:
    return f"config_hash={cfg.hash()} seed={seed}"


def _write(path: Path, text: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, cfg: RunConfig, payload: dict):
    body = {"_header": {"config_hash": cfg.hash(), "seed": cfg.seed}, **diag._plain(payload)}
    _write(path, json.dumps(body, indent=2, sort_keys=False) + "\n")


def _replica_csv(csv_texts: list[str], header: str) -> str:
    """Concatenate per-replica CSV tables under one header with a leading replica column."""
    out = io.StringIO()
    out.write(f"# {header}\n")
    for k, text in enumerate(csv_texts):
        lines = text.splitlines()
        if k == 0:
            out.write("replica," + lines[0] + "\n")
        out.writelines(f"{k},{line}\n" for line in lines[1:])
    return out.getvalue()


def initial_configuration(cfg: RunConfig) -> Configuration:
    domain = cfg.domain()
    pts = cfg["dynamics"]["initial"]
    if pts:
        return Configuration(domain, np.array(pts, dtype=float))
    return lattice_configuration(domain, cfg["dynamics"]["particles"])


def _run_dynamics(kind: str, cfg: RunConfig, out: Path) -> tuple[bool, dict]:
    xi0 = initial_configuration(cfg)
    trajs = []
    for k in range(cfg["run"]["replicas"]):
        params = cfg.sim_params(seed=cfg.seed + k)
        if kind == "simulate":
            trajs.append(dyn.run_jump_chain(cfg.rate(), params, xi0))
        elif kind == "thinning":
            trajs.append(dyn.run_thinning(cfg.rate(), params, xi0))
        else:
            trajs.append(dyn.run_glauber(cfg.potential(), params, xi0))
    header = _header(cfg, cfg.seed)
    _write(out / "trajectory.csv", _replica_csv([t.to_csv() for t in trajs], header))
    _write(out / "events.csv", _replica_csv([t.events.to_csv() for t in trajs], header))
    summary = {"subcommand": kind, "replicas": [t.stats for t in trajs],
               "snapshots": [len(t) for t in trajs],
               "final_counts": [int(t.counts()[-1]) if len(t) else 0 for t in trajs]}
    _write_json(out / "summary.json", cfg, summary)
    return True, summary


def _energy(cfg: RunConfig, out: Path) -> tuple[bool, dict]:
    domain = cfg.domain()
    n = cfg["dynamics"]["particles"]
    m = cfg["diagnostics"]["energy_samples"]
    raw = dyn.metropolis_reference(cfg.potential(), domain, n, m, seed=cfg.seed)
    configs = [Configuration(domain, p) for p in raw]
    F = cfg.testfn()
    est, se = fn.dirichlet_energy(F, cfg.kernel(), configs, n_samples=m)
    report = diag.DiagnosticsReport(provenance={"seed": cfg.seed, "config_hash": cfg.hash(), "samples": m})
    report.add_metric("dirichlet_energy", est, se)
    report.add_flag("nonnegative", est >= -3.0 * se, estimate=est, stderr=se)
    _write_json(out / "summary.json", cfg, {"subcommand": "energy", "estimate": est, "stderr": se})
    _write_json(out / "report.json", cfg, report.to_dict())
    return report.passed, report.to_dict()


def verify_suite(cfg: RunConfig, cases: int = 200) -> diag.DiagnosticsReport:
    """Quick invariant checks on the configured model."""
    rng = np.random.default_rng(cfg.seed)
    domain = cfg.domain()
    d = domain.dimension
    rate = cfg.rate()
    kernel = cfg.kernel()
    pot = cfg.potential()
    report = diag.DiagnosticsReport(provenance={"seed": cfg.seed, "config_hash": cfg.hash()})

    # detailed balance on random (xi, i, y) with well separated points
    worst, used = 0.0, 0
    for _ in range(cases):
        n = int(rng.integers(1, max(2, cfg["dynamics"]["particles"]) + 1))
        xi, i, y = random_move_case(domain, n, rng)
        res = detailed_balance_residual(rate, xi, i, y)
        if res is not None:
            worst = max(worst, res)
            used += 1
    report.add_metric("detailed_balance_max_residual", worst)
    report.add_flag("detailed_balance", worst <= 1e-10, max_residual=worst, cases=used)

    # grand canonical balance for births
    worst = 0.0
    for _ in range(cases // 4):
        xi, _, y = random_move_case(domain, int(rng.integers(0, 4)), rng)
        r = grand_canonical_residual(pot, xi, y, cfg["dynamics"]["activity"])
        if r is not None:
            worst = max(worst, r)
    report.add_flag("grand_canonical_balance", worst <= 1e-10, max_residual=worst)

    # cutoff lemma
    kappa = cfg["diagnostics"]["kappa"]
    bad = 0
    for n in (1, 2):
        a = fn.CutoffSequence(n, d, kappa)
        for _ in range(50):
            bad += fn.chi_a(fn.sample_in_M(a, d, rng), a) != 1.0
            bad += fn.chi_a(fn.sample_outside_M2(a, d, rng), a) != 0.0
    report.add_flag("cutoff_values", bad == 0, mismatches=bad)

    # key-lemma sums
    ok, evidence = True, []
    for alpha in (kappa + 0.5, kappa + 1.0):
        reps = [fn.bound_sums(n, d, kappa, alpha) for n in (1, 2)]
        mono = all(getattr(reps[1], f) <= getattr(reps[0], f) for f in ("sum_c2", "sum_c32", "sum_c42"))
        ok &= all(r.passed for r in reps) and mono
        evidence.append({"alpha": alpha, "sums_n1": [reps[0].sum_c2, reps[0].sum_c32, reps[0].sum_c42],
                         "decreasing_in_n": mono})
    report.add_flag("bound_sums", ok, evidence=evidence)

    # kernel axioms and envelope exponents
    kr = validate_kernel(kernel, domain)
    report.add_flag("kernel_validation", kr.passed, failures=kr.failures,
                    max_ratio=kr.checks["b_dominance"]["max_ratio"])
    env = default_envelope(kernel)
    fit = diag.tail_exponent_fit(env, d=d, kappa=kappa)
    exact = abs(fit.alpha - env.alpha_tail) <= 1e-9 and abs(fit.beta - env.beta_origin) <= 1e-9
    report.add_flag("tail_exponents", exact and fit.gate_passed, alpha=fit.alpha, beta=fit.beta, kappa=kappa)

    # square field: Cauchy-Schwarz and the product inequality with the cutoff
    if d == 1:
        F = cfg.testfn()
        chi = fn.CutoffFunction(fn.CutoffSequence(1, d, kappa))
        cs_ok, prod_ok = True, True
        for _ in range(3):
            xi = Configuration(domain, domain.uniform(rng, int(rng.integers(1, 4))))
            M = fn.square_field_matrix([F, chi, chi * F], kernel, xi)
            cs_ok &= M[0, 1] ** 2 <= M[0, 0] * M[1, 1] * (1 + 1e-8) + 1e-300
            rhs = 2.0 * (M[1, 1] * F(xi) ** 2 + M[0, 0])
            prod_ok &= M[2, 2] <= rhs * (1 + 1e-8) + 1e-300
        report.add_flag("square_field_cauchy_schwarz", cs_ok)
        report.add_flag("square_field_product", prod_ok)
    return report


def conditions_suite(cfg: RunConfig) -> diag.DiagnosticsReport:
    """Kernel conditions plus intensity, variance-ratio and rho1/envelope checks on Poisson samples."""
    domain = cfg.domain()
    d = domain.dimension
    kernel = cfg.kernel()
    kappa = cfg["diagnostics"]["kappa"]
    z = cfg["dynamics"]["activity"]
    m = cfg["diagnostics"]["samples"]
    report = diag.DiagnosticsReport(provenance={"seed": cfg.seed, "config_hash": cfg.hash(),
                                                "samples": m, "activity": z})
    kr = validate_kernel(kernel, domain)
    report.add_flag("B0_dominance", kr.checks["b_dominance"]["passed"],
                    max_ratio=kr.checks["b_dominance"]["max_ratio"])
    report.add_flag("kernel_integrability", kr.checks["a_integrability"]["passed"])

    env = default_envelope(kernel)
    fit = diag.tail_exponent_fit(env, d=d, kappa=kappa)
    report.add_metric("alpha_hat", fit.alpha, fit.alpha_stderr)
    report.add_metric("beta_hat", fit.beta, fit.beta_stderr)
    report.add_flag("B2_tail_gate", bool(fit.gate_passed), alpha=fit.alpha, kappa=kappa)
    report.add_flag("B3_origin", 0.0 < fit.beta < 2.0, beta=fit.beta)

    samples = dyn.poisson_samples(domain, z, m, seed=cfg.seed)
    rho1 = diag.estimate_rho1(samples, cfg["diagnostics"]["bins"])
    k_hat, k_se = diag.fit_growth_exponent(rho1)
    report.add_metric("kappa_hat", k_hat, k_se)
    report.add_flag("B1_growth", k_hat <= kappa + max(0.1, 3 * k_se), kappa_hat=k_hat, kappa=kappa)

    radii = [r for r in cfg["diagnostics"]["radii"] if r <= domain.half_width]
    curve = diag.variance_ratio_curve(samples, radii)
    report.add_metric("delta_hat", curve.delta, curve.delta_stderr)
    report.add_flag("B4_variance_decay", abs(curve.delta - d) <= 0.2, delta=curve.delta, expected=d,
                    notes=curve.notes)

    if d == 1:
        r_min = kernel.cutoff(domain)
        A = cfg["diagnostics"]["test_box"]
        res = diag.rhojump_inequality_check(rho1, env, A, domain, r_min)
        res2 = diag.rhojump_inequality_check(rho1.scaled(2.0), env, A, domain, r_min)
        inv = abs(res2.R_min - res.R_min) <= 1e-12 * abs(res.R_min)
        report.add_metric("rhojump_R_min", res.R_min)
        report.add_flag("rhojump", res.passed and inv, R_min=res.R_min, lhs=res.lhs, rhs_unit=res.rhs_unit,
                        scale_invariant=inv)
    return report


def _suite(kind: str, cfg: RunConfig, out: Path) -> tuple[bool, dict]:
    t0 = time.perf_counter()
    report = verify_suite(cfg) if kind == "verify" else conditions_suite(cfg)
    report.provenance["seconds"] = time.perf_counter() - t0
    _write_json(out / "report.json", cfg, report.to_dict())
    summary = {"subcommand": kind, "passed": report.passed,
               "flags": {k: v["passed"] for k, v in report.flags.items()}}
    _write_json(out / "summary.json", cfg, summary)
    return report.passed, summary


def dispatch(subcommand: str, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if subcommand in ("simulate", "thinning", "glauber"):
        ok, summary = _run_dynamics(subcommand, cfg, out)
    elif subcommand == "energy":
        ok, summary = _energy(cfg, out)
    elif subcommand in ("verify", "conditions"):
        ok, summary = _suite(subcommand, cfg, out)
    else:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    print(json.dumps({"subcommand": subcommand, "passed": ok, "out": str(out)}))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jumpips", description="Jump-type interacting particle simulations.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="INI config file (built-in default if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--replicas", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"run.out={args.out}")
    if args.replicas is not None:
        overrides.append(f"run.replicas={args.replicas}")
    try:
        cfg = parse_config(args.config if args.config else DEFAULT_CONFIG, overrides=overrides)
        return dispatch(args.subcommand, cfg)
    except ConfigError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except Exception as exc:  # any module error becomes a JSON record
        record = {"error": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "witness"):
            record["witness"] = diag._plain(exc.witness)
        if hasattr(exc, "report"):
            record["report"] = diag._plain(exc.report)
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
