"""Command-line front end.

Every subcommand prints a JSON report (or writes it to ``--out``) and exits
with 0 when all checked invariants hold, 1 when one fails and 2 on bad
input or configuration.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys

import numpy as np

from . import decay, exact, fd, geometry, spectral
from .contact import (
    DEFAULT_CHART_BOUND,
    StructureField,
    compatibility_report,
    sample_chart_points,
)
from .errors import ConfigError, MaxIterationsExceeded, PositivityFailure, StriplabError
from .reports import dumps_json, write_report
from .solver import SolverConfig, boundary_violation, gauss_newton_solve

log = logging.getLogger("striplab")


def _pair(text, sep, name):
    try:
        a, b = (float(x) for x in text.split(sep))
    except ValueError as exc:
        raise ConfigError(f"{name} must look like A{sep}B, got {text!r}") from exc
    if not a < b:
        raise ConfigError(f"{name} needs A < B, got {text!r}")
    return a, b


def _grid_size(text):
    try:
        ns, nt = (int(x) for x in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--grid must look like NSxNT, got {text!r}") from exc
    if ns < 3 or nt < 3:
        raise ConfigError("--grid needs at least 3 nodes per direction")
    return ns, nt


def load_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    base = os.path.dirname(os.path.abspath(path))
    return cp, base


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"missing [{section}] {key}")
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _field_from_config(cp, base):
    """StructureField plus the matching chart bound from ``[profile]`` and ``[chart]``."""
    source = _get(cp, "profile", "source", default="strip")
    C = _get(cp, "chart", "C", float, default=float("nan"))
    C = None if np.isnan(C) else C
    bound = _get(cp, "chart", "bound", float, default=DEFAULT_CHART_BOUND)
    if source == "strip":
        eps = _get(cp, "profile", "epsilon", float, default=0.2)
        return StructureField.strip_end(eps, C=C), bound, eps
    path = source if os.path.isabs(source) else os.path.join(base, source)
    if not os.path.isfile(path):
        raise ConfigError(f"profile file {path} does not exist")
    try:
        prof = geometry.SurfaceProfile.from_csv(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    th_range = _pair(_get(cp, "chart", "theta_range"), ",", "theta_range")
    th = np.linspace(*th_range, 257)
    if np.abs(prof.b(th)).min() < 1e-6:
        raise ConfigError(f"b vanishes on theta_range {th_range}; q = a/b is undefined there")
    return StructureField.from_profile(prof, th_range, C=C), bound, None


def cmd_verify_exact(args):
    ns, nt = _grid_size(args.grid)
    eps = args.epsilon
    lo, hi = _pair(args.s_range, ":", "--s-range")
    g = exact.strip_grid(eps, (lo, hi), ns, nt)
    res = exact.cr_residual(g)
    fine = exact.strip_grid(eps, (lo, hi), 2 * ns - 1, 2 * nt - 1)
    res_fine = exact.cr_residual(fine)
    d2 = exact.second_derivative_bound(g)
    h2 = g.h_s**2 + g.h_t**2
    S, T = g.mesh()
    z = exact.strip_to_halfdisk(S, T)
    comp = float(np.abs(g.values - exact.halfdisk_solution(eps, z.real, z.imag)).max())
    disk = exact.halfdisk_polar_grid(eps, ns, ns)
    energy = exact.energy_dlambda(disk)
    closed = eps * eps * np.pi / 2
    tau = g.values[..., 0]
    budget = exact.energy_hofer(g, exact.sigmoid_dictionary(float(tau.min()), float(tau.max())))
    checks = {
        "residual_bound": res.max_norm <= 5.0 * h2 * d2,
        "residual_order": res.max_norm / max(res_fine.max_norm, 1e-300) >= 3.0,
        "boundary": res.bc_max <= 1e-13,
        "composition": comp <= 1e-12,
        "energy": abs(energy - closed) <= 1e-3 * abs(closed) + 1e-15,
    }
    report = {
        "epsilon": eps,
        "grid": [ns, nt],
        "s_range": [lo, hi],
        "residual": res.to_dict(),
        "residual_refined_max": res_fine.max_norm,
        "second_derivative_sup": d2,
        "composition_error": comp,
        "energy_dlambda": energy,
        "energy_closed_form": closed,
        "hofer": budget.to_dict(),
        "checks": checks,
    }
    return report, all(checks.values())


def cmd_spectrum(args):
    lo, hi = _pair(args.range, ",", "--range")
    op = spectral.AsymptoticOperator.from_q0(args.q0)
    if args.method == "shooting":
        rep = spectral.spectrum_shooting(op, (lo, hi))
        tol = 1e-10
    else:
        rep = spectral.spectrum_fd(op, args.n, (lo, hi))
        h = 1.0 / (args.n - 1)
        tol = 2.0 * max(abs(lo), abs(hi)) ** 3 * h * h / 12.0 + 1e-9
    ks = [k * spectral.HALF_PI for k in range(int(np.ceil(lo / spectral.HALF_PI)), int(np.floor(hi / spectral.HALF_PI)) + 1)]
    ev = np.array(rep.eigenvalues)
    ok = len(ev) == len(ks) and bool(np.all(np.abs(ev - np.array(ks)) <= tol))
    ok = ok and all(m == 1 for m in rep.multiplicities)
    gaps = spectral.spectral_gaps([rep.eigenvalues], spectral.HALF_PI, (lo, hi))
    rep.gaps = [(gp.lo, gp.hi) for gp in gaps]
    out = rep.to_dict()
    out["checks"] = {"matches_half_pi_multiples": ok}
    return out, ok


def cmd_decay(args):
    lo, hi = _pair(args.s_range, ":", "--s-range")
    nt = args.nt
    h = 1.0 / (nt - 1)
    ns = int(round((hi - lo) / h)) + 1
    f = StructureField.strip_end(args.epsilon)
    g = exact.strip_end_grid(args.epsilon, (lo, hi), ns, nt)
    tr = decay.alpha_trace(g, f)
    rep = decay.decay_fit(g, f, trace=tr)
    s_probe = min(max(8.0, lo), hi)
    i = int(np.argmin(np.abs(g.s - s_probe)))
    direction = decay.direction_error(g.values[i], rep.eigenvector(g.t), fd.trapezoid_weights(nt, h))
    checks = {
        "lambda": abs(tr.lambda_fit - rep.lam) <= 1e-3,
        "alpha_agreement": float(tr.discrepancy.max()) <= 1e-4,
        "rates_positive": all(x is not None and x > 0 for x in (rep.delta_alpha, rep.delta_remainder, rep.rho)),
        "direction": direction <= 1e-3,
    }
    out = rep.to_dict()
    out.update({"epsilon": args.epsilon, "s_range": [lo, hi], "nt": nt, "direction_error": direction, "direction_s": float(g.s[i]), "checks": checks})
    if args.alpha_csv:
        write_report(tr.to_rows(), "csv", args.alpha_csv, ["s", "alpha_logderiv", "alpha_formula"])
    return out, all(checks.values())


def cmd_solve(args):
    cp, base = load_config(args.config)
    f, bound, eps = _field_from_config(cp, base)
    if eps is None:
        raise ConfigError("solve needs [profile] source = strip (the oracle is the explicit strip)")
    s_range = _pair(_get(cp, "grid", "s_range", default="3:8"), ":", "s_range")
    cfg = SolverConfig(
        s_range=s_range,
        n_s=_get(cp, "grid", "n_s", int, default=120),
        n_t=_get(cp, "grid", "n_t", int, default=16),
        max_iterations=_get(cp, "experiment", "max_iterations", int, default=25),
        residual_tol=_get(cp, "experiment", "residual_tol", float, default=1e-8),
        step_damping=_get(cp, "experiment", "step_damping", float, default=1.0),
        boundary_weight=_get(cp, "experiment", "boundary_weight", float, default=10.0),
        chart_bound=bound,
    )
    noise = _get(cp, "experiment", "noise", float, default=1e-2)
    seed = _get(cp, "experiment", "seed", int, default=args.seed)
    oracle = exact.strip_end_grid(eps, cfg.s_range, cfg.n_s, cfg.n_t)
    rng = np.random.default_rng(seed)
    init = oracle.with_values(oracle.values + rng.uniform(-noise, noise, oracle.values.shape))
    converged = True
    try:
        sol, history = gauss_newton_solve(init, f, cfg, oracle.values)
    except MaxIterationsExceeded as exc:
        sol, history, converged = exc.grid, exc.log, False
    err = float(np.abs(sol.values - oracle.values).max())
    out_dir = _get(cp, "output", "directory", default="")
    if out_dir:
        out_dir = out_dir if os.path.isabs(out_dir) else os.path.join(base, out_dir)
        os.makedirs(out_dir, exist_ok=True)
        sol.to_csv(os.path.join(out_dir, "solution.csv"))
        write_report(history, "csv", os.path.join(out_dir, "convergence.csv"), ["iter", "residual", "step_norm"])
    checks = {"converged": converged, "sup_error": err <= 1e-5}
    report = {
        "epsilon": eps,
        "seed": seed,
        "noise": noise,
        "grid": [cfg.n_s, cfg.n_t],
        "s_range": list(cfg.s_range),
        "iterations": len(history) - 1,
        "final_residual": history[-1]["residual"],
        "sup_error": err,
        "boundary_violation": boundary_violation(sol),
        "log": history,
        "checks": checks,
    }
    return report, all(checks.values())


def cmd_tb(args):
    if not os.path.isfile(args.profile):
        raise ConfigError(f"profile file {args.profile} does not exist")
    try:
        prof = geometry.SurfaceProfile.from_csv(args.profile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    deg = geometry.tb_degree(prof, args.n_samples)
    plus = geometry.tb_signed_count(prof, "+")
    minus = geometry.tb_signed_count(prof, "-")
    sing = geometry.singular_points(prof)
    return (
        {
            "degree": deg,
            "signed_count": plus,
            "signed_count_negative": minus,
            "singular_points": [s._asdict() for s in sing],
            "checks": {"signed_counts_match": plus == deg == minus},
        },
        plus == deg == minus,
    )


def cmd_compat(args):
    cp, base = load_config(args.config)
    f, bound, _ = _field_from_config(cp, base)
    n = _get(cp, "experiment", "n_points", int, default=1000)
    seed = _get(cp, "experiment", "seed", int, default=args.seed)
    pts = sample_chart_points(np.random.default_rng(seed), n, f, bound=bound)
    try:
        rep = compatibility_report(f, pts)
        ok = rep.passed()
        out = rep.to_dict()
    except PositivityFailure as exc:
        ok = False
        out = {"positivity_failure": str(exc), "witness": np.asarray(exc.witness).tolist()}
    out.update({"C": f.C, "chart_bound": bound, "seed": seed, "theta_range": list(f.theta_range)})
    out["checks"] = {"compatible": ok}
    return out, ok


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1, deterministic)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="striplab", description="Pseudoholomorphic strip laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("verify-exact", parents=[common], help="residual, energy and consistency of the explicit strip")
    q.add_argument("--epsilon", type=float, default=0.2)
    q.add_argument("--grid", default="200x20")
    q.add_argument("--s-range", default="-5:5")
    q.set_defaults(func=cmd_verify_exact)

    q = sub.add_parser("spectrum", parents=[common], help="spectrum of the asymptotic operator")
    q.add_argument("--q0", type=float, default=-10.0)
    q.add_argument("--method", choices=["shooting", "fd"], default="shooting")
    q.add_argument("--n", type=int, default=200)
    q.add_argument("--range", default="-7,7")
    q.set_defaults(func=cmd_spectrum)

    q = sub.add_parser("decay", parents=[common], help="decay exponent and asymptotic formula on the explicit strip")
    q.add_argument("--epsilon", type=float, default=0.2)
    q.add_argument("--s-range", default="4:10")
    q.add_argument("--nt", type=int, default=65)
    q.add_argument("--alpha-csv", help="also write the α trace as CSV")
    q.set_defaults(func=cmd_decay)

    q = sub.add_parser("solve", parents=[common], help="Gauss-Newton solve from a perturbed oracle")
    q.add_argument("--config", required=True)
    q.set_defaults(func=cmd_solve)

    q = sub.add_parser("tb", parents=[common], help="winding degree and signed tangency count of a profile")
    q.add_argument("--profile", required=True)
    q.add_argument("--n-samples", type=int, default=256)
    q.set_defaults(func=cmd_tb)

    q = sub.add_parser("compat", parents=[common], help="compatibility of Ĵ and Ω on random chart points")
    q.add_argument("--config", required=True)
    q.set_defaults(func=cmd_compat)
    return p


_RANGE_OPTIONS = ("--range", "--s-range")


def _glue_ranges(argv):
    """Join ``--range -7,7`` into ``--range=-7,7`` so argparse accepts negative bounds."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _RANGE_OPTIONS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run_command(argv=None):
    parser = build_parser()
    argv = _glue_ranges(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=max(1, args.threads)):
            report, ok = args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StriplabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report["command"] = args.command
    report.setdefault("seed", args.seed)
    if args.out:
        write_report(report, "json", args.out)
    else:
        sys.stdout.write(dumps_json(report) + "\n")
    return 0 if ok else 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
