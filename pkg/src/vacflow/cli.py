"""Command line entry point: regime | burgers | ode | simulate | picard | rstudy | report.

Exit codes: 0 ok, 2 configuration error, 3 physics halt, 4 acceptance violation.
"""
from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
import time

import numpy as np

from . import config as cfgmod
from . import experiments as ex
from . import odebound
from .burgers import write_decay_csv
from .regime import InadmissibleParams, Params, classify, p0_family_sweep, validate

EXIT_OK, EXIT_CONFIG, EXIT_HALT, EXIT_ACCEPT = 0, 2, 3, 4
log = logging.getLogger("vacflow")


def _outdir(base: str, verb: str, cfg) -> str:
    path = os.path.join(base, f"{verb}-{time.strftime('%Y%m%d-%H%M%S')}") if cfg.run.stamp else base
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config.cfg"), "w", newline="\n") as fh:
        fh.write(cfgmod.emit(cfg))
    return path


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def cmd_regime(cfg, out: str) -> int:
    violations = validate(cfg.params.__dict__)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_CONFIG
    params = cfg.params.build()
    rep = classify(params, cfg.diagnostics.n, cfg.diagnostics.m)
    _write(os.path.join(out, "regime.txt"), rep.to_text())
    _write(os.path.join(out, "regime.csv"), rep.csv_header() + "\n" + rep.csv_row() + "\n")
    if params.alpha and 2 * params.alpha + params.beta > 0:
        etas = np.geomspace(0.05, 5.0, 9)
        rows = p0_family_sweep(params.delta, params.alpha, params.beta, etas, params.gamma)
        lines = ["eta,alpha,beta,M1,M2,holds_P0"]
        lines += [",".join(repr(float(v)) if not isinstance(v, bool) else str(v).lower() for v in r) for r in rows]
        _write(os.path.join(out, "eta_sweep.csv"), "\n".join(lines) + "\n")
    print(rep.to_text(), end="")
    return EXIT_OK


def cmd_burgers(cfg, out: str) -> int:
    res = ex.burgers_decay(cfg)
    write_decay_csv(os.path.join(out, "burgers_decay.csv"), res.rows, res.slopes)
    lines = ["t,sup_grad2"] + [f"{t!r},{v!r}" for t, v in zip(res.times.tolist(), res.sup2.tolist())]
    _write(os.path.join(out, "burgers_sup.csv"), "\n".join(lines) + "\n")
    d = cfg.params.dim
    for l, s in res.slopes.items():
        print(f"l={l} slope={s:.4f} predicted={d / 2 - (l + 1):.4f}")
    print(f"sup|grad^2 u| slope={res.sup2_slope:.4f} predicted=-3")
    return EXIT_OK


def cmd_ode(cfg, out: str) -> int:
    o = cfg.ode
    spec = odebound.OdeSpec(o.a, o.b, o.C1, o.C2, o.D1, o.D2, o.Z0)
    try:
        th = odebound.threshold_lambda(spec)
        lam, J, err, reason = th.lam, th.J_inf, th.error, th.reason
    except odebound.HypothesesViolated as exc:
        lam, J, err, reason = 0.0, float("nan"), 0.0, "; ".join(exc.failures)
    _write(os.path.join(out, "threshold.csv"),
           "a,b,C1,C2,D1,D2,Lambda,J_inf,error,reason\n"
           f"{o.a!r},{o.b!r},{o.C1!r},{o.C2!r},{o.D1!r},{o.D2!r},{lam!r},{J!r},{err!r},{reason}\n")
    ts = np.linspace(0.0, o.t_end, o.n_samples)
    z = odebound.trajectory(spec, ts)
    num = odebound.integrate_ode(spec, o.t_end, o.rtol, t_eval=ts)
    zn = np.full_like(ts, np.inf)
    zn[: num.Z.size] = num.Z
    lines = ["t,closed_form,numeric"] + [f"{a!r},{b!r},{c!r}" for a, b, c in zip(ts.tolist(), z.tolist(), zn.tolist())]
    _write(os.path.join(out, "trajectory.csv"), "\n".join(lines) + "\n")
    print(f"Lambda={lam:.12g}")
    if num.blowup is not None:
        print(f"blowup t={num.blowup.time:.12g}")
    return EXIT_OK


def _halt_file(out, traj):
    if traj.halt is not None:
        _write(os.path.join(out, "halt.txt"), traj.halt.to_text())


def cmd_simulate(cfg, out: str) -> int:
    res = ex.simulate(cfg)
    res.series.to_csv(os.path.join(out, "diagnostics.csv"))
    res.trajectory.write_dt_log(os.path.join(out, "dt_log.csv"))
    _halt_file(out, res.trajectory)
    D0 = cfg.run.D0 if cfg.run.D0 is not None else ex.default_D0(res.report)
    from .initdata import smallness_report
    sm = smallness_report(res.setup.init, D0, res.setup.params, res.report.holds_P2)
    _write(os.path.join(out, "smallness.txt"), sm.to_text() + "\nD0_source = "
           + ("config" if cfg.run.D0 is not None else "ode_threshold_proxy") + "\n")
    if res.trajectory.halt is not None:
        print(res.trajectory.halt.to_text(), end="")
        return EXIT_HALT
    status = EXIT_OK
    if cfg.diagnostics.check_decay:
        fit = ex.z_fit(res, cfg)
        pred = ex.predicted_z_exponent(res.report)
        ok = pred is not None and fit.passes(pred, cfg.diagnostics.decay_slack)
        print(f"Z slope={fit.slope:.4f} stderr={fit.stderr:.4f} predicted={pred} ok={ok}")
        if not ok:
            status = EXIT_ACCEPT
    if cfg.diagnostics.envelope:
        v = ex.envelope(res, cfg)
        print(f"envelope {v.verdict} C1={v.C1:.4g} C2={v.C2:.4g}")
        if not v.bounded:
            status = EXIT_ACCEPT
    print(f"completed t={res.trajectory.final.t:.6g} steps={res.trajectory.steps}")
    return status


def cmd_picard(cfg, out: str) -> int:
    st = ex.picard_study(cfg)
    pr = st.result
    lines = ["k,gamma,ratio"]
    ratios = [float("nan")] + pr.ratios
    for k, (g, r) in enumerate(zip(pr.gammas, ratios), 1):
        lines.append(f"{k},{g!r},{r!r}")
    _write(os.path.join(out, "contraction.csv"), "\n".join(lines) + "\n")
    print(f"iterates={len(pr.gammas)} direct_gap={st.direct_gap:.3e} self_convergence={st.self_convergence:.3e}")
    ok = st.direct_gap <= 10 * st.self_convergence
    return EXIT_OK if ok else EXIT_ACCEPT


def cmd_rstudy(cfg, out: str) -> int:
    rows = ex.r_study(cfg)
    lines = ["R,slope,stderr,mass_drift,halt"]
    lines += [f"{r.R!r},{r.slope!r},{r.stderr!r},{r.mass_drift!r},{r.halted or 'none'}" for r in rows]
    _write(os.path.join(out, "rstudy.csv"), "\n".join(lines) + "\n")
    slopes = [r.slope for r in rows]
    spread = max(slopes) - min(slopes)
    print(f"slopes={['%.4f' % s for s in slopes]} spread={spread:.4f}")
    if any(r.halted for r in rows):
        return EXIT_HALT
    return EXIT_OK if spread <= cfg.rstudy.spread_tol else EXIT_ACCEPT


def cmd_report(cfg, out: str, source: str) -> int:
    """Concatenate the headline files of previous runs under ``source`` into report.txt."""
    parts = []
    for path in sorted(glob.glob(os.path.join(source, "**", "*"), recursive=True)):
        name = os.path.basename(path)
        if name in ("regime.txt", "threshold.csv", "rstudy.csv", "contraction.csv", "halt.txt", "smallness.txt"):
            with open(path) as fh:
                parts.append(f"== {os.path.relpath(path, source)}\n{fh.read()}")
    _write(os.path.join(out, "report.txt"), "\n".join(parts))
    print(f"collected {len(parts)} files")
    return EXIT_OK


VERBS = ("regime", "burgers", "ode", "simulate", "picard", "rstudy", "report")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="vacflow", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", help="configuration file (section.key = value lines)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--source", default=None, help="report: directory of earlier outputs")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = cfgmod.load(args.config, args.override) if args.config else cfgmod.parse("", args.override)
        cfg.check()
    except (cfgmod.ConfigError, InadmissibleParams, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _outdir(args.out, args.verb, cfg)
    log.info("writing to %s", out)
    print(f"out={out}")
    if args.verb == "report":
        return cmd_report(cfg, out, args.source or args.out)
    handler = {"regime": cmd_regime, "burgers": cmd_burgers, "ode": cmd_ode, "simulate": cmd_simulate,
               "picard": cmd_picard, "rstudy": cmd_rstudy}[args.verb]
    try:
        return handler(cfg, out)
    except (InadmissibleParams, cfgmod.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
