"""
skinlab command line: one subcommand per experiment, one config per run.

Exit codes: 0 pass, 2 quantitative failure, 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path


from . import __version__
from . import _backend
from .config import ConfigError, basepoint, build_body, build_group, echo, load_config
from .io import save_measure, save_patterson, write_csv, write_json

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
COMMANDS = ("orbit", "delta", "patterson", "skinning", "equidistribute", "cusp-decay",
            "finiteness", "disintegration", "selftest")

log = logging.getLogger("skinlab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"skinlab: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skinlab", description="skinning measures and equidistribution on hyperbolic surfaces")
    p.add_argument("--version", action="version", version=f"skinlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "selftest", help="JSON run configuration")
        s.add_argument("--out", default=os.environ.get("SKINLAB_OUT"), help="output directory (default $SKINLAB_OUT)")
        s.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        s.add_argument("--verbose", "-v", action="store_true")
    return p


def _out_dir(args, cfg, name) -> Path:
    d = args.out or (cfg or {}).get("output", {}).get("dir") or os.path.join("skinlab_out", name)
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(out: Path, report: dict, cfg) -> int:
    """Write the report and config echo, print the verdict line, return the exit code."""
    if cfg is not None:
        (out / "config.json").write_text(echo(cfg), encoding="utf-8")
    write_json(out / "report.json", report)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{report['name']}: {status} - {report.get('line', '')} [{out}]")
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def _experiment_report(rep) -> dict:
    d = rep.to_dict()
    d["line"] = ", ".join(f"{v.name}={'ok' if v.passed else 'FAIL'}" for v in rep.verdicts)
    return d


# ---------------------------------------------------------------------------
# subcommands

def cmd_orbit(cfg, out):
    from .groups import enumerate_orbit

    G = build_group(cfg)
    T = enumerate_orbit(G, basepoint(cfg), cfg["orbit"]["radius"])
    words = T.words()
    write_csv(out / "orbit.csv", ["word", "a", "b", "c", "d", "displacement"],
              ((w or "1", *m, d) for w, m, d in zip(words, T.mats, T.disp)))
    ok = len(T) > 0 and T.disp[0] == 0.0
    return {"name": "orbit", "passed": ok, "count": len(T), "radius": T.radius, "max_depth": T.max_depth,
            "line": f"{len(T)} elements within {T.radius:g}"}


def cmd_delta(cfg, out):
    from .groups import critical_exponent, enumerate_orbit, regular_growth_check

    G = build_group(cfg)
    R = cfg["orbit"]["radius"]
    fits = {}
    for r in (R, R + 2.0):
        T = enumerate_orbit(G, basepoint(cfg), r)
        fits[r] = (critical_exponent(T, cfg["orbit"]["shell_width"]), T)
    (f0, T0), (f1, T1) = fits[R], fits[R + 2.0]
    write_csv(out / "shells.csv", ["r", "count"], zip(f1.shells, f1.counts))
    shift = abs(f1.delta - f0.delta)
    allow = 3.0 * math.hypot(f0.stderr, f1.stderr)
    gc = regular_growth_check(T1, f1.delta, width=cfg["orbit"]["shell_width"])
    ok = shift <= allow
    return {"name": "delta", "passed": ok, "delta": f0.delta, "stderr": f0.stderr,
            "delta_refined": f1.delta, "stderr_refined": f1.stderr, "shift": shift, "allowance": allow,
            "growth_c": gc.c, "growth_degenerate": gc.degenerate,
            "line": f"delta {f0.delta:.4f} +- {f0.stderr:.4f}, radius +2 shift {shift:.4f} (allow {allow:.4f})"}


def cmd_patterson(cfg, out):
    from .experiments import build_setup
    from .measures import equivariance_residual

    S = build_setup(cfg)
    save_patterson(S.P, out / "patterson.csv")
    res = [equivariance_residual(S.P, g) for g in S.group.generators]
    tol = cfg["patterson"]["equivariance_tol"]
    ok = max(res) < tol
    return {"name": "patterson", "passed": ok, "delta": S.P.delta, "s_used": S.P.s_used, "n_atoms": len(S.P),
            "horizon": S.P.horizon, "equivariance": res, "tol": tol,
            "line": f"{len(S.P)} atoms, max equivariance TV {max(res):.4f} (tol {tol:g})"}


def cmd_skinning(cfg, out):
    from .dynamics import in_arcs
    from .experiments import build_setup, omega_arcs
    from .measures import flow_scaling_check, skinning_measure

    S = build_setup(cfg)
    C = build_body(cfg)
    sk = skinning_measure(C, S.P)
    save_measure(sk, out / "skinning.csv", {"delta": S.P.delta})
    arcs = omega_arcs(cfg, S.group, C) if (cfg["omega"]["arcs"] is not None or cfg["body"]["type"] == "geodesic") else None
    om = sk.restrict(in_arcs(arcs, sk.plus)) if arcs else sk
    save_measure(om, out / "skinning_omega.csv", {"delta": S.P.delta, "arcs": arcs})
    err = flow_scaling_check(C, S.P, 1.0)
    ok = err < 1e-9 and om.total > 0
    return {"name": "skinning", "passed": ok, "total": sk.total, "omega_total": om.total, "n_atoms": len(sk),
            "n_omega": len(om), "flow_scaling_err": err, "arcs": arcs,
            "line": f"||sigma|| {sk.total:.6g}, ||sigma_Omega|| {om.total:.6g}, flow scaling err {err:.2e}"}


def cmd_equidistribute(cfg, out):
    from .experiments import run_equidistribution

    rep = run_equidistribution(cfg)
    labels = rep.extras["labels"]
    write_csv(out / "series.csv", ["t", "E", "stderr", "mass"] + labels,
              ((r["t"], r["E"], r["stderr"], r["mass"], *r["diffs"]) for r in rep.records))
    return _experiment_report(rep)


def cmd_cusp_decay(cfg, out):
    from .experiments import run_cusp_decay

    rep = run_cusp_decay(cfg)
    write_csv(out / "bins.csv", ["radius", "n", "atoms", "mu_mass", "skin_mass"],
              ((r["radius"], r["n"], r["atoms"], r["mu_mass"], r["skin_mass"]) for r in rep.records))
    return _experiment_report(rep)


def cmd_finiteness(cfg, out):
    from .experiments import check_finiteness_criterion

    return _experiment_report(check_finiteness_criterion(cfg))


def cmd_disintegration(cfg, out):
    from .experiments import run_disintegration_check

    rep = run_disintegration_check(cfg)
    cols = ["box", "lhs", "rhs", "stderr", "hits", "ess"]
    write_csv(out / "boxes.csv", cols + ["status"],
              ([r.get(c, math.nan) for c in cols] + [r["status"]] for r in rep.records))
    return _experiment_report(rep)


def cmd_selftest(cfg, out):
    from .selftest import run_all

    res = run_all()
    write_csv(out / "selftest.csv", ["check", "passed", "detail"], ((n, int(ok), str(d)) for n, ok, d in res))
    bad = [n for n, ok, _ in res if not ok]
    return {"name": "selftest", "passed": not bad, "checks": len(res), "failed": bad,
            "line": f"{len(res) - len(bad)}/{len(res)} checks passed" + (f"; failed: {', '.join(bad)}" if bad else "")}


HANDLERS = {
    "orbit": cmd_orbit, "delta": cmd_delta, "patterson": cmd_patterson, "skinning": cmd_skinning,
    "equidistribute": cmd_equidistribute, "cusp-decay": cmd_cusp_decay, "finiteness": cmd_finiteness,
    "disintegration": cmd_disintegration, "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _backend.set_threads(args.threads)
    t0 = time.time()
    cfg = None
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        out = _out_dir(args, cfg, args.command)
        report = HANDLERS[args.command](cfg, out)
    except ConfigError as e:
        print(f"skinlab {args.command}: config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError) as e:
        where = f" ({args.config})" if args.config else ""
        print(f"skinlab {args.command}: error{where}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    report["seconds"] = time.time() - t0
    report["backend"] = _backend.backend_name()
    return _finish(out, report, cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
