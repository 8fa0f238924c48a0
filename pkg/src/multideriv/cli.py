"""Command-line experiment runner.

  multideriv run          single solve, writes final-time samples and prints the error
  multideriv convergence  refinement study, writes h,error,order tables and plot data
  multideriv stability    scheme coefficients, stability-function values, A/L verdicts

Runs are described by flags or by an INI file whose every section is one
run (see README for the keys).  Flags given on the command line override
the values from every section.
"""
import argparse
import configparser
import logging
import os
import sys

import numpy as np

from .convergence import (
    RunConfig,
    compute_l2_error,
    emit_component_csvs,
    emit_csv,
    emit_plotdata,
    hdg_config,
    make_problem,
    run_1d,
    run_2d,
    run_convergence,
    series_stem,
    solver_config,
)
from .exceptions import SolverError
from .schemes import check_a_stability, check_l_stability, scheme_by_name, stability_function

log = logging.getLogger("multideriv")

KEYS = ("problem", "p", "scheme", "ratio", "levels", "T", "newton_tol", "linear_tol", "eta", "theta", "hybrid", "theta_sign", "d2f_test", "init", "out")


def parse_levels(text):
    """'4, 8, 16' gives element counts; '0.25, 0.125' gives mesh widths."""
    out = []
    for tok in str(text).replace(",", " ").split():
        if any(ch in tok for ch in ".eE/"):
            if "/" in tok:
                a, b = tok.split("/")
                out.append(float(a) / float(b))
            else:
                out.append(float(tok))
        else:
            out.append(int(tok))
    return tuple(out)


def parse_ints(text):
    return tuple(int(t) for t in str(text).replace(",", " ").split())


def _convert(key, value):
    if value is None:
        return None
    if key == "p":
        return parse_ints(value)
    if key == "levels":
        return parse_levels(value)
    if key in ("ratio", "T", "newton_tol", "linear_tol", "eta", "theta"):
        return float(value)
    return str(value).strip()


def load_configs(path, overrides):
    """RunConfig per INI section, with command-line overrides applied."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read config file {path}")
    configs = []
    for name in parser.sections():
        sec = parser[name]
        unknown = set(sec) - set(KEYS)
        if unknown:
            raise ValueError(f"[{name}]: unknown keys {sorted(unknown)}")
        values = {k: _convert(k, v) for k, v in sec.items()}
        values.update(overrides)
        configs.append((name, RunConfig(**values)))
    return configs


def _overrides(args):
    out = {}
    for key in ("problem", "scheme", "ratio", "out", "T", "eta", "theta", "hybrid", "init"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if args.p is not None:
        out["p"] = parse_ints(args.p)
    if args.levels is not None:
        out["levels"] = parse_levels(args.levels)
    return out


def _configs(args):
    ov = _overrides(args)
    if args.config:
        return load_configs(args.config, ov)
    return [("cli", RunConfig(**ov))]


# -- subcommands -----------------------------------------------------------------


def cmd_convergence(args):
    status = 0
    for name, cfg in _configs(args):
        os.makedirs(cfg.out, exist_ok=True)
        for p in cfg.p:
            rows, failed = run_convergence(cfg, p)
            stem = series_stem(cfg.out, cfg.problem, p, cfg.scheme)
            emit_csv(rows, stem + ".csv")
            emit_plotdata(rows, stem + ".dat")
            if rows and rows[0].components:
                emit_component_csvs(rows, stem)
            print(f"[{name}] {cfg.problem} p={p} scheme={cfg.scheme} ratio={cfg.ratio:g}")
            for r in rows:
                order = "" if r.order is None else f"{r.order:.2f}"
                print(f"  h={r.h:<12.6g} error={r.error:<12.4e} order={order}")
            for h, msg in failed:
                print(f"  FAILED at h={h:g}: {msg}", file=sys.stderr)
                status = 1
    return status


def _samples_1d(op, x, prob, path, n=1000):
    xs = (np.arange(n) + 0.5) / n
    num = x.w(xs)
    ex = prob.exact(xs, prob.T)
    np.savetxt(path, np.column_stack([xs, num, ex]), delimiter=",", header="x,numerical,exact", comments="", fmt="%.17g")


def _samples_2d(hdg, s, prob, path, n=40):
    g = (np.arange(n) + 0.5) * prob.L / n
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    num = hdg.evaluate(s, pts)
    ex = prob.exact(pts[:, 0], pts[:, 1], prob.T)
    names = prob.components or tuple(f"w{i + 1}" for i in range(num.shape[1]))
    header = ",".join(["x", "y"] + [f"{c}_numerical" for c in names] + [f"{c}_exact" for c in names])
    np.savetxt(path, np.column_stack([pts, num, ex]), delimiter=",", header=header, comments="", fmt="%.17g")


def cmd_run(args):
    status = 0
    for name, cfg in _configs(args):
        os.makedirs(cfg.out, exist_ok=True)
        prob = make_problem(cfg.problem, cfg.T)
        scheme = scheme_by_name(cfg.scheme)
        p = cfg.p[0]
        level = cfg.levels[-1]
        n = cfg.elements(level)
        path = f"{series_stem(cfg.out, cfg.problem, p, cfg.scheme)}_n{n}_samples.csv"
        try:
            if cfg.dimension == 1:
                op, x, _, _ = run_1d(prob, p, n, scheme, cfg.ratio, cfg.init, solver_config(cfg))
                err = [compute_l2_error(x.w, prob.exact, prob.T)]
                _samples_1d(op, x, prob, path)
            else:
                hdg, s, _ = run_2d(prob, p, n, scheme, cfg.ratio, hdg_config(cfg))
                err = list(hdg.l2_errors(s, prob.exact, prob.T))
                _samples_2d(hdg, s, prob, path)
        except SolverError as exc:
            print(f"[{name}] {cfg.problem} p={p} n={n}: solver failure: {exc}", file=sys.stderr)
            status = 1
            continue
        errs = " ".join(f"{e:.6e}" for e in err)
        print(f"[{name}] {cfg.problem} p={p} n={n} h={cfg.mesh_width(level):g} T={prob.T:g} L2 error: {errs}")
        print(f"  samples written to {path}")
    return status


def cmd_stability(args):
    names = args.scheme.split(";") if args.scheme else ["third", "fourth"]
    mus = [complex(m) for m in (args.mu.split(",") if args.mu else ["-1", "-10", "-100", "-1e6", "1j", "10j", "-1+1j"])]
    lines = []
    for nm in names:
        sc = scheme_by_name(nm)
        R = stability_function(sc)
        a1, a2, b1, b2 = sc.exact
        lines.append(f"scheme {sc.name} (k={sc.k}, l={sc.l}, order {sc.order})")
        lines.append(f"  alpha1={a1} alpha2={a2} beta1={b1} beta2={b2}")
        lines.append(f"  h(mu) = (1 + {a1} mu + {b1} mu^2) / (1 - {a2} mu - ({b2}) mu^2)")
        for mu in mus:
            v = complex(R(mu))
            lines.append(f"  mu={mu.real:g}{mu.imag:+g}i  h={v.real:.12g}{v.imag:+.12g}i  |h|={abs(v):.12g}")
        a = check_a_stability(R)
        lines.append(f"  A-stable: {a.stable} (max |h| on imaginary axis {a.max_modulus:.15g})")
        lines.append(f"  L-stable: {check_l_stability(R)}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "stability.txt"), "w") as fh:
            fh.write(text + "\n")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="multideriv", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI file, one section per run")
        sp.add_argument("--problem", help="heat, convection, convdiff, convdiff-step, burgers, linear2d, euler")
        sp.add_argument("--p", help="polynomial degree(s), e.g. '1,2'")
        sp.add_argument("--scheme", help="third, fourth or 'k,l'")
        sp.add_argument("--ratio", type=float, help="dt/dx")
        sp.add_argument("--levels", help="element counts ('4,8,16') or mesh widths ('0.25,0.125')")
        sp.add_argument("--T", type=float, help="final time override")
        sp.add_argument("--eta", type=float, help="2D flux stabilization")
        sp.add_argument("--theta", type=float, help="2D second-derivative stabilization")
        sp.add_argument("--hybrid", choices=("recompute", "printed", "carry"), help="2D treatment of old-level traces")
        sp.add_argument("--init", choices=("auto", "smooth", "aux"), help="1D initialization of auxiliary variables")
        sp.add_argument("--out", help="output directory")

    common(sub.add_parser("run", help="single solve"))
    common(sub.add_parser("convergence", help="refinement study"))
    st = sub.add_parser("stability", help="stability function report")
    st.add_argument("--scheme", help="';'-separated scheme list (default: third;fourth)")
    st.add_argument("--mu", help="comma-separated complex sample points")
    st.add_argument("--out", help="directory for stability.txt")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "convergence":
            return cmd_convergence(args)
        return cmd_stability(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
