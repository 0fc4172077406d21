"""Command-line front end: solve, fluid, morph, simulate, check.

Every number the CLI emits comes from a library call that tests exercise
directly; this module only parses flags, routes, and writes files.

Outputs: each command writes ``<out>.json`` (summary, keys sorted).  Tabular
data goes to ``<out>.csv`` by default or is embedded in the JSON under
``"table"`` with ``--format json``.  Exit codes: 0 success, 1 check failure,
2 validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import mcsim, morph, numerics
from .diagnostics import run_model_checks
from .errors import ModelError, SolverError
from .fluid import (
    fluid_cdf, fluid_cdf_marginal, fluid_density, fluid_mass_zero,
    fluid_stationary, total_probability,
)
from .mmbm import (
    crosscheck, mmbm_cdf, mmbm_cdf_marginal, mmbm_density, mmbm_quadratic,
    mmbm_stationary,
)
from .model import (
    fluidize, is_fluid_model_file, load_fluid_model, load_model, mean_drift,
)
from .quadsolve import eigenvalue_counts

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_table(args, payload: dict, header, rows) -> None:
    """Write rows to <out>.csv, or embed them when --format json."""
    if args.format == "json":
        payload["table"] = {"header": list(header), "rows": [list(r) for r in rows]}
    else:
        with open(args.out + ".csv", "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(str(c) for c in row) + "\n")


def _read_model_text(args) -> str:
    with open(args.model) as fh:
        return fh.read()


def _density_rows(xs, density_fn, cdf_fn, n_phases: int):
    rows = []
    for x in xs:
        dens = density_fn(x)
        cdf = cdf_fn(x)
        for phase in range(n_phases):
            rows.append((_fmt(x), phase, _fmt(dens[phase]), _fmt(cdf[phase])))
    return rows


def _default_xmax(k_matrix) -> float:
    abscissa = float(np.max(numerics.eigenvalues(k_matrix).real))
    return 20.0 / abs(abscissa)


def cmd_solve(args) -> int:
    model = load_model(_read_model_text(args))
    st = mmbm_stationary(model)
    cc = crosscheck(model)
    eq = mmbm_quadratic(model)
    theta = model.sigma

    def counts_of(x):
        neg, zero, pos = eigenvalue_counts(x)
        return {"negative": neg, "zero": zero, "positive": pos}

    counts = {
        "psi1": counts_of(st.Psi1 / theta[:, None]),
        "neg_psi1_star": counts_of(-st.Psi1Star / theta[:, None]),
        "k0": counts_of(st.K0),
        "k0_star": counts_of(st.K0Star),
    }
    summary = {
        "m": model.m,
        "mean_drift": mean_drift(model),
        "psi1": st.Psi1.tolist(),
        "psi1_star": st.Psi1Star.tolist(),
        "k0": st.K0.tolist(),
        "k0_star": st.K0Star.tolist(),
        "zeta1": st.zeta1.tolist(),
        "residuals": {
            "psi1": eq.rel_residual(st.Psi1 / theta[:, None]),
            "psi1_star": eq.rel_residual(-st.Psi1Star / theta[:, None]),
        },
        "eigenvalue_counts": counts,
        "crosscheck": {
            "k_gap": cc.k_gap,
            "density_sup_gap": cc.density_sup_gap,
            "zeta_route_gap": cc.zeta_route_gap,
        },
    }
    xmax = args.xmax if args.xmax else _default_xmax(st.K0)
    xs = np.linspace(0.0, xmax, args.points + 1)[1:]
    rows = _density_rows(
        xs, lambda x: mmbm_density(st, x), lambda x: mmbm_cdf(st, x), model.m
    )
    _write_table(args, summary, ("x", "phase", "density", "cdf"), rows)
    _write_json(args.out + ".json", summary)
    print(f"wrote {args.out}.json", file=sys.stderr)
    return EXIT_OK


def _fluid_model_from_args(args):
    text = _read_model_text(args)
    if is_fluid_model_file(text):
        return load_fluid_model(text)
    model = load_model(text)
    lams = args.lam or []
    if len(lams) != 1:
        raise ModelError(
            "an MMBM model needs exactly one --lambda to be fluidized"
        )
    return fluidize(model, lams[0])


def cmd_fluid(args) -> int:
    fm = _fluid_model_from_args(args)
    st = fluid_stationary(fm, tol=args.tol)
    summary = {
        "n_plus": fm.n_plus,
        "n_minus": fm.n_minus,
        "mean_drift": fm.mean_drift(),
        "psi": st.Psi.tolist(),
        "k": st.K.tolist(),
        "zeta": st.zeta.tolist(),
        "mass_zero": fluid_mass_zero(st).tolist(),
        "total_probability": total_probability(st),
    }
    xmax = args.xmax if args.xmax else _default_xmax(st.K)
    xs = np.linspace(0.0, xmax, args.points + 1)[1:]
    rows = _density_rows(
        xs, lambda x: fluid_density(st, x), lambda x: fluid_cdf(st, x), fm.n
    )
    _write_table(args, summary, ("x", "phase", "density", "cdf"), rows)
    _write_json(args.out + ".json", summary)
    print(f"wrote {args.out}.json", file=sys.stderr)
    return EXIT_OK


def cmd_morph(args) -> int:
    model = load_model(_read_model_text(args))
    lams = sorted(args.lam or [])
    if not lams:
        raise ModelError("morph needs at least one --lambda")
    eps = [1.0 / np.sqrt(lam) for lam in lams]
    expansion = morph.expansion_report(model, eps)
    density = morph.density_convergence(model, lams)
    mgf = morph.mgf_report(model, lams, s=0.5, t=1.0)
    summary = {
        "expansion": expansion.summary_dict(),
        "density": density.summary_dict(),
        "mgf": mgf.summary_dict(),
    }
    rows = []
    for report in (expansion, density, mgf):
        for name in sorted(report.metrics):
            for p, e, v in zip(report.grid, report.eps, report.metrics[name]):
                rows.append((name, _fmt(p), _fmt(e), _fmt(v)))
    _write_table(args, summary, ("metric", "param", "eps", "value"), rows)
    _write_json(args.out + ".json", summary)
    print(f"wrote {args.out}.json", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    text = _read_model_text(args)
    interval = None
    if is_fluid_model_file(text) or args.lam:
        if is_fluid_model_file(text):
            fm = load_fluid_model(text)
        else:
            fm = fluidize(load_model(text), args.lam[0])
        if args.samples:
            interval = max(0.9 * args.horizon / args.samples, 1e-9)
        emp = mcsim.simulate_fluid(
            fm, horizon=args.horizon, seed=args.seed,
            sample_interval=interval if interval else 1.0,
        )
        analytic = fluid_cdf_marginal(fluid_stationary(fm))
        kind = "fluid"
    else:
        model = load_model(text)
        if args.samples:
            interval = max(0.9 * args.horizon / args.samples, args.dt)
        emp = mcsim.simulate_mmbm(
            model, horizon=args.horizon, dt=args.dt, seed=args.seed,
            sample_interval=interval,
        )
        analytic = mmbm_cdf_marginal(mmbm_stationary(model))
        kind = "mmbm"
    ks = mcsim.ks_distance(emp, analytic)
    summary = {
        "kind": kind,
        "n_samples": emp.n_samples,
        "seed": args.seed,
        "horizon": args.horizon,
        "ks_distance": ks,
        "mass_at_zero": emp.mass_at_zero(),
        "phase_frequencies": emp.phase_frequencies().tolist(),
    }
    emp.write_csv(args.out + ".csv")
    _write_json(args.out + ".json", summary)
    print(f"wrote {args.out}.json (ks={ks:.4f})", file=sys.stderr)
    return EXIT_OK


def cmd_check(args) -> int:
    model = load_model(_read_model_text(args))
    results = run_model_checks(model)
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failures += not r.passed
        print(f"{status}  {r.name:<{width}}  {r.value:>12.3e}  {r.detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    if args.out:
        _write_json(args.out + ".json", {
            "results": [
                {"name": r.name, "passed": r.passed, "value": r.value,
                 "detail": r.detail}
                for r in results
            ],
            "failures": failures,
        })
    return EXIT_CHECK_FAILED if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluidbm",
        description="Stationary distributions of fluid queues and reflected "
                    "Markov-modulated Brownian motion, plus convergence "
                    "certification of the fluid approximation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--model", required=True, help="path to a model JSON file")
        help_out = ("output path prefix (default %(default)s)" if default_out
                    else "output path prefix (check prints to stdout; set to "
                         "also write JSON)")
        p.add_argument("--out", default=default_out, help=help_out)
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="tabular output format (default csv)")
        p.add_argument("--tol", type=float, default=1e-10,
                       help="solver residual tolerance (default 1e-10)")
        p.add_argument("--seed", type=int, default=mcsim.DEFAULT_SEED,
                       help="simulation seed (default 0x5EED)")
        p.add_argument("--lambda", dest="lam", type=float, action="append",
                       help="fluid switching rate; repeatable")
        p.add_argument("--xmax", type=float, default=None,
                       help="level grid upper end (default from K spectrum)")
        p.add_argument("--points", type=int, default=200,
                       help="level grid size (default 200)")
        p.add_argument("--samples", type=int, default=None,
                       help="target number of collected samples")
        p.add_argument("--horizon", type=float, default=1e4,
                       help="simulated time horizon (default 1e4)")
        p.add_argument("--dt", type=float, default=1e-3,
                       help="Euler sub-step bound (default 1e-3)")

    p_solve = sub.add_parser("solve", help="stationary law of the reflected MMBM")
    common(p_solve, "fluidbm_solve")
    p_solve.set_defaults(func=cmd_solve)

    p_fluid = sub.add_parser("fluid", help="stationary law of a fluid queue")
    common(p_fluid, "fluidbm_fluid")
    p_fluid.set_defaults(func=cmd_fluid)

    p_morph = sub.add_parser("morph", help="convergence reports over --lambda grid")
    common(p_morph, "fluidbm_morph")
    p_morph.set_defaults(func=cmd_morph)

    p_sim = sub.add_parser("simulate", help="Monte Carlo samples + KS distance")
    common(p_sim, "fluidbm_simulate")
    p_sim.set_defaults(func=cmd_simulate)

    p_check = sub.add_parser("check", help="run the model invariant suite")
    common(p_check, "")
    p_check.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
