"""Command-line entry point: ``plnet <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(non-convergence, non-finite values), 3 certification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import monlip
from ..cayley import OrthogonalSpec
from ..bilip import BiLipModel, ConditionedBiLipModel, conditioned_inverse_info, g_inverse_info
from ..errors import CertificationError, ConfigError, DimensionError, NonConvergenceError, NumericalError
from ..io import load_model, save_model
from ..pl import PLNet, empirical_bilip, pl_check
from ..solvers import DYS, FSM, SolverConfig, dys_solve, fsm_solve, write_trace_csv
from .config import EXPERIMENTS, load_config, make_spec, parse_config
from .experiments import run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _vector(tokens) -> np.ndarray:
    vals = []
    for tok in tokens:
        vals += [float(v) for v in str(tok).split(",") if v.strip()]
    return np.array(vals)


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="random seed (overrides config files)")
    parser.add_argument("--out-dir", default=argparse.SUPPRESS if suppress else ".", help="directory for output files")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="plnet", description="Certified bi-Lipschitz and PL networks.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    c = sub.add_parser("certify", help="print the certificate report of every monotone layer")
    c.add_argument("model")
    c.add_argument("--json", action="store_true", help="print JSON instead of text")

    i = sub.add_parser("invert", help="solve G(x) = y (or F(x) = y for a single layer)")
    i.add_argument("model")
    i.add_argument("--y", nargs="+", required=True, help="target vector, e.g. --y 0.1,-2 or --y=-1,2")
    i.add_argument("--p", nargs="+", help="condition vector for conditioned models")
    i.add_argument("--solver", choices=(DYS, FSM), default=DYS)
    i.add_argument("--alpha", type=float, help="step size (default: 0.9 mu/gamma for DYS, mu/nu^2 for FSM)")
    i.add_argument("--force", action="store_true", help="allow a step size outside the convergent range")
    i.add_argument("--tol", type=float, default=1e-8)
    i.add_argument("--max-iters", type=int, default=20000)
    i.add_argument("--trace-csv", help="also write the residual trace to this CSV file")

    t = sub.add_parser("train", help="run a training experiment")
    t.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    t.add_argument("--config", help="flat key = value config file")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    t.add_argument("--quiet", action="store_true")

    b = sub.add_parser("bench-solvers", help="residual traces for a DYS step-size sweep and FSM")
    b.add_argument("--model", required=True)
    b.add_argument("--y", nargs="+", help="target vector (default: zero, i.e. the global minimum)")
    b.add_argument("--p", nargs="+", help="condition vector for conditioned models")
    b.add_argument("--fractions", default="0.1,0.25,0.5,0.75,0.9", help="DYS step sizes as fractions of mu/gamma")
    b.add_argument("--tol", type=float, default=1e-8)
    b.add_argument("--max-iters", type=int, default=20000)
    b.add_argument("--out", help="CSV path (default: <out-dir>/bench-solvers.csv)")

    v = sub.add_parser("verify", help="sample the PL inequality and the bi-Lipschitz bounds")
    v.add_argument("model")
    v.add_argument("--samples", type=int, default=10000)
    v.add_argument("--pairs", type=int, default=10000)
    v.add_argument("--tol", type=float, default=1e-8, help="solver tolerance for the global minimum")
    v.add_argument("--max-iters", type=int, default=50000)

    for sp in (c, i, t, b, v):
        _global_flags(sp, suppress=True)
    return p


# helpers -----------------------------------------------------------------------


def _monlip_weights(obj) -> list:
    if isinstance(obj, tuple):
        spec, params = obj
        return [monlip.materialize(spec, params)]
    g = obj.g if isinstance(obj, PLNet) else obj
    base = g.base if isinstance(g, ConditionedBiLipModel) else g
    return base.monlip_layers()


def _g_of(obj):
    return obj.g if isinstance(obj, PLNet) else obj


def _solve_any(obj, y, p, cfg: SolverConfig):
    """Returns ``(x, [SolveResult per monotone layer])``."""
    if isinstance(obj, tuple):
        spec, params = obj
        w = monlip.materialize(spec, params)
        if y.shape != (spec.n,):
            raise DimensionError(f"y has {y.size} entries, layer expects {spec.n}")
        res = dys_solve(w, y, cfg) if cfg.kind == DYS else fsm_solve(w, y, cfg)
        return res.x, [res]
    g = _g_of(obj)
    if isinstance(g, ConditionedBiLipModel):
        if p is None:
            raise ConfigError("this model is conditioned; pass --p")
        info = conditioned_inverse_info(g, y, p, cfg)
    else:
        if p is not None:
            raise ConfigError("--p given for an unconditioned model")
        info = g_inverse_info(g, y, cfg)
    return info.x, info.layers


def _trace_rows(kind: str, alpha: float, results) -> list:
    rows, offset = [], 0
    for res in results:
        rows += [(kind, alpha, offset + it, r) for it, r in res.trace]
        offset += res.iterations
    return rows


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# subcommands -------------------------------------------------------------------


def cmd_certify(args) -> int:
    obj = load_model(args.model)
    reports = [monlip.certificate_check(w) for w in _monlip_weights(obj)]
    ok = all(r.certified and r.lemma_ok for r in reports)
    if args.json:
        print(json.dumps({"certified": ok, "layers": [r.as_dict() for r in reports]}, indent=2))
    else:
        for k, r in enumerate(reports):
            d = r.as_dict()
            print(
                f"layer {k}: y_eq_err={d['y_eq_err']:.3e} h_margin={d['h_margin']:.6e} "
                f"lemma_margins={[round(m, 10) for m in d['lemma_margins']]} certified={d['certified']}"
            )
        print("CERTIFIED" if ok else "NOT CERTIFIED")
    return EXIT_OK if ok else EXIT_CERT


def cmd_invert(args) -> int:
    obj = load_model(args.model)
    y = _vector(args.y)
    p = None if args.p is None else _vector(args.p)
    cfg = SolverConfig(kind=args.solver, alpha=args.alpha, tol=args.tol, max_iters=args.max_iters, record_trace=True, force=args.force)
    x, results = _solve_any(obj, y, p, cfg)
    print(json.dumps({
        "x": np.asarray(x).tolist(),
        "solver": args.solver,
        "layers": [{"alpha": r.alpha, "iterations": r.iterations, "residual": r.residual} for r in results],
        "trace": [[it, res] for _, _, it, res in _trace_rows(args.solver, results[0].alpha if results else 0.0, results)],
    }))
    if args.trace_csv:
        write_trace_csv(args.trace_csv, _trace_rows(args.solver, results[0].alpha if results else 0.0, results))
    return EXIT_OK


def cmd_train(args) -> int:
    overrides = load_config(args.config) if args.config else {}
    if args.set:
        extra = parse_config("\n".join(args.set))
        overrides.update(extra)
    if args.seed is not None:
        overrides["seed"] = args.seed
    spec = make_spec(args.experiment, overrides)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    model, result = run_experiment(spec, log)
    out = _out_dir(args)
    stem = f"{spec.experiment}-seed{spec.seed}"
    save_model(out / f"{stem}.model.json", model)
    (out / f"{stem}.result.json").write_text(result.to_json())
    print(json.dumps({"model": str(out / f"{stem}.model.json"), "result": str(out / f"{stem}.result.json"),
                      "train_loss": result.train_loss, "test_loss": result.test_loss}))
    return EXIT_OK


def cmd_bench(args) -> int:
    obj = load_model(args.model)
    n = obj[0].n if isinstance(obj, tuple) else _g_of(obj).n
    y = np.zeros(n) if args.y is None else _vector(args.y)
    p = None if args.p is None else _vector(args.p)
    fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    base = SolverConfig(tol=args.tol, max_iters=args.max_iters, record_trace=True)
    rows = []
    summary = []
    runs = [(DYS, base.with_(alpha_frac=f)) for f in fractions] + [(FSM, base.with_(kind=FSM))]
    for kind, cfg in runs:
        try:
            _, results = _solve_any(obj, y, p, cfg)
            status = "converged"
        except NonConvergenceError as exc:
            results, status = [], f"not converged (residual {exc.residual:.3e})"
            rows += [(kind, float("nan"), it, r) for it, r in exc.trace]
        if results:
            alpha = results[0].alpha
            rows += _trace_rows(kind, alpha, results)
            summary.append({"solver": kind, "alpha": alpha, "iterations": sum(r.iterations for r in results), "status": status})
        else:
            summary.append({"solver": kind, "alpha": None, "iterations": None, "status": status})
    path = Path(args.out) if args.out else _out_dir(args) / "bench-solvers.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(path, rows)
    print(json.dumps({"csv": str(path), "runs": summary}, indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    obj = load_model(args.model)
    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args)
    if isinstance(obj, PLNet):
        report = pl_check(obj, args.samples, seed, cfg=SolverConfig(tol=args.tol, max_iters=args.max_iters), pairs=args.pairs)
        text, ok = report.to_json(), report.passed
    else:
        if isinstance(obj, tuple):
            spec, params = obj
            ident = OrthogonalSpec(spec.n, rotate=False)
            g = BiLipModel([ident, spec, ident], [{"q": np.zeros(spec.n)}, params, {"q": np.zeros(spec.n)}])
        else:
            g = obj
        lo, hi = empirical_bilip(g, args.pairs, seed)
        ok = g.mu - 1e-9 <= lo and hi <= g.nu + 1e-9
        text = json.dumps({"seed": seed, "bilip_pairs": args.pairs, "bilip_ratio_min": lo, "bilip_ratio_max": hi,
                           "mu": g.mu, "nu": g.nu, "passed": ok}, indent=2, sort_keys=True)
    (out / "verify.json").write_text(text)
    print(text)
    return EXIT_OK if ok else EXIT_CERT


COMMANDS = {"certify": cmd_certify, "invert": cmd_invert, "train": cmd_train, "bench-solvers": cmd_bench, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DimensionError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
