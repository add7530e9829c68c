"""``mcsdp`` command-line interface.

Exit codes: 0 success, 1 solver disagreement in ``verify``, 2 iteration
limit, 3 numerical breakdown, 64 usage or input error.
"""

import argparse
import json
import sys

from . import generators, reference, sdpa
from .errors import McsdpError, ParseError
from .ipm import Model, SolverParams, solve
from .report import (CliqueStatsReport, TimingReport, emit_timing_report, format_scaling_table,
                     scaling_bench)

EXIT_OK, EXIT_MISMATCH, EXIT_MAXITER, EXIT_BREAKDOWN, EXIT_USAGE = 0, 1, 2, 3, 64
STATUS_EXIT = {"converged": EXIT_OK, "max_iterations": EXIT_MAXITER, "breakdown": EXIT_BREAKDOWN}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _params(args):
    try:
        return SolverParams(beta=args.beta, gamma=args.gamma, epsilon=args.epsilon,
                            lambda0=args.lambda0, max_iter=args.max_iter, threads=args.threads,
                            cost_ordered=getattr(args, "cost_ordered", False))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path):
    try:
        return sdpa.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _write(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args):
    g = generators.lattice_graph(args.p, args.q)
    if args.kind == "maxclique":
        prob = generators.maxclique_sdp(g)
        name = f"maxclique lattice p={args.p} q={args.q}"
    else:
        w = generators.random_weights(g, args.seed) if args.weights == "random" else None
        prob = generators.maxcut_sdp(g, w)
        name = f"maxcut lattice p={args.p} q={args.q} weights={args.weights}"
        if args.weights == "random":
            name += f" seed={args.seed}"
    _write(sdpa.write_sdpa_sparse(prob, comment=name), args.out)
    return EXIT_OK


def _result_dict(res, solver):
    d = {"schema": 1, "solver": solver, "status": res.status, "iterations": res.iterations,
         "primal_objective": res.primal_objective, "dual_objective": res.dual_objective,
         "rel_gap": res.rel_gap, "primal_infeas": res.primal_infeas,
         "dual_infeas": res.dual_infeas, "message": res.message}
    return d


def cmd_solve(args):
    prob = _load(args.file)
    params = _params(args)
    if args.solver == "dense":
        res = reference.solve_dense(prob, params)
        timing = None
    else:
        res = solve(prob, params)
        timing = TimingReport.from_result(res)
    baseline = None
    if args.baseline:
        try:
            with open(args.baseline) as fh:
                raw = json.load(fh)
            baseline = TimingReport.from_dict(raw.get("timings", raw))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad baseline {args.baseline}: {exc}") from None
    if args.report == "json":
        d = _result_dict(res, args.solver)
        if timing is not None:
            d["timings"] = json.loads(emit_timing_report(timing, "json", baseline))
        text = json.dumps(d, indent=2, sort_keys=True) + "\n"
    else:
        text = (f"status     {res.status}\niterations {res.iterations}\n"
                f"primal     {res.primal_objective:.12g}\ndual       {res.dual_objective:.12g}\n"
                f"gap        {res.rel_gap:.3e}\npinf       {res.primal_infeas:.3e}\n"
                f"dinf       {res.dual_infeas:.3e}\n")
        if timing is not None:
            text += emit_timing_report(timing, "text", baseline)
    _write(text, args.out)
    if res.status != "converged":
        print(f"mcsdp: {res.status}: {res.message}", file=sys.stderr)
    return STATUS_EXIT[res.status]


def cmd_analyze(args):
    prob = _load(args.file)
    rep = CliqueStatsReport.from_model(Model(prob))
    text = json.dumps(rep.to_dict(), indent=2) + "\n" if args.report == "json" else rep.to_text()
    _write(text, args.out)
    return EXIT_OK


def cmd_verify(args):
    prob = _load(args.file)
    params = _params(args)
    mc = solve(prob, params)
    dn = reference.solve_dense(prob, params)
    diff = abs(mc.primal_objective - dn.primal_objective)
    ok = diff <= 1e-6 * (1.0 + abs(dn.primal_objective))
    print(f"mc     {mc.status:<15}{mc.primal_objective:.12g}\n"
          f"dense  {dn.status:<15}{dn.primal_objective:.12g}\n"
          f"diff   {diff:.3e} ({'ok' if ok else 'MISMATCH'})")
    for res in (mc, dn):
        if res.status != "converged":
            print(f"mcsdp: {res.status}: {res.message}", file=sys.stderr)
            return STATUS_EXIT[res.status]
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_bench(args):
    prob = _load(args.file)
    params = _params(args)
    try:
        threads = [int(t) for t in args.threads_list.split(",")]
    except ValueError:
        raise UsageError("--threads-list must be comma-separated integers") from None
    rows = scaling_bench(prob, threads, params)
    if args.report == "json":
        out = [{"threads": r["threads"], "status": r["status"],
                "primal_objective": r["primal_objective"], "timings": r["report"].to_dict(),
                "speedup": r["speedup"]} for r in rows]
        text = json.dumps({"schema": 1, "rows": out}, indent=2, sort_keys=True) + "\n"
    else:
        text = format_scaling_table(rows)
    _write(text, args.out)
    return max(STATUS_EXIT[r["status"]] for r in rows)


def build_parser():
    p = _Parser(prog="mcsdp", description="Sparse SDP solver using positive matrix completion.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate a lattice benchmark problem")
    g.add_argument("kind", choices=["maxclique", "maxcut"])
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--q", type=int, required=True)
    g.add_argument("--weights", choices=["unit", "random"], default="unit")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    def solver_flags(sp):
        sp.add_argument("file")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--epsilon", type=float, default=1e-7)
        sp.add_argument("--beta", type=float, default=0.2)
        sp.add_argument("--gamma", type=float, default=0.9)
        sp.add_argument("--lambda0", type=float, default=None)
        sp.add_argument("--max-iter", type=int, default=100)
        sp.add_argument("--cost-ordered", action="store_true",
                        help="hand out SCM columns by descending nonzero-column count")

    s = sub.add_parser("solve", help="solve an SDPA sparse file")
    solver_flags(s)
    s.add_argument("--solver", choices=["mc", "dense"], default="mc")
    s.add_argument("--report", choices=["text", "json"], default="text")
    s.add_argument("--baseline", help="JSON report of an earlier run for speed-up ratios")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("analyze", help="clique statistics of the chordal extension")
    a.add_argument("file")
    a.add_argument("--report", choices=["text", "json"], default="text")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="compare the completion solver with the dense solver")
    solver_flags(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="timings across thread counts")
    solver_flags(b)
    b.add_argument("--threads-list", default="1,2,4")
    b.add_argument("--report", choices=["text", "json"], default="text")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == "gen" and (args.p < 1 or args.q < 1):
            raise UsageError("--p and --q must be positive")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except McsdpError as exc:
        print(f"mcsdp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
