"""Command-line entry point: ``hoplp {solve,oracle,tighten,gen,experiment}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dual import SolverConfig, solve
from .edgesel import initial_tree, tighten_loop
from .exact import brute_force_map
from .experiments import CSV_SCHEMAS, FAMILIES, ExperimentConfig, run_experiment
from .generators import gen_avgcut_chain, gen_avgcut_grid, gen_chain_exclusion, gen_hamming_tree
from .hop import EdgeSet
from .model import EnergyModel, InfeasibleError, ModelError, read_model, write_model

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 2, 3

_EPILOG = "experiment CSV columns:\n" + "\n".join(
    f"  {fam}: {', '.join(cols)}" for fam, cols in CSV_SCHEMAS.items()) + (
    "\ntighten trace CSV columns: round, edges_in_S, edge_added, wca, treewidth_bound, converged_bound"
    "\nsolve trace CSV columns: sweep, bound"
    "\nexit codes: 0 success, 2 input error, 3 infeasible model")


def _load(path: str) -> EnergyModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelError(f"{path}: {exc.strerror}") from exc
    return read_model(text)


def _read_edge_file(path: str) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ModelError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(doc, dict):
        doc = doc.get("edges")
    if not isinstance(doc, list):
        raise ModelError(f"{path}: expected a list of [i, j] pairs or an object with 'edges'")
    out = []
    for k, e in enumerate(doc):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)):
            raise ModelError(f"{path}: edges[{k}]: expected [i, j]")
        out.append(tuple(sorted(e)))
    return out


def _edge_set(model: EnergyModel, choice: str) -> EdgeSet:
    if choice == "all":
        return EdgeSet.for_model(model, model.edges)
    if choice == "tree":
        return initial_tree(model)
    if choice == "none":
        return EdgeSet.for_model(model, ())
    if choice.startswith("file:"):
        edges = _read_edge_file(choice[5:])
        missing = [e for e in edges if e not in model.edge_index]
        if missing:
            raise ModelError(f"edge {missing[0]} is not an edge of the model")
        return EdgeSet.for_model(model, edges)
    raise ModelError(f"--edges: expected all, tree, none or file:<path>, got {choice!r}")


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _solver_config(args) -> SolverConfig:
    cfg = SolverConfig()
    if getattr(args, "max_sweeps", None) is not None:
        cfg.max_sweeps = args.max_sweeps
    if getattr(args, "tol", None) is not None:
        cfg.tol_bound = args.tol
    return cfg


def cmd_solve(args) -> int:
    model = _load(args.model)
    es = _edge_set(model, args.edges)
    if args.tw_max is not None and es.tw_bound > args.tw_max:
        raise ModelError(f"edge set has tree-width bound {es.tw_bound} > --tw-max {args.tw_max}")
    res = solve(model, es, _solver_config(args))
    _emit(res.to_json(), args.out)
    if args.trace:
        Path(args.trace).write_text(res.trace_csv())
    return EXIT_OK


def cmd_oracle(args) -> int:
    model = _load(args.model)
    x, e = brute_force_map(model)
    if e >= 1e14:
        raise InfeasibleError("every assignment is forbidden")
    _emit(json.dumps({"assignment": [int(v) for v in x], "energy": e}), args.out)
    return EXIT_OK


def cmd_tighten(args) -> int:
    model = _load(args.model)
    es, trace, res = tighten_loop(model, args.k, args.tw_max, args.rounds, _solver_config(args))
    report = res.report()
    report["stop_reason"] = trace.stop_reason
    report["rounds"] = len(trace.bounds())
    _emit(json.dumps(report, indent=1), args.out)
    if args.trace:
        Path(args.trace).write_text(trace.to_csv())
    return EXIT_OK


def cmd_gen(args) -> int:
    fam = args.family
    if fam == "chain-exclusion":
        model = gen_chain_exclusion(args.n, args.c, args.eps)
    elif fam == "avgcut-chain":
        model = gen_avgcut_chain(args.n, args.c, args.lam)
    elif fam == "hamming-tree":
        model = gen_hamming_tree(args.n, args.lam, args.k, args.seed)
    else:
        model = gen_avgcut_grid(args.rows, args.cols, args.seed, args.lam)
    _emit(write_model(model), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ModelError(f"{args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ModelError(f"{args.config}: not valid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ModelError(f"{args.config}: expected a JSON object")
    else:
        doc = {}
    doc.setdefault("family", args.family)
    if doc["family"] != args.family:
        raise ModelError(f"config family {doc['family']!r} does not match {args.family!r}")
    report = run_experiment(ExperimentConfig.from_dict(doc), args.outdir)
    sys.stdout.write(json.dumps(report.summary, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hoplp", description="LP relaxations for pairwise MRFs with one high-order potential.",
                                epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="coordinate ascent on LP_S")
    s.add_argument("model")
    s.add_argument("--edges", default="tree", help="all | tree | none | file:<path> (default: tree)")
    s.add_argument("--tw-max", type=int)
    s.add_argument("--max-sweeps", type=int)
    s.add_argument("--tol", type=float, help="stop when a sweep improves the bound by less than this")
    s.add_argument("--out", help="report JSON (default: stdout)")
    s.add_argument("--trace", help="per-sweep bound CSV")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact MAP by enumeration (n <= 25)")
    o.add_argument("model")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("tighten", help="spanning tree start plus WCA edge additions")
    t.add_argument("model")
    t.add_argument("--k", type=int, default=8, help="edges added per round")
    t.add_argument("--tw-max", type=int, default=6)
    t.add_argument("--rounds", type=int, default=50)
    t.add_argument("--max-sweeps", type=int)
    t.add_argument("--tol", type=float)
    t.add_argument("--out")
    t.add_argument("--trace", help="selection trace CSV")
    t.set_defaults(func=cmd_tighten)

    g = sub.add_parser("gen", help="generate a model file")
    g.add_argument("family", choices=["chain-exclusion", "avgcut-chain", "hamming-tree", "avgcut-grid"])
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--c", type=float, default=1.0)
    g.add_argument("--eps", type=float, default=0.1)
    g.add_argument("--lam", type=float, help="pairwise strength (hamming-tree) or cut reward (avg-cut)")
    g.add_argument("--k", type=int, default=1, help="excluded Hamming radius (hamming-tree)")
    g.add_argument("--rows", type=int, default=4)
    g.add_argument("--cols", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("experiment", help="run a seeded experiment batch",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("family", choices=FAMILIES)
    e.add_argument("--config", help="JSON object with ExperimentConfig fields")
    e.add_argument("--outdir", required=True)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "gen" and args.lam is None and args.family in ("avgcut-chain", "hamming-tree"):
        args.lam = 0.1 if args.family == "avgcut-chain" else 1.0
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
