"""Command-line front end.

Graph aliases live in a small JSON session file (``--session``, else
``$TENSORQL_SESSION``, else ``./.tensorql_session.json``) written by
``load``; ``-g alias=file`` adds a graph for one invocation only.
Exit status is 0 on success, 1 for parse and I/O errors, 2 for query
features outside the supported subset.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .cardinality import DEFAULT_SEED, MIN_SKETCH, KmvSketch
from .cp_decomp import (
    DecompositionError,
    greedy_cp,
    naive_decomposition,
    reduce_to_irreducible,
    verify_sparsity,
    write_factors,
)
from .query.algebra import project
from .query.ast import iter_triples
from .query.engine import Evaluator, decode_solutions
from .query.parser import QuerySyntaxError, UnsupportedFeatureError, parse
from .query.plan import plan
from .rdf_store import Graph, NTriplesError, load_ntriples_file, serialize
from .tensor_core import sparsity

DEFAULT_SESSION = ".tensorql_session.json"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors count as parse errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class Session:
    """Aliases of loaded graphs, persisted as ``{"graphs": {alias: path}}``."""

    def __init__(self, path: Path, extra: dict[str, str] | None = None):
        self.path = path
        self.graphs: dict[str, str] = {}
        if path.exists():
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise CliError(f"corrupt session file {path}: {e}") from e
            self.graphs.update(data.get("graphs", {}))
        self.extra = dict(extra or {})
        self._cache: dict[str, Graph] = {}

    @property
    def aliases(self) -> dict[str, str]:
        return {**self.graphs, **self.extra}

    @property
    def default(self) -> str | None:
        return next(iter(self.aliases), None)

    def register(self, alias: str, path: str) -> None:
        self.graphs[alias] = str(Path(path).resolve())
        self.path.write_text(json.dumps({"graphs": self.graphs}, indent=2) + "\n", encoding="utf-8")

    def graph(self, alias: str) -> Graph:
        if alias not in self._cache:
            path = self.aliases.get(alias)
            if path is None:
                known = ", ".join(self.aliases) or "none"
                raise CliError(f"unknown graph alias {alias!r} (loaded: {known})")
            self._cache[alias] = load_ntriples_file(path)
        return self._cache[alias]

    def graphs_for(self, query) -> dict[str, Graph]:
        """The default graph plus every graph the query names, in session order."""
        wanted = {alias for alias, _ in iter_triples(query.where) if alias is not None}
        names = [a for a in self.aliases if a == self.default or a in wanted]
        out = {a: self.graph(a) for a in names}
        for alias in wanted - set(out):
            out[alias] = self.graph(alias)  # raises with the list of known aliases
        return out


def _read_text(name: str) -> str:
    if name == "-":
        return sys.stdin.read()
    return Path(name).read_text(encoding="utf-8")


def _default_seed() -> int:
    raw = os.environ.get("TENSORQL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError as e:
        raise CliError(f"TENSORQL_SEED must be an integer, got {raw!r}") from e


def _fmt(x) -> str:
    return f"{x:.6f}" if isinstance(x, float) else str(x)


# ---------------------------------------------------------------------------
# commands


def cmd_load(args, session: Session, out) -> int:
    g = load_ntriples_file(args.file)
    session.register(args.alias, args.file)
    n, m, l = g.dims
    out.write(f"{g.nnz} triples\n")
    out.write(f"dims: {n} x {m} x {l}\n")
    return 0


def cmd_stats(args, session: Session, out) -> int:
    g = session.graph(args.alias)
    n, m, l = g.dims
    stats = g.stats
    out.write(f"dims: {n} x {m} x {l}\n")
    out.write(f"nnz: {g.nnz}\n")
    out.write(f"sparsity: {sparsity(g.tensor):.6f}\n")
    for name, mat in (("P", stats.P), ("Q", stats.Q), ("R", stats.R)):
        out.write(f"{name}: {mat.rows} x {mat.cols}, nnz {mat.nnz}, total {mat.total()}\n")
    out.write(f"marginal nnz: {stats.nnz_total} (bound 3|T| = {3 * g.nnz})\n")
    return 0


def cmd_query(args, session: Session, out) -> int:
    query = parse(_read_text(args.file))
    graphs = session.graphs_for(query)
    result = Evaluator(graphs, session.default).execute(query)
    if query.form == "ASK":
        out.write("true\n" if result else "false\n")
    elif query.form == "CONSTRUCT":
        out.write(serialize(result))
    elif args.format == "jsonl":
        out.write(result.to_jsonl())
    else:
        out.write(result.to_tsv())
    return 0


def cmd_explain(args, session: Session, out) -> int:
    query = parse(_read_text(args.file))
    graphs = session.graphs_for(query)
    steps = plan(query, graphs, session.default).steps
    actual = None
    if args.check:
        ev = Evaluator(graphs, session.default)
        if query.form == "SELECT" and query.distinct:
            ev.distinct(query)
        else:
            ev.evaluate(query.where)
        actual = {s.index: s.actual for s in ev.steps}
    out.write(f"plan ({query.form}, {len(steps)} steps)\n")
    for step in steps:
        out.write(step.describe() + "\n")
        if step.estimate:
            parts = ", ".join(f"{name}: {est}" for name, est in step.estimate.items())
            out.write(f"    estimate: {parts}\n")
        elif step.op != "scan":
            out.write("    estimate: none\n")
        if actual is not None:
            line = f"    actual: {actual.get(step.index, 'skipped')}"
            exact = (step.estimate or {}).get("exact")
            if exact is not None and step.index in actual:
                line += "  (matches exact)" if exact.value == actual[step.index] else "  (MISMATCH)"
            out.write(line + "\n")
    return 0


def cmd_decompose(args, session: Session, out) -> int:
    g = session.graph(args.alias)
    t = g.tensor
    seed = _default_seed() if args.seed is None else args.seed
    if args.naive:
        factors = naive_decomposition(t)
        method = "naive"
    else:
        if args.rank is None:
            raise CliError("--rank is required unless --naive is given")
        if args.rank < 0:
            raise CliError("--rank must be nonnegative")
        factors, _ = greedy_cp(t, args.rank, seed=seed, overcover=args.overcover)
        method = f"greedy (seed {seed}{', overcover' if args.overcover else ''})"
    if args.reduce:
        try:
            factors = reduce_to_irreducible(factors, t)
        except DecompositionError as e:
            raise CliError(f"cannot reduce: {e}") from e
    report = verify_sparsity(factors, t)
    out.write(f"method: {method}\n")
    for line in report.lines():
        out.write(line + "\n")
    if args.export:
        write_factors(factors, args.export, seed=None if args.naive else seed)
        out.write(f"factors written to {args.export}\n")
    return 0


def cmd_estimate_distinct(args, session: Session, out) -> int:
    query = parse(_read_text(args.file))
    if query.form != "SELECT":
        raise CliError("estimate-distinct needs a SELECT query")
    graphs = session.graphs_for(query)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if args.sketch < MIN_SKETCH:
        raise CliError(f"--sketch must be at least {MIN_SKETCH}")
    res = Evaluator(graphs, session.default).evaluate(query.where)
    variables = query.output_vars
    sketch = KmvSketch(args.sketch, seed)
    seen = 0
    for row in decode_solutions(res, variables).rows:
        sketch.add(row)
        seen += 1
    kind = "estimate" if sketch.saturated else "exact"
    out.write(f"solutions: {seen}\n")
    out.write(f"sketch: k={args.sketch}, kept={len(sketch.minima)}\n")
    out.write(f"distinct {kind}: {_fmt(sketch.estimate()) if kind == 'estimate' else int(sketch.estimate())}\n")
    if args.check:
        out.write(f"distinct actual: {project(res, variables).nnz}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tensorql", description="RDF graphs as Boolean tensors, queried with tensor algebra.")
    p.add_argument("--session", help=f"session file (default: $TENSORQL_SESSION or ./{DEFAULT_SESSION})")
    p.add_argument("-g", "--graph", action="append", default=[], metavar="ALIAS=FILE",
                   help="use an N-Triples file under ALIAS for this run only")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("load", help="ingest an N-Triples file under an alias")
    s.add_argument("alias")
    s.add_argument("file")
    s.set_defaults(func=cmd_load)

    s = sub.add_parser("stats", help="dimensions, sparsity and marginal sums of a graph")
    s.add_argument("alias")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("query", help="evaluate a query file ('-' for stdin)")
    s.add_argument("file")
    s.add_argument("--format", choices=("tsv", "jsonl"), default="tsv")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("explain", help="show the join plan with cardinality estimates")
    s.add_argument("file")
    s.add_argument("--check", action="store_true", help="also execute and print actual counts")
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("decompose", help="Boolean CP decomposition of a graph tensor")
    s.add_argument("alias")
    s.add_argument("--rank", type=int)
    s.add_argument("--seed", type=int, help="random seed (default: $TENSORQL_SEED or 0)")
    s.add_argument("--naive", action="store_true", help="exact decomposition from the longest unfolding")
    s.add_argument("--overcover", action="store_true", help="let greedy blocks cover zeros when it pays off")
    s.add_argument("--reduce", action="store_true", help="drop redundant components first")
    s.add_argument("--export", metavar="DIR", help="write header.txt and A/B/C.coo to DIR")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("estimate-distinct", help="KMV sketch estimate of the number of distinct solutions")
    s.add_argument("file")
    s.add_argument("--sketch", type=int, required=True, metavar="K")
    s.add_argument("--seed", type=int, help=f"hash seed (default: {DEFAULT_SEED:#x})")
    s.add_argument("--check", action="store_true", help="also print the exact distinct count")
    s.set_defaults(func=cmd_estimate_distinct)
    return p


def _session_path(args) -> Path:
    return Path(args.session or os.environ.get("TENSORQL_SESSION") or DEFAULT_SESSION)


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        extra = {}
        for spec in args.graph:
            alias, sep, path = spec.partition("=")
            if not sep or not alias or not path:
                raise CliError(f"-g expects ALIAS=FILE, got {spec!r}")
            extra[alias] = path
        session = Session(_session_path(args), extra)
        return args.func(args, session, out)
    except UnsupportedFeatureError as e:
        err.write(f"error: {e}\n")
        return 2
    except (QuerySyntaxError, NTriplesError, CliError, DecompositionError) as e:
        err.write(f"error: {e}\n")
        return 1
    except OSError as e:
        err.write(f"error: {e.filename or ''}: {e.strerror or e}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
