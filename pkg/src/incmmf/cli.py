"""Command-line interface: ``incmmf <subcommand> [options]``.

Exit status: 0 success, 1 usage error, 2 data error (unreadable or invalid
input), 3 numerical failure.
"""

import argparse
import csv
import io as _io
import os
import sys
import time
from math import ceil
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import DEFAULT_SYM_TOL, ConvergenceError
from .analysis import leverage_scores, mmf_scores, select_features
from .batch import batch_mmf
from .graph import VARIANTS, MmfConfig, error_identity
from .incremental import incremental_mmf, insert_row
from .io import (
    MATRIX_FORMATS,
    SYNTHETIC_KINDS,
    covariance_from_data,
    dumps_graph,
    export_dot,
    format_float,
    generate_synthetic,
    load_matrix,
    loads_graph,
    read_csv_table,
    save_matrix,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _levels(text):
    if text == "max":
        return "max"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'max', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return value


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load(args, path=None):
    path = path or args.input
    fmt = args.format
    if path == "-":
        src = _io.StringIO(sys.stdin.read())
        return load_matrix(src, fmt or "csv-dense", args.sym_tol, args.symmetrize)
    if not Path(path).exists():
        raise FileNotFoundError(f"--input: no such file: {path}")
    return load_matrix(path, fmt, args.sym_tol, args.symmetrize)


def _load_graph(path):
    try:
        return loads_graph(_read_text(path))
    except FileNotFoundError:
        raise FileNotFoundError(f"--graph: no such file: {path}") from None
    except ValueError as exc:
        raise ValueError(f"--graph {path}: {exc}") from None


def _config(args, **extra):
    return MmfConfig(k=args.order, n_levels=args.levels, variant=args.variant,
                     dict_size=args.dict_size, seed=args.seed, sym_tol=args.sym_tol,
                     literal_eq6=args.literal_eq6, **extra)


def _graph_text(C, graph, meta):
    direct, *_ = error_identity(np.asarray(C), graph)
    meta = dict(meta, frob_error=float(np.sqrt(direct)))
    return dumps_graph(graph, getattr(C, "labels", None), meta)


def _scores_csv(score_vector):
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["label", "score"])
    for label, value in zip(score_vector.labels, score_vector.values):
        w.writerow([label, format_float(value)])
    return out.getvalue()


def cmd_factor(args):
    C = _load(args)
    config = _config(args)
    graph, _ = batch_mmf(C.values, config)
    meta = {"variant": config.variant, "seed": config.seed, "init_fraction": None}
    _write(args.output, _graph_text(C, graph, meta))


def cmd_incremental(args):
    C = _load(args)
    config = _config(args, init_fraction=args.init_frac, insert_order=args.insert_order)
    graph = incremental_mmf(C.values, config)
    meta = {"variant": config.variant, "seed": config.seed, "init_fraction": config.init_fraction,
            "insert_order": config.insert_order}
    _write(args.output, _graph_text(C, graph, meta))


def cmd_insert(args):
    graph, labels, meta = _load_graph(args.graph)
    C = _load(args)
    try:
        row, _ = read_csv_table(args.row)
    except FileNotFoundError:
        raise FileNotFoundError(f"--row: no such file: {args.row}") from None
    row = row.ravel()
    if row.size != C.dim + 1:
        raise ValueError(f"--row: expected {C.dim + 1} values (a new column of the "
                         f"{C.dim}x{C.dim} matrix plus its diagonal), got {row.size}")
    config = MmfConfig(k=graph.k, variant=meta.get("variant") or "exhaustive",
                       dict_size=args.dict_size, seed=args.seed, sym_tol=args.sym_tol)
    new_graph = insert_row(C.values, row, graph, config)
    Ct = np.empty((C.dim + 1, C.dim + 1))
    Ct[:-1, :-1] = C.values
    Ct[-1, :] = row
    Ct[:, -1] = row
    new_labels = None
    if labels is not None:
        new_labels = list(labels) + [str(C.dim)]
    meta = dict(meta, seed=config.seed)
    direct, *_ = error_identity(Ct, new_graph)
    meta["frob_error"] = float(np.sqrt(direct))
    _write(args.output, dumps_graph(new_graph, new_labels, meta))


def cmd_scores(args):
    graph, labels, _ = _load_graph(args.graph)
    C = _load(args)
    if C.dim != graph.m:
        raise ValueError(f"--input is {C.dim}x{C.dim} but --graph has m={graph.m}")
    scores = mmf_scores(C, graph)
    _write(args.output, _scores_csv(scores))


def cmd_leverage(args):
    C = _load(args)
    rank = args.rank if args.rank is not None else max(1, ceil(0.1 * C.dim))
    if not 1 <= rank <= C.dim:
        raise ValueError(f"--rank must be in [1, {C.dim}], got {rank}")
    _write(args.output, _scores_csv(leverage_scores(C, rank)))


def cmd_select(args):
    text = _read_text(args.scores)
    rows = list(csv.reader(_io.StringIO(text)))
    if rows and rows[0] == ["label", "score"]:
        rows = rows[1:]
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError(f"--scores {args.scores}: no score rows")
    try:
        labels = [r[0] for r in rows]
        values = np.array([float(r[1]) for r in rows])
    except (IndexError, ValueError):
        raise ValueError(f"--scores {args.scores}: expected 'label,score' rows") from None
    chosen = select_features(values, args.fraction, args.mode, np.random.default_rng(args.seed))
    out = ["index,label"] + [f"{i},{labels[i]}" for i in chosen]
    _write(args.output, "\n".join(out) + "\n")


def cmd_export_dot(args):
    graph, labels, _ = _load_graph(args.graph)
    _write(args.output, export_dot(graph, labels))


COMPARE_METHODS = (
    ("batch-exhaustive", "exhaustive", False),
    ("batch-eigen", "eigen", False),
    ("batch-correlation-greedy", "correlation-greedy", False),
    ("incremental", "exhaustive", True),
)


def cmd_compare(args):
    C = _load(args)
    values = C.values
    norm = float(np.linalg.norm(values))
    header = ["method", "frob_error", "rel_error", "level_error_sum", "offcore_sqnorm",
              "identity_rel_diff"]
    if not args.no_timing:
        header.append("seconds")
    rows = [header]
    for name, variant, incremental in COMPARE_METHODS:
        config = MmfConfig(k=args.order, variant=variant, dict_size=args.dict_size,
                           seed=args.seed, sym_tol=args.sym_tol, init_fraction=args.init_frac)
        start = time.perf_counter()
        graph = incremental_mmf(values, config) if incremental else batch_mmf(values, config)[0]
        seconds = time.perf_counter() - start
        direct, level_sum, offcore, rel = error_identity(values, graph)
        frob = float(np.sqrt(direct))
        row = [name, format_float(frob), format_float(frob / norm if norm else 0.0),
               format_float(level_sum), format_float(offcore), format_float(rel)]
        if not args.no_timing:
            row.append(format_float(round(seconds, 6)))
        rows.append(row)
    _write(args.output, "\n".join(",".join(r) for r in rows) + "\n")


def cmd_gen(args):
    C = generate_synthetic(args.kind, args.size, seed=args.seed, depth=args.depth,
                           base=args.base, boost=args.boost, noise=args.noise, rank=args.rank)
    if args.output in (None, "-"):
        buf = _io.StringIO()
        save_matrix(C, buf, args.format or "csv-dense")
        sys.stdout.write(buf.getvalue())
    else:
        save_matrix(C, args.output, args.format)


def cmd_cov(args):
    if args.input != "-" and not Path(args.input).exists():
        raise FileNotFoundError(f"--input: no such file: {args.input}")
    src = _io.StringIO(sys.stdin.read()) if args.input == "-" else args.input
    C = covariance_from_data(src, center=not args.no_center)
    if args.output in (None, "-"):
        buf = _io.StringIO()
        save_matrix(C, buf, args.format or "csv-dense")
        sys.stdout.write(buf.getvalue())
    else:
        save_matrix(C, args.output, args.format)


def _matrix_args(p, output=True):
    p.add_argument("--input", default="-", help="matrix file, '-' for stdin (default)")
    p.add_argument("--format", choices=MATRIX_FORMATS, default=None,
                   help="input format (default: by file suffix, .mtx is matrix-market)")
    p.add_argument("--symmetrize", action="store_true", help="average asymmetric input with its transpose")
    p.add_argument("--sym-tol", type=float, default=DEFAULT_SYM_TOL)
    if output:
        p.add_argument("--output", default="-", help="output file, '-' for stdout (default)")


def _factor_args(p):
    p.add_argument("--order", "-k", type=int, default=3, help="rotation order k (default 3)")
    p.add_argument("--levels", type=_levels, default="max", help="number of levels or 'max'")
    p.add_argument("--variant", choices=VARIANTS, default="exhaustive")
    p.add_argument("--dict-size", type=int, default=50, help="random rotations per level (default 50)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--literal-eq6", action="store_true",
                   help="correlation heuristic takes the smallest signed cosines")


def build_parser():
    parser = _Parser(prog="incmmf", description="Multiresolution matrix factorization toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("factor", help="batch factorization -> graph JSON")
    _matrix_args(p)
    _factor_args(p)
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("incremental", help="incremental factorization -> graph JSON")
    _matrix_args(p)
    _factor_args(p)
    p.add_argument("--init-frac", type=_fraction, default=0.1,
                   help="share of rows factorized in batch before insertion (default 0.1)")
    p.add_argument("--insert-order", choices=("natural", "shuffle"), default="natural")
    p.set_defaults(func=cmd_incremental)

    p = sub.add_parser("insert", help="insert one row/column into a saved graph")
    _matrix_args(p)
    p.add_argument("--graph", required=True, help="graph JSON of the --input matrix")
    p.add_argument("--row", required=True, help="CSV with the m+1 entries of the new column")
    p.add_argument("--dict-size", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_insert)

    p = sub.add_parser("scores", help="MMF scores (residual row norms) -> CSV")
    _matrix_args(p)
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("leverage", help="leverage scores -> CSV")
    _matrix_args(p)
    p.add_argument("--rank", type=int, default=None, help="number of eigenvectors (default ceil(0.1 m))")
    p.set_defaults(func=cmd_leverage)

    p = sub.add_parser("select", help="pick features from a score CSV")
    p.add_argument("--scores", required=True, help="CSV with label,score rows ('-' for stdin)")
    p.add_argument("--fraction", type=_fraction, required=True)
    p.add_argument("--mode", choices=("top", "sample"), default="top")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("export-dot", help="graph JSON -> Graphviz DOT")
    p.add_argument("--graph", required=True)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("compare", help="batch variants vs incremental -> CSV")
    _matrix_args(p)
    p.add_argument("--order", "-k", type=int, default=3)
    p.add_argument("--dict-size", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-frac", type=_fraction, default=0.1)
    p.add_argument("--no-timing", action="store_true", help="omit the seconds column")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen", help="synthetic symmetric matrix")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=2, help="hierarchical-block: splitting depth")
    p.add_argument("--base", type=float, default=0.5, help="hierarchical-block: decay per tree level")
    p.add_argument("--boost", type=float, default=0.0, help="hierarchical-block: added to the diagonal")
    p.add_argument("--noise", type=float, default=0.0, help="hierarchical-block: noise scale")
    p.add_argument("--rank", type=int, default=None, help="random-psd: rows of the Gaussian factor")
    p.add_argument("--format", choices=MATRIX_FORMATS, default=None)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("cov", help="sample covariance of an observations CSV")
    p.add_argument("--input", default="-")
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--format", choices=MATRIX_FORMATS, default=None)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_cov)
    return parser


def _thread_limit():
    raw = os.environ.get("MMF_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MMF_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError(f"MMF_THREADS must be nonnegative, got {n}")
    return n or None


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        limit = _thread_limit()
        if limit is None:
            args.func(args)
        else:
            with threadpool_limits(limits=limit):
                args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"incmmf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, TypeError, KeyError) as exc:
        print(f"incmmf: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
