"""Command-line entry point: ``gattn {gen,bench,gradcheck,train,compare}``.

Exit status: 0 success, 1 internal or check failure, 2 usage/input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import graph as graphmod
from . import profile
from .errors import GattnError
from .gradcheck import CHECKABLE, check_op
from .net import uniform_config
from .tensor import make_rng
from .train import TrainConfig, history_to_jsonl, train_node_classifier

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    """Bad user input discovered after argument parsing."""


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")
    return vals


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not a probability")
    return v


def _add_shared(p, default_format="table"):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("table", "json"), default=default_format)
    p.add_argument("--out", default=None, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gattn", description="Graph attention operator kit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a stochastic block model graph")
    p.add_argument("--blocks", type=_int_list, required=True, help="nodes per block, e.g. 100,100")
    p.add_argument("--p-in", type=_prob, required=True)
    p.add_argument("--p-out", type=_prob, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    _add_shared(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="profile GAO/hGAO/cGAO on one graph size")
    p.add_argument("--op", choices=(*profile.OPERATORS, "all"), default="all")
    p.add_argument("--all", action="store_true", help="same as --op all")
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--channels", type=int, default=48)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--graph", default=None, help="benchmark on this graph JSON instead of a synthetic one")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--skip-wall", action="store_true")
    _add_shared(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--op", choices=CHECKABLE, required=True)
    p.add_argument("--nodes", type=int, default=6)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--tied", action="store_true", help="hgao only: use an input with a top-k tie")
    _add_shared(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="train a GANet node classifier")
    p.add_argument("--graph", required=True)
    p.add_argument("--attn", choices=("gao", "hgao", "cgao"), default="hgao")
    p.add_argument("--gams", type=int, default=2)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--dropout-keep", type=float, default=0.5)
    p.add_argument("--patience", type=int, default=50)
    _add_shared(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="reproduce the MAdd/memory/time comparison table")
    p.add_argument("--sizes", type=_int_list, default=[1000, 10000, 20000])
    p.add_argument("--channels", type=int, default=48)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--skip-wall", action="store_true")
    _add_shared(p)
    p.set_defaults(func=cmd_compare)
    return parser


def _validate(parser, args) -> None:
    """Flag combinations argparse can't express; errors exit with status 2."""
    if args.command == "gen":
        if not args.p_out < args.p_in:
            parser.error("--p-out must be smaller than --p-in")
        if args.noise < 0:
            parser.error("--noise must be nonnegative")
        if not args.out:
            parser.error("gen needs --out")
    if args.command in ("bench", "compare"):
        if args.repeats < 3:
            parser.error("--repeats must be at least 3")
        if args.channels < 1 or args.k < 1:
            parser.error("--channels and --k must be positive")
    if args.command == "bench" and args.nodes < 2:
        parser.error("--nodes must be at least 2")
    if args.command == "gradcheck":
        if args.tied and args.op != "hgao":
            parser.error("--tied only applies to --op hgao")
        if min(args.nodes, args.channels, args.k, args.trials) < 1 or args.tol <= 0:
            parser.error("sizes, --trials and --tol must be positive")
    if args.command == "train":
        if min(args.gams, args.hidden, args.k) < 1 or args.epochs < 0:
            parser.error("--gams, --hidden and --k must be positive")
        if not 0.0 < args.dropout_keep <= 1.0:
            parser.error("--dropout-keep must be in (0, 1]")


def cmd_gen(args) -> int:
    g = graphmod.generate_sbm(make_rng(args.seed), args.blocks, args.p_in, args.p_out, args.noise)
    graphmod.save_graph(g, args.out)
    summary = {"num_nodes": g.num_nodes, "edges": len(g.edge_list()), "channels": g.num_channels,
               "blocks": args.blocks, "out": args.out}
    if args.format == "json":
        print(json.dumps(summary))
    else:
        print(f"wrote {args.out}: {g.num_nodes} nodes, {summary['edges']} edges, {g.num_channels} channels")
    return EXIT_OK


def _render(reports, fmt) -> str:
    return profile.reports_to_json(reports) if fmt == "json" else profile.format_table(reports)


def cmd_bench(args) -> int:
    ops = profile.OPERATORS if (args.all or args.op == "all") else (args.op,)
    if args.graph:
        g = graphmod.load_graph(args.graph)
        if g.num_channels < 1:
            raise InputError(f"{args.graph} has no feature channels")
        setup = profile.setup_for_graph(g, args.k, make_rng(args.seed))
    else:
        setup = profile.synthetic_setup(args.nodes, args.channels, args.k, args.seed)
    reports = profile.profile_setup(setup, ops, skip_wall=args.skip_wall, repeats=args.repeats)
    _emit(_render(reports, args.format), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    reports = profile.comparison_report(args.sizes, args.channels, args.k, args.seed,
                                    skip_wall=args.skip_wall, repeats=args.repeats)
    _emit(_render(reports, args.format), args.out)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rows, ok = [], True
    for trial in range(args.trials):
        res = check_op(args.op, args.seed + trial, args.nodes, args.channels, args.k, tied=args.tied)
        if res.skipped:
            status = "skipped"
        else:
            status = "pass" if res.passed(args.tol) else "fail"
            ok &= status == "pass"
        rows.append({"op": args.op, "seed": args.seed + trial, "max_rel_error": res.max_error,
                     "status": status, "warning": res.skipped})
    if args.format == "json":
        text = "".join(json.dumps(r) + "\n" for r in rows)
    else:
        lines = []
        for r in rows:
            line = f"{r['op']} seed={r['seed']}: {r['status']}"
            line += f" (warning: {r['warning']})" if r["warning"] else f" max rel error {r['max_rel_error']:.3e}"
            lines.append(line)
        text = "\n".join(lines)
    _emit(text, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_train(args) -> int:
    g = graphmod.load_graph(args.graph)
    if g.labels is None or g.masks is None:
        raise InputError(f"{args.graph} has no labels/masks; node classification needs both")
    classes = int(g.labels.max()) + 1
    cfg = uniform_config(g.num_channels, classes, args.attn, args.gams, args.hidden, args.k, args.dropout_keep)
    tcfg = TrainConfig(args.lr, args.l2, args.epochs, None, args.seed, args.patience)
    res = train_node_classifier(g, cfg, tcfg)
    if args.format == "json":
        summary = {"best_epoch": res.best_epoch, "best_val_acc": res.best_val_acc, "test_acc": res.test_acc}
        _emit(history_to_jsonl(res.history) + json.dumps(summary), args.out)
    else:
        last = res.history[-1] if res.history else None
        lines = [f"epochs run: {len(res.history)}"]
        if last:
            lines.append(f"final loss {last['loss']:.4f}, val acc {last['val_acc']:.4f}")
        lines.append(f"best epoch {res.best_epoch}, val acc {res.best_val_acc:.4f}")
        lines.append(f"test accuracy {res.test_acc:.4f}")
        _emit("\n".join(lines), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.func(args)
    except (InputError, GattnError, OSError) as exc:
        print(f"gattn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"gattn {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
