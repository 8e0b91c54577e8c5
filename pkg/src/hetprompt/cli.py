"""Command-line entry points: decompose, pretrain, tune-eval, gen-synth, validate.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .encoder import load_checkpoint, save_checkpoint
from .graph import GraphFormatError, HeteroGraph, gen_synthetic, load_graph, save_dataset, validate
from .objectives import NumericalError, pretrain
from .tasks import run_benchmark, split_lp_edges
from .template import graph_template

log = logging.getLogger("hetprompt")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class DataError(Exception):
    pass


def _load(config: RunConfig, need_labels: bool = False):
    if not config.node_file or not config.edge_file:
        raise ConfigError("node_file and edge_file must be set")
    try:
        graph, labels = load_graph(config.node_file, config.edge_file, config.label_file or None)
    except (OSError, GraphFormatError) as exc:
        raise DataError(str(exc)) from None
    if need_labels and labels is None:
        raise ConfigError("label_file must be set for this task")
    report = validate(graph)
    if not report.ok:
        raise DataError(f"invalid graph:\n{report}")
    return graph, labels


def _out_dir(config: RunConfig) -> str:
    out = config.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_view(path: str, graph: HeteroGraph, view) -> None:
    ids = graph.node_ids or tuple(str(i) for i in range(graph.num_nodes))
    m = view.member_nodes
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in view.edges.tolist():
            if a < b:
                fh.write(f"{ids[m[a]]}\t{ids[m[b]]}\tview{view.view_index}\n")


def cmd_decompose(config: RunConfig) -> int:
    graph, _ = _load(config)
    out = _out_dir(config)
    views = graph_template(graph)
    ids = graph.node_ids or tuple(str(i) for i in range(graph.num_nodes))
    tnames = graph.type_names or tuple(f"t{i}" for i in range(graph.num_node_types))
    manifest = ["view\ttype\tnodes\tedges\tedge_file\tmember_file"]
    for view in views:
        tag = "all" if view.view_index == 0 else tnames[view.view_index - 1]
        efile, mfile = f"view{view.view_index}.edges.tsv", f"view{view.view_index}.members.tsv"
        _write_view(os.path.join(out, efile), graph, view)
        with open(os.path.join(out, mfile), "w", encoding="utf-8") as fh:
            for v in view.member_nodes.tolist():
                fh.write(f"{ids[v]}\t{tnames[graph.node_type[v]]}\n")
        manifest.append(f"{view.view_index}\t{tag}\t{view.num_nodes}\t{len(view.edges) // 2}\t{efile}\t{mfile}")
    with open(os.path.join(out, "manifest.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest) + "\n")
    print(f"wrote {len(views)} views to {out}")
    return EXIT_OK


def cmd_pretrain(config: RunConfig) -> int:
    graph, _ = _load(config)
    if config.mode == "templated" and graph.is_homogeneous:
        print("warning: templated pre-training on a homogeneous graph duplicates its single view",
              file=sys.stderr)
    out = _out_dir(config)
    holdout = None
    if config.lp_holdout_fraction > 0:
        holdout = split_lp_edges(graph, config.lp_holdout_fraction, config.seed)
    curve_path = os.path.join(out, "training_curve.tsv")
    new_file = not os.path.exists(curve_path)
    with open(curve_path, "a", encoding="utf-8") as curve:
        if new_file:
            curve.write("epoch\tloss\tval_loss\n")
        result = pretrain(graph, config.mode, config, holdout=holdout,
                          callback=lambda e, tr, va: curve.write(f"{e}\t{tr!r}\t{va!r}\n"))
    ckpt = config.checkpoint or os.path.join(out, "encoder.ckpt")
    save_checkpoint(result.params, ckpt)
    print(f"best epoch {result.best_epoch}; checkpoint written to {ckpt}")
    return EXIT_OK


def cmd_tune_eval(config: RunConfig) -> int:
    graph, labels = _load(config, need_labels=config.task in ("nc", "gc"))
    if not config.checkpoint:
        raise ConfigError("checkpoint must be set")
    try:
        params = load_checkpoint(config.checkpoint)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    if params.feature_dim != graph.feature_dim:
        raise DataError(f"checkpoint expects {params.feature_dim} input features, graph has {graph.feature_dim}")
    try:
        report = run_benchmark(graph, labels, params, config.task, config)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = _out_dir(config)
    with open(os.path.join(out, f"report_{config.task}.tsv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_tsv())
    with open(os.path.join(out, f"report_{config.task}.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.summary())
    print(report.summary(), end="")
    return EXIT_OK


def cmd_gen_synth(config: RunConfig, homophily: float = 0.0) -> int:
    graph, labels = gen_synthetic(config.num_types, config.nodes_per_type, config.num_classes,
                                  config.intra_edge_prob, config.inter_edge_prob, config.feature_dim,
                                  config.class_signal, config.seed, homophily=homophily)
    paths = save_dataset(graph, labels, _out_dir(config))
    for key, path in paths.items():
        print(f"{key} = {path}")
    return EXIT_OK


def cmd_validate(config: RunConfig) -> int:
    if not config.node_file or not config.edge_file:
        raise ConfigError("node_file and edge_file must be set")
    try:
        graph, labels = load_graph(config.node_file, config.edge_file, config.label_file or None)
    except (OSError, GraphFormatError) as exc:
        raise DataError(str(exc)) from None
    report = validate(graph)
    print(f"nodes {graph.num_nodes}, edges {len(graph.edges) // 2}, "
          f"node types {graph.num_node_types}, edge types {graph.num_edge_types}")
    if labels is not None:
        print(f"labels {len(labels.labels)}, classes {labels.num_classes}")
    print(report)
    return EXIT_OK if report.ok else EXIT_DATA


COMMANDS = {
    "decompose": cmd_decompose,
    "pretrain": cmd_pretrain,
    "tune-eval": cmd_tune_eval,
    "gen-synth": cmd_gen_synth,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetprompt", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--homophily", type=float, default=0.0,
                        help="gen-synth only: same-community edge bias in [0, 1]")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_USAGE
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in ("seed", "threads", "out"):
        if getattr(args, key) is not None:
            overrides[key] = str(getattr(args, key))
    try:
        config = load_config(args.config, overrides)
        if args.command == "gen-synth":
            return cmd_gen_synth(config, args.homophily)
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:  # pragma: no cover
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
