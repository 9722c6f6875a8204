"""Command line entry point: walk -> embed -> eval / sensitivity / diagnose."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import typing
from dataclasses import fields

import numpy as np
import pandas as pd

from . import augmentation, embedding, evaluate, graph_corpus
from .config import PipelineConfig, dump_config, load_config, require_file

log = logging.getLogger("embaug")


def _load_graph(cfg: PipelineConfig):
    """(graph, labels or None) from a .mat file or an edge list."""
    if cfg.mat:
        return graph_corpus.load_mat(require_file(cfg.mat, "graph .mat file"), cfg.directed)
    graph = graph_corpus.load_edge_list(require_file(cfg.edges, "edge list"), cfg.directed,
                                        cfg.relabel)
    labels = None
    if cfg.labels:
        labels = graph_corpus.load_labels(require_file(cfg.labels, "label file"), graph)
    return graph, labels


def _load_labels(cfg: PipelineConfig):
    if cfg.mat:
        return graph_corpus.load_mat(require_file(cfg.mat, "graph .mat file"))[1]
    if cfg.relabel:
        return _load_graph(cfg)[1]
    return graph_corpus.load_labels(require_file(cfg.labels, "label file"))


def _report_path(cfg: PipelineConfig, name: str) -> str:
    os.makedirs(cfg.report_dir, exist_ok=True)
    return os.path.join(cfg.report_dir, name)


def cmd_walk(cfg: PipelineConfig) -> int:
    graph, _ = _load_graph(cfg)
    corpus = graph_corpus.generate_corpus(graph, cfg.sampling(), cfg.workers)
    graph_corpus.save_corpus(corpus, cfg.corpus)
    if graph.node_ids is not None:
        graph_corpus.save_node_map(graph, cfg.corpus + ".nodemap")
    lengths = corpus.lengths
    print(f"nodes={graph.node_count} edges={graph.edge_count} walks={len(corpus)} "
          f"length min/mean/max={lengths.min()}/{lengths.mean():.2f}/{lengths.max()} "
          f"-> {cfg.corpus}")
    return 0


def cmd_embed(cfg: PipelineConfig) -> int:
    corpus = graph_corpus.load_corpus(require_file(cfg.corpus, "corpus"))
    node_count = None
    if cfg.mat or cfg.edges:
        node_count = _load_graph(cfg)[0].node_count
        top = corpus.max_node()
        if top >= node_count:
            raise ValueError(f"corpus references unknown node id {top} "
                             f"(graph has {node_count} nodes)")
    model = embedding.train_skipgram(corpus, cfg.training(), node_count, cfg.workers)
    embedding.save_embeddings(model, cfg.embeddings)
    loss = f"{model.loss_history[-1]:.4f}" if model.loss_history else "n/a"
    print(f"embedded {model.node_count} nodes, dim={model.dim}, final mean pair loss {loss} "
          f"-> {cfg.embeddings}")
    return 0


def _print_frame(df: pd.DataFrame) -> None:
    with pd.option_context("display.width", 160, "display.max_columns", 20,
                           "display.float_format", "{:.4f}".format):
        print(df.to_string(index=False))


def cmd_eval(cfg: PipelineConfig) -> int:
    model = embedding.load_embeddings(require_file(cfg.embeddings, "embeddings"))
    labels = _load_labels(cfg)
    report = evaluate.run_sweep(model, labels, cfg.split(), cfg.augment(), cfg.conditions,
                                cfg.classifier(), cfg.rule, cfg.zero_division)
    out = _report_path(cfg, "eval.csv")
    report.to_csv(out)
    _print_frame(report.summary())
    if len(set(cfg.conditions) - {"baseline"}) and "baseline" in cfg.conditions:
        print("\nrelative gain over baseline:")
        _print_frame(report.gains())
    if cfg.plot:
        from .plotting import plot_sweep
        plot_sweep(report, _report_path(cfg, "eval.png"))
    print(f"-> {out}")
    return 0


def cmd_sensitivity(cfg: PipelineConfig) -> int:
    model = embedding.load_embeddings(require_file(cfg.embeddings, "embeddings"))
    labels = _load_labels(cfg)
    report = evaluate.addcoeff_sweep(model, labels, cfg.train_num, cfg.grid,
                                     cfg.split().seed, cfg.repeats, cfg.theta,
                                     cfg.classifier(), cfg.rule, cfg.zero_division)
    out = _report_path(cfg, "sensitivity.csv")
    report.to_csv(out)
    _print_frame(report.summary("addcoeff"))
    if cfg.plot:
        from .plotting import plot_sensitivity
        plot_sensitivity(report, _report_path(cfg, "sensitivity.png"))
    print(f"-> {out}")
    return 0


def cmd_diagnose(cfg: PipelineConfig) -> int:
    model = embedding.load_embeddings(require_file(cfg.embeddings, "embeddings"))
    labels = _load_labels(cfg)
    nodes = labels.labeled_nodes()
    ds = augmentation.LabeledDataset.from_nodes(model.input_vectors, labels, nodes)
    rep = augmentation.geometry_diagnostics(ds, seed=cfg.seed)
    out = _report_path(cfg, "geometry.csv")
    rep.to_csv(out)
    pairs = len(rep.inter)
    compact = sum(rep.compact(a, b) for a, b in rep.inter)
    print(f"labels analysed={len(rep.intra)} skipped={rep.skipped} "
          f"intra/inter ratio={rep.intra_inter_ratio:.4f} "
          f"pairs with intra<inter={compact}/{pairs} -> {out}")
    return 0


def cmd_plot(args) -> int:
    from .plotting import plot_sensitivity, plot_sweep
    report = evaluate.EvalReport.from_csv(require_file(args.report, "report CSV"))
    out = args.output or os.path.splitext(args.report)[0] + ".png"
    kind = args.kind
    if kind == "auto":
        kind = "sensitivity" if len({r.train_size for r in report.rows}) == 1 else "sweep"
    (plot_sensitivity if kind == "sensitivity" else plot_sweep)(report, out, args.title)
    print(f"-> {out}")
    return 0


COMMANDS = {"walk": cmd_walk, "embed": cmd_embed, "eval": cmd_eval,
            "sensitivity": cmd_sensitivity, "diagnose": cmd_diagnose}


def _csv_list(kind):
    def parse(text):
        items = [t for t in text.split(",") if t.strip()]
        return [kind(t.strip()) for t in items]
    return parse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML key/value config file; flags override it")
    p.add_argument("--write-config", metavar="PATH", help="write the resolved config and continue")
    hints = typing.get_type_hints(PipelineConfig)
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        t = hints[f.name]
        if t is bool:
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif t == list[str]:
            p.add_argument(flag, dest=f.name, type=_csv_list(str), default=None,
                           help="comma-separated")
        elif t == list[float]:
            p.add_argument(flag, dest=f.name, type=_csv_list(float), default=None,
                           help="comma-separated")
        else:
            base = next((a for a in typing.get_args(t) if a is not type(None)), t)
            p.add_argument(flag, dest=f.name, type=base, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embaug", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_config_flags(sub.add_parser(name))
    p = sub.add_parser("plot", help="render figures from a report CSV")
    p.add_argument("report")
    p.add_argument("-o", "--output")
    p.add_argument("--kind", choices=["auto", "sweep", "sensitivity"], default="auto")
    p.add_argument("--title")
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {f.name: getattr(args, f.name) for f in fields(PipelineConfig)}
    return cfg.updated(**overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "plot":
            return cmd_plot(args)
        cfg = resolve_config(args)
        if args.command == "sensitivity" and not cfg.grid:
            parser.error("sensitivity needs a non-empty --grid")
        cfg.validate()
        if args.write_config:
            dump_config(cfg, args.write_config)
        np.seterr(over="ignore", under="ignore")
        return COMMANDS[args.command](cfg)
    except (OSError, ValueError) as exc:
        print(f"embaug {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
