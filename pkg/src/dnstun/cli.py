"""``dnstun`` command line: synth, extract, train, eval, importance, replay, bench, events."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import tempfile
from pathlib import Path

from . import synth
from .dns_wire import DnsWireError, PcapError, dns_query_of, read_pcap
from .evaluation import (EvaluationError, cumulative_importance, evaluate, prune_schema,
                         rank_features, split_train_test)
from .features import (DEFAULT_DROP, FeatureError, FeatureSchema, csv_to_features,
                       extract_features, features_to_csv)
from .model import (Dataset, ForestParams, ModelError, load_model, save_model, train_decision_tree,
                    train_knn, train_random_forest)
from .pipeline import (LineSink, PcapReplaySource, PipelineConfig, PipelineError, RuleTable,
                       bench_latency, random_query_packets, read_events, run_pipeline)

MODEL_LABELS = {"rf": "RF", "dt": "Decision Tree", "knn": "K-Nearest Neighbors"}
KIND_LABELS = {"random_forest": "RF", "decision_tree": "Decision Tree", "knn": "K-Nearest Neighbors"}


class CliError(Exception):
    pass


def _atomic_write(path: str | os.PathLike, data: str | bytes) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_profile(name: str, seed: int) -> synth.SynthProfile:
    if name.lower() in synth.PROFILES:
        profile = synth.PROFILES[name.lower()]
    else:
        try:
            profile = synth.SynthProfile.from_json(Path(name).read_text())
        except FileNotFoundError:
            raise CliError(f"unknown profile {name!r}") from None
        except ValueError as exc:
            raise CliError(f"bad profile {name}: {exc}") from None
    return dataclasses.replace(profile, seed=seed)


def _schema_for(prune: str) -> FeatureSchema:
    if prune == "none":
        return FeatureSchema.full()
    if prune == "paper":
        return prune_schema(FeatureSchema.full(), DEFAULT_DROP)
    drop = [n.strip() for n in prune.split(",") if n.strip()]
    return prune_schema(FeatureSchema.full(), drop)


def _dataset_from_csv(path: str, schema: FeatureSchema) -> Dataset:
    return Dataset.from_vectors(csv_to_features(Path(path).read_text()), schema)


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.benign <= 0 and args.tunnel_bytes <= 0:
        raise CliError("nothing to generate: --benign and --tunnel-bytes are both 0")
    if args.benign < 0 or args.tunnel_bytes < 0:
        raise CliError("counts must be non-negative")
    profile = _load_profile(args.profile, args.seed)
    sessions = synth.sessions_for_bytes(args.tunnel_bytes, args.mode, profile)
    env = synth.build_environment(profile, args.benign, sessions)
    _atomic_write(args.out, env.pcap())
    _atomic_write(args.manifest, env.manifest_csv())
    attack = sum(r.label for r in env.manifest)
    print(f"packets={len(env.packets)} benign={len(env.packets) - attack} attack={attack}")
    return 0


def cmd_extract(args) -> int:
    with open(args.pcap, "rb") as fh:
        packets = read_pcap(fh)
    manifest = synth.csv_to_manifest(Path(args.manifest).read_text())
    if len(manifest) != len(packets):
        raise CliError(f"manifest has {len(manifest)} rows, pcap has {len(packets)} packets")
    labels = {r.packet_index: r.label for r in manifest}
    rows = []
    for i, pkt in enumerate(packets):
        mq = dns_query_of(pkt)
        if mq is None:
            continue
        if i not in labels:
            raise CliError(f"packet {i} missing from manifest")
        rows.append((extract_features(*mq), labels[i]))
    _atomic_write(args.out, features_to_csv(rows))
    print(f"packets={len(packets)} dns_queries={len(rows)}")
    return 0


def cmd_train(args) -> int:
    if not 0.0 < args.split < 1.0:
        raise CliError(f"--split {args.split} leaves an empty train or test set")
    schema = _schema_for(args.prune)
    data = _dataset_from_csv(args.features, schema)
    train, test = split_train_test(data, args.split, seed=args.seed)
    if args.model == "rf":
        model = train_random_forest(train, ForestParams(n_trees=args.trees, seed=args.seed))
    elif args.model == "dt":
        model = train_decision_tree(train)
        model.seed = args.seed
    else:
        model = train_knn(train, k=args.k)
    _atomic_write(args.out, save_model(model))
    report = evaluate(model, test)
    print(f"schema: {len(schema.names)} features: {','.join(schema.names)}")
    print(f"train={len(train)} test={len(test)}")
    print(report.table(MODEL_LABELS[args.model]))
    return 0


def cmd_eval(args) -> int:
    model = load_model(Path(args.model).read_text())
    data = _dataset_from_csv(args.features, model.schema)
    if args.split is not None:
        if not 0.0 < args.split < 1.0:
            raise CliError(f"--split {args.split} leaves an empty test set")
        _, data = split_train_test(data, args.split, seed=args.seed)
    report = evaluate(model, data)
    print(report.table(KIND_LABELS[model.kind]))
    if args.report:
        _atomic_write(args.report, report.to_json() + "\n")
    return 0


def cmd_importance(args) -> int:
    model = load_model(Path(args.model).read_text())
    ranked = rank_features(model)
    print(f"{'rank':>4}  {'feature':<22}{'importance':>12}{'cumulative':>12}")
    for k, ((name, imp), (_, cum)) in enumerate(zip(ranked, cumulative_importance(ranked)), 1):
        print(f"{k:>4}  {name:<22}{imp:>12.6f}{cum:>12.6f}")
    return 0


def cmd_replay(args) -> int:
    if not 0.0 < args.threshold < 1.0:
        raise CliError(f"--threshold {args.threshold} outside (0, 1)")
    model = load_model(Path(args.model).read_text())
    config = PipelineConfig(queue_capacity=args.queue, worker_count=args.workers,
                            score_threshold=args.threshold, auto_block=not args.no_block,
                            event_sink=args.events, rule_sink=args.rules,
                            model_id=f"{model.kind}:{model.schema.fingerprint}",
                            keep_records=False)
    rules = None
    if args.rules:
        # keep rule ids and (src, apex) uniqueness across runs sharing a rule file
        path = Path(args.rules)
        rules = RuleTable.replay(path.read_text() if path.exists() else "", LineSink(path))
    try:
        with open(args.pcap, "rb") as fh:
            summary = run_pipeline(PcapReplaySource(fh, pace=args.pace == "recorded"), model,
                                   config, rules=rules)
    finally:
        if rules is not None:
            rules.sink.close()
    print(summary.render())
    return 0


def cmd_bench(args) -> int:
    model = load_model(Path(args.model).read_text())
    report = bench_latency(model, random_query_packets(args.n, seed=args.seed))
    print(report.render())
    return 0


def cmd_events(args) -> int:
    if args.action == "list":
        path = Path(args.events) if args.events else None
        events = read_events(path.read_text()) if path and path.exists() else []
        print(f"{'ts':>18}  {'src_ip':<15} {'dst_ip':<15} {'score':>6}  {'action':<6} qname")
        for e in events:
            print(f"{e.ts:>18.6f}  {e.src_ip:<15} {e.dst_ip:<15} {e.score:>6.3f}  {e.action:<6} {e.qname}")
        return 0
    if not args.rules:
        raise CliError("revoke needs --rules")
    if args.rule_id is None:
        raise CliError("revoke needs a rule id")
    path = Path(args.rules)
    table = RuleTable.replay(path.read_text() if path.exists() else "")
    sink = LineSink(path)
    table.sink = sink
    try:
        print(table.revoke_rule(args.rule_id))
    finally:
        sink.close()
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dnstun", description="Stateless DNS-tunneling detection.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(func=fn)
        return sp

    sp = add("synth", cmd_synth, "generate a labelled capture")
    sp.add_argument("--profile", default="env_a", help="env_a, env_b, or a JSON profile file")
    sp.add_argument("--benign", type=int, default=10_000)
    sp.add_argument("--tunnel-bytes", type=int, default=500_000)
    sp.add_argument("--mode", choices=("low", "high", "mixed"), default="mixed")
    sp.add_argument("--out", required=True)
    sp.add_argument("--manifest", required=True)

    sp = add("extract", cmd_extract, "pcap + manifest to a feature CSV")
    sp.add_argument("--pcap", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "train on a stratified split and report held-out metrics")
    sp.add_argument("--features", required=True)
    sp.add_argument("--model", choices=("rf", "dt", "knn"), default="rf")
    sp.add_argument("--prune", default="paper",
                    help="'paper' for the 13-feature deployment set, 'none', "
                         "or comma-separated names to drop")
    sp.add_argument("--split", type=float, default=0.85)
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "score a feature CSV with a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--split", type=float, default=None,
                    help="evaluate only the held-out part of this split (with --seed)")
    sp.add_argument("--report", default=None, help="write the metrics as JSON")

    sp = add("importance", cmd_importance, "ranked and cumulative feature importances")
    sp.add_argument("--model", required=True)

    sp = add("replay", cmd_replay, "run the detection pipeline over a pcap")
    sp.add_argument("--pcap", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--events", default=None)
    sp.add_argument("--rules", default=None)
    sp.add_argument("--pace", choices=("none", "recorded"), default="none")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--queue", type=int, default=4096)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--no-block", action="store_true", help="verdicts only, no firewall rules")

    sp = add("bench", cmd_bench, "per-query latency of the detection path")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, default=100_000)

    sp = add("events", cmd_events, "list security events or revoke a rule")
    sp.add_argument("action", choices=("list", "revoke"))
    sp.add_argument("rule_id", nargs="?", type=int)
    sp.add_argument("--events", default=None)
    sp.add_argument("--rules", default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DnsWireError, PcapError, FeatureError, ModelError, EvaluationError,
            PipelineError, synth.SynthError, OSError, ValueError) as exc:
        print(f"dnstun {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
