"""Command-line entry point.

JSONL in, JSONL out everywhere: data goes to files (written atomically), a
single JSON run summary goes to stdout. Exit codes: 0 success, 1 runtime
error (structured message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus, databuilder, descriptor, mafe, rankers, textmetrics
from .backends import BACKEND_URL_ENV, Backends
from .corpus import FactualTriple, Instance, tokenize


def _atomic_write_lines(path: str, lines: list[str]) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _map_jobs(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _summary(payload: dict, started: float) -> None:
    payload["elapsed_s"] = round(time.perf_counter() - started, 4)
    print(json.dumps(payload, ensure_ascii=False))


def _backends_from_args(args) -> Backends:
    spec = args.backend or os.environ.get(BACKEND_URL_ENV, "mock")
    return Backends.from_spec(spec)


def _ranker_fn(args):
    method = args.method
    if method == "oracle":
        return lambda inst: rankers.rank_rouge2_oracle(inst, args.k)
    if method == "tfidf":
        return lambda inst: rankers.rank_tfidf(inst, args.k)
    if method == "dense":
        if args.model:
            model = rankers.load_dense_model(args.model)
        else:
            model = rankers.init_dense_model(seed=args.seed)
        return lambda inst: rankers.dense_rank(model, inst, args.k)
    if method == "seq":
        model = rankers.load_seq_model(args.model) if args.model else rankers.SeqRankerModel()
        return lambda inst: rankers.seq_rank(model, inst, args.k)
    if method == "neural":
        backends = _backends_from_args(args)
        return lambda inst: rankers.neural_rank(inst, args.k, backends)
    raise ValueError(f"unknown ranker method {method!r}")


def cmd_rank(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.infile)
    rank = _ranker_fn(args)
    results = _map_jobs(rank, instances, args.jobs)
    lines = [
        json.dumps({"order": r.order, "scores": r.scores, "k": r.k}, ensure_ascii=False)
        for r in results
    ]
    _atomic_write_lines(args.out, lines)
    _summary({"command": "rank", "method": args.method, "k": args.k,
              "instances": len(instances), "out": args.out}, started)
    return 0


def cmd_evaluate_surface(args) -> int:
    started = time.perf_counter()
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref)
    if len(hyps) != len(refs):
        raise ValueError(f"hyp has {len(hyps)} lines but ref has {len(refs)}")
    triples_per_line: list[list[FactualTriple]] = [[] for _ in hyps]
    if args.triples:
        for i, line in enumerate(_read_lines(args.triples)):
            if i >= len(hyps):
                break
            triples_per_line[i] = [
                FactualTriple(t["entity"], t["key"], t["value"]) for t in json.loads(line or "[]")
            ]
    records = []
    for hyp, ref, triples in zip(hyps, refs, triples_per_line):
        hyp_t, ref_t = tokenize(hyp), tokenize(ref)
        rec = {
            "rouge1": textmetrics.rouge_n(hyp_t, ref_t, 1).f1,
            "rouge2": textmetrics.rouge_n(hyp_t, ref_t, 2).f1,
            "rougeL": textmetrics.rouge_l(hyp_t, ref_t).f1,
            "bleu": textmetrics.bleu([hyp_t], [ref_t], smooth=True),
            "token_f1": textmetrics.token_f1(ref, hyp),
            "parent": textmetrics.parent(hyp_t, ref_t, triples).f1,
        }
        records.append(rec)
    corpus_bleu = textmetrics.bleu([tokenize(h) for h in hyps], [tokenize(r) for r in refs])
    summary = {"command": "evaluate surface", "pairs": len(records), "corpus_bleu": corpus_bleu}
    for metric in ("rouge1", "rouge2", "rougeL", "bleu", "token_f1", "parent"):
        summary[f"mean_{metric}"] = (
            sum(r[metric] for r in records) / len(records) if records else 0.0
        )
    lines = [json.dumps(r, ensure_ascii=False) for r in records]
    if args.out:
        _atomic_write_lines(args.out, lines)
    else:
        for line in lines:
            print(line)
    _summary(summary, started)
    return 0


def cmd_evaluate_mafe(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.instances)
    hyps = _read_lines(args.hyp)
    if len(hyps) != len(instances):
        raise ValueError(f"hyp has {len(hyps)} lines but instances file has {len(instances)}")
    backends = _backends_from_args(args)
    cfg = mafe.MafeConfig(filter_questions=args.filter_questions, jobs=args.jobs)

    def evaluate_one(pair: tuple[str, Instance]) -> mafe.MafeReport:
        hyp, inst = pair
        return mafe.evaluate(hyp, inst.reference, inst.triples(), backends, cfg)

    reports = _map_jobs(evaluate_one, list(zip(hyps, instances)), args.jobs)
    _atomic_write_lines(args.out, [r.to_json() for r in reports])
    n = len(reports)
    _summary({
        "command": "evaluate mafe",
        "instances": n,
        "mean_recall": sum(r.recall for r in reports) / n if n else 0.0,
        "mean_precision": sum(r.precision for r in reports) / n if n else 0.0,
        "mean_f1": sum(r.f1 for r in reports) / n if n else 0.0,
        "out": args.out,
    }, started)
    return 0


def cmd_build_dataset(args) -> int:
    started = time.perf_counter()
    records = databuilder.read_raw_records(args.raw)
    backends = _backends_from_args(args)
    cfg = databuilder.BuildConfig(
        bert_threshold=args.bert_thresh,
        rougeL_threshold=args.rougeL_thresh,
        grounding_threshold=args.ground_thresh,
    )
    instances = databuilder.build(records, backends.embed, cfg)
    corpus.write_instances(instances, args.out)
    _summary({"command": "build-dataset", "records": len(records),
              "instances": len(instances), "out": args.out}, started)
    return 0


def cmd_stats(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.infile)
    summary = {"command": "stats", **databuilder.stats(instances)}
    _summary(summary, started)
    return 0


def cmd_extractive(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.instances)
    backends = _backends_from_args(args)
    outputs = _map_jobs(lambda i: descriptor.extractive_generate(i, backends), instances, args.jobs)
    _atomic_write_lines(args.out, [json.dumps({"text": t}, ensure_ascii=False) for t in outputs])
    _summary({"command": "extractive", "instances": len(instances), "out": args.out}, started)
    return 0


def cmd_generate(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.instances)
    args.method = args.ranker
    rank = _ranker_fn(args)
    backends = _backends_from_args(args)

    def generate_one(inst: Instance) -> str:
        ranked = rank(inst)
        k = min(args.k, len(ranked.order))
        req = descriptor.GenerationRequest(inst, ranked, k)
        return descriptor.abstractive_generate(req, backends, max_tokens=args.max_tokens)

    outputs = _map_jobs(generate_one, instances, args.jobs)
    _atomic_write_lines(args.out, [json.dumps({"text": t}, ensure_ascii=False) for t in outputs])
    _summary({"command": "generate", "ranker": args.ranker, "instances": len(instances),
              "out": args.out}, started)
    return 0


def cmd_dense_train(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.infile)
    pairs = [(rankers.Query.from_instance(i), i.reference) for i in instances]
    cfg = rankers.FeatureConfig(hash_dim=args.hash_dim)
    model, trace = rankers.dense_train(
        pairs, batch_size=args.batch_size, lr=args.lr, epochs=args.epochs,
        cfg=cfg, seed=args.seed,
    )
    rankers.save_dense_model(model, args.out)
    _summary({"command": "dense-train", "pairs": len(pairs), "epochs": args.epochs,
              "loss_trace": trace, "out": args.out}, started)
    return 0


def cmd_seq_fit(args) -> int:
    started = time.perf_counter()
    instances = corpus.read_instances(args.infile)
    grid = []
    for part in args.grid.split(","):
        alpha, beta = part.split(":")
        grid.append((float(alpha), float(beta)))
    model = rankers.seq_fit(instances, args.k, grid)
    rankers.save_seq_model(model, args.out)
    _summary({"command": "seq-fit", "alpha": model.alpha, "beta": model.beta,
              "k": args.k, "out": args.out}, started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keytext")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("rank", help="rank grounding passages")
    p.add_argument("--method", required=True, choices=["oracle", "tfidf", "dense", "seq", "neural"])
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    p.add_argument("--backend")
    common(p)
    p.set_defaults(func=cmd_rank)

    pe = sub.add_parser("evaluate", help="evaluate hypotheses")
    esub = pe.add_subparsers(dest="eval_command", required=True)

    p = esub.add_parser("surface", help="surface metrics")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--triples")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_evaluate_surface)

    p = esub.add_parser("mafe", help="QA-based factuality metric")
    p.add_argument("--hyp", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--backend")
    p.add_argument("--out", required=True)
    p.add_argument("--filter-questions", action="store_true")
    common(p)
    p.set_defaults(func=cmd_evaluate_mafe)

    p = sub.add_parser("build-dataset", help="construct instances from raw records")
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bert-thresh", type=float, default=0.82)
    p.add_argument("--rougeL-thresh", type=float, default=0.25)
    p.add_argument("--ground-thresh", type=float, default=0.82)
    p.add_argument("--backend")
    common(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--in", dest="infile", required=True)
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("extractive", help="extractive baseline generation")
    p.add_argument("--instances", required=True)
    p.add_argument("--backend")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_extractive)

    p = sub.add_parser("generate", help="abstractive generation via backend")
    p.add_argument("--instances", required=True)
    p.add_argument("--ranker", default="seq", choices=["oracle", "tfidf", "dense", "seq", "neural"])
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--backend")
    p.add_argument("--model")
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("dense-train", help="train the dense ranker")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--hash-dim", type=int, default=2048)
    common(p)
    p.set_defaults(func=cmd_dense_train)

    p = sub.add_parser("seq-fit", help="fit the sequential ranker on silver labels")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--grid", default="1:0,1:0.25,1:0.5,1:1")
    common(p)
    p.set_defaults(func=cmd_seq_fit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
