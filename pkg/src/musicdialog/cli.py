"""Command-line entry point orchestrating all workflows."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import adapter, analysis, retrieval, similarity, utterances
from .music_db import QuantizationConfig, ValidationError, ingest_tracks, write_tracks
from .planner import IntentModel, PlanConfig, PlanError, sample_plan

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(ValueError):
    pass


def _parse_turns(spec: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"bad turn range {spec!r}, expected LO:HI") from None
    if lo < 1 or hi < lo:
        raise UsageError(f"bad turn range {spec!r}")
    return lo, hi


def _load_db(path: str):
    db, _ = ingest_tracks(path, QuantizationConfig())
    return db


def cmd_ingest(args) -> int:
    db, summary = ingest_tracks(args.tracks, QuantizationConfig())
    n = write_tracks(db, args.out)
    print(f"ingested {n} tracks, skipped {summary.skipped} lines -> {args.out}")
    return EXIT_OK


def cmd_similar(args) -> int:
    matrix, _user_ids, item_ids = similarity.load_interactions(args.interactions)
    model = similarity.als_fit(
        matrix, d=args.dim, reg=args.reg, alpha=args.alpha, iters=args.iters, seed=args.seed
    )
    n = similarity.write_neighbors(model, item_ids, args.k, args.out)
    print(f"wrote top-{args.k} neighbors for {n} items -> {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    lo, hi = _parse_turns(args.turns)
    db = _load_db(args.db)
    cfg = PlanConfig(
        min_turns=lo,
        max_turns=hi,
        tracks_per_turn=args.tracks_per_turn,
        top_k=args.topk,
        min_initial_support=args.min_support,
    )
    model = IntentModel()
    if args.backend == "template":
        backend = utterances.TemplateBackend()
    else:
        backend = utterances.RemoteBackend(
            utterances.RemoteBackendConfig(endpoint=args.endpoint, model=args.model)
        )
    plans = [
        sample_plan(db, model, cfg, seed=args.seed * 1_000_003 + i, dialogue_id=f"dlg-{args.seed}-{i}")
        for i in range(args.n)
    ]
    stats = utterances.GenerationStats()
    records = utterances.generate_many(backend, plans, db, stats)
    written = utterances.emit_jsonl(records, args.out)
    print(f"generated {stats.generated}, dropped {stats.dropped}, wrote {written} -> {args.out}")
    return EXIT_OK


def cmd_index(args) -> int:
    db = _load_db(args.db)
    provider = retrieval.HashEmbeddingProvider(dim=args.dim)
    vectors = retrieval.build_item_vectors(db, provider)
    n = retrieval.write_embeddings(args.out, provider.dim, sorted(vectors.items()))
    print(f"wrote {n} track embeddings (dim {provider.dim}) -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    dialogues = utterances.load_jsonl(args.dialogues)
    dim, vectors = retrieval.read_embeddings(args.embeddings)
    provider = retrieval.HashEmbeddingProvider(dim=dim)
    pairs = []
    for record in dialogues:
        for turn in record.turns:
            chat_vec = provider.embed_text(turn.user_query)
            music = [vectors[tid] for tid in turn.track_ids if tid in vectors]
            if not music:
                continue
            mean = np.mean(music, axis=0)
            pairs.append((chat_vec, mean / np.linalg.norm(mean)))
    config = adapter.TrainConfig(
        learning_rate=args.lr, tau=args.tau, epochs=args.epochs, seed=args.seed
    )
    result = adapter.train(pairs, config)
    result.text_adapter.save(args.out)
    result.music_adapter.save(args.out + ".music")
    print(
        f"trained on {len(pairs)} pairs; loss {result.epoch_losses[0]:.4f} -> "
        f"{result.epoch_losses[-1]:.4f}; checkpoints at {args.out}[.music]"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    dialogues = utterances.load_jsonl(args.dialogues)
    db = _load_db(args.db)
    ks = [int(x) for x in args.ks.split(",")]
    provider = retrieval.HashEmbeddingProvider(dim=args.dim)
    if args.embeddings:
        _, raw = retrieval.read_embeddings(args.embeddings)
        item_vectors = {
            tid: v / np.linalg.norm(v) for tid, v in raw.items()
        }
    else:
        item_vectors = retrieval.build_item_vectors(db, provider)
    if args.retriever == "bm25":
        report = _eval_bm25(dialogues, db, ks)
    else:
        retriever = retrieval.DenseRetriever(provider, item_vectors)
        report = retrieval.evaluate_dataset(dialogues, retriever, ks)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK


def _eval_bm25(dialogues, db, ks) -> dict:
    index = retrieval.build_bm25(db)
    max_k = max(ks)
    any_hit = {k: [] for k in ks}
    recall = {k: [] for k in ks}
    n_turns = 0
    for record in dialogues:
        history: list[str] = []
        for turn in record.turns:
            query = " ".join(history + [turn.user_query])
            ranked = [tid for tid, _ in index.search(query, max_k)]
            for k in ks:
                metrics = retrieval.hit_at_k(ranked, set(turn.track_ids), k)
                any_hit[k].append(metrics["any_hit"])
                recall[k].append(metrics["recall"])
            history.append(turn.user_query)
            n_turns += 1
    mean = lambda xs: sum(xs) / len(xs) if xs else 0.0  # noqa: E731
    return {
        "ks": ks,
        "any_hit": {str(k): mean(any_hit[k]) for k in ks},
        "recall": {str(k): mean(recall[k]) for k in ks},
        "n_turns": n_turns,
        "n_dialogues": len(dialogues),
    }


def cmd_stats(args) -> int:
    dialogues = utterances.load_jsonl(args.dialogues)
    report = analysis.stats_report(dialogues)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2)
    print(json.dumps(report.as_dict()))
    return EXIT_OK


def cmd_alpha(args) -> int:
    data = analysis.load_agreement_csv(args.labels)
    print(f"{analysis.krippendorff_alpha(data):.6f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    db = _load_db(args.db)
    provider = None
    item_vectors = None
    if args.retriever == "dense" or args.embeddings:
        provider = retrieval.HashEmbeddingProvider(dim=args.dim)
        if args.embeddings:
            _, raw = retrieval.read_embeddings(args.embeddings)
            item_vectors = {tid: v / np.linalg.norm(v) for tid, v in raw.items()}
        else:
            item_vectors = retrieval.build_item_vectors(db, provider)
    app = create_app(db, provider=provider, item_vectors=item_vectors, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="musicdialog")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest a raw track JSONL into a quantized database")
    p.add_argument("--tracks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("similar", help="derive similar-track neighbors via implicit ALS")
    p.add_argument("--interactions", required=True)
    p.add_argument("--db")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--alpha", type=float, default=40.0)
    p.add_argument("--reg", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--k", type=int, default=128)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_similar)

    p = sub.add_parser("generate", help="synthesize dialogues from a database")
    p.add_argument("--db", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--backend", choices=["template", "llm"], default="template")
    p.add_argument("--turns", default="3:7")
    p.add_argument("--topk", type=int, default=20)
    p.add_argument("--tracks-per-turn", type=int, default=10)
    p.add_argument("--min-support", type=int, default=20)
    p.add_argument("--endpoint", default="")
    p.add_argument("--model", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("index", help="write deterministic track embeddings")
    p.add_argument("--db", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train", help="train contrastive adapters over frozen embeddings")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--tau", type=float, default=0.07)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate retrieval over a dialogue file")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--retriever", choices=["bm25", "dense"], default="dense")
    p.add_argument("--embeddings", default="")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--ks", default="10,20,100")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="report corpus statistics")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("alpha", help="inter-annotator agreement from a labels CSV")
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("serve", help="run the retrieval HTTP service")
    p.add_argument("--db", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--retriever", choices=["bm25", "dense"], default="bm25")
    p.add_argument("--embeddings", default="")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--static", default="")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, PlanError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
