"""Command-line surface: vocab building, training, decoding, evaluation.

Heavy imports happen inside the command handlers so the QATIP_THREADS cap
below is in place before any numerics library starts its thread pool.
Every failure exits nonzero after printing one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _cap_threads() -> None:
    cap = os.environ.get("QATIP_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


_cap_threads()


class CliError(ValueError):
    pass


def _write_records(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _read_generated(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path} line {lineno}: invalid JSON: {exc.msg}") from None
            if not isinstance(row, dict) or "id" not in row or "tip" not in row:
                raise CliError(f"{path} line {lineno}: expected fields id and tip")
            rows.append(row)
    return rows


def cmd_build_vocab(args) -> int:
    from .corpus import load_jsonl, vocab_from_records

    records = load_jsonl(args.data, inference=True)
    vocab = vocab_from_records(
        records, mode=args.mode, min_freq=args.min_freq, max_size=args.max_size
    )
    vocab.save(args.out)
    print(vocab.size)
    return 0


def _load_training_config(args):
    from .config import RunConfig, load_run_config

    config = load_run_config(args.config) if args.config else RunConfig()
    overrides = {}
    for key in ("arch", "variant", "data", "vocab", "epochs", "lr", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "batch", None) is not None:
        overrides["batch_size"] = args.batch
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config.validate()


def _build_model(config, vocab_size: int):
    from .config import model_config_from_run

    model_cfg = model_config_from_run(config, vocab_size)
    if config.arch == "transformer":
        from .transformer import QaTransformerModel

        return QaTransformerModel(model_cfg, seed=config.seed)
    from .rnn import QaRnnModel

    return QaRnnModel(model_cfg, seed=config.seed)


def cmd_train(args) -> int:
    from .corpus import Vocabulary, encode_records, load_jsonl, split_dataset
    from .train import train_model

    config = _load_training_config(args)
    if not config.data:
        raise CliError("a training data path is required (config key data or --data)")
    if not config.vocab:
        raise CliError("a vocabulary path is required (config key vocab or --vocab)")
    vocab = Vocabulary.load(config.vocab)
    records = load_jsonl(config.data)
    triplets = encode_records(
        records,
        vocab,
        review_max_len=config.review_max_len,
        query_max_len=config.query_max_len,
        tip_max_len=config.tip_max_len,
        mode=config.tokenize_mode,
    )
    if config.split_data and len(triplets) >= 10:
        split = split_dataset(triplets, config.seed)
        train_set, valid_set = split.train, split.valid
    else:
        train_set = valid_set = triplets
    model = _build_model(config, vocab.size)
    result = train_model(
        model,
        train_set,
        valid_set,
        config,
        out_dir=args.out,
        log=lambda stats: print(stats.record()),
    )
    print(
        json.dumps(
            {
                "best_epoch": result.best_epoch,
                "best_checkpoint": result.best_path,
                "final_checkpoint": result.final_path,
            }
        )
    )
    return 0


def cmd_generate(args) -> int:
    from .checkpoint import load_checkpoint
    from .corpus import Vocabulary, encode_records, load_jsonl
    from .generation import BeamConfig, batch_generate
    from .corpus import UNK_ID

    model, snapshot = load_checkpoint(args.checkpoint)
    vocab = Vocabulary.load(args.vocab)
    if vocab.size != model.config.vocab_size:
        raise CliError(
            f"vocabulary has {vocab.size} tokens but checkpoint expects "
            f"{model.config.vocab_size}"
        )
    run = snapshot.get("run", {})
    mode = args.mode or run.get("tokenize_mode", "whitespace")
    records = load_jsonl(args.data, inference=True)
    triplets = encode_records(
        records,
        vocab,
        review_max_len=run.get("review_max_len", 150),
        query_max_len=run.get("query_max_len", 5),
        tip_max_len=run.get("tip_max_len", 15),
        mode=mode,
        inference=True,
    )
    max_len = args.max_len if args.max_len is not None else run.get("tip_max_len", 15)
    beam = BeamConfig(
        max_len=max_len,
        width=args.beam,
        alpha=args.alpha,
        ban_tokens=() if args.keep_unk else (UNK_ID,),
    )
    results = batch_generate(model, triplets, beam, vocab, mode=mode)
    _write_records(
        [{"id": r.record_id, "tip": r.tip or ""} for r in results], args.out
    )
    errors = [r.error for r in results if r.error]
    if errors:
        raise CliError(f"{len(errors)} records failed, first: {errors[0]}")
    return 0


def cmd_evaluate(args) -> int:
    from .corpus import Triplet, load_jsonl
    from .evaluation import evaluate_run

    refs = load_jsonl(args.ref)
    triplets = [
        Triplet((), (), (), r["review"], r["query"], r["tip"], r.get("id"))
        for r in refs
    ]
    generated = _read_generated(args.hyp)
    table = None
    if args.embeddings:
        from .embeddings import load_embeddings

        table = load_embeddings(args.embeddings)
    report = evaluate_run(
        generated, triplets, table, multiset_lexicon=args.multiset_lexicon,
        mode=args.mode,
    )
    print(report.format_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(report.to_dict()) + "\n")
    return 0


def cmd_baseline(args) -> int:
    from .baselines import Bm25Params, extract_bm25, extract_embed, query_lead
    from .corpus import load_jsonl

    records = load_jsonl(args.data, inference=True)
    if args.method == "embed":
        if not args.embeddings:
            raise CliError("--embeddings is required for the embed method")
        from .embeddings import load_embeddings

        table = load_embeddings(args.embeddings)
    rows = []
    for i, rec in enumerate(records):
        review, query = rec["review"], rec["query"]
        if args.method == "query_lead":
            tip = query_lead(review, query, strict=args.strict, mode=args.mode)
        elif args.method == "bm25":
            tip = extract_bm25(
                review, query, Bm25Params(k1=args.k1, b=args.b), mode=args.mode
            )
        else:
            tip = extract_embed(review, query, table, mode=args.mode)
        rows.append({"id": rec.get("id") or str(i), "tip": tip})
    _write_records(rows, args.out)
    print(len(rows))
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import format_report, run_gradient_suite

    results = run_gradient_suite(
        repeats=args.repeats,
        seed=args.seed,
        include_models=not args.skip_models,
        op_tol=args.tol,
        model_tol=args.model_tol,
        h=args.eps,
    )
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qatip",
        description="query-conditioned review tip generation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="build a vocabulary file from a dataset")
    p.add_argument("--data", required=True, help="jsonl dataset path")
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--max-size", type=int, default=50000)
    p.add_argument("--mode", default="whitespace", choices=["whitespace", "char"])
    p.add_argument("--out", required=True, help="vocabulary file to write")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a model and save checkpoints")
    p.add_argument("--config", help="JSON run-config path")
    p.add_argument("--arch", choices=["rnn", "transformer"])
    p.add_argument("--variant", choices=["vanilla", "qa_enc", "qa_dec", "both"])
    p.add_argument("--data", help="training jsonl path (overrides config)")
    p.add_argument("--vocab", help="vocabulary path (overrides config)")
    p.add_argument("--out", required=True, help="directory for best/final checkpoints")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode tips for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--keep-unk", action="store_true", help="allow UNK in output")
    p.add_argument("--mode", default=None, choices=["whitespace", "char"])
    p.add_argument("--out", required=True, help="jsonl output path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated tips against references")
    p.add_argument("--hyp", required=True, help="generated jsonl ({id, tip} lines)")
    p.add_argument("--ref", required=True, help="reference dataset jsonl")
    p.add_argument("--embeddings", help="word2vec text file for the semantic metric")
    p.add_argument("--multiset-lexicon", action="store_true")
    p.add_argument("--mode", default="whitespace", choices=["whitespace", "char"])
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="run an extractive baseline over a dataset")
    p.add_argument("--method", required=True, choices=["query_lead", "bm25", "embed"])
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", help="needed for --method embed")
    p.add_argument("--strict", action="store_true", help="disable the any-token tier")
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--mode", default="whitespace", choices=["whitespace", "char"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and model")
    p.add_argument("--eps", type=float, default=1e-5, help="finite-difference step")
    p.add_argument("--tol", type=float, default=1e-4, help="per-op tolerance")
    p.add_argument("--model-tol", type=float, default=1e-3)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--skip-models", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": getattr(args, "command", None),
        }
        print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
