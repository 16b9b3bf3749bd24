"""Command-line entry point.

Subcommands mirror the pipeline stages: gen-data, build-vocab,
train-teacher, distill, train-student, translate, score, run-grid, and
bench-kernels.  Every command writes its artifacts under --out-dir /
explicit paths and prints one JSON-line record to stdout; artifacts carry
no timestamps so identical configs reproduce byte-identical outputs.
LENAT_THREADS caps run-grid parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .checkpoint import load_checkpoint
from .corpus import ParallelCorpus, TokenSequence, Vocab, build_vocab, gen_synthetic, load_parallel, save_parallel
from .distill import (
    DistilledCorpus,
    ExperimentConfig,
    distill,
    run_experiment,
    save_distilled,
    train_student as _train_student,
    train_teacher as _train_teacher,
)
from .lengths import ConstraintKind, ConstraintMode, constraint_for, fit_ratio
from .levt import StudentConfig, StudentModel, refine_decode
from .metrics import corpus_bleu, length_ratio
from .optim import AdamConfig
from .pe import PEKind, PerturbationRange
from .transformer import TeacherConfig, TeacherModel, beam_decode


def _emit(command: str, **payload):
    rec = {"command": command}
    rec.update(payload)
    print(json.dumps(rec, sort_keys=True))


def _read_lines(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def cmd_gen_data(args) -> int:
    corpus, vocab = gen_synthetic(args.task, args.n, args.max_len, args.vocab_size, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    src = os.path.join(args.out_dir, f"{args.split}.src")
    tgt = os.path.join(args.out_dir, f"{args.split}.tgt")
    vpath = os.path.join(args.out_dir, "vocab.txt")
    save_parallel(corpus, src, tgt, vocab)
    vocab.save(vpath)
    _emit("gen-data", src=src, tgt=tgt, vocab=vpath, pairs=len(corpus))
    return 0


def cmd_build_vocab(args) -> int:
    vocab = build_vocab(args.inputs, args.max_size, args.min_freq)
    vocab.save(args.out)
    _emit("build-vocab", out=args.out, size=len(vocab))
    return 0


def _teacher_config(args, vocab_size: int) -> TeacherConfig:
    return TeacherConfig(
        vocab_size=vocab_size,
        layers=args.layers,
        heads=args.heads,
        d_model=args.d_model,
        d_ff=args.d_ff,
        decoder_pe=PEKind(args.decoder_pe),
        perturbation=PerturbationRange.parse(args.perturb),
        max_decode_len=args.max_decode_len,
        dropout=args.dropout,
    )


def cmd_train_teacher(args) -> int:
    vocab = Vocab.load(args.vocab)
    corpus = load_parallel(args.train_src, args.train_tgt, vocab, split="train")
    cfg = _teacher_config(args, len(vocab))
    model = _train_teacher(
        corpus, cfg, args.steps, args.batch_size, args.seed,
        AdamConfig(lr=args.lr, warmup=args.warmup),
    )
    model.save(args.out)
    _emit("train-teacher", out=args.out, steps=args.steps, config=json.loads(cfg.to_json()))
    return 0


def cmd_distill(args) -> int:
    vocab = Vocab.load(args.vocab)
    teacher = TeacherModel.load(args.teacher)
    corpus = load_parallel(args.train_src, args.train_tgt, vocab, split="train")
    mode = (
        ConstraintMode(ConstraintKind.REFERENCE)
        if teacher.cfg.decoder_pe is not PEKind.SINUSOIDAL
        else None
    )
    dc = distill(teacher, corpus, vocab, mode, beam=args.beam)
    save_distilled(dc, args.out_prefix + ".src", args.out_prefix + ".tgt",
                   args.out_prefix + ".meta", vocab)
    _emit("distill", src=args.out_prefix + ".src", tgt=args.out_prefix + ".tgt",
          pairs=len(dc), teacher_hash=dc.teacher_hash)
    return 0


def cmd_train_student(args) -> int:
    vocab = Vocab.load(args.vocab)
    corpus = load_parallel(args.train_src, args.train_tgt, vocab, split="train")
    cfg = StudentConfig(
        vocab_size=len(vocab),
        layers=args.layers,
        heads=args.heads,
        d_model=args.d_model,
        d_ff=args.d_ff,
        embedding_mode=args.embedding,
        placeholder_pe=PEKind(args.placeholder_pe),
        perturbation=PerturbationRange.parse(args.perturb),
        max_placeholders=args.max_placeholders,
        max_refine_iters=args.max_iters,
        dropout=args.dropout,
    )
    dc = DistilledCorpus(pairs=list(corpus.pairs), teacher_hash="external",
                         constraint="external", beam=0)
    model = _train_student(
        dc, cfg, args.steps, args.batch_size, args.seed,
        AdamConfig(lr=args.lr, warmup=args.warmup),
    )
    model.save(args.out)
    _emit("train-student", out=args.out, steps=args.steps, config=json.loads(cfg.to_json()))
    return 0


def _resolve_constraints(args, sources, vocab) -> list[int | None]:
    refs = None
    if args.constraint == "reference":
        if not args.ref:
            raise ValueError("reference constraints need --ref")
        refs = [TokenSequence(tuple(vocab.encode(" ".join(toks)))) for toks in _read_lines(args.ref)]
        if len(refs) != len(sources):
            raise ValueError("--ref line count does not match --src")
        mode = ConstraintMode(ConstraintKind.REFERENCE)
    elif args.constraint == "proxy":
        mode = ConstraintMode(ConstraintKind.SOURCE_PROXY, alpha=args.alpha)
    elif args.constraint == "fitted":
        if not (args.fit_src and args.fit_tgt):
            raise ValueError("fitted constraints need --fit-src and --fit-tgt")
        fit_corpus = load_parallel(args.fit_src, args.fit_tgt, vocab)
        mode = ConstraintMode(ConstraintKind.SOURCE_PROXY, alpha=fit_ratio(fit_corpus))
    else:  # none
        return [None] * len(sources)
    return [
        constraint_for(mode, src, refs[i] if refs else None)
        for i, src in enumerate(sources)
    ]


def cmd_translate(args) -> int:
    vocab = Vocab.load(args.vocab)
    _, meta = load_checkpoint(args.model)
    sources = [
        TokenSequence(tuple(vocab.encode(" ".join(toks))))
        for toks in _read_lines(args.src)
    ]
    for i, s in enumerate(sources):
        if len(s) == 0:
            raise ValueError(f"empty source line {i + 1} in {args.src}")
    constraints = _resolve_constraints(args, sources, vocab)
    hyps = []
    if meta.get("format") == "teacher":
        model = TeacherModel.load(args.model)
        needs = model.cfg.decoder_pe is not PEKind.SINUSOIDAL
        for src, len_c in zip(sources, constraints):
            if needs and len_c is None:
                raise ValueError("this teacher decodes with a length constraint; pass --constraint")
            hyps.append(beam_decode(model, src, len_constraint=len_c, beam=args.beam).tokens)
    elif meta.get("format") == "student":
        student = StudentModel.load(args.model)
        for src, len_c in zip(sources, constraints):
            if len_c is None:
                raise ValueError("student decoding needs a length constraint; pass --constraint")
            hyps.append(refine_decode(student, src, len_c, max_iters=args.max_iters).tokens)
    else:
        raise ValueError(f"{args.model}: unknown checkpoint format")
    with open(args.out, "w", encoding="utf-8") as f:
        for h in hyps:
            f.write(vocab.decode(h) + "\n")
    _emit("translate", out=args.out, sentences=len(hyps))
    return 0


def cmd_score(args) -> int:
    hyps = _read_lines(args.hyp)
    refs = _read_lines(args.ref)
    bleu = corpus_bleu(hyps, refs)
    lr = length_ratio(hyps, refs)
    record = {
        "bleu": bleu.bleu,
        "p1": bleu.precisions[0],
        "p2": bleu.precisions[1],
        "p3": bleu.precisions[2],
        "p4": bleu.precisions[3],
        "bp": bleu.bp,
        "lr": lr.lr,
        "hyp_tokens": lr.hyp_tokens,
        "ref_tokens": lr.ref_tokens,
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    _emit("score", **record)
    return 0


def cmd_run_grid(args) -> int:
    with open(args.config, encoding="utf-8") as f:
        exp = ExperimentConfig.from_json(f.read())
    if args.out_dir:
        exp.out_dir = args.out_dir
    if args.seed is not None:
        exp.seeds = (args.seed,)
    reports = run_experiment(exp)
    _emit("run-grid", out_dir=exp.out_dir, cells=len(reports),
          reports=os.path.join(exp.out_dir, "reports.jsonl"))
    return 0


def cmd_bench_kernels(args) -> int:
    from .kernels import IMPL, compiled_edit_ops, pure_edit_ops
    import timeit

    rng = np.random.default_rng(args.seed)
    pairs = [
        (
            rng.integers(5, 25, size=rng.integers(1, args.max_len + 1)).astype(np.int32),
            rng.integers(5, 25, size=rng.integers(1, args.max_len + 1)).astype(np.int32),
        )
        for _ in range(args.pairs)
    ]

    def run(fn):
        for h, r in pairs:
            fn(h, r)

    t_pure = timeit.timeit(lambda: run(pure_edit_ops), number=args.repeat)
    result = {"active": IMPL, "pairs": args.pairs, "repeat": args.repeat, "pure_s": t_pure}
    if compiled_edit_ops is not None:
        t_c = timeit.timeit(lambda: run(compiled_edit_ops), number=args.repeat)
        result["compiled_s"] = t_c
        result["speedup"] = t_pure / t_c if t_c > 0 else float("inf")
    _emit("bench-kernels", **result)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lenat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic parallel corpus")
    g.add_argument("--task", default="copy", help="copy | reverse | expand(k)")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--max-len", type=int, default=12)
    g.add_argument("--vocab-size", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split", default="train")
    g.add_argument("--out-dir", required=True)
    g.set_defaults(fn=cmd_gen_data)

    b = sub.add_parser("build-vocab", help="build a vocabulary from text files")
    b.add_argument("--inputs", nargs="+", required=True)
    b.add_argument("--max-size", type=int, default=32000)
    b.add_argument("--min-freq", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_build_vocab)

    def model_flags(sp, decoder_flag: str, default_pe: str, default_perturb: str):
        sp.add_argument("--train-src", required=True)
        sp.add_argument("--train-tgt", required=True)
        sp.add_argument("--vocab", required=True)
        sp.add_argument("--layers", type=int, default=2)
        sp.add_argument("--heads", type=int, default=4)
        sp.add_argument("--d-model", type=int, default=64)
        sp.add_argument("--d-ff", type=int, default=128)
        sp.add_argument("--dropout", type=float, default=0.0)
        sp.add_argument("--steps", type=int, default=1000)
        sp.add_argument("--batch-size", type=int, default=8)
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--lr", type=float, default=3e-3)
        sp.add_argument("--warmup", type=int, default=400)
        sp.add_argument("--perturb", default=default_perturb, help="lo,hi inclusive")
        sp.add_argument(decoder_flag, default=default_pe,
                        choices=["sinusoidal", "ldpe", "perldpe"])
        sp.add_argument("--out", required=True)

    tt = sub.add_parser("train-teacher", help="train the autoregressive teacher")
    model_flags(tt, "--decoder-pe", "sinusoidal", "-4,4")
    tt.add_argument("--max-decode-len", type=int, default=64)
    tt.set_defaults(fn=cmd_train_teacher)

    d = sub.add_parser("distill", help="decode training data with a teacher")
    d.add_argument("--teacher", required=True)
    d.add_argument("--train-src", required=True)
    d.add_argument("--train-tgt", required=True)
    d.add_argument("--vocab", required=True)
    d.add_argument("--beam", type=int, default=5)
    d.add_argument("--out-prefix", required=True)
    d.set_defaults(fn=cmd_distill)

    ts = sub.add_parser("train-student", help="train the editing student")
    model_flags(ts, "--placeholder-pe", "perldpe", "0,2")
    ts.add_argument("--embedding", default="shared", choices=["shared", "independent"])
    ts.add_argument("--max-placeholders", type=int, default=8)
    ts.add_argument("--max-iters", type=int, default=10)
    ts.set_defaults(fn=cmd_train_student)

    tr = sub.add_parser("translate", help="decode a source file with a checkpoint")
    tr.add_argument("--model", required=True)
    tr.add_argument("--src", required=True)
    tr.add_argument("--vocab", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--beam", type=int, default=5)
    tr.add_argument("--max-iters", type=int, default=None)
    tr.add_argument("--constraint", default="none",
                    choices=["none", "reference", "proxy", "fitted"])
    tr.add_argument("--ref", help="reference file for --constraint reference")
    tr.add_argument("--alpha", type=float, default=1.0)
    tr.add_argument("--fit-src", help="parallel files to fit the length ratio on")
    tr.add_argument("--fit-tgt")
    tr.set_defaults(fn=cmd_translate)

    sc = sub.add_parser("score", help="corpus BLEU and length ratio")
    sc.add_argument("--hyp", required=True)
    sc.add_argument("--ref", required=True)
    sc.add_argument("--out")
    sc.set_defaults(fn=cmd_score)

    rg = sub.add_parser("run-grid", help="run an experiment grid from a config file")
    rg.add_argument("--config", required=True)
    rg.add_argument("--out-dir")
    rg.add_argument("--seed", type=int, default=None, help="override config seeds")
    rg.set_defaults(fn=cmd_run_grid)

    bk = sub.add_parser("bench-kernels", help="compare pure vs compiled edit kernel")
    bk.add_argument("--pairs", type=int, default=200)
    bk.add_argument("--max-len", type=int, default=30)
    bk.add_argument("--repeat", type=int, default=20)
    bk.add_argument("--seed", type=int, default=0)
    bk.set_defaults(fn=cmd_bench_kernels)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
