"""Sequence-level distillation and the experiment grid.

The teacher decodes the training sources to produce the student's targets.
A length-difference teacher consumes reference lengths during distillation;
the sinusoidal teacher gets no constraint.  run_experiment wires the whole
chain per grid cell: train teacher -> distill -> train student -> decode
test -> score.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, asdict

import numpy as np

from .corpus import BOS, EOS, PAD, PLH, ParallelCorpus, TokenSequence, Vocab, gen_synthetic, save_parallel
from .lengths import ConstraintKind, ConstraintMode, constraint_for, fit_ratio, reference_length
from .levt import StudentConfig, StudentModel, refine_decode, student_train_step
from .metrics import BleuReport, LengthRatioReport, corpus_bleu, length_ratio
from .optim import Adam, AdamConfig
from .pe import PEKind, PerturbationRange
from .transformer import TeacherConfig, TeacherModel, beam_decode, teacher_train_step

log = logging.getLogger(__name__)


@dataclass
class DistilledCorpus:
    pairs: list[tuple[TokenSequence, TokenSequence]]
    teacher_hash: str
    constraint: str
    beam: int

    def __len__(self):
        return len(self.pairs)

    def as_corpus(self) -> ParallelCorpus:
        return ParallelCorpus(list(self.pairs), name="distilled", split="train")


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of index batches; a fresh permutation per epoch."""
    while True:
        perm = rng.permutation(n)
        for i in range(0, n, batch_size):
            chunk = perm[i : i + batch_size]
            if len(chunk) == batch_size or n < batch_size:
                yield chunk


def train_teacher(
    corpus: ParallelCorpus,
    cfg: TeacherConfig,
    steps: int,
    batch_size: int,
    seed: int,
    opt_cfg: AdamConfig | None = None,
) -> TeacherModel:
    model = TeacherModel(cfg, seed=seed)
    opt = Adam(model.parameters(), opt_cfg or AdamConfig())
    rng = np.random.default_rng(seed + 1)
    stream = _batches(len(corpus), batch_size, rng)
    for step in range(steps):
        batch = [corpus.pairs[i] for i in next(stream)]
        loss = teacher_train_step(model, opt, batch, rng)
        if (step + 1) % 200 == 0:
            log.info("teacher step %d loss %.4f", step + 1, loss)
    return model


def train_student(
    distilled: DistilledCorpus,
    cfg: StudentConfig,
    steps: int,
    batch_size: int,
    seed: int,
    opt_cfg: AdamConfig | None = None,
) -> StudentModel:
    model = StudentModel(cfg, seed=seed)
    opt = Adam(model.parameters(), opt_cfg or AdamConfig())
    rng = np.random.default_rng(seed + 2)
    stream = _batches(len(distilled), batch_size, rng)
    for step in range(steps):
        batch = [distilled.pairs[i] for i in next(stream)]
        losses = student_train_step(model, opt, batch, rng)
        if (step + 1) % 200 == 0:
            log.info("student step %d losses %s", step + 1, losses)
    return model


def _fallback_first_token(teacher: TeacherModel, src: TokenSequence) -> tuple[int, ...]:
    """Most probable first token, used when a beam hypothesis came out empty."""
    from . import autodiff as ad

    with ad.no_grad():
        memory = teacher.encode(src)
        pe_rows = teacher.decoder_pe_rows(2, 1, 0)
        logits = teacher.decode_logits(np.array([[BOS]], dtype=np.int64), memory, pe_rows)
    z = logits.data[0, -1].copy()
    z[[PAD, BOS, EOS, PLH]] = -np.inf
    return (int(z.argmax()),)


def distill(
    teacher: TeacherModel,
    train_corpus: ParallelCorpus,
    vocab: Vocab,
    constraint_mode: ConstraintMode | None,
    beam: int = 5,
) -> DistilledCorpus:
    """Decode every training source with the teacher, 1-best, perturbation 0."""
    if teacher.steps_trained == 0:
        raise ValueError("refusing to distill from an untrained teacher")
    if teacher.cfg.vocab_size != len(vocab):
        raise ValueError(
            f"teacher vocab {teacher.cfg.vocab_size} != corpus vocab {len(vocab)}"
        )
    uses_constraint = teacher.cfg.decoder_pe is not PEKind.SINUSOIDAL
    if uses_constraint:
        if constraint_mode is None or constraint_mode.kind is not ConstraintKind.REFERENCE:
            raise ValueError(
                "a length-difference teacher distills with reference lengths"
            )
    pairs = []
    n_fallback = 0
    for src, ref in train_corpus.pairs:
        len_c = reference_length(ref) if uses_constraint else None
        result = beam_decode(teacher, src, len_constraint=len_c, beam=beam)
        tokens = result.tokens
        if not tokens:
            tokens = _fallback_first_token(teacher, src)
            n_fallback += 1
        pairs.append((src, TokenSequence(tokens)))
    if n_fallback:
        log.warning("distillation replaced %d empty outputs with 1-token fallbacks", n_fallback)
    return DistilledCorpus(
        pairs=pairs,
        teacher_hash=teacher.cfg.hash(),
        constraint=constraint_mode.kind.value if uses_constraint else "none",
        beam=beam,
    )


def save_distilled(dc: DistilledCorpus, src_path, tgt_path, meta_path, vocab: Vocab):
    save_parallel(dc.as_corpus(), src_path, tgt_path, vocab)
    with open(meta_path, "w", encoding="utf-8") as f:
        f.write(f"teacher_hash: {dc.teacher_hash}\n")
        f.write(f"constraint: {dc.constraint}\n")
        f.write(f"beam: {dc.beam}\n")
        f.write(f"pairs: {len(dc.pairs)}\n")


# -- experiment grid ---------------------------------------------------------

TEACHER_VARIANTS = ("sinusoidal", "perldpe")
STUDENT_VARIANTS = ("levt", "levt_perldpe")


@dataclass
class ExperimentConfig:
    task: str = "expand(2)"
    n_train: int = 2000
    n_test: int = 200
    max_len: int = 12
    vocab_size: int = 20
    data_seed: int = 11
    teacher_variants: tuple[str, ...] = ("sinusoidal",)
    student_variants: tuple[str, ...] = ("levt", "levt_perldpe")
    embedding_modes: tuple[str, ...] = ("shared",)
    constraint: str = "reference"  # reference | proxy | fitted
    alpha: float = 1.0
    teacher_perturb: tuple[int, int] = (-4, 4)
    student_perturb: tuple[int, int] = (0, 2)
    seeds: tuple[int, ...] = (1,)
    teacher_steps: int = 1200
    student_steps: int = 2500
    batch_size: int = 8
    beam: int = 5
    max_refine_iters: int = 10
    max_placeholders: int = 8
    lr: float = 3e-3
    warmup: int = 400
    out_dir: str = "runs/exp"

    def validate(self):
        for tv in self.teacher_variants:
            if tv not in TEACHER_VARIANTS:
                raise ValueError(f"unknown teacher variant {tv!r}")
        for sv in self.student_variants:
            if sv not in STUDENT_VARIANTS:
                raise ValueError(f"unknown student variant {sv!r}")
        for em in self.embedding_modes:
            if em not in ("shared", "independent"):
                raise ValueError(f"unknown embedding mode {em!r}")
        if self.constraint not in ("reference", "proxy", "fitted"):
            raise ValueError(f"unknown constraint mode {self.constraint!r}")
        PerturbationRange(*self.teacher_perturb)
        sp = PerturbationRange(*self.student_perturb)
        if sp.lo < 0:
            raise ValueError("student perturbation must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        d = json.loads(text)
        for key in (
            "teacher_variants",
            "student_variants",
            "embedding_modes",
            "seeds",
            "teacher_perturb",
            "student_perturb",
        ):
            if key in d:
                d[key] = tuple(d[key])
        return ExperimentConfig(**d)


@dataclass(frozen=True)
class EvalReport:
    teacher: str
    student: str
    embedding: str
    constraint: str
    seed: int
    bleu: BleuReport
    lr: LengthRatioReport

    def to_record(self, config_json: str | None = None) -> dict:
        rec = {
            "teacher": self.teacher,
            "student": self.student,
            "embedding": self.embedding,
            "constraint": self.constraint,
            "seed": self.seed,
            "bleu": self.bleu.bleu,
            "p1": self.bleu.precisions[0],
            "p2": self.bleu.precisions[1],
            "p3": self.bleu.precisions[2],
            "p4": self.bleu.precisions[3],
            "bp": self.bleu.bp,
            "hyp_len": self.bleu.hyp_len,
            "ref_len": self.bleu.ref_len,
            "lr": self.lr.lr,
            "hyp_tokens": self.lr.hyp_tokens,
            "ref_tokens": self.lr.ref_tokens,
        }
        if config_json is not None:
            rec["config"] = json.loads(config_json)
        return rec


def teacher_config_for(exp: ExperimentConfig, variant: str, vocab_size: int) -> TeacherConfig:
    pe = PEKind.SINUSOIDAL if variant == "sinusoidal" else PEKind.PERLDPE
    return TeacherConfig(
        vocab_size=vocab_size,
        decoder_pe=pe,
        perturbation=PerturbationRange(*exp.teacher_perturb),
        max_decode_len=4 * exp.max_len + 8,
    )


def student_config_for(
    exp: ExperimentConfig, variant: str, embedding: str, vocab_size: int
) -> StudentConfig:
    pe = PEKind.SINUSOIDAL if variant == "levt" else PEKind.PERLDPE
    perturb = (0, 0) if variant == "levt" else exp.student_perturb
    return StudentConfig(
        vocab_size=vocab_size,
        embedding_mode=embedding,
        placeholder_pe=pe,
        perturbation=PerturbationRange(*perturb),
        max_placeholders=exp.max_placeholders,
        max_refine_iters=exp.max_refine_iters,
    )


def make_constraint_mode(exp: ExperimentConfig, train_corpus: ParallelCorpus) -> ConstraintMode:
    if exp.constraint == "reference":
        return ConstraintMode(ConstraintKind.REFERENCE)
    if exp.constraint == "proxy":
        return ConstraintMode(ConstraintKind.SOURCE_PROXY, alpha=exp.alpha)
    return ConstraintMode(ConstraintKind.FITTED_RATIO, alpha=fit_ratio(train_corpus))


def decode_student_corpus(
    student: StudentModel, corpus: ParallelCorpus, mode: ConstraintMode
) -> list[tuple[int, ...]]:
    hyps = []
    for src, ref in corpus.pairs:
        len_c = constraint_for(mode, src, ref)
        hyps.append(refine_decode(student, src, len_c).tokens)
    return hyps


def run_experiment(exp: ExperimentConfig) -> list[EvalReport]:
    """Run every grid cell; writes artifacts and reports.jsonl under out_dir."""
    exp.validate()
    os.makedirs(exp.out_dir, exist_ok=True)

    train_corpus, vocab = gen_synthetic(
        exp.task, exp.n_train, exp.max_len, exp.vocab_size, exp.data_seed
    )
    test_corpus, _ = gen_synthetic(
        exp.task, exp.n_test, exp.max_len, exp.vocab_size, exp.data_seed + 1
    )
    vocab.save(os.path.join(exp.out_dir, "vocab.txt"))
    save_parallel(train_corpus, *(os.path.join(exp.out_dir, f"train.{s}") for s in ("src", "tgt")), vocab)
    save_parallel(test_corpus, *(os.path.join(exp.out_dir, f"test.{s}") for s in ("src", "tgt")), vocab)

    jobs = [(tv, seed) for tv in exp.teacher_variants for seed in exp.seeds]
    worker_count = _worker_count()
    if worker_count > 1 and len(jobs) > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(worker_count) as pool:
            args = [(exp, tv, seed) for tv, seed in jobs]
            grouped = pool.starmap(_run_teacher_job, args)
    else:
        grouped = [_run_teacher_job(exp, tv, seed) for tv, seed in jobs]

    reports = [r for group in grouped for r in group]
    reports.sort(key=lambda r: (r.teacher, r.student, r.embedding, r.seed))
    path = os.path.join(exp.out_dir, "reports.jsonl")
    with open(path, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(json.dumps(r.to_record(exp.to_json()), sort_keys=True) + "\n")
    return reports


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("LENAT_THREADS", "1")))
    except ValueError:
        return 1


def _run_teacher_job(exp: ExperimentConfig, teacher_variant: str, seed: int) -> list[EvalReport]:
    """Train one teacher, distill once, then train/evaluate every student cell."""
    train_corpus, vocab = gen_synthetic(
        exp.task, exp.n_train, exp.max_len, exp.vocab_size, exp.data_seed
    )
    test_corpus, _ = gen_synthetic(
        exp.task, exp.n_test, exp.max_len, exp.vocab_size, exp.data_seed + 1
    )
    mode = make_constraint_mode(exp, train_corpus)
    opt_cfg = AdamConfig(lr=exp.lr, warmup=exp.warmup)

    tcfg = teacher_config_for(exp, teacher_variant, len(vocab))
    teacher = train_teacher(
        train_corpus, tcfg, exp.teacher_steps, exp.batch_size, seed, opt_cfg
    )
    teacher.save(os.path.join(exp.out_dir, f"teacher_{teacher_variant}_seed{seed}.ckpt"))

    distill_mode = (
        ConstraintMode(ConstraintKind.REFERENCE)
        if tcfg.decoder_pe is not PEKind.SINUSOIDAL
        else None
    )
    dc = distill(teacher, train_corpus, vocab, distill_mode, beam=exp.beam)
    save_distilled(
        dc,
        os.path.join(exp.out_dir, f"distilled_{teacher_variant}_seed{seed}.src"),
        os.path.join(exp.out_dir, f"distilled_{teacher_variant}_seed{seed}.tgt"),
        os.path.join(exp.out_dir, f"distilled_{teacher_variant}_seed{seed}.meta"),
        vocab,
    )

    reports = []
    for sv in exp.student_variants:
        for emb in exp.embedding_modes:
            scfg = student_config_for(exp, sv, emb, len(vocab))
            student = train_student(dc, scfg, exp.student_steps, exp.batch_size, seed, opt_cfg)
            cell = f"{teacher_variant}_{sv}_{emb}_seed{seed}"
            student.save(os.path.join(exp.out_dir, f"student_{cell}.ckpt"))
            hyps = decode_student_corpus(student, test_corpus, mode)
            refs = [t.ids for _, t in test_corpus.pairs]
            with open(os.path.join(exp.out_dir, f"hyps_{cell}.txt"), "w", encoding="utf-8") as f:
                for h in hyps:
                    f.write(vocab.decode(h) + "\n")
            reports.append(
                EvalReport(
                    teacher=teacher_variant,
                    student=sv,
                    embedding=emb,
                    constraint=exp.constraint,
                    seed=seed,
                    bleu=corpus_bleu(hyps, refs),
                    lr=length_ratio(hyps, refs),
                )
            )
    return reports
