"""Autoregressive encoder-decoder teacher with a selectable decoder
positional encoding: classic sinusoidal, or the perturbed length-difference
encoding driven by a per-sentence length constraint.

The encoder always uses sinusoidal positions.  Training with the
length-difference decoder feeds the true target length plus a fresh integer
perturbation per sentence; decoding always uses perturbation 0 and stops at
EOS or len_constraint + max_len_margin.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import packing
from .autodiff import Tensor
from .blocks import DecoderLayer, EncoderLayer, LayerNorm, Linear, causal_mask
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import BOS, EOS, TokenSequence
from .pe import PEKind, PerturbationRange, build_pe_table, sample_perturbation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TeacherConfig:
    vocab_size: int
    layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ff: int = 128
    decoder_pe: PEKind = PEKind.SINUSOIDAL
    perturbation: PerturbationRange = field(default_factory=lambda: PerturbationRange(0, 0))
    max_len_margin: int = 10
    max_decode_len: int = 64
    max_pos: int = 512
    label_smoothing: float = 0.1
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % 2 != 0 or self.d_model % self.heads != 0:
            raise ValueError("d_model must be even and divisible by heads")

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["decoder_pe"] = self.decoder_pe.value
        d["perturbation"] = [self.perturbation.lo, self.perturbation.hi]
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "TeacherConfig":
        d = json.loads(text)
        d["decoder_pe"] = PEKind(d["decoder_pe"])
        d["perturbation"] = PerturbationRange(*d["perturbation"])
        return TeacherConfig(**d)

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[int, ...]
    logprob: float
    norm_score: float


class TeacherModel:
    def __init__(self, cfg: TeacherConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        d, v = cfg.d_model, cfg.vocab_size
        self.embed = ad.parameter((v, d), rng=rng, std=d**-0.5)
        self.enc_layers = [
            EncoderLayer(d, cfg.heads, cfg.d_ff, rng) for _ in range(cfg.layers)
        ]
        self.enc_norm = LayerNorm(d)
        self.dec_layers = [
            DecoderLayer(d, cfg.heads, cfg.d_ff, rng) for _ in range(cfg.layers)
        ]
        self.dec_norm = LayerNorm(d)
        self.out_proj = Linear(d, v, rng)
        self.steps_trained = 0
        self._enc_pe = build_pe_table(
            PEKind.SINUSOIDAL, 0, 0, cfg.max_pos, cfg.d_model
        ).rows

    def named_params(self):
        yield "embed", self.embed
        for i, layer in enumerate(self.enc_layers):
            yield from layer.named_params(f"enc.{i}")
        yield from self.enc_norm.named_params("enc.norm")
        for i, layer in enumerate(self.dec_layers):
            yield from layer.named_params(f"dec.{i}")
        yield from self.dec_norm.named_params("dec.norm")
        yield from self.out_proj.named_params("out_proj")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def _embed_scaled(self, ids: np.ndarray) -> Tensor:
        return ad.scale(ad.take_rows(self.embed, ids), self.cfg.d_model**0.5)

    def encode(self, src: TokenSequence, p_drop: float = 0.0, rng=None) -> Tensor:
        """Encoder memory for one source sentence, shape [len(src), d_model]."""
        if len(src) == 0:
            raise ValueError("cannot encode an empty source")
        ids = np.asarray(src.ids, dtype=np.int64)
        x = ad.add(self._embed_scaled(ids), Tensor(self._enc_pe[: len(ids)]))
        for layer in self.enc_layers:
            x = layer(x, p_drop, rng)
        return self.enc_norm(x)

    def encode_packed(self, src_ids: np.ndarray, src_lens, p_drop=0.0, rng=None) -> Tensor:
        """Encoder over a packed batch with a block-diagonal attention mask."""
        pe = packing.pack_rows([self._enc_pe[:n] for n in src_lens])
        x = ad.add(self._embed_scaled(src_ids), Tensor(pe))
        mask = packing.block_self_mask(src_lens)
        for layer in self.enc_layers:
            x = layer(x, p_drop, rng, mask)
        return self.enc_norm(x)

    def decoder_pe_rows(self, n_pos: int, length: int, per: int) -> np.ndarray:
        kind = self.cfg.decoder_pe
        if kind is PEKind.SINUSOIDAL:
            return self._enc_pe[:n_pos]
        return build_pe_table(kind, length, per, n_pos, self.cfg.d_model).rows

    def decode_logits(
        self,
        dec_ids: np.ndarray,
        memory: Tensor,
        pe_rows: np.ndarray,
        p_drop: float = 0.0,
        rng=None,
    ) -> Tensor:
        """Causal decoder logits over dec_ids (..., T) -> (..., T, vocab)."""
        t = dec_ids.shape[-1]
        x = ad.add(self._embed_scaled(dec_ids), Tensor(pe_rows[:t]))
        mask = causal_mask(t)
        for layer in self.dec_layers:
            x = layer(x, memory, mask, p_drop, rng)
        return self.out_proj(self.dec_norm(x))

    def decode_logits_packed(
        self,
        dec_ids: np.ndarray,
        memory: Tensor,
        pe_rows: np.ndarray,
        self_mask: np.ndarray,
        cross_mask: np.ndarray,
        p_drop: float = 0.0,
        rng=None,
    ) -> Tensor:
        """Decoder logits over a packed batch of framed target prefixes."""
        x = ad.add(self._embed_scaled(dec_ids), Tensor(pe_rows))
        for layer in self.dec_layers:
            x = layer(x, memory, self_mask, p_drop, rng, cross_mask)
        return self.out_proj(self.dec_norm(x))

    # -- persistence ---------------------------------------------------

    def save(self, path):
        params = {name: p.data for name, p in self.named_params()}
        meta = {
            "format": "teacher",
            "config": self.cfg.to_json(),
            "config_hash": self.cfg.hash(),
            "steps_trained": str(self.steps_trained),
        }
        save_checkpoint(path, params, meta)

    @staticmethod
    def load(path) -> "TeacherModel":
        params, meta = load_checkpoint(path)
        if meta.get("format") != "teacher":
            raise ValueError(f"{path}: not a teacher checkpoint")
        cfg = TeacherConfig.from_json(meta["config"])
        model = TeacherModel(cfg, seed=0)
        own = dict(model.named_params())
        if set(own) != set(params):
            raise ValueError(f"{path}: parameter names do not match config")
        for name, arr in params.items():
            if own[name].data.shape != arr.shape:
                raise ValueError(f"{path}: shape mismatch for {name}")
            own[name].data[...] = arr
        model.steps_trained = int(meta["steps_trained"])
        return model


def teacher_train_step(model: TeacherModel, opt, batch, rng: np.random.Generator) -> float:
    """One optimizer step of teacher-forced cross entropy over a batch of
    (source, target) pairs.  With the length-difference decoder the PE is
    built from the reference length and a fresh perturbation per sentence.

    The batch is packed into one sequence with block-diagonal attention
    masks, so the whole step is a single compute graph; the loss is the
    mean over all target positions, identical to per-sentence evaluation.
    """
    cfg = model.cfg
    use_perldpe = cfg.decoder_pe is not PEKind.SINUSOIDAL
    usable = []
    for src, tgt in batch:
        if len(tgt) == 0:
            log.warning("skipping sentence with empty reference")
            continue
        usable.append((src, tgt))
    if not usable:
        raise ValueError("batch contained no usable sentences")

    src_lens = [len(src) for src, _ in usable]
    dec_lens = [len(tgt) + 1 for _, tgt in usable]
    src_ids = packing.pack_ids([src.ids for src, _ in usable])
    dec_ids = packing.pack_ids([(BOS,) + tuple(tgt.ids) for _, tgt in usable])
    targets = packing.pack_ids([tuple(tgt.ids) + (EOS,) for _, tgt in usable])
    pe_chunks = []
    for _, tgt in usable:
        per = (
            sample_perturbation(rng, cfg.perturbation)
            if use_perldpe and cfg.decoder_pe is PEKind.PERLDPE
            else 0
        )
        pe_chunks.append(model.decoder_pe_rows(len(tgt) + 1, len(tgt), per))
    memory = model.encode_packed(src_ids, src_lens, cfg.dropout, rng)
    logits = model.decode_logits_packed(
        dec_ids,
        memory,
        packing.pack_rows(pe_chunks),
        packing.block_self_mask(dec_lens, causal=True),
        packing.block_cross_mask(dec_lens, src_lens),
        cfg.dropout,
        rng,
    )
    loss = ad.cross_entropy(logits, targets, cfg.label_smoothing)
    opt.zero_grad()
    ad.backward(loss)
    opt.step()
    model.steps_trained += 1
    return loss.item()


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def beam_decode(
    model: TeacherModel,
    src: TokenSequence,
    len_constraint: int | None = None,
    beam: int = 5,
    max_len: int | None = None,
) -> DecodeResult:
    """Length-normalized beam search; deterministic (perturbation is 0).

    With the length-difference decoder a length constraint is required and
    generation may overshoot it by at most cfg.max_len_margin.
    """
    cfg = model.cfg
    if beam < 1:
        raise ValueError(f"beam must be >= 1, got {beam}")
    use_constraint = cfg.decoder_pe is not PEKind.SINUSOIDAL
    if use_constraint:
        if len_constraint is None:
            raise ValueError("length-difference decoding needs a length constraint")
        max_steps = len_constraint + cfg.max_len_margin
    else:
        max_steps = max_len if max_len is not None else cfg.max_decode_len
    max_steps = max(1, max_steps)

    with ad.no_grad():
        memory = model.encode(src)
        pe_rows = model.decoder_pe_rows(
            max_steps + 1, len_constraint if use_constraint else 0, 0
        )
        active: list[tuple[tuple[int, ...], float]] = [((BOS,), 0.0)]
        finished: list[tuple[tuple[int, ...], float]] = []
        for _ in range(max_steps):
            ids = np.array([h for h, _ in active], dtype=np.int64)
            logits = model.decode_logits(ids, memory, pe_rows)
            logp = _log_softmax(logits.data[:, -1, :])
            scores = np.array([s for _, s in active])[:, None] + logp
            flat = scores.ravel()
            k = min(beam, flat.size)
            top = np.argpartition(-flat, k - 1)[:k]
            top = top[np.argsort(-flat[top], kind="stable")]
            vocab = logp.shape[-1]
            next_active = []
            for idx in top:
                hyp_i, tok = divmod(int(idx), vocab)
                seq = active[hyp_i][0] + (tok,)
                sc = float(flat[idx])
                if tok == EOS:
                    finished.append((seq, sc))
                else:
                    next_active.append((seq, sc))
            active = next_active[:beam]
            if not active:
                break
            # no active hypothesis can beat the best finished one: scores are
            # <= 0 and only fall, and normalization divides by at most
            # max_steps + 1, so sc / (max_steps + 1) bounds any descendant
            if finished:
                best_norm = max(sc / max(1, len(seq) - 1) for seq, sc in finished)
                bound = max(sc for _, sc in active) / (max_steps + 1)
                if bound <= best_norm:
                    active = []
                    break
        # force-finish anything still open at the length limit
        if active:
            ids = np.array([h for h, _ in active], dtype=np.int64)
            logits = model.decode_logits(ids, memory, pe_rows)
            logp = _log_softmax(logits.data[:, -1, :])
            for (seq, sc), row in zip(active, logp):
                finished.append((seq + (EOS,), sc + float(row[EOS])))

    def norm(item):
        seq, sc = item
        return sc / max(1, len(seq) - 1)

    best = max(enumerate(finished), key=lambda kv: (norm(kv[1]), -kv[0]))[1]
    tokens = tuple(t for t in best[0] if t not in (BOS, EOS))
    return DecodeResult(tokens=tokens, logprob=best[1], norm_score=norm(best))
