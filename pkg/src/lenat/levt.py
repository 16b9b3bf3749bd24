"""Levenshtein-style editing student.

One encoder plus a decoder trunk run in three phases per refinement round:
token deletion, placeholder insertion, and placeholder filling.  Only the
placeholder phase may use the perturbed length-difference PE (that phase
manipulates length without committing content); the other phases and the
encoder keep sinusoidal positions.  Training perturbations are non-negative
to bias the student toward longer output; decoding uses perturbation 0.

Supervision comes from a minimal insert/delete edit script between a
corrupted hypothesis and the target (see oracle_actions).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import packing
from .autodiff import Tensor
from .blocks import DecoderLayer, EncoderLayer, LayerNorm, Linear
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import BOS, EOS, NUM_RESERVED, PAD, PLH, TokenSequence
from .kernels import edit_ops
from .pe import PEKind, PerturbationRange, build_pe_table, sample_perturbation


@dataclass(frozen=True)
class StudentConfig:
    vocab_size: int
    layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ff: int = 128
    embedding_mode: str = "shared"  # shared | independent
    placeholder_pe: PEKind = PEKind.PERLDPE
    perturbation: PerturbationRange = field(default_factory=lambda: PerturbationRange(0, 2))
    max_placeholders: int = 8  # K: insertions per slot per round
    max_refine_iters: int = 10
    max_pos: int = 512
    label_smoothing: float = 0.1
    dropout: float = 0.0
    # roll-in corruption of the distilled target; the mixture leans on
    # prefix states because refinement grows hypotheses slot-chunk by
    # slot-chunk from the empty frame
    rollin_delete_prob: float = 0.3
    rollin_empty_prob: float = 0.2
    rollin_prefix_prob: float = 0.5
    rollin_junk_max: int = 3

    def __post_init__(self):
        if self.d_model % 2 != 0 or self.d_model % self.heads != 0:
            raise ValueError("d_model must be even and divisible by heads")
        if self.embedding_mode not in ("shared", "independent"):
            raise ValueError(f"unknown embedding_mode {self.embedding_mode!r}")
        if self.perturbation.lo < 0:
            raise ValueError(
                "student perturbation must be non-negative "
                f"(got lo={self.perturbation.lo}); negative offsets push toward short output"
            )
        if self.max_placeholders < 1:
            raise ValueError("max_placeholders must be >= 1")
        if self.max_refine_iters < 0:
            raise ValueError("max_refine_iters must be >= 0")

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["placeholder_pe"] = self.placeholder_pe.value
        d["perturbation"] = [self.perturbation.lo, self.perturbation.hi]
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "StudentConfig":
        d = json.loads(text)
        d["placeholder_pe"] = PEKind(d["placeholder_pe"])
        d["perturbation"] = PerturbationRange(*d["perturbation"])
        return StudentConfig(**d)

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RefinementState:
    """Framed hypothesis (BOS ... EOS) within the refinement loop."""

    tokens: tuple[int, ...]
    iteration: int
    len_constraint: int

    def __post_init__(self):
        if len(self.tokens) < 2 or self.tokens[0] != BOS or self.tokens[-1] != EOS:
            raise ValueError(f"state must be BOS...EOS framed, got {self.tokens}")

    @property
    def placeholder_positions(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.tokens) if t == PLH)


@dataclass(frozen=True)
class EditScript:
    """Per-round edit plan: deletions over the framed hypothesis, then
    insertions into the gaps of the surviving sequence.

    insert_counts[s] / fill_tokens[s] describe the gap after surviving
    position s.  Counts are clamped to the per-round cap K, so applying the
    script reconstructs the reference exactly whenever no slot needed more
    than K insertions; cost always reports the full unclamped edit distance.
    """

    deletions: frozenset[int]
    insert_counts: tuple[int, ...]
    fill_tokens: tuple[tuple[int, ...], ...]
    cost: int


def _strip_frame(seq) -> list[int]:
    seq = list(seq)
    if len(seq) < 2 or seq[0] != BOS or seq[-1] != EOS:
        raise ValueError(f"expected BOS...EOS framing, got {seq}")
    return seq[1:-1]


def oracle_actions(hyp, ref, k: int) -> EditScript:
    """Minimal insert/delete edit script from framed ``hyp`` to framed ``ref``.

    Ties prefer keeping a token over deleting it, leftmost first; slots
    needing more than ``k`` insertions contribute only their first ``k``
    fill tokens this round.
    """
    h = _strip_frame(hyp)
    r = _strip_frame(ref)
    dist, keep, ins_pos = edit_ops(
        np.asarray(h, dtype=np.int32), np.asarray(r, dtype=np.int32)
    )
    deletions = frozenset(i + 1 for i in range(len(h)) if not keep[i])
    kept_before = np.concatenate([[0], np.cumsum(keep, dtype=np.int64)])
    n_slots = int(kept_before[-1]) + 1
    needed: list[list[int]] = [[] for _ in range(n_slots)]
    for j, pos in enumerate(ins_pos):
        if pos >= 0:
            needed[int(kept_before[pos])].append(r[j])
    return EditScript(
        deletions=deletions,
        insert_counts=tuple(min(len(toks), k) for toks in needed),
        fill_tokens=tuple(tuple(toks[:k]) for toks in needed),
        cost=int(dist),
    )


def apply_edit_script(script: EditScript, hyp) -> tuple[int, ...]:
    """Apply deletions then insertions; returns the framed result."""
    survivors = [t for i, t in enumerate(hyp) if i not in script.deletions]
    if len(survivors) - 1 != len(script.insert_counts):
        raise ValueError(
            f"script has {len(script.insert_counts)} slots for "
            f"{len(survivors)} surviving tokens"
        )
    out: list[int] = []
    for s, tok in enumerate(survivors[:-1]):
        out.append(tok)
        out.extend(script.fill_tokens[s][: script.insert_counts[s]])
    out.append(survivors[-1])
    return tuple(out)


@dataclass(frozen=True)
class RefineResult:
    tokens: tuple[int, ...]
    iterations: int
    converged: bool


class StudentModel:
    def __init__(self, cfg: StudentConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        d, v, k = cfg.d_model, cfg.vocab_size, cfg.max_placeholders
        self.embed = ad.parameter((v, d), rng=rng, std=d**-0.5)
        if cfg.embedding_mode == "independent":
            self.plh_embed = ad.parameter((v, d), rng=rng, std=d**-0.5)
        else:
            self.plh_embed = self.embed
        self.enc_layers = [
            EncoderLayer(d, cfg.heads, cfg.d_ff, rng) for _ in range(cfg.layers)
        ]
        self.enc_norm = LayerNorm(d)
        self.dec_layers = [
            DecoderLayer(d, cfg.heads, cfg.d_ff, rng) for _ in range(cfg.layers)
        ]
        self.dec_norm = LayerNorm(d)
        # heads start at exact uniform predictions
        self.del_head = Linear(d, 2, rng, zero=True)
        self.plh_head = Linear(2 * d, k + 1, rng, zero=True)
        self.fill_gain = ad.parameter(np.float64(0.0))
        self.fill_bias = ad.parameter(np.zeros(v))
        self.steps_trained = 0
        self._sin_pe = build_pe_table(PEKind.SINUSOIDAL, 0, 0, cfg.max_pos, d).rows

    def named_params(self):
        yield "embed", self.embed
        if self.cfg.embedding_mode == "independent":
            yield "plh_embed", self.plh_embed
        for i, layer in enumerate(self.enc_layers):
            yield from layer.named_params(f"enc.{i}")
        yield from self.enc_norm.named_params("enc.norm")
        for i, layer in enumerate(self.dec_layers):
            yield from layer.named_params(f"dec.{i}")
        yield from self.dec_norm.named_params("dec.norm")
        yield from self.del_head.named_params("del_head")
        yield from self.plh_head.named_params("plh_head")
        yield "fill_gain", self.fill_gain
        yield "fill_bias", self.fill_bias

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def encode(self, src: TokenSequence, p_drop: float = 0.0, rng=None) -> Tensor:
        if len(src) == 0:
            raise ValueError("cannot encode an empty source")
        ids = np.asarray(src.ids, dtype=np.int64)
        x = ad.scale(ad.take_rows(self.embed, ids), self.cfg.d_model**0.5)
        x = ad.add(x, Tensor(self._sin_pe[: len(ids)]))
        for layer in self.enc_layers:
            x = layer(x, p_drop, rng)
        return self.enc_norm(x)

    def encode_packed(self, src_ids: np.ndarray, src_lens, p_drop=0.0, rng=None) -> Tensor:
        pe = packing.pack_rows([self._sin_pe[:n] for n in src_lens])
        x = ad.scale(ad.take_rows(self.embed, src_ids), self.cfg.d_model**0.5)
        x = ad.add(x, Tensor(pe))
        mask = packing.block_self_mask(src_lens)
        for layer in self.enc_layers:
            x = layer(x, p_drop, rng, mask)
        return self.enc_norm(x)

    def trunk_packed(
        self,
        states,
        memory: Tensor,
        src_lens,
        pe_chunks,
        embed: Tensor,
        sent_idx=None,
        p_drop: float = 0.0,
        rng=None,
    ) -> Tensor:
        """Packed bidirectional decoder pass over a list of framed states."""
        lengths = [len(s) for s in states]
        ids = packing.pack_ids(states)
        x = ad.scale(ad.take_rows(embed, ids), self.cfg.d_model**0.5)
        x = ad.add(x, Tensor(packing.pack_rows(pe_chunks)))
        self_mask = packing.block_self_mask(lengths)
        cross = packing.block_cross_mask(lengths, src_lens, kv_map=sent_idx)
        for layer in self.dec_layers:
            x = layer(x, memory, self_mask, p_drop, rng, cross)
        return self.dec_norm(x)

    def _trunk(
        self,
        ids: np.ndarray,
        memory: Tensor,
        pe_rows: np.ndarray,
        embed: Tensor,
        p_drop: float = 0.0,
        rng=None,
    ) -> Tensor:
        """Bidirectional decoder pass: (T,) ids -> (T, d_model)."""
        x = ad.scale(ad.take_rows(embed, ids), self.cfg.d_model**0.5)
        x = ad.add(x, Tensor(pe_rows[: ids.shape[-1]]))
        for layer in self.dec_layers:
            x = layer(x, memory, None, p_drop, rng)
        return self.dec_norm(x)

    def _plh_pe_rows(self, n_pos: int, len_constraint: int, per: int) -> np.ndarray:
        if self.cfg.placeholder_pe is PEKind.SINUSOIDAL:
            return self._sin_pe[:n_pos]
        return build_pe_table(
            self.cfg.placeholder_pe, len_constraint, per, n_pos, self.cfg.d_model
        ).rows

    # -- heads -----------------------------------------------------------

    def delete_logits(self, state_tokens, memory: Tensor, p_drop=0.0, rng=None) -> Tensor:
        """Keep/delete logits per framed position, shape [T, 2]."""
        ids = np.asarray(state_tokens, dtype=np.int64)
        h = self._trunk(ids, memory, self._sin_pe, self.embed, p_drop, rng)
        return self.del_head(h)

    def placeholder_logits(
        self, state_tokens, memory: Tensor, len_constraint: int, per: int, p_drop=0.0, rng=None
    ) -> Tensor:
        """Insertion-count logits per adjacent-token slot, shape [T-1, K+1]."""
        if len_constraint <= 0:
            raise ValueError(f"len_constraint must be positive, got {len_constraint}")
        ids = np.asarray(state_tokens, dtype=np.int64)
        pe_rows = self._plh_pe_rows(len(ids), len_constraint, per)
        h = self._trunk(ids, memory, pe_rows, self.plh_embed, p_drop, rng)
        left = ad.take_rows(h, np.arange(len(ids) - 1))
        right = ad.take_rows(h, np.arange(1, len(ids)))
        return self.plh_head(ad.concat_last(left, right))

    def fill_logits(self, state_tokens, memory: Tensor, p_drop=0.0, rng=None) -> Tensor:
        """Vocabulary logits at placeholder positions, shape [n_plh, vocab]."""
        ids = np.asarray(state_tokens, dtype=np.int64)
        plh_idx = np.flatnonzero(ids == PLH)
        if plh_idx.size == 0:
            return Tensor(np.zeros((0, self.cfg.vocab_size)))
        h = self._trunk(ids, memory, self._sin_pe, self.embed, p_drop, rng)
        at_plh = ad.take_rows(h, plh_idx)
        logits = ad.mul(
            ad.matmul(at_plh, ad.transpose(self.embed, (1, 0))), self.fill_gain
        )
        return ad.add(logits, self.fill_bias)

    # -- persistence -------------------------------------------------------

    def save(self, path):
        params = {name: p.data for name, p in self.named_params()}
        tie = "plh_embed=independent" if self.cfg.embedding_mode == "independent" else "plh_embed=tied"
        meta = {
            "format": "student",
            "config": self.cfg.to_json(),
            "config_hash": self.cfg.hash(),
            "steps_trained": str(self.steps_trained),
            "heads": "delete,placeholder,fill",
            "embedding_tie": f"encoder=tied,delete=tied,fill=tied,fill_proj=tied,{tie}",
        }
        save_checkpoint(path, params, meta)

    @staticmethod
    def load(path) -> "StudentModel":
        params, meta = load_checkpoint(path)
        if meta.get("format") != "student":
            raise ValueError(f"{path}: not a student checkpoint")
        cfg = StudentConfig.from_json(meta["config"])
        model = StudentModel(cfg, seed=0)
        own = dict(model.named_params())
        if set(own) != set(params):
            raise ValueError(f"{path}: parameter names do not match config")
        for name, arr in params.items():
            if own[name].data.shape != arr.shape:
                raise ValueError(f"{path}: shape mismatch for {name}")
            own[name].data[...] = arr
        model.steps_trained = int(meta["steps_trained"])
        return model


# -- probability views ------------------------------------------------------


def delete_forward(model: StudentModel, state: RefinementState, memory: Tensor) -> np.ndarray:
    """Per-token [keep, delete] probabilities (unmasked; decisions keep BOS/EOS)."""
    if state.placeholder_positions:
        raise ValueError("deletion runs on states without placeholders")
    logits = model.delete_logits(state.tokens, memory)
    return ad.softmax(logits, axis=-1).data


def placeholder_forward(
    model: StudentModel,
    state: RefinementState,
    memory: Tensor,
    len_constraint: int,
    per: int,
) -> np.ndarray:
    """Per-slot distributions over 0..K insertions, shape [T-1, K+1]."""
    logits = model.placeholder_logits(state.tokens, memory, len_constraint, per)
    return ad.softmax(logits, axis=-1).data


def fill_forward(model: StudentModel, state: RefinementState, memory: Tensor) -> np.ndarray:
    """Vocabulary distribution per placeholder, shape [n_plh, vocab]."""
    logits = model.fill_logits(state.tokens, memory)
    if logits.shape[0] == 0:
        return logits.data
    return ad.softmax(logits, axis=-1).data


# -- training ----------------------------------------------------------------


def _corrupt_insert_junk(tgt: list[int], rng: np.random.Generator, cfg: StudentConfig) -> list[int]:
    n_junk = int(rng.integers(1, cfg.rollin_junk_max + 1))
    out = list(tgt)
    for _ in range(n_junk):
        pos = int(rng.integers(0, len(out) + 1))
        tok = int(rng.integers(NUM_RESERVED, cfg.vocab_size))
        out.insert(pos, tok)
    return out


def _corrupt_delete(tgt: list[int], rng: np.random.Generator, cfg: StudentConfig) -> list[int]:
    """Deletion roll-in covering the states the refinement loop visits:
    the empty frame (round one), prefixes (later rounds grow the hypothesis
    in per-slot chunks of K), and scattered token drops."""
    u = rng.random()
    if u < cfg.rollin_empty_prob:
        return []
    if u < cfg.rollin_empty_prob + cfg.rollin_prefix_prob:
        return tgt[: int(rng.integers(1, len(tgt) + 1))]
    keep = rng.random(len(tgt)) >= cfg.rollin_delete_prob
    return [t for t, k in zip(tgt, keep) if k]


def student_train_step(
    model: StudentModel, opt, batch, rng: np.random.Generator
) -> dict[str, float]:
    """One optimizer step over (source, distilled-target) pairs.

    Three supervised phases, each a packed pass over the batch: delete junk
    inserted into the target, predict oracle insertion counts on a
    deletion-corrupted target (placeholder PE sees the target length plus a
    sampled perturbation), and fill oracle placeholders.  Each phase loss is
    the mean over its supervised positions.
    """
    cfg = model.cfg
    k = cfg.max_placeholders
    usable = [(src, tgt) for src, tgt in batch if len(tgt) > 0]
    if not usable:
        raise ValueError("batch contained no usable sentences")

    junky_states, del_labels = [], []
    holey_states, slot_labels, plh_pe = [], [], []
    plh_states, fill_targets, fill_sent = [], [], []
    for i, (src, tgt) in enumerate(usable):
        ref = (BOS,) + tuple(tgt.ids) + (EOS,)
        len_c = len(tgt)
        per = sample_perturbation(rng, cfg.perturbation)

        # deletion roll-in: junk inserted into the target
        junky = (BOS,) + tuple(_corrupt_insert_junk(list(tgt.ids), rng, cfg)) + (EOS,)
        script = oracle_actions(junky, ref, k)
        labels = np.full(len(junky), -1, dtype=np.int64)  # specials ignored
        for p in range(1, len(junky) - 1):
            labels[p] = 1 if p in script.deletions else 0
        junky_states.append(junky)
        del_labels.append(labels)

        # placeholder roll-in: random deletions from the target
        holey = (BOS,) + tuple(_corrupt_delete(list(tgt.ids), rng, cfg)) + (EOS,)
        script = oracle_actions(holey, ref, k)
        holey_states.append(holey)
        slot_labels.append(np.asarray(script.insert_counts, dtype=np.int64))
        plh_pe.append(model._plh_pe_rows(len(holey), len_c, per))

        # fill: oracle placeholders inserted into the corrupted state
        with_plh: list[int] = []
        targets: list[int] = []
        for s, tok in enumerate(holey[:-1]):
            with_plh.append(tok)
            with_plh.extend([PLH] * script.insert_counts[s])
            targets.extend(script.fill_tokens[s][: script.insert_counts[s]])
        with_plh.append(holey[-1])
        if targets:
            plh_states.append(tuple(with_plh))
            fill_targets.append(targets)
            fill_sent.append(i)

    src_lens = [len(src) for src, _ in usable]
    src_ids = packing.pack_ids([src.ids for src, _ in usable])
    memory = model.encode_packed(src_ids, src_lens, cfg.dropout, rng)
    sin = model._sin_pe

    h = model.trunk_packed(
        junky_states, memory, src_lens,
        [sin[: len(s)] for s in junky_states], model.embed,
        p_drop=cfg.dropout, rng=rng,
    )
    del_ce = ad.cross_entropy(
        model.del_head(h), np.concatenate(del_labels),
        cfg.label_smoothing, ignore_index=-1,
    )

    h = model.trunk_packed(
        holey_states, memory, src_lens, plh_pe, model.plh_embed,
        p_drop=cfg.dropout, rng=rng,
    )
    offs = packing.offsets_of([len(s) for s in holey_states])
    left = np.concatenate(
        [off + np.arange(len(s) - 1) for off, s in zip(offs, holey_states)]
    )
    slot_feats = ad.concat_last(ad.take_rows(h, left), ad.take_rows(h, left + 1))
    plh_ce = ad.cross_entropy(
        model.plh_head(slot_feats), np.concatenate(slot_labels), cfg.label_smoothing
    )

    losses = {"delete": del_ce, "placeholder": plh_ce}
    if plh_states:
        h = model.trunk_packed(
            plh_states, memory, src_lens,
            [sin[: len(s)] for s in plh_states], model.embed,
            sent_idx=fill_sent, p_drop=cfg.dropout, rng=rng,
        )
        ids = packing.pack_ids(plh_states)
        at_plh = ad.take_rows(h, np.flatnonzero(ids == PLH))
        logits = ad.mul(
            ad.matmul(at_plh, ad.transpose(model.embed, (1, 0))), model.fill_gain
        )
        logits = ad.add(logits, model.fill_bias)
        losses["fill"] = ad.cross_entropy(
            logits,
            np.concatenate([np.asarray(t, dtype=np.int64) for t in fill_targets]),
            cfg.label_smoothing,
        )

    combined = None
    for t in losses.values():
        combined = t if combined is None else ad.add(combined, t)
    opt.zero_grad()
    ad.backward(combined)
    opt.step()
    model.steps_trained += 1
    out = {name: t.item() for name, t in losses.items()}
    out["total"] = combined.item()
    return out


# -- decoding ----------------------------------------------------------------

_FILL_BANNED = np.array([PAD, BOS, EOS, PLH], dtype=np.int64)


def refine_decode(
    model: StudentModel,
    src: TokenSequence,
    len_constraint: int,
    max_iters: int | None = None,
) -> RefineResult:
    """Iterative delete / insert-placeholders / fill loop from the empty
    frame; stops when the state repeats or the iteration cap is reached.
    """
    if len_constraint < 1:
        raise ValueError(f"len_constraint must be >= 1, got {len_constraint}")
    cfg = model.cfg
    cap = cfg.max_refine_iters if max_iters is None else max_iters
    with ad.no_grad():
        memory = model.encode(src)
        state = RefinementState((BOS, EOS), 0, len_constraint)
        seen = {state.tokens}
        converged = False
        it = 0
        while it < cap:
            it += 1
            # delete
            probs = delete_forward(model, state, memory)
            toks = [
                t
                for i, t in enumerate(state.tokens)
                if t in (BOS, EOS) or probs[i, 0] >= probs[i, 1]
            ]
            # insert placeholders (perturbation 0 at inference)
            mid = RefinementState(tuple(toks), it, len_constraint)
            slot_probs = placeholder_forward(model, mid, memory, len_constraint, 0)
            slot_counts = slot_probs.argmax(axis=-1)
            with_plh: list[int] = []
            for s, tok in enumerate(mid.tokens[:-1]):
                with_plh.append(tok)
                with_plh.extend([PLH] * int(slot_counts[s]))
            with_plh.append(mid.tokens[-1])
            # fill
            plh_state = RefinementState(tuple(with_plh), it, len_constraint)
            if plh_state.placeholder_positions:
                dist = fill_forward(model, plh_state, memory).copy()
                dist[:, _FILL_BANNED] = -1.0
                choices = dist.argmax(axis=-1)
                filled = list(plh_state.tokens)
                for pos, tok in zip(plh_state.placeholder_positions, choices):
                    filled[pos] = int(tok)
            else:
                filled = list(plh_state.tokens)
            state = RefinementState(tuple(filled), it, len_constraint)
            if state.tokens in seen:
                converged = True
                break
            seen.add(state.tokens)
    return RefineResult(
        tokens=tuple(_strip_frame(state.tokens)), iterations=it, converged=converged
    )
