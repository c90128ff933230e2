"""The visual grounding model.

Pipeline per example: encode the query (dialogue context + current utterance
+ API argument embeddings), encode every candidate entity (query-attended
metadata, visual features, position/visibility/highlight/memory codes,
optional self-attention over the candidate set), then score candidates with
a bilinear form and return the argmax.

Everything runs batched; constant per-candidate feature blocks are
precomputed once per dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..catalog import PRODUCT_CARD, VisualEntity, metadata_token_sequence
from ..data import GroundingExample
from ..nn import ParameterStore, Tape
from ..nn import layers as L
from ..nn import tensor as T
from ..nn.tensor import Tensor
from ..text import tokenize
from .config import LOSS_BINARY_CE, ModelConfig
from .vocab import AGENT, ArgVocabulary, USER, Vocabulary


@dataclass
class EncodedExample:
    example_id: str
    ctx_ids: np.ndarray
    utt_ids: np.ndarray
    arg_name_id: int
    arg_type_id: int
    cand_meta_ids: List[np.ndarray]
    cand_const: np.ndarray          # (C, visual+pos+buckets) visual | x | visibility
    cand_mem: np.ndarray            # (C, 2*pos) last-visible | last-selected sinusoids
    cand_highlight: np.ndarray      # (C,) int
    entity_ids: List[str]
    gold_index: int
    gold_absent: bool
    reference_type: str
    comparative: bool
    history_required: bool

    @property
    def n_candidates(self) -> int:
        return len(self.entity_ids)


@dataclass
class Prediction:
    example_id: str
    chosen_entity_id: str
    chosen_index: int
    scores: List[float]
    probs: List[float]
    correct: bool
    gold_absent: bool
    reference_type: str
    comparative: bool
    history_required: bool

    @property
    def margin(self) -> float:
        if len(self.probs) < 2:
            return 1.0
        top = sorted(self.probs, reverse=True)
        return top[0] - top[1]


class GroundingModel:
    def __init__(
        self,
        cfg: ModelConfig,
        store: ParameterStore,
        vocab: Vocabulary,
        args: ArgVocabulary,
        provider,
    ):
        cfg.validate()
        self.cfg = cfg
        self.store = store
        self.vocab = vocab
        self.args = args
        self.provider = provider
        if provider.dim != cfg.visual_dim:
            raise ValueError(
                f"feature provider dim {provider.dim} != config visual_dim {cfg.visual_dim}"
            )
        self._create_parameters()

    # -- parameters -----------------------------------------------------------

    EMBED_INIT_STD = 0.3

    def _create_parameters(self) -> None:
        cfg, store = self.cfg, self.store
        std_e = self.EMBED_INIT_STD
        if cfg.pretrained_dim:
            if "embed.word_src" not in store:
                raise ValueError("pretrained_dim set but no embed.word_src tensor provided")
            store.get_or_create(
                "embed.word_proj", (cfg.pretrained_dim, cfg.word_dim),
                std=1.0 / math.sqrt(cfg.pretrained_dim),
            )
        else:
            store.get_or_create("embed.word", (self.vocab.table_size, cfg.word_dim), std=std_e)
        store.get_or_create("embed.arg_name", (self.args.n_names, cfg.arg_dim), std=std_e)
        store.get_or_create("embed.arg_type", (2, cfg.arg_dim), std=std_e)
        store.get_or_create("embed.highlight", (2, cfg.highlight_dim), std=std_e)
        h, wd = cfg.hidden_size, cfg.word_dim
        prefixes = ["ctx_lstm", "utt_lstm"] + (["meta_lstm"] if cfg.use_metadata else [])
        for prefix in prefixes:
            for d in ("fw", "bw"):
                L.lstm_parameters(store, f"{prefix}.{d}", wd, h)
        if cfg.use_metadata and cfg.use_query_attention:
            # zero projection: attention starts as exact uniform pooling and
            # learns where to deviate
            store.get_or_create("qattn.P", (cfg.query_dim, 2 * h), std=0.0)
        d_e = cfg.entity_dim
        if cfg.use_self_attention:
            std = 1.0 / math.sqrt(d_e)
            store.get_or_create("selfattn.Wq", (d_e, cfg.attn_dim), std=std)
            store.get_or_create("selfattn.Wk", (d_e, cfg.attn_dim), std=std)
            store.get_or_create("selfattn.Wv", (d_e, cfg.attn_dim), std=std)
            # zero output projection: the residual block starts as an exact
            # identity, so enabling self-attention can only add capacity
            store.get_or_create("selfattn.Wo", (cfg.attn_dim, d_e), std=0.0)
        # zero-initialized scorer: untrained models score everything 0, and
        # early training gets clean bilinear gradients
        store.get_or_create("scorer.W", (cfg.query_dim, d_e), std=0.0)

    def _embed_tokens(self, ids: np.ndarray):
        if self.cfg.pretrained_dim:
            src_rows = T.gather_rows(self.store["embed.word_src"], ids)
            return T.matmul(src_rows, self.store["embed.word_proj"])
        return T.gather_rows(self.store["embed.word"], ids)

    # -- dataset encoding ------------------------------------------------------

    def _context_ids(self, context: Sequence[Tuple[str, str]]) -> np.ndarray:
        cfg = self.cfg
        pairs = list(context)[-2 * cfg.context_turns:]
        ids: List[int] = []
        for speaker, text in pairs:
            ids.append(self.vocab.id_of(USER if speaker == "user" else AGENT))
            ids.extend(self.vocab.encode(tokenize(text)))
        ids = ids[-cfg.max_context_tokens:]
        if not ids:
            ids = [self.vocab.pad_id]
        return np.asarray(ids, dtype=np.int64)

    def _utterance_ids(self, utterance: str) -> np.ndarray:
        toks = tokenize(utterance)
        if not toks:
            raise ValueError("empty utterance")
        return np.asarray(
            self.vocab.encode(toks[: self.cfg.max_utterance_tokens]), dtype=np.int64
        )

    def _memory_offset(self, turn_index: int, last_turn: Optional[int]) -> float:
        cap = self.cfg.memory_offset_cap
        if last_turn is None:
            return float(cap)
        return float(min(max(turn_index - last_turn, 0), cap))

    def _candidate_features(self, raw: dict, turn_index: int) -> Tuple[np.ndarray, np.ndarray, int]:
        cfg = self.cfg
        entity = VisualEntity.from_dict(raw)
        visual = self.provider.features(entity)
        # sinusoid blocks are rescaled to ~unit norm so no single feature
        # block dominates the bilinear gradients
        sin_scale = 1.0 / math.sqrt(cfg.pos_dim / 2.0)
        pos = sin_scale * L.sinusoidal_embed(float(entity.x_position), cfg.pos_dim)
        vis = np.zeros(cfg.visibility_buckets)
        bucket = min(int(entity.visibility * cfg.visibility_buckets), cfg.visibility_buckets - 1)
        vis[bucket] = 1.0
        mem = sin_scale * np.concatenate(
            [
                L.sinusoidal_embed(self._memory_offset(turn_index, entity.last_visible_turn), cfg.pos_dim),
                L.sinusoidal_embed(self._memory_offset(turn_index, entity.last_selected_turn), cfg.pos_dim),
            ]
        )
        return np.concatenate([visual, pos, vis]), mem, int(entity.highlighted)

    def encode_example(self, ex: GroundingExample) -> EncodedExample:
        cfg = self.cfg
        kept: List[dict] = []
        for cand in ex.candidates:
            if cand.get("on_current_screen"):
                kept.append(cand)
                continue
            if cfg.history_window <= 0:
                continue
            offset = ex.turn_index - (cand.get("last_visible_turn") or 0)
            if offset <= cfg.history_window:
                kept.append(cand)
        if not kept:
            raise ValueError(f"{ex.example_id}: no candidates left after history filtering")
        gold_entity = ex.candidates[ex.gold_index]["entity_id"]
        entity_ids = [c["entity_id"] for c in kept]
        gold_absent = gold_entity not in entity_ids
        gold_index = 0 if gold_absent else entity_ids.index(gold_entity)

        meta_ids = []
        consts = []
        mems = []
        highlights = []
        for cand in kept:
            entity = VisualEntity.from_dict(cand)
            tokens = metadata_token_sequence(entity, cfg.max_metadata_tokens, cfg.color_in_catalog)
            if entity.kind == PRODUCT_CARD and not tokens:
                raise ValueError(f"{ex.example_id}: product card with empty metadata")
            meta_ids.append(np.asarray(self.vocab.encode(tokens), dtype=np.int64))
            const, mem, hl = self._candidate_features(cand, ex.turn_index)
            consts.append(const)
            mems.append(mem)
            highlights.append(hl)
        return EncodedExample(
            example_id=ex.example_id,
            ctx_ids=self._context_ids(ex.dialogue_context),
            utt_ids=self._utterance_ids(ex.utterance),
            arg_name_id=self.args.name_id(ex.arg_name),
            arg_type_id=self.args.type_id(ex.arg_type),
            cand_meta_ids=meta_ids,
            cand_const=np.stack(consts),
            cand_mem=np.stack(mems),
            cand_highlight=np.asarray(highlights, dtype=np.int64),
            entity_ids=entity_ids,
            gold_index=gold_index,
            gold_absent=gold_absent,
            reference_type=ex.reference_type,
            comparative=ex.comparative,
            history_required=ex.history_required,
        )

    def encode_dataset(self, examples: Sequence[GroundingExample]) -> List[EncodedExample]:
        return [self.encode_example(ex) for ex in examples]

    # -- forward ----------------------------------------------------------------

    @staticmethod
    def _pad_ids(rows: Sequence[np.ndarray], pad_id: int) -> Tuple[np.ndarray, np.ndarray]:
        t_max = max(len(r) for r in rows)
        out = np.full((len(rows), t_max), pad_id, dtype=np.int64)
        lens = np.empty(len(rows), dtype=np.int64)
        for i, r in enumerate(rows):
            out[i, : len(r)] = r
            lens[i] = len(r)
        return out, lens

    def forward_batch(self, batch: Sequence[EncodedExample]) -> Tuple[Tensor, np.ndarray, np.ndarray, np.ndarray]:
        """Scores for a batch: returns (scores (B, Cmax), candidate mask,
        gold indices, loss weights with gold-absent examples zeroed)."""
        cfg, store = self.cfg, self.store
        b = len(batch)
        c_max = max(ex.n_candidates for ex in batch)
        h = cfg.hidden_size

        ctx_ids, ctx_lens = self._pad_ids([ex.ctx_ids for ex in batch], self.vocab.pad_id)
        utt_ids, utt_lens = self._pad_ids([ex.utt_ids for ex in batch], self.vocab.pad_id)
        ctx_emb = self._embed_tokens(ctx_ids)
        utt_emb = self._embed_tokens(utt_ids)
        _, ctx_final = L.bilstm(store, "ctx_lstm", ctx_emb, ctx_lens, h)
        _, utt_final = L.bilstm(store, "utt_lstm", utt_emb, utt_lens, h)
        arg_name_emb = T.gather_rows(
            store["embed.arg_name"], np.asarray([ex.arg_name_id for ex in batch])
        )
        arg_type_emb = T.gather_rows(
            store["embed.arg_type"], np.asarray([ex.arg_type_id for ex in batch])
        )
        q = T.concat([ctx_final, utt_final, arg_name_emb, arg_type_emb], axis=1)

        # flattened candidate rows (B * Cmax), padded with dummy rows
        flat_meta: List[np.ndarray] = []
        const = np.zeros((b, c_max, cfg.visual_dim + cfg.pos_dim + cfg.visibility_buckets))
        mem = np.zeros((b, c_max, 2 * cfg.pos_dim))
        highlight = np.zeros((b, c_max), dtype=np.int64)
        cand_mask = np.zeros((b, c_max), dtype=bool)
        pad_row = np.asarray([self.vocab.pad_id], dtype=np.int64)
        for i, ex in enumerate(batch):
            n = ex.n_candidates
            cand_mask[i, :n] = True
            const[i, :n] = ex.cand_const
            mem[i, :n] = ex.cand_mem
            highlight[i, :n] = ex.cand_highlight
            flat_meta.extend(ex.cand_meta_ids)
            flat_meta.extend([pad_row] * (c_max - n))

        n_rows = b * c_max
        if cfg.use_metadata:
            meta_ids, meta_lens = self._pad_ids(flat_meta, self.vocab.pad_id)
            meta_emb = self._embed_tokens(meta_ids)
            meta_states, _ = L.bilstm(store, "meta_lstm", meta_emb, meta_lens, h)
            token_mask = np.arange(meta_ids.shape[1])[None, :] < meta_lens[:, None]
            if cfg.use_query_attention:
                rep_idx = np.repeat(np.arange(b), c_max)
                q_rep = T.gather_rows(q, rep_idx)
                meta_vec = L.attend(store, "qattn", q_rep, meta_states, meta_states, token_mask)
            else:
                maskf = Tensor(token_mask.astype(np.float64)[:, :, None])
                summed = T.reduce_sum(T.mul(meta_states, maskf), axis=1)
                meta_vec = T.mul(summed, Tensor(1.0 / meta_lens.astype(np.float64)[:, None]))
        else:
            meta_vec = Tensor(np.zeros((n_rows, 2 * h)))

        visual_dim = cfg.visual_dim
        const_flat = const.reshape(n_rows, -1)
        if not cfg.use_visual:
            const_flat = const_flat.copy()
            const_flat[:, :visual_dim] = 0.0
        hl_emb = T.gather_rows(store["embed.highlight"], highlight.reshape(-1))
        entity = T.concat(
            [meta_vec, Tensor(const_flat), hl_emb, Tensor(mem.reshape(n_rows, -1))],
            axis=1,
        )
        entity = T.reshape(entity, (b, c_max, cfg.entity_dim))
        if cfg.use_self_attention:
            entity = L.self_attend(store, "selfattn", entity, cand_mask, attn_dim=cfg.attn_dim)
        scores = L.bilinear_scores_batch(q, entity, store["scorer.W"])
        gold = np.asarray([ex.gold_index for ex in batch], dtype=np.int64)
        weights = np.asarray([0.0 if ex.gold_absent else 1.0 for ex in batch])
        return scores, cand_mask, gold, weights

    def loss_batch(self, batch: Sequence[EncodedExample]) -> Tuple[Tensor, np.ndarray]:
        scores, mask, gold, weights = self.forward_batch(batch)
        if self.cfg.loss == LOSS_BINARY_CE:
            return T.bce_with_logits(scores, gold, mask, weights)[0], self._argmax(scores.data, mask)
        loss, _ = T.softmax_cross_entropy(scores, gold, mask, weights)
        return loss, self._argmax(scores.data, mask)

    @staticmethod
    def _argmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
        masked = np.where(mask, scores, -np.inf)
        return masked.argmax(axis=1)  # ties break toward the lowest index

    def predict_batch(self, batch: Sequence[EncodedExample]) -> List[Prediction]:
        scores, mask, gold, _ = self.forward_batch(batch)
        data = scores.data
        chosen = self._argmax(data, mask)
        out = []
        for i, ex in enumerate(batch):
            n = ex.n_candidates
            row = data[i, :n]
            shifted = np.exp(row - row.max())
            probs = shifted / shifted.sum()
            idx = int(chosen[i])
            out.append(
                Prediction(
                    example_id=ex.example_id,
                    chosen_entity_id=ex.entity_ids[idx],
                    chosen_index=idx,
                    scores=[float(s) for s in row],
                    probs=[float(p) for p in probs],
                    correct=(not ex.gold_absent) and idx == ex.gold_index,
                    gold_absent=ex.gold_absent,
                    reference_type=ex.reference_type,
                    comparative=ex.comparative,
                    history_required=ex.history_required,
                )
            )
        return out

    def ground(self, example: GroundingExample) -> Prediction:
        """Full pipeline on one example (inference, deterministic)."""
        return self.predict_batch([self.encode_example(example)])[0]

    # -- single-example encoders (inspection and tests) -------------------------

    def encode_query(
        self,
        context: Sequence[Tuple[str, str]],
        utterance: str,
        arg_name: str,
        arg_type: str,
    ) -> np.ndarray:
        store, cfg = self.store, self.cfg
        ctx = self._context_ids(context)[None, :]
        utt = self._utterance_ids(utterance)[None, :]
        _, ctx_final = L.bilstm(store, "ctx_lstm", self._embed_tokens(ctx), np.array([ctx.shape[1]]), cfg.hidden_size)
        _, utt_final = L.bilstm(store, "utt_lstm", self._embed_tokens(utt), np.array([utt.shape[1]]), cfg.hidden_size)
        name_emb = T.gather_rows(store["embed.arg_name"], np.asarray([self.args.name_id(arg_name)]))
        type_emb = T.gather_rows(store["embed.arg_type"], np.asarray([self.args.type_id(arg_type)]))
        q = T.concat([ctx_final, utt_final, name_emb, type_emb], axis=1)
        return q.data[0].copy()

    def encode_entities_for(self, example: GroundingExample) -> np.ndarray:
        """Per-candidate encodings (C, entity_dim) for inspection in tests."""
        enc = self.encode_example(example)
        scores, mask, _, _ = self.forward_batch([enc])
        # recompute entity block exactly as forward_batch does, via a probe:
        return _entity_probe(self, enc)


def _entity_probe(model: GroundingModel, enc: EncodedExample) -> np.ndarray:
    """Entity encodings for a single encoded example (no scoring)."""
    cfg, store = model.cfg, model.store
    h = cfg.hidden_size
    b, c = 1, enc.n_candidates
    ctx_ids, ctx_lens = GroundingModel._pad_ids([enc.ctx_ids], model.vocab.pad_id)
    utt_ids, utt_lens = GroundingModel._pad_ids([enc.utt_ids], model.vocab.pad_id)
    _, ctx_final = L.bilstm(store, "ctx_lstm", model._embed_tokens(ctx_ids), ctx_lens, h)
    _, utt_final = L.bilstm(store, "utt_lstm", model._embed_tokens(utt_ids), utt_lens, h)
    name_emb = T.gather_rows(store["embed.arg_name"], np.asarray([enc.arg_name_id]))
    type_emb = T.gather_rows(store["embed.arg_type"], np.asarray([enc.arg_type_id]))
    q = T.concat([ctx_final, utt_final, name_emb, type_emb], axis=1)

    if cfg.use_metadata:
        meta_ids, meta_lens = GroundingModel._pad_ids(enc.cand_meta_ids, model.vocab.pad_id)
        meta_emb = model._embed_tokens(meta_ids)
        meta_states, _ = L.bilstm(store, "meta_lstm", meta_emb, meta_lens, h)
        token_mask = np.arange(meta_ids.shape[1])[None, :] < meta_lens[:, None]
        if cfg.use_query_attention:
            q_rep = T.gather_rows(q, np.zeros(c, dtype=np.int64))
            meta_vec = L.attend(store, "qattn", q_rep, meta_states, meta_states, token_mask)
        else:
            maskf = Tensor(token_mask.astype(np.float64)[:, :, None])
            summed = T.reduce_sum(T.mul(meta_states, maskf), axis=1)
            meta_vec = T.mul(summed, Tensor(1.0 / meta_lens.astype(np.float64)[:, None]))
    else:
        meta_vec = Tensor(np.zeros((c, 2 * h)))
    const = enc.cand_const.copy()
    if not cfg.use_visual:
        const[:, : cfg.visual_dim] = 0.0
    hl_emb = T.gather_rows(store["embed.highlight"], enc.cand_highlight)
    entity = T.concat([meta_vec, Tensor(const), hl_emb, Tensor(enc.cand_mem)], axis=1)
    entity = T.reshape(entity, (1, c, cfg.entity_dim))
    if cfg.use_self_attention:
        entity = L.self_attend(store, "selfattn", entity, np.ones((1, c), bool), attn_dim=cfg.attn_dim)
    return entity.data[0].copy()
