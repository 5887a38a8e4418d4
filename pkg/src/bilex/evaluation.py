"""Word-translation accuracy against gold dictionaries.

A gold source word may list several valid targets; retrieval at rank k is
a hit if any of them appears in the top k.  Source words that fall outside
the loaded vocabulary (or whose targets all do) are excluded from the
denominator and reported separately, since vocabulary caps vary between
runs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .dictionaries import Dictionary
from .embeddings import EmbeddingMatrix
from .errors import EmptyDictionaryError
from .retrieval import CslsIndex, CslsParams
from .training import ModelState

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 5, 10)


@dataclass
class EvalReport:
    """Precision@k percentages plus denominator accounting."""

    p_at: dict[int, float]
    n_evaluated: int
    n_skipped_oov: int
    retrieval_mode: str

    def __post_init__(self):
        ks = sorted(self.p_at)
        for lo, hi in zip(ks, ks[1:]):
            if self.p_at[lo] > self.p_at[hi] + 1e-9:
                raise ValueError(f"p@{lo} > p@{hi} violates monotonicity")

    def to_json(self) -> str:
        return json.dumps({
            "p1": self.p_at.get(1),
            "p5": self.p_at.get(5),
            "p10": self.p_at.get(10),
            "n": self.n_evaluated,
            "oov": self.n_skipped_oov,
            "mode": self.retrieval_mode,
        }, sort_keys=True)

    def table(self) -> str:
        lines = [f"P@{k:<3d} {v:6.2f}%" for k, v in sorted(self.p_at.items())]
        lines.append(f"evaluated {self.n_evaluated}, skipped (OOV) "
                     f"{self.n_skipped_oov}, mode {self.retrieval_mode}")
        return "\n".join(lines)


def load_gold(path, src_vocab: EmbeddingMatrix,
              tgt_vocab: EmbeddingMatrix) -> tuple[Dictionary, int]:
    """Read a gold dictionary file, resolving words against the vocabs.

    Lines are ``src_word<whitespace>tgt_word``; duplicates are dropped.
    Returns (dictionary, n_skipped) where n_skipped counts distinct gold
    source words with no usable in-vocabulary entry.
    """
    pairs: list[tuple[int, int]] = []
    seen_pairs: set[tuple[int, int]] = set()
    sources_ok: set[str] = set()
    sources_all: set[str] = set()
    with open(path, encoding="utf-8", errors="surrogateescape") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            src_word, tgt_word = parts
            sources_all.add(src_word)
            if src_word not in src_vocab or tgt_word not in tgt_vocab:
                continue
            pair = (src_vocab.index(src_word), tgt_vocab.index(tgt_word))
            if pair in seen_pairs:
                continue
            seen_pairs.add(pair)
            pairs.append(pair)
            sources_ok.add(src_word)
    if not pairs:
        raise EmptyDictionaryError(f"{path}: no usable gold pairs "
                                   f"({len(sources_all)} source words read)")
    n_skipped = len(sources_all) - len(sources_ok)
    if n_skipped:
        logger.info("%s: %d gold source words skipped as out-of-vocabulary",
                    path, n_skipped)
    return Dictionary(pairs, src_vocab.lang_tag, tgt_vocab.lang_tag), n_skipped


def _mapped_source_codes(state: ModelState, src_emb: EmbeddingMatrix) -> np.ndarray:
    return state.ae_src.encode(src_emb.vectors) @ state.to_tgt.weight.T


def build_index(state: ModelState, src_emb: EmbeddingMatrix,
                tgt_emb: EmbeddingMatrix, mode: str = "csls",
                params: CslsParams | None = None) -> CslsIndex:
    """Retrieval index from mapped source codes to target codes."""
    mapped = _mapped_source_codes(state, src_emb)
    tgt_codes = state.ae_tgt.encode(tgt_emb.vectors)
    return CslsIndex(mapped, tgt_codes, params, mode=mode)


def precision_at_k(state: ModelState, src_emb: EmbeddingMatrix,
                   tgt_emb: EmbeddingMatrix, gold: Dictionary,
                   ks=DEFAULT_KS, mode: str = "csls",
                   params: CslsParams | None = None,
                   n_skipped_oov: int = 0) -> EvalReport:
    """Precision@k of the trained mapping over an in-vocabulary gold set."""
    if len(gold) == 0:
        raise EmptyDictionaryError("empty gold dictionary")
    ks = sorted(set(int(k) for k in ks))
    index = build_index(state, src_emb, tgt_emb, mode, params)
    grouped = gold.targets_of()
    queries = gold.source_indices()
    top_idx, _ = index.topk(np.array(queries), max(ks))
    hits = {k: 0 for k in ks}
    for row, src in enumerate(queries):
        valid = set(grouped[src])
        ranks = top_idx[row]
        for k in ks:
            if valid.intersection(ranks[:k]):
                hits[k] += 1
    n = len(queries)
    p_at = {k: 100.0 * hits[k] / n for k in ks}
    return EvalReport(p_at, n, n_skipped_oov, mode)


def translate(state: ModelState, src_emb: EmbeddingMatrix,
              tgt_emb: EmbeddingMatrix, word: str, topk: int = 10,
              mode: str = "csls", params: CslsParams | None = None):
    """Ranked (target_word, score) list for one source word."""
    if word not in src_emb:
        raise KeyError(f"{word!r} not in source vocabulary")
    index = build_index(state, src_emb, tgt_emb, mode, params)
    idx, scores = index.topk(np.array([src_emb.index(word)]), topk)
    return [(tgt_emb.words[j], float(s)) for j, s in zip(idx[0], scores[0])]
