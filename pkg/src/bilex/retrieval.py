"""Neighbor retrieval under hubness, dictionary induction, and the
orthogonal Procrustes refinement loop.

CSLS rescales plain cosine similarity by the mean similarity of each side
to its k nearest neighbors on the other side:

    csls(x, y) = 2 cos(x, y) - r_tgt(x) - r_src(y)

where r_tgt(x) is the mean cosine of query x to its k nearest target rows
and r_src(y) the mean cosine of target y to its k nearest query rows.
Subtracting the local neighborhood means demotes hub vectors that sit near
everything.  Both penalty vectors are precomputed once per index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._kernels import topk_mean
from .dictionaries import Dictionary
from .embeddings import unit_rows
from .nn import LinearMap

logger = logging.getLogger(__name__)

DEFAULT_CSLS_K = 10
DEFAULT_DICT_TOP_N = 15_000
_CHUNK = 1024  # score-matrix rows materialized at a time

RETRIEVAL_MODES = ("csls", "cosine")


@dataclass(frozen=True)
class CslsParams:
    """Neighborhood size for the CSLS mean-similarity penalties."""

    k_neighbors: int = DEFAULT_CSLS_K

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


def _neighborhood_means(queries: np.ndarray, pool: np.ndarray, k: int) -> np.ndarray:
    """Mean cosine of each (unit) query row to its k nearest (unit) pool rows."""
    out = np.empty(len(queries))
    for start in range(0, len(queries), _CHUNK):
        sims = queries[start:start + _CHUNK] @ pool.T
        out[start:start + _CHUNK] = topk_mean(sims, k)
    return out


class CslsIndex:
    """Precomputed scorer between a mapped-source set and a target set.

    mode="csls" applies the hubness penalties; mode="cosine" scores by the
    raw cosine.  Rows are unit-normalized once; score blocks for any subset
    of queries are produced without materializing the full n x m matrix.
    """

    def __init__(self, mapped_src: np.ndarray, tgt: np.ndarray,
                 params: CslsParams | None = None, mode: str = "csls"):
        if mode not in RETRIEVAL_MODES:
            raise ValueError(f"unknown retrieval mode {mode!r}")
        params = params or CslsParams()
        self.mode = mode
        self.src = unit_rows(np.asarray(mapped_src, dtype=np.float64))
        self.tgt = unit_rows(np.asarray(tgt, dtype=np.float64))
        self.k = params.k_neighbors
        if mode == "csls":
            if self.k > min(len(self.src), len(self.tgt)):
                raise ValueError(
                    f"k_neighbors={self.k} exceeds set sizes "
                    f"({len(self.src)}, {len(self.tgt)})")
            self.penalty_src = _neighborhood_means(self.src, self.tgt, self.k)
            self.penalty_tgt = _neighborhood_means(self.tgt, self.src, self.k)
        else:
            self.penalty_src = np.zeros(len(self.src))
            self.penalty_tgt = np.zeros(len(self.tgt))

    @property
    def n_queries(self) -> int:
        return len(self.src)

    @property
    def n_targets(self) -> int:
        return len(self.tgt)

    def scores(self, query_indices=None) -> np.ndarray:
        """Score block (rows = queries, columns = all targets)."""
        if query_indices is None:
            q, pen = self.src, self.penalty_src
        else:
            q = self.src[query_indices]
            pen = self.penalty_src[query_indices]
        cos = q @ self.tgt.T
        if self.mode == "cosine":
            return cos
        return 2.0 * cos - pen[:, None] - self.penalty_tgt[None, :]

    def nearest(self, query_indices=None) -> np.ndarray:
        """Argmax target per query; ties resolve to the lower index."""
        idx = (np.arange(self.n_queries) if query_indices is None
               else np.asarray(query_indices))
        out = np.empty(len(idx), dtype=np.int64)
        for start in range(0, len(idx), _CHUNK):
            block = self.scores(idx[start:start + _CHUNK])
            out[start:start + _CHUNK] = np.argmax(block, axis=1)
        return out

    def topk(self, query_indices, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(indices, scores) of the top k targets per query, descending.

        Ties break toward the lower target index (stable sort on negated
        scores), so rankings are deterministic.
        """
        k = min(k, self.n_targets)
        idx = np.asarray(query_indices)
        top_idx = np.empty((len(idx), k), dtype=np.int64)
        top_val = np.empty((len(idx), k))
        for start in range(0, len(idx), _CHUNK):
            block = self.scores(idx[start:start + _CHUNK])
            order = np.argsort(-block, axis=1, kind="stable")[:, :k]
            top_idx[start:start + _CHUNK] = order
            top_val[start:start + _CHUNK] = np.take_along_axis(block, order, axis=1)
        return top_idx, top_val


def csls_scores(mapped_src: np.ndarray, tgt: np.ndarray,
                params: CslsParams | None = None) -> CslsIndex:
    """Build the CSLS score accessor for a mapped-source / target pair."""
    return CslsIndex(mapped_src, tgt, params, mode="csls")


def build_dictionary(mapped_src: np.ndarray, tgt: np.ndarray,
                     params: CslsParams | None = None,
                     top_n: int | None = None) -> Dictionary:
    """Induce translation pairs that are mutual CSLS nearest neighbors.

    Only the first top_n source rows (the most frequent words) are
    considered, both as queries and as candidates for the reverse
    direction.  A pair (i, j) survives iff j is i's best target and i is
    j's best source.  The result can legitimately be empty.
    """
    mapped_src = np.asarray(mapped_src, dtype=np.float64)
    top_n = len(mapped_src) if top_n is None else top_n
    if not 1 <= top_n <= len(mapped_src):
        raise ValueError(f"top_n={top_n} out of range")
    index = CslsIndex(mapped_src[:top_n], tgt, params, mode="csls")

    forward = index.nearest()
    # Reverse argmax per target, scanning source chunks in ascending order
    # so score ties keep the lowest source index.
    best_val = np.full(index.n_targets, -np.inf)
    best_src = np.full(index.n_targets, -1, dtype=np.int64)
    for start in range(0, top_n, _CHUNK):
        block = index.scores(np.arange(start, min(start + _CHUNK, top_n)))
        chunk_best = np.argmax(block, axis=0)
        chunk_val = block[chunk_best, np.arange(index.n_targets)]
        improved = chunk_val > best_val
        best_val[improved] = chunk_val[improved]
        best_src[improved] = chunk_best[improved] + start

    pairs = [(i, int(j)) for i, j in enumerate(forward) if best_src[j] == i]
    if not pairs:
        logger.warning("mutual nearest-neighbor dictionary came out empty")
    return Dictionary(pairs)


def procrustes(src_codes_paired: np.ndarray,
               tgt_codes_paired: np.ndarray) -> LinearMap:
    """Orthogonal map W minimizing ||W src_i - tgt_i||^2 over the pairs.

    Closed form: SVD of tgt.T @ src = U S Vt gives W = U Vt.  The result
    is orthogonal to machine precision regardless of input conditioning.
    """
    src = np.asarray(src_codes_paired, dtype=np.float64)
    tgt = np.asarray(tgt_codes_paired, dtype=np.float64)
    if src.shape != tgt.shape or src.ndim != 2 or src.shape[0] < 1:
        raise ValueError(f"paired code shapes {src.shape} vs {tgt.shape}")
    m = tgt.T @ src
    if not m.any():
        raise ValueError("degenerate (rank-0) cross-covariance")
    u, _, vt = np.linalg.svd(m)
    return LinearMap(u @ vt)


def refine(state, src_emb, tgt_emb, iterations: int,
           params: CslsParams | None = None,
           top_n: int = DEFAULT_DICT_TOP_N):
    """Iterative Procrustes refinement of both mappers (encoders frozen).

    Each iteration induces a mutual-NN dictionary with CSLS from the
    current source-to-target mapping and replaces both mappers with the
    closed-form Procrustes solutions on the paired codes (source-to-target
    and its transposed counterpart).  An empty induced dictionary aborts
    refinement and returns the last valid state.

    Returns (refined_state, dictionary_sizes) on a copy of `state`.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    out = state.copy()
    codes_src = out.ae_src.encode(src_emb.vectors)
    codes_tgt = out.ae_tgt.encode(tgt_emb.vectors)
    top_n = min(top_n, len(codes_src))
    sizes: list[int] = []
    for it in range(iterations):
        mapped = codes_src @ out.mapper_g.weight.T
        induced = build_dictionary(mapped, codes_tgt, params, top_n)
        if len(induced) == 0:
            logger.warning("refinement stopped at iteration %d: empty "
                           "induced dictionary", it)
            break
        sizes.append(len(induced))
        src_idx = np.array([s for s, _ in induced.pairs])
        tgt_idx = np.array([t for _, t in induced.pairs])
        out.to_tgt = procrustes(codes_src[src_idx], codes_tgt[tgt_idx])
        out.to_src = procrustes(codes_tgt[tgt_idx], codes_src[src_idx])
        logger.info("refinement iteration %d: %d induced pairs", it + 1,
                    len(induced))
    return out, sizes
