"""Monolingual embedding sets: loading, writing, normalization, synthesis.

File format is the fastText text format: a header line ``<count> <dim>``
followed by one ``token v1 ... vd`` line per word, UTF-8, space separated.
Real .vec files contain stray lines (wrong field counts, duplicated tokens,
non-finite values); those are skipped with counted warnings rather than
aborting the load.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmbeddingFormatError

logger = logging.getLogger(__name__)

DEFAULT_MAX_VOCAB = 200_000

NORMALIZE_MODES = ("none", "unit", "center_unit")


@dataclass
class EmbeddingMatrix:
    """A vocabulary plus its n x d matrix of word vectors.

    Rows are ordered by file position, which for fastText .vec files means
    descending corpus frequency.  Instances are immutable after construction
    and safe to share across threads; the vector buffer is marked read-only.
    """

    words: tuple[str, ...]
    vectors: np.ndarray
    lang_tag: str = ""
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.words = tuple(self.words)
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2:
            raise ValueError("vectors must be a 2-d matrix")
        if len(self.words) != vecs.shape[0]:
            raise ValueError(
                f"{len(self.words)} words but {vecs.shape[0]} vector rows")
        if len(set(self.words)) != len(self.words):
            raise ValueError("duplicate tokens in vocabulary")
        if not np.isfinite(vecs).all():
            raise ValueError("non-finite entries in vectors")
        vecs = vecs.copy() if vecs.flags.writeable else vecs
        vecs.flags.writeable = False
        self.vectors = vecs
        self._index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index(self, word: str) -> int:
        """Row index of a token; KeyError if absent."""
        return self._index[word]

    def __contains__(self, word: str) -> bool:
        return word in self._index


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic rotated-pair benchmark generator."""

    n: int
    d: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def load_embeddings(path, max_vocab: int = DEFAULT_MAX_VOCAB,
                    lang_tag: str = "") -> EmbeddingMatrix:
    """Load up to max_vocab rows of a fastText text-format embedding file.

    Keeps file order.  Duplicate tokens keep the first occurrence; lines
    with a wrong field count, non-finite values, or an all-zero vector are
    skipped.  Each skip category is counted and logged once at the end.
    """
    if max_vocab < 1:
        raise ValueError("max_vocab must be positive")
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    skipped = {"fields": 0, "duplicate": 0, "nonfinite": 0, "zero": 0}

    with open(path, encoding="utf-8", errors="surrogateescape") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(
                f"{path}: header must be '<count> <dim>', got {header!r}")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise EmbeddingFormatError(
                f"{path}: non-integer header fields {header!r}") from exc
        if count < 0 or dim < 1:
            raise EmbeddingFormatError(f"{path}: bad header values {header!r}")

        limit = min(count, max_vocab)
        for line in fh:
            if len(words) >= limit:
                break
            parts = line.rstrip("\n").split(" ")
            # Trailing space before the newline is common in .vec exports.
            if parts and parts[-1] == "":
                parts.pop()
            if len(parts) != dim + 1:
                skipped["fields"] += 1
                continue
            token = parts[0]
            if token in seen:
                skipped["duplicate"] += 1
                continue
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                skipped["fields"] += 1
                continue
            if not np.isfinite(vec).all():
                skipped["nonfinite"] += 1
                continue
            if not vec.any():
                skipped["zero"] += 1
                continue
            seen.add(token)
            words.append(token)
            rows.append(vec)

    if not words:
        raise EmbeddingFormatError(f"{path}: no usable embedding rows")
    for kind, n in skipped.items():
        if n:
            logger.warning("%s: skipped %d line(s): %s", path, n, kind)
    return EmbeddingMatrix(tuple(words), np.vstack(rows), lang_tag)


def write_embeddings(path, emb: EmbeddingMatrix) -> None:
    """Write in fastText text format, floats with 6 significant digits."""
    with open(path, "w", encoding="utf-8", errors="surrogateescape") as fh:
        fh.write(f"{len(emb)} {emb.dim}\n")
        for word, vec in zip(emb.words, emb.vectors):
            fh.write(word + " " + " ".join(f"{v:.6g}" for v in vec) + "\n")


def normalize(emb: EmbeddingMatrix, mode: str = "unit") -> EmbeddingMatrix:
    """Return a normalized copy: 'none', 'unit', or 'center_unit'.

    'unit' divides each row by its L2 norm; 'center_unit' subtracts the
    column mean first.  Zero-norm rows under the unit modes are an error.
    """
    if mode not in NORMALIZE_MODES:
        raise ValueError(f"unknown normalize mode {mode!r}")
    if mode == "none":
        return emb
    vecs = np.array(emb.vectors)
    if mode == "center_unit":
        vecs -= vecs.mean(axis=0)
    norms = np.linalg.norm(vecs, axis=1)
    if (norms < 1e-12).any():
        bad = int(np.argmin(norms))
        raise ValueError(
            f"zero-norm row {bad} ({emb.words[bad]!r}) under mode={mode}")
    return EmbeddingMatrix(emb.words, vecs / norms[:, None], emb.lang_tag)


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-normalize a plain matrix, mapping zero rows to zero."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.maximum(norms, 1e-12)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x d orthogonal matrix: QR of a Gaussian, sign-fixed diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _embedding_like_gaussian(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. from a Gaussian shaped like real embedding clouds.

    Word-vector point clouds are far from isotropic: their spectra decay
    roughly like a power law and the cloud sits in a cone around a common
    mean direction.  Both properties are what distribution-matching methods
    actually latch onto, so the synthetic benchmark reproduces them: a
    power-law covariance spectrum in a random basis plus a nonzero mean.
    An isotropic choice here would make the generator unidentifiable (every
    orthogonal map matches an isotropic distribution).
    """
    spectrum = np.arange(1, d + 1, dtype=np.float64) ** -1.0
    spectrum *= d / spectrum.sum()
    basis = random_orthogonal(d, rng)
    mean = basis[:, 0] * np.sqrt(spectrum[0])
    rows = rng.standard_normal((n, d)) * np.sqrt(spectrum)
    return rows @ basis.T + mean


def synth_pair(spec: SynthSpec):
    """Generate a (source, target, gold) triple with known alignment.

    Source rows are i.i.d. Gaussian (anisotropic, embedding-like; see
    _embedding_like_gaussian), unit-normalized.  Target row i is the source
    row rotated by a random orthogonal matrix, perturbed by Gaussian noise
    of scale noise_sigma, and re-normalized.  Rows are aligned, so the gold
    dictionary is {(i, i)}; target token names carry a permuted index so
    nothing can be recovered from the word strings themselves.

    Returns (source, target, gold, rotation) where gold is a Dictionary
    and rotation the d x d matrix used.
    """
    from .dictionaries import Dictionary

    rng = np.random.default_rng(spec.seed)
    src = unit_rows(_embedding_like_gaussian(spec.n, spec.d, rng))
    rotation = random_orthogonal(spec.d, rng)
    tgt = src @ rotation
    if spec.noise_sigma > 0:
        tgt = tgt + spec.noise_sigma * rng.standard_normal(tgt.shape)
    tgt = unit_rows(tgt)

    width = len(str(spec.n - 1))
    src_words = tuple(f"src{i:0{width}d}" for i in range(spec.n))
    perm = rng.permutation(spec.n)
    tgt_words = tuple(f"tgt{perm[i]:0{width}d}" for i in range(spec.n))

    source = EmbeddingMatrix(src_words, src, "xx")
    target = EmbeddingMatrix(tgt_words, tgt, "yy")
    gold = Dictionary([(i, i) for i in range(spec.n)], "xx", "yy")
    return source, target, gold, rotation
