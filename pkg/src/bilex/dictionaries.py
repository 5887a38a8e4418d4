"""Word-translation dictionaries: ordered index-pair lists plus file I/O.

The on-disk format is one pair per line, ``src_word<TAB>tgt_word``, UTF-8.
Gold files from public benchmarks sometimes use spaces instead of tabs, so
the reader accepts any whitespace split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .embeddings import EmbeddingMatrix


@dataclass
class Dictionary:
    """Ordered (source_index, target_index) pairs, gold or induced."""

    pairs: list[tuple[int, int]]
    source_tag: str = ""
    target_tag: str = ""

    def __post_init__(self):
        self.pairs = [(int(s), int(t)) for s, t in self.pairs]
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("duplicate (src, tgt) pair in dictionary")

    def __len__(self) -> int:
        return len(self.pairs)

    def source_indices(self) -> list[int]:
        """Distinct source indices in first-seen order."""
        seen: dict[int, None] = {}
        for s, _ in self.pairs:
            seen.setdefault(s)
        return list(seen)

    def targets_of(self) -> dict[int, list[int]]:
        """Map each source index to its list of valid target indices."""
        grouped: dict[int, list[int]] = {}
        for s, t in self.pairs:
            grouped.setdefault(s, []).append(t)
        return grouped


def write_dictionary(path, dictionary: Dictionary,
                     src_emb: EmbeddingMatrix, tgt_emb: EmbeddingMatrix) -> None:
    """Write pairs as ``src_word<TAB>tgt_word`` lines, resolving via vocabs."""
    with open(path, "w", encoding="utf-8") as fh:
        for s, t in dictionary.pairs:
            fh.write(f"{src_emb.words[s]}\t{tgt_emb.words[t]}\n")
