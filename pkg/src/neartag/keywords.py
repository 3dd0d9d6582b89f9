"""Image-id to keyword mapping loaded from tab-separated text.

One line per image: ``<image_id>\\t<word>(,<word>)*``. Lines that are
blank or start with ``#`` are ignored. Words are lowercased and
deduplicated per image, keeping first-occurrence order.
"""

from __future__ import annotations

from .errors import FormatError


class KeywordStore:
    """Read-only id -> word-list mapping."""

    def __init__(self, records: dict[str, list[str]]):
        self._records = records

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._records

    def ids(self) -> list[str]:
        return list(self._records)

    def words_for(self, image_ids) -> tuple[list[tuple[str, list[str]]], int]:
        """Word lists for the requested ids, in request order.

        Unknown ids are dropped from the result and tallied in the
        returned missing count.
        """
        found: list[tuple[str, list[str]]] = []
        missing = 0
        for image_id in image_ids:
            words = self._records.get(image_id)
            if words is None:
                missing += 1
            else:
                found.append((image_id, list(words)))
        return found, missing


def load_keywords(path: str) -> KeywordStore:
    records: dict[str, list[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(
                    f"expected '<id>\\t<word,word,...>', got {len(parts)} tab-separated fields",
                    path=path, line=lineno,
                )
            image_id, word_field = parts
            if not image_id:
                raise FormatError("empty image id", path=path, line=lineno)
            if image_id in records:
                raise FormatError(f"duplicate image id {image_id!r}", path=path, line=lineno)
            words = []
            for word in word_field.split(","):
                word = word.strip().lower()
                if not word:
                    raise FormatError("empty keyword", path=path, line=lineno)
                words.append(word)
            records[image_id] = list(dict.fromkeys(words))
    return KeywordStore(records)
