"""Synset lexicon: words with ranked senses and typed relations.

File format, one record per line, tab separated:

* ``S\\t<synset_id>\\t<lemma>(,<lemma>)*`` declares a synset.
* ``W\\t<word>\\t<synset_id>\\t<rank>`` maps a word sense; rank 1 is the
  most frequent sense and ranks for one word must form 1..q.
* ``R\\t<tag>\\t<from>\\t<to>`` declares a directed relation. Tags:
  ``hyper`` (to is a generalization of from), ``hypo``, ``mero``
  (to is a part of from), ``holo``.

Records may appear in any order; referential checks run after the whole
file is parsed. Loading closes the relation set under inverses, so a
hypernym edge always has the mirror hyponym edge and meronym likewise
mirrors holonym.
"""

from __future__ import annotations

import enum

from .errors import FormatError


class RelationType(enum.Enum):
    HYPERNYM = "hypernym"
    HYPONYM = "hyponym"
    MERONYM = "meronym"
    HOLONYM = "holonym"


INVERSE = {
    RelationType.HYPERNYM: RelationType.HYPONYM,
    RelationType.HYPONYM: RelationType.HYPERNYM,
    RelationType.MERONYM: RelationType.HOLONYM,
    RelationType.HOLONYM: RelationType.MERONYM,
}

ALL_RELATIONS = frozenset(RelationType)

_TAGS = {
    "hyper": RelationType.HYPERNYM,
    "hypo": RelationType.HYPONYM,
    "mero": RelationType.MERONYM,
    "holo": RelationType.HOLONYM,
}

_RELATION_ORDER = {rel: i for i, rel in enumerate(RelationType)}


class Lexicon:
    """Read-only word/synset graph."""

    def __init__(self, lemmas: dict[str, list[str]], senses: dict[str, list[str]],
                 out_edges: dict[str, tuple[tuple[str, RelationType], ...]]):
        self._lemmas = lemmas
        self._senses = senses
        self._out = out_edges

    def __contains__(self, synset_id: str) -> bool:
        return synset_id in self._lemmas

    def synset_ids(self) -> list[str]:
        return list(self._lemmas)

    def lemmas(self, synset_id: str) -> list[str]:
        if synset_id not in self._lemmas:
            raise ValueError(f"undeclared synset {synset_id!r}")
        return list(self._lemmas[synset_id])

    def words(self) -> list[str]:
        return list(self._senses)

    def senses(self, word: str, s: int) -> list[str]:
        """The word's synsets by descending sense frequency, at most s of them.

        Unknown words yield an empty list; raising here would make every
        out-of-vocabulary keyword fatal.
        """
        if s < 1:
            raise ValueError(f"s must be at least 1, got {s}")
        return list(self._senses.get(word.lower(), ())[:s])

    def related(self, synset_id: str, types) -> list[tuple[str, RelationType]]:
        """Outgoing (target, relation) pairs of the given relation types.

        Ordered by (relation type, target id) so traversals are
        deterministic.
        """
        if synset_id not in self._lemmas:
            raise ValueError(f"undeclared synset {synset_id!r}")
        wanted = frozenset(types)
        return [(target, rel) for target, rel in self._out.get(synset_id, ()) if rel in wanted]


def _check_synset_token(token: str, path: str, lineno: int) -> str:
    if not token:
        raise FormatError("empty synset id", path=path, line=lineno)
    if any(c.isspace() for c in token) or "," in token:
        raise FormatError(f"synset id {token!r} contains whitespace or a comma", path=path, line=lineno)
    return token


def load_lexicon(path: str) -> Lexicon:
    lemmas: dict[str, list[str]] = {}
    sense_records: list[tuple[str, int, str, int]] = []  # word, rank, synset, line
    relation_records: list[tuple[str, RelationType, str, int]] = []  # from, type, to, line

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            kind = parts[0]
            if kind == "S":
                if len(parts) != 3:
                    raise FormatError("S record needs '<id>\\t<lemma,lemma,...>'", path=path, line=lineno)
                synset_id = _check_synset_token(parts[1], path, lineno)
                if synset_id in lemmas:
                    raise FormatError(f"duplicate synset {synset_id!r}", path=path, line=lineno)
                lemma_list = []
                for lemma in parts[2].split(","):
                    lemma = lemma.strip().lower()
                    if not lemma:
                        raise FormatError("empty lemma", path=path, line=lineno)
                    lemma_list.append(lemma)
                lemmas[synset_id] = list(dict.fromkeys(lemma_list))
            elif kind == "W":
                if len(parts) != 4:
                    raise FormatError("W record needs '<word>\\t<synset>\\t<rank>'", path=path, line=lineno)
                word = parts[1].strip().lower()
                if not word:
                    raise FormatError("empty word", path=path, line=lineno)
                synset_id = _check_synset_token(parts[2], path, lineno)
                try:
                    rank = int(parts[3])
                except ValueError:
                    raise FormatError(f"sense rank {parts[3]!r} is not an integer", path=path, line=lineno) from None
                if rank < 1:
                    raise FormatError(f"sense rank must be >= 1, got {rank}", path=path, line=lineno)
                sense_records.append((word, rank, synset_id, lineno))
            elif kind == "R":
                if len(parts) != 4:
                    raise FormatError("R record needs '<tag>\\t<from>\\t<to>'", path=path, line=lineno)
                tag = parts[1].strip()
                if tag not in _TAGS:
                    raise FormatError(f"unknown relation tag {tag!r} (expected one of {sorted(_TAGS)})",
                                      path=path, line=lineno)
                src = _check_synset_token(parts[2], path, lineno)
                dst = _check_synset_token(parts[3], path, lineno)
                relation_records.append((src, _TAGS[tag], dst, lineno))
            else:
                raise FormatError(f"unknown record type {kind!r} (expected S, W, or R)", path=path, line=lineno)

    # Referential validation now that every declaration is in.
    by_word: dict[str, dict[int, str]] = {}
    for word, rank, synset_id, lineno in sense_records:
        if synset_id not in lemmas:
            raise FormatError(f"word {word!r} references undeclared synset {synset_id!r}", path=path, line=lineno)
        ranks = by_word.setdefault(word, {})
        if rank in ranks:
            raise FormatError(f"duplicate sense rank {rank} for word {word!r}", path=path, line=lineno)
        ranks[rank] = synset_id
    senses: dict[str, list[str]] = {}
    for word, ranks in by_word.items():
        expected = list(range(1, len(ranks) + 1))
        if sorted(ranks) != expected:
            raise FormatError(
                f"sense ranks for word {word!r} must form 1..{len(ranks)}, got {sorted(ranks)}", path=path
            )
        senses[word] = [ranks[r] for r in expected]

    edge_set: set[tuple[str, RelationType, str]] = set()
    for src, rel, dst, lineno in relation_records:
        if src not in lemmas:
            raise FormatError(f"relation references undeclared synset {src!r}", path=path, line=lineno)
        if dst not in lemmas:
            raise FormatError(f"relation references undeclared synset {dst!r}", path=path, line=lineno)
        edge_set.add((src, rel, dst))
        edge_set.add((dst, INVERSE[rel], src))

    out_edges: dict[str, list[tuple[str, RelationType]]] = {}
    for src, rel, dst in edge_set:
        out_edges.setdefault(src, []).append((dst, rel))
    frozen = {
        src: tuple(sorted(pairs, key=lambda p: (_RELATION_ORDER[p[1]], p[0])))
        for src, pairs in out_edges.items()
    }
    return Lexicon(lemmas, senses, frozen)
