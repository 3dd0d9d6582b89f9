"""Keyword analysis over the synset graph.

Pipeline stages, each a pure function:

1. ``word_frequencies``: neighbor keywords -> normalized word weights.
2. ``initial_synsets``: word weights -> candidate synsets. A word with
   q usable senses splits its weight harmonically, sense rank r taking
   share (1/r) / (1 + 1/2 + ... + 1/q).
3. ``top_n``: keep the n strongest candidates (weights not rescaled).
4. ``build_graph``: candidates plus, at expansion depth 1, every synset
   one enabled relation away; edges are all enabled-type lexicon edges
   between graph nodes.
5. ``propagate``: a restart walk to the fixed point
   ``p = alpha * restart + (1 - alpha) * (T' p + dangling * restart)``
   where T splits each node's outgoing mass by relation weight and
   dangling nodes return their mass through the restart vector, so the
   distribution keeps total mass 1 every iteration.
6. ``rank_synsets``: scored nodes ordered by (score desc, id asc).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lexicon import ALL_RELATIONS, Lexicon, RelationType

WEIGHTING_UNIFORM = "uniform"
WEIGHTING_RECIPROCAL = "reciprocal-rank"


def _default_lambdas() -> dict[RelationType, float]:
    return {rel: 1.0 for rel in RelationType}


@dataclass(frozen=True)
class AnalysisConfig:
    """Parameters for the keyword-analysis stages."""

    s: int = 7
    n: int = 100
    neighbor_weighting: str = WEIGHTING_UNIFORM
    relation_set: frozenset[RelationType] = ALL_RELATIONS
    lambdas: dict[RelationType, float] = field(default_factory=_default_lambdas)
    alpha: float = 0.5
    expansion_depth: int = 1
    max_iters: int = 100
    tol: float = 1e-9

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"s must be at least 1, got {self.s}")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.neighbor_weighting not in (WEIGHTING_UNIFORM, WEIGHTING_RECIPROCAL):
            raise ValueError(f"unknown neighbor weighting {self.neighbor_weighting!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.expansion_depth not in (0, 1):
            raise ValueError(f"expansion_depth must be 0 or 1, got {self.expansion_depth}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        bad = set(self.relation_set) - set(RelationType)
        if bad:
            raise ValueError(f"unknown relation types {bad}")
        for rel in RelationType:
            if self.lambdas.get(rel, 0.0) < 0:
                raise ValueError(f"lambda for {rel.value} must be >= 0")


@dataclass(frozen=True)
class CandidateSynset:
    synset: str
    p0: float
    score: float = 0.0


@dataclass(frozen=True)
class SynsetGraph:
    nodes: tuple[CandidateSynset, ...]
    edges: tuple[tuple[str, RelationType, str], ...]


@dataclass(frozen=True)
class PropagationResult:
    graph: SynsetGraph
    iterations: int
    converged: bool
    max_mass_error: float


def word_frequencies(neighbor_words: list[tuple[str, list[str]]],
                     weighting: str = WEIGHTING_UNIFORM) -> list[tuple[str, float]]:
    """Aggregate neighbor keywords into normalized word weights.

    ``neighbor_words`` must be in ascending-distance order; with
    reciprocal-rank weighting the i-th neighbor (1-based) contributes
    1/i per distinct word, with uniform weighting 1 per distinct word.
    Output sums to 1 and is ordered by (weight desc, word asc).
    """
    if weighting not in (WEIGHTING_UNIFORM, WEIGHTING_RECIPROCAL):
        raise ValueError(f"unknown neighbor weighting {weighting!r}")
    raw: dict[str, float] = {}
    for rank, (_, words) in enumerate(neighbor_words, 1):
        contribution = 1.0 if weighting == WEIGHTING_UNIFORM else 1.0 / rank
        for word in dict.fromkeys(words):
            raw[word] = raw.get(word, 0.0) + contribution
    total = sum(raw.values())
    if total == 0.0:
        return []
    return sorted(((w, v / total) for w, v in raw.items()), key=lambda e: (-e[1], e[0]))


def initial_synsets(word_weights: list[tuple[str, float]], lexicon: Lexicon, s: int) -> list[CandidateSynset]:
    """Map word weights to candidate synsets via harmonic sense splitting.

    Words absent from the lexicon contribute nothing; the surviving
    synset weights are renormalized to sum 1. Ordered (p0 desc, id asc).
    """
    raw: dict[str, float] = {}
    for word, weight in word_weights:
        synsets = lexicon.senses(word, s)
        q = len(synsets)
        if q == 0:
            continue
        denom = sum(1.0 / r for r in range(1, q + 1))
        for r, synset_id in enumerate(synsets, 1):
            raw[synset_id] = raw.get(synset_id, 0.0) + weight * (1.0 / r) / denom
    total = sum(raw.values())
    if total == 0.0:
        return []
    ordered = sorted(((sid, w / total) for sid, w in raw.items()), key=lambda e: (-e[1], e[0]))
    return [CandidateSynset(sid, p0) for sid, p0 in ordered]


def top_n(candidates: list[CandidateSynset], n: int) -> list[CandidateSynset]:
    """The n strongest candidates by (p0 desc, id asc); weights kept as-is."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    ordered = sorted(candidates, key=lambda c: (-c.p0, c.synset))
    return ordered[:n]


def build_graph(candidates: list[CandidateSynset], lexicon: Lexicon, config: AnalysisConfig) -> SynsetGraph:
    """Assemble the propagation graph around the candidate synsets.

    At expansion depth 1 every synset reachable over one enabled
    relation joins with initial weight 0; depth 0 keeps candidates only.
    The restart distribution is the candidates' p0 renormalized over the
    final node set.
    """
    node_ids: list[str] = []
    p0: dict[str, float] = {}
    for cand in candidates:
        if cand.synset in p0:
            raise ValueError(f"duplicate candidate synset {cand.synset!r}")
        node_ids.append(cand.synset)
        p0[cand.synset] = cand.p0

    if config.expansion_depth == 1:
        added: list[str] = []
        for cand in candidates:
            for target, _rel in lexicon.related(cand.synset, config.relation_set):
                if target not in p0 and target not in added:
                    added.append(target)
                    p0[target] = 0.0
        node_ids.extend(sorted(added))

    node_set = set(node_ids)
    edges: list[tuple[str, RelationType, str]] = []
    for node in node_ids:
        for target, rel in lexicon.related(node, config.relation_set):
            if target in node_set:
                edges.append((node, rel, target))

    total = sum(p0.values())
    if node_ids and total <= 0.0:
        raise ValueError("candidate weights sum to zero; nothing to propagate from")
    nodes = tuple(CandidateSynset(sid, p0[sid] / total) for sid in node_ids)
    return SynsetGraph(nodes=nodes, edges=tuple(edges))


def propagate(graph: SynsetGraph, config: AnalysisConfig) -> PropagationResult:
    """Iterate the restart walk to its fixed point.

    Stops when the L1 change between successive distributions drops
    below ``config.tol`` or after ``config.max_iters`` updates. The
    returned graph carries final scores; diagnostics report iteration
    count, convergence, and the worst deviation of total mass from 1
    seen at any iteration.
    """
    n = len(graph.nodes)
    if n == 0:
        return PropagationResult(graph, 0, True, 0.0)
    index = {node.synset: i for i, node in enumerate(graph.nodes)}
    restart = np.array([node.p0 for node in graph.nodes], dtype=np.float64)

    out_weight = np.zeros(n, dtype=np.float64)
    for src, rel, _dst in graph.edges:
        out_weight[index[src]] += config.lambdas.get(rel, 0.0)

    src_idx: list[int] = []
    dst_idx: list[int] = []
    weights: list[float] = []
    for src, rel, dst in graph.edges:
        lam = config.lambdas.get(rel, 0.0)
        si = index[src]
        if lam > 0.0 and out_weight[si] > 0.0:
            src_idx.append(si)
            dst_idx.append(index[dst])
            weights.append(lam / out_weight[si])
    src_arr = np.array(src_idx, dtype=np.intp)
    dst_arr = np.array(dst_idx, dtype=np.intp)
    w_arr = np.array(weights, dtype=np.float64)
    dangling = out_weight == 0.0

    alpha = config.alpha
    p = restart.copy()
    iterations = 0
    converged = False
    max_mass_error = abs(float(p.sum()) - 1.0)
    for _ in range(config.max_iters):
        flow = np.zeros(n, dtype=np.float64)
        if src_arr.size:
            np.add.at(flow, dst_arr, w_arr * p[src_arr])
        dangling_mass = float(p[dangling].sum())
        new_p = alpha * restart + (1.0 - alpha) * (flow + dangling_mass * restart)
        iterations += 1
        max_mass_error = max(max_mass_error, abs(float(new_p.sum()) - 1.0))
        change = float(np.abs(new_p - p).sum())
        p = new_p
        if change < config.tol:
            converged = True
            break

    scored = tuple(
        CandidateSynset(node.synset, node.p0, float(p[i]))
        for i, node in enumerate(graph.nodes)
    )
    return PropagationResult(
        SynsetGraph(nodes=scored, edges=graph.edges),
        iterations, converged, max_mass_error,
    )


def rank_synsets(graph: SynsetGraph) -> list[tuple[str, float]]:
    """(synset, score) pairs ordered by (score desc, id asc)."""
    return sorted(((node.synset, node.score) for node in graph.nodes),
                  key=lambda e: (-e[1], e[0]))
