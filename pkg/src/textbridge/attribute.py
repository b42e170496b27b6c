"""Attribute candidate generation, clustering, ranking, and critic filtering.

The pool moves through fixed stages: raw -> clustered -> ranked ->
filtered. Filtering applies three critics: O1 keeps candidates the source
text entails (NLI score >= gamma1), O2 keeps candidates format-distant
from the source (tree edit distance >= gamma2 and Rouge-L <= gamma3), and
O3 deduplicates mutually entailing candidates, keeping one representative
per connected component.

O3 inside filter_pool runs over the full ranked pool with a fixed dedup
threshold, independent of the gamma thresholds; this keeps the filtered
set antitone in gamma1/gamma2 and monotone in gamma3 by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import requests

from .augment import shallow_parse
from .core import NliSpec, PipelineConfig, TextSample, VideoFeatures, tokenize
from .errors import RemoteServiceError, RewriteError
from .metrics import parse_bracketed_tree, rouge_l, tree_edit_distance

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.1

# O3 duplicate threshold inside filter_pool; deliberately not a gamma so the
# filtered set stays monotone in each gamma
DEDUP_THRESHOLD = 0.5

POOL_STAGES = ("raw", "clustered", "ranked", "filtered")


@dataclass(frozen=True)
class AttributeCandidate:
    """One attribute phrase for a source text."""

    text: str
    source_id: str
    embedding: object
    entailment_from_source: Optional[float] = None
    cluster: Optional[int] = None
    video_sim: Optional[float] = None
    selected: bool = False

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("attribute text must be non-empty")
        if self.entailment_from_source is not None and not (
            0.0 <= self.entailment_from_source <= 1.0
        ):
            raise ValueError("entailment must lie in [0, 1]")


@dataclass(frozen=True)
class CriticVerdict:
    """Per-candidate record of what each critic decided."""

    text: str
    entailment: float
    tree_distance: int
    rouge: float
    o1: bool
    o2: bool
    o3: bool
    kept: bool


@dataclass(frozen=True)
class AttributePool:
    candidates: tuple
    stage: str
    verdicts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        if self.stage not in POOL_STAGES:
            raise ValueError("unknown pool stage %r" % self.stage)

    def __len__(self):
        return len(self.candidates)


class HeuristicNli:
    """Containment-weighted Jaccard over token sets; offline NLI stand-in.

    score = 0.5 * |P&H|/|H| + 0.5 * |P&H|/|P|H|. Always in [0, 1]; 1.0 for
    identical token sets. Labeled heuristic: not claimed NLI-equivalent.
    """

    def __init__(self):
        self._memo: dict = {}

    def score(self, premise: str, hypothesis: str) -> float:
        key = (premise, hypothesis)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        try:
            p = set(tokenize(premise))
            h = set(tokenize(hypothesis))
        except ValueError:
            self._memo[key] = 0.0
            return 0.0
        inter = len(p & h)
        if inter == 0:
            out = 0.0
        else:
            out = 0.5 * (inter / len(h)) + 0.5 * (inter / len(p | h))
        self._memo[key] = out
        return out


class RemoteNli:
    """Client for a `POST /nli` service with bounded retries."""

    def __init__(self, endpoint: str, timeout: float = 5.0, session=None):
        if not endpoint:
            raise ValueError("remote NLI needs an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self._memo: dict = {}

    def score(self, premise: str, hypothesis: str) -> float:
        key = (premise, hypothesis)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        last_error = None
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                resp = self._session.post(
                    self.endpoint + "/nli",
                    json={"premise": premise, "hypothesis": hypothesis},
                    timeout=self.timeout,
                )
                if resp.status_code != 200:
                    raise ValueError("HTTP %d from NLI service" % resp.status_code)
                value = resp.json().get("entailment")
                if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                    raise ValueError("NLI entailment must be a number in [0, 1]")
                self._memo[key] = float(value)
                return float(value)
            except Exception as exc:
                last_error = exc
                if attempt < RETRY_ATTEMPTS:
                    time.sleep(RETRY_BASE_DELAY * 2 ** (attempt - 1))
        raise RemoteServiceError(
            "nli request failed: %s" % last_error, attempts=RETRY_ATTEMPTS
        )


def build_nli(spec: NliSpec):
    """Instantiate the NLI critic; TOOL_OFFLINE=1 forces the heuristic."""
    from .embed import offline_forced

    if spec.kind == "heuristic" or offline_forced():
        return HeuristicNli()
    return RemoteNli(endpoint=spec.endpoint, timeout=spec.timeout)


def generate_attributes(rewriter, embedder, sample: TextSample, n: int) -> AttributePool:
    """Raw attribute pool for one sample: n short phrases, each embedded.

    Raises:
        ValueError: n < 1.
        RewriteError: no attribute could be generated.
    """
    if n < 1:
        raise ValueError("attribute count must be positive")
    candidates = rewriter.rewrite(sample.text, "attribute", "positive", n=n)
    texts = []
    for cand in candidates:
        if cand.text and cand.text not in texts:
            texts.append(cand.text)
    texts = texts[:n]
    if not texts:
        raise RewriteError("no attributes generated for %r" % sample.id)
    vectors = embedder.embed(texts)
    pool = tuple(
        AttributeCandidate(text=t, source_id=sample.id, embedding=v)
        for t, v in zip(texts, vectors)
    )
    return AttributePool(candidates=pool, stage="raw")


def _wcss(points: np.ndarray, assign, k: int) -> float:
    total = 0.0
    for c in range(k):
        members = points[[i for i, a in enumerate(assign) if a == c]]
        if len(members):
            center = members.mean(axis=0)
            total += float(((members - center) ** 2).sum())
    return total


def _kmeans(points: np.ndarray, k: int, seed: int) -> list:
    """Deterministic k-means: seeded farthest-point init, Lloyd iterations
    capped at 100, then a bounded single-move polish so the result is
    stable under moving any one point."""
    n = len(points)
    if k >= n:
        return list(range(n))
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    dist = ((points - points[first]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, ((points - points[nxt]) ** 2).sum(axis=1))
    centers = points[chosen].copy()
    assign = None
    for _ in range(100):
        sq = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(sq, axis=1)
        for c in range(k):
            if not np.any(new_assign == c):
                counts = np.bincount(new_assign, minlength=k)
                movable = np.array(
                    [counts[new_assign[i]] > 1 for i in range(n)], dtype=bool
                )
                own = sq[np.arange(n), new_assign]
                own = np.where(movable, own, -1.0)
                new_assign[int(np.argmax(own))] = c
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = points[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    labels = [int(a) for a in assign]
    for _ in range(100):
        best = _wcss(points, labels, k)
        moved = False
        for i in range(n):
            for c in range(k):
                if c == labels[i] or labels.count(labels[i]) == 1:
                    continue
                trial = list(labels)
                trial[i] = c
                if _wcss(points, trial, k) < best - 1e-12:
                    labels = trial
                    moved = True
                    break
            if moved:
                break
        if not moved:
            break
    return labels


def cluster_attributes(pool: AttributePool, n_c: int, seed: int) -> AttributePool:
    """Assign every candidate to one of min(n_c, |pool|) clusters."""
    if pool.stage != "raw":
        raise ValueError("cluster_attributes expects a raw pool")
    if not pool.candidates:
        raise ValueError("cannot cluster an empty pool")
    k = min(n_c, len(pool.candidates))
    points = np.stack([np.asarray(c.embedding) for c in pool.candidates])
    labels = _kmeans(points, k, seed)
    out = tuple(
        replace(c, cluster=label) for c, label in zip(pool.candidates, labels)
    )
    return AttributePool(candidates=out, stage="clustered")


def rank_by_video(pool: AttributePool, video: VideoFeatures) -> AttributePool:
    """Order candidates inside each cluster by video similarity.

    Sort is by cosine to the pooled video vector, descending, ties by
    lexicographic text; the top candidate of each cluster is marked
    selected. Output order is cluster-major.
    """
    if pool.stage != "clustered":
        raise ValueError("rank_by_video expects a clustered pool")
    pooled = np.asarray(video.pooled)
    scored = []
    for cand in pool.candidates:
        sim = float(np.dot(np.asarray(cand.embedding), pooled))
        scored.append(replace(cand, video_sim=sim))
    clusters = sorted({c.cluster for c in scored})
    ordered = []
    for label in clusters:
        members = [c for c in scored if c.cluster == label]
        members.sort(key=lambda c: (-c.video_sim, c.text))
        members[0] = replace(members[0], selected=True)
        ordered.extend(members)
    return AttributePool(candidates=tuple(ordered), stage="ranked")


def critic_semantic(nli, source: str, attribute: str, gamma1: float) -> bool:
    """O1: does the source entail the attribute at threshold gamma1."""
    if not 0.0 <= gamma1 <= 1.0:
        raise ValueError("gamma1 must lie in [0, 1]")
    return nli.score(source, attribute) >= gamma1


def _tree_for(tree, tokens):
    if tree is not None:
        return tree if not isinstance(tree, str) else parse_bracketed_tree(tree)
    if not tokens:
        raise ValueError("critic_format needs a tree or tokens")
    return shallow_parse(tokens)


def critic_format(x_tree, y_tree, x_tokens, y_tokens, gamma2: float, gamma3: float) -> bool:
    """O2: format distance filter.

    True iff tree_edit_distance >= gamma2 and rouge_l <= gamma3. Missing
    trees fall back to the shallow chunker over the tokens.
    """
    t1 = _tree_for(x_tree, x_tokens)
    t2 = _tree_for(y_tree, y_tokens)
    if tree_edit_distance(t1, t2) < gamma2:
        return False
    return rouge_l(list(x_tokens), list(y_tokens)) <= gamma3


def _diversity_components(pair_scores, n: int, threshold: float):
    """Connected components over the >=threshold entailment graph."""
    adjacency = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if any(s >= threshold for s in pair_scores(i, j)):
                adjacency[i].add(j)
                adjacency[j].add(i)
    seen = set()
    components = []
    for start in range(n):
        if start in seen:
            continue
        comp = {start}
        frontier = [start]
        while frontier:
            cur = frontier.pop()
            for nxt in adjacency[cur]:
                if nxt not in comp:
                    comp.add(nxt)
                    frontier.append(nxt)
        seen |= comp
        components.append(sorted(comp))
    return components, adjacency


def _diversity_keep(texts_in, texts_out, nli, threshold: float) -> list:
    """Kept indices: one representative per entailment component."""
    n = len(texts_in)

    def pair_scores(i, j):
        return (
            nli.score(texts_in[i], texts_in[j]),
            nli.score(texts_in[j], texts_in[i]),
            nli.score(texts_out[i], texts_out[j]),
            nli.score(texts_out[j], texts_out[i]),
        )

    components, adjacency = _diversity_components(pair_scores, n, threshold)
    kept = []
    for comp in components:
        ranked = []
        for i in comp:
            summed = 0.0
            for j in comp:
                if j != i and j in adjacency[i]:
                    summed += sum(pair_scores(i, j))
            ranked.append((-summed, texts_in[i], texts_out[i], i))
        ranked.sort()
        kept.append(ranked[0][3])
    return sorted(kept)


def critic_diversity(pairs, nli, gamma1: float) -> list:
    """O3: drop near-duplicate (input, output) pairs.

    Pairs are linked when input-side or output-side entailment in either
    direction reaches gamma1; within each connected component the pair with
    the largest summed entailment to its neighbours survives (ties by
    lexicographic text, then index). Returns kept indices, ascending.
    """
    texts_in = [p[0] for p in pairs]
    texts_out = [p[1] for p in pairs]
    return _diversity_keep(texts_in, texts_out, nli, gamma1)


def filter_pool(
    pool: AttributePool,
    sample: TextSample,
    video: Optional[VideoFeatures],
    nli,
    config: PipelineConfig,
) -> AttributePool:
    """Keep exactly the ranked candidates passing O1 and O2 and O3.

    O3 runs once over the whole ranked pool at the fixed DEDUP_THRESHOLD
    (not gamma1), so each candidate's O3 verdict does not depend on the
    gammas; per-candidate verdicts are recorded on the returned pool.
    """
    if pool.stage != "ranked":
        raise ValueError("filter_pool expects a ranked pool")
    cands = pool.candidates
    texts = [c.text for c in cands]
    kept3 = set(_diversity_keep(texts, texts, nli, DEDUP_THRESHOLD))
    source_tokens = list(sample.tokens)
    t1 = _tree_for(sample.tree, source_tokens)
    verdicts = []
    kept = []
    for idx, cand in enumerate(cands):
        entailment = nli.score(sample.text, cand.text)
        o1 = entailment >= config.gamma1
        attr_tokens = tokenize(cand.text)
        t2 = _tree_for(None, attr_tokens)
        d_t = tree_edit_distance(t1, t2)
        rouge = rouge_l(source_tokens, attr_tokens)
        o2 = d_t >= config.gamma2 and rouge <= config.gamma3
        o3 = idx in kept3
        keep = o1 and o2 and o3
        verdicts.append(
            CriticVerdict(
                text=cand.text,
                entailment=entailment,
                tree_distance=d_t,
                rouge=rouge,
                o1=o1,
                o2=o2,
                o3=o3,
                kept=keep,
            )
        )
        if keep:
            kept.append(cand)
    return AttributePool(candidates=tuple(kept), stage="filtered", verdicts=tuple(verdicts))


def sweep_thresholds(pool, sample, video, nli, base_config, grid1, grid2, grid3) -> list:
    """Kept-count table over a gamma grid; rows are (g1, g2, g3, kept)."""
    rows = []
    for g1 in grid1:
        for g2 in grid2:
            for g3 in grid3:
                cfg = replace(base_config, gamma1=g1, gamma2=g2, gamma3=g3)
                filtered = filter_pool(pool, sample, video, nli, cfg)
                rows.append((g1, g2, g3, len(filtered)))
    return rows
