"""Word-significance (S1) and variant-relevance (S2) scores.

S1(i) is one minus the cosine between the context-conditioned embeddings
of the full sentence and of the sentence with word i removed. S2(i) is the
probability-weighted mean cosine between positive variant i and the other
positive variants, with the weights renormalized over j != i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .augment import VariantSet
from .core import PromptContext, TextSample
from .embed import embed_with_context
from .metrics import cosine_similarity


@dataclass(frozen=True)
class SignificanceReport:
    """Per-anchor scores: s1 per word (None when J = 1), s2 per positive."""

    anchor_id: str
    s1: Optional[tuple]
    s2: tuple

    def __post_init__(self):
        if self.s1 is not None:
            s1 = tuple(float(x) for x in self.s1)
            if any(not 0.0 <= x <= 2.0 for x in s1):
                raise ValueError("every s1 value must lie in [0, 2]")
            object.__setattr__(self, "s1", s1)
        s2 = tuple(float(x) for x in self.s2)
        if any(not -1.0 <= x <= 1.0 for x in s2):
            raise ValueError("every s2 value must lie in [-1, 1]")
        object.__setattr__(self, "s2", s2)


def compute_s1(embedder, context: Optional[PromptContext], sample: TextSample) -> list:
    """Word significance for each of the J words of the sample.

    Raises:
        ValueError: J = 1, where removing the word would empty the text.
    """
    tokens = list(sample.tokens)
    if len(tokens) < 2:
        raise ValueError("S1 undefined for single-word text")
    full = np.asarray(embed_with_context(embedder, context, tokens))
    scores = []
    for i in range(len(tokens)):
        reduced = np.asarray(embed_with_context(embedder, context, tokens, drop_index=i))
        scores.append(1.0 - cosine_similarity(full, reduced))
    return scores


def compute_s2(embedder, variant_set: VariantSet) -> list:
    """Variant relevance for each positive variant of the set.

    For variant i the probabilities of the other variants are renormalized
    to sum to 1; a singleton set (or a variant holding all probability
    mass) gets the neutral score 1.0.
    """
    positives = variant_set.positives
    if not positives:
        raise ValueError("variant set has no positive variants")
    if len(positives) == 1:
        return [1.0]
    vectors = [np.asarray(v) for v in embedder.embed([p.text for p in positives])]
    probs = list(variant_set.probs)
    scores = []
    for i in range(len(positives)):
        rest_mass = 1.0 - probs[i]
        if rest_mass <= 0.0:
            scores.append(1.0)
            continue
        acc = 0.0
        for j in range(len(positives)):
            if j == i:
                continue
            acc += cosine_similarity(vectors[i], vectors[j]) * (probs[j] / rest_mass)
        scores.append(min(1.0, max(-1.0, acc)))
    return scores


def compute_report(
    embedder, context: Optional[PromptContext], variant_set: VariantSet
) -> SignificanceReport:
    """S1 + S2 for one anchor; s1 is None for one-word anchors."""
    anchor = variant_set.anchor
    s1 = None
    if len(anchor.tokens) >= 2:
        s1 = tuple(compute_s1(embedder, context, anchor))
    s2 = tuple(compute_s2(embedder, variant_set))
    return SignificanceReport(anchor_id=anchor.id, s1=s1, s2=s2)
