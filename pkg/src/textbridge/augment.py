"""Positive/negative text variant generation at word and structure level.

Two rewriter backends share one interface: a deterministic rule-based
rewriter (synonym/antonym tables, an active-to-passive template, cleft
reordering, component-targeted substitutions) and a remote service client.
Positives chain a word-level rewrite into a structure-level rewrite;
negatives change exactly one targeted sentence component and leave the
rest untouched.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import requests

from .core import PipelineConfig, RewriterSpec, TextSample, tokenize
from .errors import RemoteServiceError, RewriteError
from .metrics import ConstituencyTree

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.1


class ComponentKind(Enum):
    SUBJECT = "subject"
    VERB = "verb"
    OBJECT = "object"
    ADJECTIVE = "adjective"
    PREPOSITIONAL = "prepositional"


def components_from_config(config: PipelineConfig) -> list:
    return [ComponentKind(name) for name in config.components]


@dataclass(frozen=True)
class Variant:
    """One generated rewrite of an anchor sentence.

    `target` is a word index for positives and a ComponentKind for
    negatives; `word_index` records the changed token position when known
    (used later to attach per-word significance weights).
    """

    text: str
    polarity: str
    level: str
    target: object = None
    logprob: Optional[float] = None
    word_index: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("variant text must be non-empty")
        if self.polarity not in ("positive", "negative"):
            raise ValueError("polarity must be 'positive' or 'negative'")
        if self.level not in ("word", "structure"):
            raise ValueError("level must be 'word' or 'structure'")
        if self.polarity == "negative":
            if not isinstance(self.target, ComponentKind):
                raise ValueError("negative variants need a ComponentKind target")
        elif self.level == "word":
            if not isinstance(self.target, int) or isinstance(self.target, bool):
                raise ValueError("word-level positive variants need a word index")
        elif self.target is not None and (
            not isinstance(self.target, int) or isinstance(self.target, bool)
        ):
            raise ValueError("structure-level target must be a word index or None")
        if self.logprob is not None:
            if not isinstance(self.logprob, (int, float)) or self.logprob > 0:
                raise ValueError("logprob must be <= 0 when present")
        if self.word_index is not None and (
            not isinstance(self.word_index, int) or self.word_index < 0
        ):
            raise ValueError("word_index must be a non-negative integer")


@dataclass(frozen=True)
class VariantSet:
    """All variants generated for one anchor plus positive probabilities."""

    anchor: TextSample
    positives: tuple
    negatives: tuple
    probs: tuple
    failed_components: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "positives", tuple(self.positives))
        object.__setattr__(self, "negatives", tuple(self.negatives))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        object.__setattr__(self, "failed_components", tuple(self.failed_components))
        if len(self.probs) != len(self.positives):
            raise ValueError("probs must align with positives")
        if self.positives:
            total = sum(self.probs)
            if abs(total - 1.0) > 1e-9:
                raise ValueError("probs must sum to 1, got %r" % total)
            if any(p < 0 for p in self.probs):
                raise ValueError("probs must be non-negative")
        for v in self.positives:
            if v.polarity != "positive":
                raise ValueError("positives list contains a negative variant")
        for v in self.negatives:
            if v.polarity != "negative":
                raise ValueError("negatives list contains a positive variant")
        for v in (*self.positives, *self.negatives):
            if v.text == self.anchor.text:
                raise ValueError("variant text equals the anchor text")


@dataclass(frozen=True)
class RewriteCandidate:
    text: str
    logprob: Optional[float] = None


# --- rule tables ------------------------------------------------------------
# Small closed-class lexicons. These are heuristics for offline operation,
# not linguistic claims; every entry is lowercase to match tokenize().

_VERB_BASES = [
    "open", "close", "hold", "eat", "watch", "push", "pull", "drive", "ride",
    "catch", "throw", "wash", "clean", "cut", "play", "bite", "kick", "carry",
    "paint", "run", "walk", "jump", "sit", "stand", "enter", "exit", "lift",
    "drop", "chase", "pet", "read", "cook", "climb", "swim",
]


def _inflections(base: str) -> list:
    if base.endswith(("s", "sh", "ch", "x")):
        third = base + "es"
    elif base.endswith("y") and base[-2] not in "aeiou":
        third = base[:-1] + "ies"
    else:
        third = base + "s"
    forms = [base, third]
    if base.endswith("e"):
        forms.append(base + "d")
        forms.append(base[:-1] + "ing")
    else:
        forms.append(base + "ed")
        forms.append(base + "ing")
    return forms


VERB_LEXICON = frozenset(
    form for base in _VERB_BASES for form in _inflections(base)
) | {"is", "are", "was", "were"}

DETERMINERS = frozenset({"the", "a", "an", "this", "that", "these", "those"})

ADJECTIVES = frozenset(
    {
        "red", "blue", "green", "yellow", "black", "white", "big", "small",
        "large", "little", "old", "young", "fast", "slow", "tall", "short",
        "long", "round", "wooden", "metal", "happy", "angry", "quiet", "loud",
    }
)

PREPOSITIONS = frozenset(
    {"on", "in", "at", "with", "by", "under", "over", "near", "behind",
     "beside", "into", "onto", "through", "across"}
)

SYNONYMS = {
    "opens": "pushes open",
    "closes": "pulls shut",
    "person": "human",
    "man": "gentleman",
    "woman": "lady",
    "dog": "hound",
    "cat": "feline",
    "car": "automobile",
    "door": "doorway",
    "runs": "sprints",
    "walks": "strolls",
    "jumps": "leaps",
    "eats": "devours",
    "holds": "grips",
    "watches": "observes",
    "plays": "frolics",
    "rides": "mounts",
    "big": "large",
    "small": "little",
    "red": "crimson",
    "blue": "azure",
    "fast": "quick",
    "old": "aged",
    "young": "youthful",
    "the": "that",
    "a": "one",
    "an": "one",
    "ball": "sphere",
    "road": "street",
    "house": "home",
    "tree": "sapling",
    "horse": "stallion",
    "child": "kid",
    "street": "road",
}

ANTONYMS = {
    "opens": "closes",
    "closes": "opens",
    "enters": "exits",
    "exits": "enters",
    "lifts": "drops",
    "drops": "lifts",
    "pushes": "pulls",
    "pulls": "pushes",
    "runs": "stops",
    "sits": "stands",
    "stands": "sits",
    "big": "small",
    "small": "big",
    "large": "little",
    "little": "large",
    "fast": "slow",
    "slow": "fast",
    "old": "young",
    "young": "old",
    "tall": "short",
    "short": "tall",
    "black": "white",
    "white": "black",
    "red": "blue",
    "blue": "red",
    "happy": "angry",
    "angry": "happy",
    "loud": "quiet",
    "quiet": "loud",
}

PARTICIPLES = {
    "opens": "opened",
    "closes": "closed",
    "holds": "held",
    "eats": "eaten",
    "watches": "watched",
    "pushes": "pushed",
    "pulls": "pulled",
    "drives": "driven",
    "rides": "ridden",
    "catches": "caught",
    "throws": "thrown",
    "washes": "washed",
    "cleans": "cleaned",
    "cuts": "cut",
    "plays": "played",
    "bites": "bitten",
    "kicks": "kicked",
    "carries": "carried",
    "paints": "painted",
    "lifts": "lifted",
    "chases": "chased",
    "pets": "petted",
    "reads": "read",
    "cooks": "cooked",
}

PREPOSITION_SWAPS = {
    "on": "under",
    "under": "on",
    "in": "outside",
    "at": "beyond",
    "with": "without",
    "by": "near",
    "over": "below",
    "near": "behind",
    "behind": "near",
    "beside": "across",
    "into": "past",
    "onto": "under",
    "through": "around",
    "across": "beside",
}

DISTRACTOR_NOUNS = ["banana", "umbrella", "piano", "lantern", "kettle", "pillow"]
DISTRACTOR_VERBS = ["ignores", "paints", "buries", "juggles", "measures", "polishes"]
DISTRACTOR_ADJECTIVES = ["purple", "frozen", "invisible", "crooked"]

ATTRIBUTE_TABLE = {
    "person": ["a head", "two eyes", "two arms"],
    "man": ["a head", "two legs", "short hair"],
    "woman": ["a head", "two legs", "long hair"],
    "child": ["a small frame", "two hands"],
    "car": ["four wheels", "a steering wheel", "a metal body"],
    "dog": ["four legs", "a wagging tail", "soft fur"],
    "cat": ["whiskers", "four paws", "a long tail"],
    "horse": ["four hooves", "a flowing mane"],
    "bird": ["two wings", "small feathers"],
    "door": ["a handle", "wooden panels", "metal hinges"],
    "ball": ["a round shape", "a bouncy surface"],
    "tree": ["green leaves", "a thick trunk"],
    "house": ["a roof", "brick walls", "square windows"],
    "road": ["an asphalt surface", "painted lane lines"],
    "street": ["an asphalt surface", "parked cars"],
    "table": ["four legs", "a flat top"],
    "chair": ["four legs", "a straight back"],
    "book": ["paper pages", "a printed cover"],
    "cup": ["a curved handle", "a hollow body"],
}

GENERIC_ATTRIBUTES = ["a distinct color", "a visible outline", "a solid shape"]


def _pick_distractor(word: str, pool: list) -> str:
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    idx = int.from_bytes(digest, "big") % len(pool)
    for step in range(len(pool)):
        cand = pool[(idx + step) % len(pool)]
        if cand != word:
            return cand
    raise RewriteError("no distractor available for %r" % word)


def _find_verb(tokens) -> Optional[int]:
    for i, tok in enumerate(tokens):
        if tok in VERB_LEXICON:
            return i
    return None


def component_span(tokens, component: ComponentKind):
    """Locate (start, end, head_index) of a component, or None if absent.

    Heuristic spans: subject = tokens before the first verb; object = tokens
    after the verb up to the first preposition; adjective/prepositional =
    first lexicon hit. Head is the token a negative rewrite replaces.
    """
    tokens = list(tokens)
    verb = _find_verb(tokens)
    if component is ComponentKind.VERB:
        return None if verb is None else (verb, verb + 1, verb)
    if component is ComponentKind.SUBJECT:
        if verb is None or verb == 0:
            return None
        return (0, verb, verb - 1)
    if component is ComponentKind.OBJECT:
        if verb is None:
            return None
        end = len(tokens)
        for i in range(verb + 1, len(tokens)):
            if tokens[i] in PREPOSITIONS:
                end = i
                break
        if end <= verb + 1:
            return None
        return (verb + 1, end, end - 1)
    if component is ComponentKind.ADJECTIVE:
        for i, tok in enumerate(tokens):
            if tok in ADJECTIVES:
                return (i, i + 1, i)
        return None
    if component is ComponentKind.PREPOSITIONAL:
        for i, tok in enumerate(tokens):
            if tok in PREPOSITIONS:
                return (i, len(tokens), i)
        return None
    raise ValueError("unknown component %r" % component)


def shallow_parse(tokens) -> ConstituencyTree:
    """Flat heuristic constituency tree over pre-tokenized words.

    Shape: (S (NP pre-verb...) (VP verb (NP post-verb...))); sentences with
    no recognized verb become one NP. Leaves always equal the input tokens.
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot parse an empty token list")
    verb = _find_verb(tokens)
    if verb is None:
        return ConstituencyTree(
            "S", (ConstituencyTree("NP", tuple(ConstituencyTree(t) for t in tokens)),)
        )
    children = []
    if verb > 0:
        children.append(
            ConstituencyTree("NP", tuple(ConstituencyTree(t) for t in tokens[:verb]))
        )
    vp_children = [ConstituencyTree(tokens[verb])]
    rest = tokens[verb + 1 :]
    if rest:
        vp_children.append(ConstituencyTree("NP", tuple(ConstituencyTree(t) for t in rest)))
    children.append(ConstituencyTree("VP", tuple(vp_children)))
    return ConstituencyTree("S", tuple(children))


class RuleRewriter:
    """Deterministic table-driven rewriter; no I/O, pure per call."""

    n_candidates = 1

    def _word_positive(self, tokens, index) -> list:
        word = tokens[index]
        if word in SYNONYMS:
            replacement = SYNONYMS[word].split()
        else:
            replacement = ["truly", word]
        return tokens[:index] + replacement + tokens[index + 1 :]

    def _word_negative(self, tokens, index) -> list:
        word = tokens[index]
        if word in ANTONYMS:
            replacement = ANTONYMS[word]
        elif word in VERB_LEXICON:
            replacement = _pick_distractor(word, DISTRACTOR_VERBS)
        elif word in ADJECTIVES:
            replacement = _pick_distractor(word, DISTRACTOR_ADJECTIVES)
        else:
            replacement = _pick_distractor(word, DISTRACTOR_NOUNS)
        return tokens[:index] + [replacement] + tokens[index + 1 :]

    def _passive(self, tokens) -> Optional[list]:
        verb = _find_verb(tokens)
        if verb is None or verb == 0 or tokens[verb] not in PARTICIPLES:
            return None
        subject = tokens[:verb]
        obj = tokens[verb + 1 :]
        if not obj or any(t in PREPOSITIONS for t in obj):
            return None
        return obj + ["is", PARTICIPLES[tokens[verb]], "by"] + subject

    def _cleft(self, tokens, negate: bool) -> list:
        span = component_span(tokens, ComponentKind.SUBJECT)
        if span is not None:
            cut = span[1]
        else:
            cut = 1
        head, tail = tokens[:cut], tokens[cut:]
        if not tail:
            head, tail = tokens[:1], tokens[1:]
        lead = ["it", "is", "not"] if negate else ["it", "is"]
        return lead + head + ["that"] + tail

    def _swap_subject_object(self, tokens) -> Optional[list]:
        verb = _find_verb(tokens)
        if verb is None or verb == 0:
            return None
        span = component_span(tokens, ComponentKind.OBJECT)
        if span is None:
            return None
        start, end, _ = span
        subject = tokens[:verb]
        obj = tokens[start:end]
        if subject == obj:
            return None
        return obj + [tokens[verb]] + subject + tokens[end:]

    def _structure(self, tokens, polarity) -> list:
        if len(tokens) < 2:
            raise RewriteError("structure rewrite impossible")
        if polarity == "positive":
            out = self._passive(tokens)
            return out if out is not None else self._cleft(tokens, negate=False)
        out = self._swap_subject_object(tokens)
        return out if out is not None else self._cleft(tokens, negate=True)

    def _component_negative(self, tokens, component: ComponentKind) -> list:
        span = component_span(tokens, component)
        if span is None:
            raise RewriteError("component '%s' not found" % component.value)
        _, _, head = span
        return self._word_negative(tokens, head)

    def rewrite(
        self,
        text: str,
        level: str,
        polarity: str,
        target_index: Optional[int] = None,
        component: Optional[str] = None,
        n: int = 1,
    ) -> list:
        """Produce rewrite candidates; deterministic, so always one candidate
        (or `n` attribute phrases in attribute mode)."""
        tokens = tokenize(text)
        if level == "attribute":
            return [RewriteCandidate(t) for t in self._attributes(tokens, n)]
        if level == "word":
            if component is not None:
                out = self._component_negative(tokens, ComponentKind(component))
            else:
                if target_index is None or not 0 <= target_index < len(tokens):
                    raise ValueError("target_index out of range")
                if polarity == "positive":
                    out = self._word_positive(tokens, target_index)
                else:
                    out = self._word_negative(tokens, target_index)
        elif level == "structure":
            out = self._structure(tokens, polarity)
        else:
            raise ValueError("unknown rewrite level %r" % level)
        return [RewriteCandidate(" ".join(out))]

    def _attributes(self, tokens, n: int) -> list:
        if n < 1:
            raise ValueError("attribute count must be positive")
        phrases = []
        for tok in tokens:
            for phrase in ATTRIBUTE_TABLE.get(tok, []):
                if phrase not in phrases:
                    phrases.append(phrase)
        for phrase in GENERIC_ATTRIBUTES:
            if len(phrases) >= n:
                break
            if phrase not in phrases:
                phrases.append(phrase)
        if not phrases:
            raise RewriteError("no attributes available for this text")
        return phrases[:n]


class RemoteRewriter:
    """Client for a `POST /rewrite` service with bounded retries."""

    def __init__(self, endpoint: str, timeout: float = 10.0, n_candidates: int = 1,
                 session=None):
        if not endpoint:
            raise RewriteError("remote rewriter needs an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.n_candidates = max(1, int(n_candidates))
        self._session = session or requests.Session()

    def rewrite(self, text, level, polarity, target_index=None, component=None, n=1):
        body = {"text": text, "level": level, "polarity": polarity, "n": n}
        if target_index is not None:
            body["target_index"] = target_index
        if component is not None:
            body["component"] = component
        last_error = None
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                resp = self._session.post(
                    self.endpoint + "/rewrite", json=body, timeout=self.timeout
                )
                if resp.status_code != 200:
                    raise RewriteError("HTTP %d from rewrite service" % resp.status_code)
                payload = resp.json()
                return self._parse_candidates(payload)
            except Exception as exc:
                last_error = exc
                if attempt < RETRY_ATTEMPTS:
                    time.sleep(RETRY_BASE_DELAY * 2 ** (attempt - 1))
        raise RemoteServiceError(
            "rewrite request failed: %s" % last_error, attempts=RETRY_ATTEMPTS
        )

    @staticmethod
    def _parse_candidates(payload) -> list:
        raw = payload.get("candidates") if isinstance(payload, dict) else None
        if not isinstance(raw, list) or not raw:
            raise RewriteError("rewrite service returned no candidates")
        out = []
        for item in raw:
            if not isinstance(item, dict) or not isinstance(item.get("text"), str):
                raise RewriteError("malformed rewrite candidate")
            logprob = item.get("logprob")
            if logprob is not None:
                if not isinstance(logprob, (int, float)) or logprob > 0:
                    raise RewriteError("candidate logprob must be <= 0")
            out.append(RewriteCandidate(item["text"], logprob))
        return out


def build_rewriter(spec: RewriterSpec):
    """Instantiate the rewriter described by the spec; TOOL_OFFLINE=1 forces
    the rule backend."""
    from .embed import offline_forced

    if spec.kind == "rule" or offline_forced():
        return RuleRewriter()
    return RemoteRewriter(
        endpoint=spec.endpoint, timeout=spec.timeout, n_candidates=spec.n_candidates
    )


def _first_diff_index(anchor_tokens, variant_tokens) -> Optional[int]:
    for i, (a, b) in enumerate(zip(anchor_tokens, variant_tokens)):
        if a != b:
            return i
    if len(variant_tokens) != len(anchor_tokens):
        return min(len(anchor_tokens), len(variant_tokens))
    return None


def classify_word(tokens, index: int) -> ComponentKind:
    """Component slot of the word at index, by lexicon then position."""
    tokens = list(tokens)
    word = tokens[index]
    if word in ADJECTIVES:
        return ComponentKind.ADJECTIVE
    if word in PREPOSITIONS:
        return ComponentKind.PREPOSITIONAL
    if word in VERB_LEXICON:
        return ComponentKind.VERB
    verb = _find_verb(tokens)
    if verb is not None and index > verb:
        return ComponentKind.OBJECT
    return ComponentKind.SUBJECT


def _select_candidate(candidates, accept) -> Optional[RewriteCandidate]:
    for cand in candidates:
        try:
            if accept(cand):
                return cand
        except ValueError:
            continue
    return None


def word_level_rewrite(rewriter, sample: TextSample, word_index: int, polarity: str) -> Variant:
    """One-word rewrite of the anchor at word_index.

    Raises:
        ValueError: word_index out of range.
        RewriteError: degenerate (unchanged) output after bounded attempts.
    """
    tokens = list(sample.tokens)
    if not 0 <= word_index < len(tokens):
        raise ValueError(
            "word_index %d out of range for %d tokens" % (word_index, len(tokens))
        )

    def accept(cand):
        ct = tokenize(cand.text)
        if ct == tokens:
            return False
        return len(ct) != len(tokens) or ct[word_index] != tokens[word_index]

    chosen = None
    for _ in range(RETRY_ATTEMPTS):
        cands = rewriter.rewrite(
            sample.text, "word", polarity, target_index=word_index,
            n=getattr(rewriter, "n_candidates", 1),
        )
        chosen = _select_candidate(cands, accept)
        if chosen is not None:
            break
    if chosen is None:
        raise RewriteError("degenerate rewrite at word %d" % word_index)
    if polarity == "positive":
        target = word_index
    else:
        target = classify_word(tokens, word_index)
    return Variant(
        text=chosen.text,
        polarity=polarity,
        level="word",
        target=target,
        logprob=chosen.logprob,
        word_index=word_index,
    )


def structure_level_rewrite(rewriter, variant_or_sample, polarity: str) -> Variant:
    """Reorder rewrite of a sample or of an already-rewritten variant.

    Raises:
        RewriteError: single-token input or degenerate output.
    """
    if isinstance(variant_or_sample, Variant):
        text = variant_or_sample.text
        carried = variant_or_sample.word_index
    else:
        text = variant_or_sample.text
        carried = None
    tokens = tokenize(text)
    if len(tokens) < 2:
        raise RewriteError("structure rewrite impossible")

    def accept(cand):
        return tokenize(cand.text) != tokens

    chosen = None
    for _ in range(RETRY_ATTEMPTS):
        cands = rewriter.rewrite(
            text, "structure", polarity, n=getattr(rewriter, "n_candidates", 1)
        )
        chosen = _select_candidate(cands, accept)
        if chosen is not None:
            break
    if chosen is None:
        raise RewriteError("degenerate structure rewrite")
    if polarity == "positive":
        target = carried
    else:
        # negatives must name a component; attribute the rewrite to the
        # component slot of the earliest disrupted token position
        diff = _first_diff_index(tokens, tokenize(chosen.text))
        target = classify_word(tokens, min(diff, len(tokens) - 1))
    return Variant(
        text=chosen.text,
        polarity=polarity,
        level="structure",
        target=target,
        logprob=chosen.logprob,
        word_index=carried,
    )


def _component_negative(rewriter, sample: TextSample, component: ComponentKind) -> Variant:
    tokens = list(sample.tokens)

    def accept(cand):
        return tokenize(cand.text) != tokens

    chosen = None
    for _ in range(RETRY_ATTEMPTS):
        cands = rewriter.rewrite(
            sample.text, "word", "negative", component=component.value,
            n=getattr(rewriter, "n_candidates", 1),
        )
        chosen = _select_candidate(cands, accept)
        if chosen is not None:
            break
    if chosen is None:
        raise RewriteError("degenerate negative for component %s" % component.value)
    changed = _first_diff_index(tokens, tokenize(chosen.text))
    return Variant(
        text=chosen.text,
        polarity="negative",
        level="word",
        target=component,
        logprob=chosen.logprob,
        word_index=changed,
    )


def _probs_for(positives) -> tuple:
    import math

    if not positives:
        return ()
    logprobs = [v.logprob for v in positives]
    if any(lp is None for lp in logprobs):
        return tuple(1.0 / len(positives) for _ in positives)
    peak = max(logprobs)
    weights = [math.exp(lp - peak) for lp in logprobs]
    total = sum(weights)
    return tuple(w / total for w in weights)


def generate_variant_set(rewriter, sample: TextSample, config: PipelineConfig) -> VariantSet:
    """Full augmentation for one anchor: chained positives per word and one
    targeted negative per configured component.

    Positives run word-level then structure-level; when the structure step
    cannot apply (for example a one-word result), the word-level variant is
    kept as-is. Component negatives that cannot be produced are recorded in
    `failed_components`; all components failing is an error.

    Raises:
        RewriteError: no positive could be generated, or every component
            negative failed.
    """
    positives = []
    for i in range(len(sample.tokens)):
        try:
            wvar = word_level_rewrite(rewriter, sample, i, "positive")
        except RewriteError:
            continue
        try:
            final = structure_level_rewrite(rewriter, wvar, "positive")
        except RewriteError:
            final = wvar
        if final.text != sample.text:
            positives.append(final)
    if not positives:
        raise RewriteError("no positive variant could be generated")
    negatives = []
    failed = []
    for component in components_from_config(config):
        try:
            negatives.append(_component_negative(rewriter, sample, component))
        except RewriteError as exc:
            failed.append((component.value, str(exc)))
    if not negatives:
        raise RewriteError("every component negative failed for %r" % sample.id)
    return VariantSet(
        anchor=sample,
        positives=tuple(positives),
        negatives=tuple(negatives),
        probs=_probs_for(positives),
        failed_components=tuple(failed),
    )
