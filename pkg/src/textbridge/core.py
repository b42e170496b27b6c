"""Domain types, dataset ingestion, tokenization, and run configuration.

Everything downstream (augmentation, scoring, attribute filtering, the
bridging loss) consumes the types defined here. All types are immutable
after construction and validate their invariants eagerly, so invalid
instances cannot circulate.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from string import Formatter
from typing import Optional

import numpy as np

from .errors import ConfigError, DatasetError
from .metrics import parse_bracketed_tree

VARIANT_AS_PRINTED = "as-printed"
VARIANT_POSITIVE_NUMERATOR = "positive-numerator"
LOSS_VARIANTS = (VARIANT_AS_PRINTED, VARIANT_POSITIVE_NUMERATOR)

COMPONENT_KINDS = ("subject", "verb", "object", "adjective", "prepositional")

DEFAULT_PROMPT_TEMPLATE = "rewrite the following sentence: {text}"

# word-internal marks preserved by tokenize; everything else non-alphanumeric
# becomes a separator
_KEEP_MARKS = "'-"


def tokenize(text: str) -> list:
    """Lowercase, strip punctuation, and split a sentence into word tokens.

    Hyphens and apostrophes survive only inside a token ("state-of-the-art",
    "don't"); leading and trailing marks are removed. Deterministic, and
    idempotent over its own space-joined output.

    Args:
        text: sentence to split.

    Returns:
        Non-empty list of lowercase word tokens.

    Raises:
        ValueError: empty or whitespace-only text, or no word tokens remain
            after normalization.
    """
    if not isinstance(text, str) or not text.strip():
        raise ValueError("text is empty")
    chars = []
    for ch in text.lower():
        if ch.isalnum() or ch in _KEEP_MARKS:
            chars.append(ch)
        else:
            chars.append(" ")
    tokens = []
    for raw in "".join(chars).split():
        tok = raw.strip(_KEEP_MARKS)
        if tok:
            tokens.append(tok)
    if not tokens:
        raise ValueError("no word tokens remain after normalization")
    return tokens


@dataclass(frozen=True)
class TextSample:
    """One video-text pair's text side.

    `tokens` is always the tokenize() of `text`; passing tokens explicitly is
    allowed but they must match. An optional bracketed constituency tree must
    parse and agree with the token count.
    """

    id: str
    video_id: str
    text: str
    tokens: tuple = None
    tree: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("sample id must be a non-empty string")
        if not isinstance(self.video_id, str) or not self.video_id:
            raise ValueError("video_id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("text must be non-empty after trimming")
        derived = tuple(tokenize(self.text))
        if self.tokens is None:
            object.__setattr__(self, "tokens", derived)
        else:
            if tuple(self.tokens) != derived:
                raise ValueError("tokens do not match tokenize(text)")
            object.__setattr__(self, "tokens", derived)
        if self.tree is not None:
            if not isinstance(self.tree, str):
                raise ValueError("tree must be a string when present")
            parsed = parse_bracketed_tree(self.tree)
            leaf_count = len(parsed.leaves())
            if leaf_count != len(self.tokens):
                raise ValueError(
                    "tree has %d leaves but text has %d tokens"
                    % (leaf_count, len(self.tokens))
                )

    @property
    def word_count(self) -> int:
        return len(self.tokens)


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class VideoFeatures:
    """Per-frame features plus their pooled summary for one video.

    `frames` is N_v x d with unit rows; `pooled` must equal the
    L2-normalized mean of the rows (validated to 1e-6).
    """

    video_id: str
    frames: np.ndarray
    pooled: np.ndarray

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise ValueError("video_id must be a non-empty string")
        frames = _as_readonly(self.frames)
        pooled = _as_readonly(self.pooled)
        if frames.ndim != 2:
            raise ValueError("frames must be a 2-d matrix")
        n_v, d = frames.shape
        if n_v < 1:
            raise ValueError("need at least one frame row")
        if d < 2:
            raise ValueError("feature dimension must be >= 2")
        norms = np.linalg.norm(frames, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("every frame row must be unit-normalized")
        if pooled.shape != (d,):
            raise ValueError("pooled must be a d-vector matching frames")
        mean = frames.mean(axis=0)
        mean_norm = np.linalg.norm(mean)
        if mean_norm == 0.0:
            raise ValueError("frames average to the zero vector")
        if np.max(np.abs(pooled - mean / mean_norm)) > 1e-6:
            raise ValueError("pooled must be the normalized mean of frames")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "pooled", pooled)

    @classmethod
    def from_frames(cls, video_id: str, frames) -> "VideoFeatures":
        """Build features from raw frame rows, normalizing each row.

        Raises:
            ValueError: zero-norm row, bad shape, or zero mean direction.
        """
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("frames must be a non-empty 2-d matrix")
        norms = np.linalg.norm(arr, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("frame rows must have nonzero norm")
        # keep already-unit rows bit-identical so save/load round-trips exactly
        scale = np.where(np.abs(norms - 1.0) <= 1e-9, 1.0, norms)
        unit = arr / scale[:, None]
        mean = unit.mean(axis=0)
        mean_norm = np.linalg.norm(mean)
        if mean_norm == 0.0:
            raise ValueError("frames average to the zero vector")
        return cls(video_id=video_id, frames=unit, pooled=mean / mean_norm)

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


@dataclass(frozen=True)
class PromptContext:
    """A rewrite/embedding prompt with a mandatory {text} placeholder.

    An optional {index} placeholder is substituted when rendering targets a
    specific word position.
    """

    template: str

    def __post_init__(self):
        if not isinstance(self.template, str) or not self.template.strip():
            raise ValueError("template must be a non-empty string")
        names = [f for _, f, _, _ in Formatter().parse(self.template) if f is not None]
        if names.count("text") != 1:
            raise ValueError("template must contain exactly one {text} placeholder")
        unknown = sorted(set(names) - {"text", "index"})
        if unknown:
            raise ValueError("unknown placeholders: %s" % ", ".join(unknown))
        object.__setattr__(self, "_wants_index", "index" in names)

    def rendered(self, text: str, index: Optional[int] = None) -> str:
        """Substitute placeholders; result is always non-empty."""
        if not text:
            raise ValueError("cannot render an empty text")
        if self._wants_index and index is None:
            raise ValueError("template contains {index} but no index was given")
        out = self.template.format(text=text, index=index)
        if not out:
            raise ValueError("rendered prompt is empty")
        return out


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "hash"
    dim: int = 256
    endpoint: str = ""
    timeout: float = 5.0
    max_batch: int = 32


@dataclass(frozen=True)
class RewriterSpec:
    kind: str = "rule"
    endpoint: str = ""
    timeout: float = 10.0
    n_candidates: int = 1


@dataclass(frozen=True)
class NliSpec:
    kind: str = "heuristic"
    endpoint: str = ""
    timeout: float = 5.0


@dataclass(frozen=True)
class PipelineConfig:
    """Validated run configuration shared by every stage."""

    seed: int = 0
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    rewriter: RewriterSpec = field(default_factory=RewriterSpec)
    nli: NliSpec = field(default_factory=NliSpec)
    gamma1: float = 0.5
    gamma2: float = 3.0
    gamma3: float = 0.7
    n_c: int = 5
    beta: float = 0.5
    tau: float = 1.0
    variant: str = VARIANT_POSITIVE_NUMERATOR
    components: tuple = COMPONENT_KINDS
    parallelism: int = 1

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        _validate_pipeline_config(self)

    @property
    def component_count(self) -> int:
        return len(self.components)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _validate_pipeline_config(cfg: PipelineConfig) -> None:
    if not _is_int(cfg.seed) or cfg.seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    emb = cfg.embedder
    if emb.kind not in ("hash", "remote"):
        raise ConfigError("embedder.kind", "must be 'hash' or 'remote'")
    if emb.kind == "hash" and (not _is_int(emb.dim) or emb.dim < 16):
        raise ConfigError("embedder.dim", "hash backend requires an integer >= 16")
    if emb.kind == "remote" and not emb.endpoint:
        raise ConfigError("embedder.endpoint", "remote backend requires an endpoint")
    if not _is_real(emb.timeout) or emb.timeout <= 0:
        raise ConfigError("embedder.timeout", "must be > 0")
    if not _is_int(emb.max_batch) or emb.max_batch < 1:
        raise ConfigError("embedder.max_batch", "must be a positive integer")
    rew = cfg.rewriter
    if rew.kind not in ("rule", "remote"):
        raise ConfigError("rewriter.kind", "must be 'rule' or 'remote'")
    if rew.kind == "remote" and not rew.endpoint:
        raise ConfigError("rewriter.endpoint", "remote backend requires an endpoint")
    if not _is_real(rew.timeout) or rew.timeout <= 0:
        raise ConfigError("rewriter.timeout", "must be > 0")
    if not _is_int(rew.n_candidates) or rew.n_candidates < 1:
        raise ConfigError("rewriter.n_candidates", "must be a positive integer")
    nli = cfg.nli
    if nli.kind not in ("heuristic", "remote"):
        raise ConfigError("nli.kind", "must be 'heuristic' or 'remote'")
    if nli.kind == "remote" and not nli.endpoint:
        raise ConfigError("nli.endpoint", "remote backend requires an endpoint")
    if not _is_real(nli.timeout) or nli.timeout <= 0:
        raise ConfigError("nli.timeout", "must be > 0")
    if not _is_real(cfg.gamma1) or not 0.0 <= cfg.gamma1 <= 1.0:
        raise ConfigError("thresholds.gamma1", "must be within [0, 1]")
    if not _is_real(cfg.gamma2) or cfg.gamma2 < 0.0:
        raise ConfigError("thresholds.gamma2", "must be >= 0")
    if not _is_real(cfg.gamma3) or not 0.0 <= cfg.gamma3 <= 1.0:
        raise ConfigError("thresholds.gamma3", "must be within [0, 1]")
    if not _is_int(cfg.n_c) or cfg.n_c < 1:
        raise ConfigError("clustering.n_c", "must be a positive integer")
    if not _is_real(cfg.beta) or not 0.0 < cfg.beta < 1.0:
        raise ConfigError("loss.beta", "must be strictly inside (0, 1)")
    if not _is_real(cfg.tau) or cfg.tau <= 0.0:
        raise ConfigError("loss.tau", "must be > 0")
    if cfg.variant not in LOSS_VARIANTS:
        raise ConfigError(
            "loss.variant", "must be one of %s" % ", ".join(LOSS_VARIANTS)
        )
    if not cfg.components:
        raise ConfigError("components", "taxonomy must be non-empty")
    if len(set(cfg.components)) != len(cfg.components):
        raise ConfigError("components", "taxonomy entries must be unique")
    for comp in cfg.components:
        if comp not in COMPONENT_KINDS:
            raise ConfigError(
                "components",
                "unknown component %r; valid: %s" % (comp, ", ".join(COMPONENT_KINDS)),
            )
    if not _is_int(cfg.parallelism) or cfg.parallelism < 1:
        raise ConfigError("parallelism", "must be a positive integer")


def _sub_spec(cls, raw, path, defaults):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(path, "must be a JSON object")
    known = {f.name for f in fields(cls)}
    alias = dict(defaults)
    kwargs = {}
    for key, value in raw.items():
        name = alias.get(key, key)
        if name not in known:
            raise ConfigError("%s.%s" % (path, key), "unknown key")
        kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build and validate a PipelineConfig from the config-file JSON shape.

    Raises:
        ConfigError: naming the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {
        "seed",
        "embedder",
        "rewriter",
        "nli",
        "thresholds",
        "clustering",
        "loss",
        "components",
        "parallelism",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")
    kwargs = {}
    if "seed" in raw:
        kwargs["seed"] = raw["seed"]
    kwargs["embedder"] = _sub_spec(EmbedderSpec, raw.get("embedder"), "embedder", {})
    kwargs["rewriter"] = _sub_spec(
        RewriterSpec, raw.get("rewriter"), "rewriter", {"n": "n_candidates"}
    )
    kwargs["nli"] = _sub_spec(NliSpec, raw.get("nli"), "nli", {})
    thresholds = raw.get("thresholds") or {}
    if not isinstance(thresholds, dict):
        raise ConfigError("thresholds", "must be a JSON object")
    for key in thresholds:
        if key not in ("gamma1", "gamma2", "gamma3"):
            raise ConfigError("thresholds.%s" % key, "unknown key")
    if "gamma1" in thresholds:
        kwargs["gamma1"] = thresholds["gamma1"]
    if "gamma2" in thresholds:
        kwargs["gamma2"] = thresholds["gamma2"]
    if "gamma3" in thresholds:
        kwargs["gamma3"] = thresholds["gamma3"]
    clustering = raw.get("clustering") or {}
    if not isinstance(clustering, dict):
        raise ConfigError("clustering", "must be a JSON object")
    for key in clustering:
        if key != "n_c":
            raise ConfigError("clustering.%s" % key, "unknown key")
    if "n_c" in clustering:
        kwargs["n_c"] = clustering["n_c"]
    loss = raw.get("loss") or {}
    if not isinstance(loss, dict):
        raise ConfigError("loss", "must be a JSON object")
    for key in loss:
        if key not in ("beta", "tau", "variant"):
            raise ConfigError("loss.%s" % key, "unknown key")
    if "beta" in loss:
        kwargs["beta"] = loss["beta"]
    if "tau" in loss:
        kwargs["tau"] = loss["tau"]
    if "variant" in loss:
        kwargs["variant"] = loss["variant"]
    if "components" in raw:
        comps = raw["components"]
        if not isinstance(comps, list) or not all(isinstance(c, str) for c in comps):
            raise ConfigError("components", "must be a list of strings")
        kwargs["components"] = tuple(comps)
    if "parallelism" in raw:
        kwargs["parallelism"] = raw["parallelism"]
    return PipelineConfig(**kwargs)


def config_to_dict(cfg: PipelineConfig) -> dict:
    """Inverse of config_from_dict; canonical config-file JSON shape."""
    return {
        "seed": cfg.seed,
        "embedder": {
            "kind": cfg.embedder.kind,
            "dim": cfg.embedder.dim,
            "endpoint": cfg.embedder.endpoint,
            "timeout": cfg.embedder.timeout,
            "max_batch": cfg.embedder.max_batch,
        },
        "rewriter": {
            "kind": cfg.rewriter.kind,
            "endpoint": cfg.rewriter.endpoint,
            "timeout": cfg.rewriter.timeout,
            "n_candidates": cfg.rewriter.n_candidates,
        },
        "nli": {
            "kind": cfg.nli.kind,
            "endpoint": cfg.nli.endpoint,
            "timeout": cfg.nli.timeout,
        },
        "thresholds": {
            "gamma1": cfg.gamma1,
            "gamma2": cfg.gamma2,
            "gamma3": cfg.gamma3,
        },
        "clustering": {"n_c": cfg.n_c},
        "loss": {"beta": cfg.beta, "tau": cfg.tau, "variant": cfg.variant},
        "components": list(cfg.components),
        "parallelism": cfg.parallelism,
    }


def load_config(path) -> PipelineConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", "config file not found: %s" % path)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", "invalid JSON: %s" % exc)
    return config_from_dict(raw)


def config_hash(cfg: PipelineConfig) -> str:
    """Stable short hash of the canonical config serialization."""
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


_REQUIRED_FIELDS = ("id", "text", "video_id")


def _sample_from_record(record: dict, line_no: int):
    if not isinstance(record, dict):
        raise DatasetError("line is not a JSON object", line_no)
    for name in _REQUIRED_FIELDS:
        if name not in record:
            raise DatasetError('missing field "%s"' % name, line_no)
        if not isinstance(record[name], str):
            raise DatasetError('field "%s" must be a string' % name, line_no)
    known = {"id", "video_id", "text", "tree", "video_embedding", "frames"}
    for key in record:
        if key not in known:
            raise DatasetError('unknown field "%s"' % key, line_no)
    tree = record.get("tree")
    if tree is not None and not isinstance(tree, str):
        raise DatasetError('field "tree" must be a string', line_no)
    try:
        sample = TextSample(
            id=record["id"],
            video_id=record["video_id"],
            text=record["text"],
            tree=tree,
        )
    except Exception as exc:
        raise DatasetError(str(exc), line_no)
    video = None
    frames = record.get("frames")
    embedding = record.get("video_embedding")
    try:
        if frames is not None:
            video = VideoFeatures.from_frames(sample.video_id, frames)
        elif embedding is not None:
            video = VideoFeatures.from_frames(sample.video_id, [embedding])
    except Exception as exc:
        raise DatasetError("bad video features: %s" % exc, line_no)
    return sample, video


def load_dataset(path) -> list:
    """Load a JSONL dataset as ordered (TextSample, VideoFeatures|None) pairs.

    Args:
        path: JSONL file, one object per line.

    Raises:
        DatasetError: malformed line, schema violation, or duplicate id; the
            error carries the 1-based line number.
    """
    out = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                raise DatasetError("blank line in dataset", line_no)
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DatasetError("invalid JSON: %s" % exc.msg, line_no)
            sample, video = _sample_from_record(record, line_no)
            if sample.id in seen:
                raise DatasetError('duplicate id "%s"' % sample.id, line_no)
            seen.add(sample.id)
            out.append((sample, video))
    return out


def _record_from_sample(sample: TextSample, video) -> dict:
    record = {"id": sample.id, "video_id": sample.video_id, "text": sample.text}
    if sample.tree is not None:
        record["tree"] = sample.tree
    if video is not None:
        record["frames"] = [[float(x) for x in row] for row in video.frames]
    return record


def save_dataset(pairs, path) -> None:
    """Write (TextSample, VideoFeatures|None) pairs as deterministic JSONL.

    Keys appear in fixed order and floats use repr-style shortest form, so
    two saves of equal data are byte-identical.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for sample, video in pairs:
            record = _record_from_sample(sample, video)
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
