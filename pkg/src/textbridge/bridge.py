"""Video-guided contrastive bridging loss and a toy dual-encoder trainer.

One :class:`BridgeItem` couples a video vector with one positive rewrite
and one negative rewrite per sentence component.  The loss takes the worst
(most confusable) component per item, weights it by the word-significance
and variant-relevance scores, and reduces over items.  Analytic gradients
make the toy trainer and the finite-difference checks possible.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .augment import build_rewriter, generate_variant_set
from .core import (
    PipelineConfig,
    TextSample,
    VideoFeatures,
    VARIANT_AS_PRINTED,
    VARIANT_POSITIVE_NUMERATOR,
)
from .embed import build_embedder
from .score import compute_s1, compute_s2

REDUCTIONS = ("sum", "mean")


def _unit_rows(a, name):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError("%s must be a vector or matrix of vectors" % name)
    norms = np.linalg.norm(arr, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("%s rows must be unit-norm" % name)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BridgeItem:
    """One anchor/positive pairing with per-component negatives.

    `weight_s1` holds the significance of the word each component negative
    changed; `weight_s2` is the relevance of the positive variant.
    """

    item_id: str
    anchor_id: str
    video: np.ndarray
    positive: np.ndarray
    negatives: np.ndarray
    weight_s1: tuple
    weight_s2: float

    def __post_init__(self):
        video = _unit_rows(self.video, "video")[0]
        positive = _unit_rows(self.positive, "positive")[0]
        negatives = _unit_rows(self.negatives, "negatives")
        object.__setattr__(self, "video", video)
        object.__setattr__(self, "positive", positive)
        object.__setattr__(self, "negatives", negatives)
        d = video.shape[0]
        if positive.shape[0] != d or negatives.shape[1] != d:
            raise ValueError("all vectors must share one dimension")
        if negatives.shape[0] < 1:
            raise ValueError("need at least one component negative")
        s1 = tuple(float(w) for w in self.weight_s1)
        object.__setattr__(self, "weight_s1", s1)
        object.__setattr__(self, "weight_s2", float(self.weight_s2))
        if len(s1) != negatives.shape[0]:
            raise ValueError("weight_s1 must align with the negatives")
        for w in s1:
            if not 0.0 <= w <= 2.0:
                raise ValueError("weight_s1 entries must lie in [0, 2]")
        if not -1.0 <= self.weight_s2 <= 1.0:
            raise ValueError("weight_s2 must lie in [-1, 1]")

    @property
    def component_count(self) -> int:
        return self.negatives.shape[0]


@dataclass(frozen=True)
class LossConfig:
    """Scalar knobs of the contrastive loss."""

    beta: float = 0.5
    tau: float = 1.0
    variant: str = VARIANT_POSITIVE_NUMERATOR
    reduction: str = "mean"
    normalize: bool = True

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie strictly between 0 and 1")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.variant not in (VARIANT_AS_PRINTED, VARIANT_POSITIVE_NUMERATOR):
            raise ValueError("unknown loss variant %r" % (self.variant,))
        if self.reduction not in REDUCTIONS:
            raise ValueError("reduction must be one of %s" % (REDUCTIONS,))


def loss_config_from_pipeline(config: PipelineConfig) -> LossConfig:
    return LossConfig(beta=config.beta, tau=config.tau, variant=config.variant)


@dataclass(frozen=True)
class ItemReport:
    item_id: str
    component_losses: tuple
    argmax: int
    weight: float


@dataclass(frozen=True)
class LossReport:
    total: float
    items: tuple
    grad_check: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "items": [
                {
                    "id": it.item_id,
                    "component_losses": list(it.component_losses),
                    "argmax": it.argmax,
                    "weight": it.weight,
                }
                for it in self.items
            ],
            "grad_check": (
                None if self.grad_check is None else {"max_rel_err": self.grad_check}
            ),
        }


def _pairwise_sum(values) -> float:
    """Fixed-order pairwise tree sum, bit-stable for a given sequence."""
    vals = [float(v) for v in values]
    if not vals:
        return 0.0
    while len(vals) > 1:
        vals = [
            vals[i] + vals[i + 1] if i + 1 < len(vals) else vals[i]
            for i in range(0, len(vals), 2)
        ]
    return vals[0]


def _cos_parts(u, g):
    nu = float(np.linalg.norm(u))
    ng = float(np.linalg.norm(g))
    if nu == 0.0 or ng == 0.0:
        raise ValueError("cosine undefined for zero-norm vectors")
    uh = u / nu
    gh = g / ng
    return float(np.dot(uh, gh)), uh, gh, nu, ng


def _cl_value(cos_p, cos_n, beta, tau, variant) -> float:
    a = np.log1p(-beta) + cos_p / tau
    b = np.log(beta) + cos_n / tau
    s = np.logaddexp(a, b)
    if variant == VARIANT_AS_PRINTED:
        return float(s - b)
    return float(s - a)


def _cl_cos_grads(cos_p, cos_n, beta, tau, variant):
    """d loss_cl / d cos_p and d cos_n."""
    a = np.log1p(-beta) + cos_p / tau
    b = np.log(beta) + cos_n / tau
    s = np.logaddexp(a, b)
    sig_p = float(np.exp(a - s))
    sig_n = float(np.exp(b - s))
    if variant == VARIANT_AS_PRINTED:
        return sig_p / tau, -sig_p / tau
    return -sig_n / tau, sig_n / tau


def loss_cl(video, positive, negative, config: LossConfig) -> float:
    """Contrastive loss of one (video, positive, negative) triple.

    Cosines are taken on the raw vectors, so non-unit inputs (projected
    vectors mid-training) are accepted; the value is finite and positive
    for any beta in (0, 1).
    """
    v = np.asarray(video, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    if v.shape != p.shape or v.shape != n.shape or v.ndim != 1:
        raise ValueError("loss_cl needs three vectors of one shared dimension")
    cos_p, _, _, _, _ = _cos_parts(v, p)
    cos_n, _, _, _, _ = _cos_parts(v, n)
    return _cl_value(cos_p, cos_n, config.beta, config.tau, config.variant)


def _component_losses(video, positive, negatives, config: LossConfig) -> np.ndarray:
    cos_p, _, _, _, _ = _cos_parts(video, positive)
    out = np.empty(negatives.shape[0], dtype=np.float64)
    for c in range(negatives.shape[0]):
        cos_n, _, _, _, _ = _cos_parts(video, negatives[c])
        out[c] = _cl_value(cos_p, cos_n, config.beta, config.tau, config.variant)
    return out


def loss_component_max(item: BridgeItem, config: LossConfig):
    """Worst per-component loss and its component index (lowest-index ties)."""
    losses = _component_losses(item.video, item.positive, item.negatives, config)
    k = int(np.argmax(losses))
    return float(losses[k]), k


def _raw_weight(item: BridgeItem, argmax: int) -> float:
    return max(item.weight_s1[argmax] * item.weight_s2, 0.0)


def _final_weights(items, argmaxes, normalize: bool) -> list:
    raw = [_raw_weight(it, k) for it, k in zip(items, argmaxes)]
    if not normalize:
        return raw
    groups = {}
    for i, it in enumerate(items):
        groups.setdefault(it.anchor_id, []).append(i)
    out = [0.0] * len(items)
    for members in groups.values():
        mass = sum(raw[i] for i in members)
        if mass > 0.0:
            for i in members:
                out[i] = raw[i] / mass
        else:
            for i in members:
                out[i] = 1.0 / len(members)
    return out


def loss_weighted(items, config: LossConfig) -> LossReport:
    """Weighted reduction of per-item component-max losses.

    Each item's weight is the significance of the argmax component's word
    times the positive variant's relevance; with `normalize` the weights
    of each anchor's items are rescaled to sum to one (uniform when the
    anchor's mass is zero), so every anchor contributes equally.
    """
    items = list(items)
    if not items:
        raise ValueError("loss_weighted needs at least one item")
    losses = []
    argmaxes = []
    per_component = []
    for item in items:
        comp = _component_losses(item.video, item.positive, item.negatives, config)
        k = int(np.argmax(comp))
        per_component.append(comp)
        losses.append(float(comp[k]))
        argmaxes.append(k)
    weights = _final_weights(items, argmaxes, config.normalize)
    total = _pairwise_sum(w * l for w, l in zip(weights, losses))
    if config.reduction == "mean":
        total /= len(items)
    reports = tuple(
        ItemReport(
            item_id=item.item_id,
            component_losses=tuple(float(x) for x in comp),
            argmax=k,
            weight=w,
        )
        for item, comp, k, w in zip(items, per_component, argmaxes, weights)
    )
    return LossReport(total=float(total), items=reports)


@dataclass(frozen=True)
class ItemGradients:
    """Gradients of the weighted total for one item's free vectors."""

    item_id: str
    video: np.ndarray
    positive: np.ndarray
    negatives: np.ndarray


def _item_gradient_arrays(video, positive, negatives, k, scale, config):
    """Gradient of scale * loss_cl(video, positive, negatives[k])."""
    cos_p, vh, ph, nv, np_ = _cos_parts(video, positive)
    cos_n, _, nh, _, nn = _cos_parts(video, negatives[k])
    d_p, d_n = _cl_cos_grads(cos_p, cos_n, config.beta, config.tau, config.variant)
    g_video = scale * (d_p * (ph - cos_p * vh) / nv + d_n * (nh - cos_n * vh) / nv)
    g_positive = scale * d_p * (vh - cos_p * ph) / np_
    g_negatives = np.zeros_like(negatives)
    g_negatives[k] = scale * d_n * (vh - cos_n * nh) / nn
    return g_video, g_positive, g_negatives


def loss_gradient(items, config: LossConfig) -> list:
    """Analytic gradients of loss_weighted's total for every item vector.

    Only the argmax component's negative receives gradient; weights are
    treated as constants of the differentiation.
    """
    items = list(items)
    if not items:
        raise ValueError("loss_gradient needs at least one item")
    argmaxes = []
    for item in items:
        comp = _component_losses(item.video, item.positive, item.negatives, config)
        argmaxes.append(int(np.argmax(comp)))
    weights = _final_weights(items, argmaxes, config.normalize)
    scale = 1.0 / len(items) if config.reduction == "mean" else 1.0
    out = []
    for item, k, w in zip(items, argmaxes, weights):
        if w == 0.0:
            out.append(
                ItemGradients(
                    item_id=item.item_id,
                    video=np.zeros_like(item.video),
                    positive=np.zeros_like(item.positive),
                    negatives=np.zeros_like(item.negatives),
                )
            )
            continue
        g_v, g_p, g_n = _item_gradient_arrays(
            item.video, item.positive, item.negatives, k, w * scale, config
        )
        out.append(
            ItemGradients(item_id=item.item_id, video=g_v, positive=g_p, negatives=g_n)
        )
    return out


def _total_from_arrays(rows, config: LossConfig) -> float:
    """Weighted total over raw (anchor_id, video, positive, negatives, s1, s2) rows."""

    class _Row:
        def __init__(self, anchor_id, s1, s2):
            self.anchor_id = anchor_id
            self.weight_s1 = s1
            self.weight_s2 = s2

    losses = []
    argmaxes = []
    shells = []
    for anchor_id, video, positive, negatives, s1, s2 in rows:
        comp = _component_losses(video, positive, negatives, config)
        k = int(np.argmax(comp))
        losses.append(float(comp[k]))
        argmaxes.append(k)
        shells.append(_Row(anchor_id, s1, s2))
    weights = _final_weights(shells, argmaxes, config.normalize)
    total = _pairwise_sum(w * l for w, l in zip(weights, losses))
    if config.reduction == "mean":
        total /= len(rows)
    return float(total)


def gradient_check(items, config: LossConfig, h: float = 1e-5) -> float:
    """Relative L2 error between analytic and central-difference gradients.

    Every coordinate of every video/positive/negative vector is probed; the
    two gradients are compared as flattened vectors, ||fd - analytic|| /
    max(||fd||, ||analytic||).  Normalizing by the gradient's overall scale
    is what keeps the check meaningful in double precision: a central
    difference of the total loss carries absolute rounding noise of roughly
    eps * |loss| / h, so individual near-zero coordinates cannot be
    certified on their own at any step size.
    """
    items = list(items)
    grads = loss_gradient(items, config)
    rows = [
        [
            it.anchor_id,
            np.array(it.video),
            np.array(it.positive),
            np.array(it.negatives),
            it.weight_s1,
            it.weight_s2,
        ]
        for it in items
    ]
    fd_values = []
    an_values = []

    def probe(i, slot, index, analytic_vec):
        base = rows[i][slot] if index is None else rows[i][slot][index]
        for coord in range(base.shape[0]):
            orig = base[coord]
            base[coord] = orig + h
            hi = _total_from_arrays([tuple(r) for r in rows], config)
            base[coord] = orig - h
            lo = _total_from_arrays([tuple(r) for r in rows], config)
            base[coord] = orig
            fd_values.append((hi - lo) / (2.0 * h))
            an_values.append(float(analytic_vec[coord]))

    for i, grad in enumerate(grads):
        probe(i, 1, None, grad.video)
        probe(i, 2, None, grad.positive)
        for c in range(rows[i][3].shape[0]):
            probe(i, 3, c, grad.negatives[c])
    if not fd_values:
        return 0.0
    fd = np.asarray(fd_values)
    an = np.asarray(an_values)
    scale = max(float(np.linalg.norm(fd)), float(np.linalg.norm(an)), 1e-12)
    return float(np.linalg.norm(fd - an)) / scale


def build_bridge_items(pairs, rewriter, embedder, config: PipelineConfig):
    """BridgeItems (plus per-anchor variant metadata) from (sample, video) pairs.

    Returns (items, anchors) where anchors maps anchor id to its variant
    set, significance scores, and positive-variant embeddings, so callers
    can carve out held-out queries without regenerating anything.
    """
    items = []
    anchors = {}
    for sample, video in pairs:
        if video is None:
            raise ValueError("sample %r has no video features" % (sample.id,))
        variant_set = generate_variant_set(rewriter, sample, config)
        tokens = list(sample.tokens)
        s1 = None
        if len(tokens) >= 2:
            s1 = compute_s1(embedder, None, sample)
        s2 = compute_s2(embedder, variant_set)
        weight_s1 = []
        for neg in variant_set.negatives:
            idx = neg.word_index
            if s1 is not None and idx is not None and 0 <= idx < len(s1):
                weight_s1.append(min(2.0, max(0.0, s1[idx])))
            else:
                weight_s1.append(1.0)
        neg_vectors = np.stack(
            [np.asarray(v) for v in embedder.embed([n.text for n in variant_set.negatives])]
        )
        pos_vectors = [
            np.asarray(v)
            for v in embedder.embed([p.text for p in variant_set.positives])
        ]
        video_vec = np.asarray(video.pooled)
        anchor_items = []
        for i, pos in enumerate(variant_set.positives):
            item = BridgeItem(
                item_id="%s:p%d" % (sample.id, i),
                anchor_id=sample.id,
                video=video_vec,
                positive=pos_vectors[i],
                negatives=neg_vectors,
                weight_s1=tuple(weight_s1),
                weight_s2=s2[i],
            )
            anchor_items.append(item)
        items.extend(anchor_items)
        anchors[sample.id] = {
            "variant_set": variant_set,
            "s1": s1,
            "s2": list(s2),
            "items": anchor_items,
        }
    return items, anchors


def _group_items(items):
    """Contiguous arrays per distinct component count, keeping item order."""
    groups = {}
    for i, item in enumerate(items):
        groups.setdefault(item.component_count, []).append(i)
    out = []
    for count in sorted(groups):
        idx = groups[count]
        out.append(
            {
                "index": np.array(idx),
                "videos": np.stack([items[i].video for i in idx]),
                "positives": np.stack([items[i].positive for i in idx]),
                "negatives": np.stack([items[i].negatives for i in idx]),
            }
        )
    return out


def _batched_losses(v, p, n, config):
    """Per-item component losses/argmax for stacked (N,d) and (N,C,d) arrays."""
    nv = np.linalg.norm(v, axis=1)
    np_ = np.linalg.norm(p, axis=1)
    nn = np.linalg.norm(n, axis=2)
    cos_p = np.einsum("nd,nd->n", v, p) / (nv * np_)
    cos_n = np.einsum("nd,ncd->nc", v, n) / (nv[:, None] * nn)
    a = np.log1p(-config.beta) + cos_p / config.tau
    b = np.log(config.beta) + cos_n / config.tau
    s = np.logaddexp(a[:, None], b)
    if config.variant == VARIANT_AS_PRINTED:
        comp = s - b
    else:
        comp = s - a[:, None]
    argmax = np.argmax(comp, axis=1)
    return comp, argmax, (cos_p, cos_n, nv, np_, nn, a, b)


def fit_projections(items, config: LossConfig, epochs: int, lr: float, dim: int):
    """Full-batch gradient descent of two square projection maps.

    Returns (w_text, w_video, per-epoch losses measured before each step).
    """
    items = list(items)
    if not items:
        raise ValueError("cannot fit on an empty item list")
    groups = _group_items(items)
    w_text = np.eye(dim)
    w_video = np.eye(dim)
    losses = []
    n_items = len(items)
    scale = 1.0 / n_items if config.reduction == "mean" else 1.0
    for _ in range(max(0, int(epochs))):
        comp_loss = np.zeros(n_items)
        argmaxes = np.zeros(n_items, dtype=int)
        projections = []
        for g in groups:
            v = g["videos"] @ w_video.T
            p = g["positives"] @ w_text.T
            n = g["negatives"] @ w_text.T
            comp, argmax, parts = _batched_losses(v, p, n, config)
            comp_loss[g["index"]] = comp[np.arange(len(argmax)), argmax]
            argmaxes[g["index"]] = argmax
            projections.append((v, p, n, argmax, parts))
        weights = np.asarray(_final_weights(items, argmaxes.tolist(), config.normalize))
        losses.append(float(_pairwise_sum(weights * comp_loss)) * scale)
        g_text = np.zeros_like(w_text)
        g_video = np.zeros_like(w_video)
        for g, (v, p, n, argmax, parts) in zip(groups, projections):
            cos_p, cos_n, nv, np_, nn, a, b = parts
            rows = np.arange(len(argmax))
            w = weights[g["index"]] * scale
            cos_nk = cos_n[rows, argmax]
            nk = n[rows, argmax]
            nnk = nn[rows, argmax]
            bk = b[rows, argmax]
            s = np.logaddexp(a, bk)
            sig_p = np.exp(a - s)
            sig_n = np.exp(bk - s)
            if config.variant == VARIANT_AS_PRINTED:
                d_p = sig_p / config.tau
                d_n = -sig_p / config.tau
            else:
                d_p = -sig_n / config.tau
                d_n = sig_n / config.tau
            vh = v / nv[:, None]
            ph = p / np_[:, None]
            nh = nk / nnk[:, None]
            g_v = (w * d_p)[:, None] * (ph - cos_p[:, None] * vh) / nv[:, None]
            g_v += (w * d_n)[:, None] * (nh - cos_nk[:, None] * vh) / nv[:, None]
            g_p = (w * d_p)[:, None] * (vh - cos_p[:, None] * ph) / np_[:, None]
            g_n = (w * d_n)[:, None] * (vh - cos_nk[:, None] * nh) / nnk[:, None]
            g_video += g_v.T @ g["videos"]
            g_text += g_p.T @ g["positives"]
            neg_sources = g["negatives"][rows, argmax]
            g_text += g_n.T @ neg_sources
        w_text = w_text - lr * g_text
        w_video = w_video - lr * g_video
    return w_text, w_video, losses


def evaluate_retrieval(w_text, w_video, queries, truth, videos, ks=(1, 5)) -> dict:
    """Recall@k of projected text queries against projected video vectors.

    `truth[i]` is the row of `videos` the i-th query should retrieve; ties
    in similarity resolve toward the lower video index.
    """
    q = np.asarray(queries, dtype=np.float64) @ np.asarray(w_text).T
    v = np.asarray(videos, dtype=np.float64) @ np.asarray(w_video).T
    qn = q / np.maximum(np.linalg.norm(q, axis=1, keepdims=True), 1e-12)
    vn = v / np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
    sims = qn @ vn.T
    hits = {k: 0 for k in ks}
    for i, t in enumerate(truth):
        row = sims[i]
        target = row[t]
        rank = int(np.sum(row > target)) + int(np.sum(row[:t] == target))
        for k in ks:
            if rank < k:
                hits[k] += 1
    n = max(1, len(truth))
    return {k: hits[k] / n for k in ks}


@dataclass(frozen=True)
class TrainResult:
    w_text: np.ndarray
    w_video: np.ndarray
    losses: tuple
    initial_recall: dict
    final_recall: dict
    item_count: int
    query_count: int
    items: tuple = ()


def train_toy_dual_encoder(
    dataset,
    config: PipelineConfig,
    epochs: int = 20,
    lr: float = 0.5,
    seed: int = 0,
    rewriter=None,
    embedder=None,
) -> TrainResult:
    """Train text/video projections on augmented pairs; report retrieval.

    One positive variant per anchor is held out as a paraphrased query
    (chosen by the seeded generator) and never trained on; recall@1/@5 of
    those queries against all dataset videos is measured before and after
    training.  Fully deterministic for a given seed.
    """
    pairs = list(dataset)
    if not pairs:
        raise ValueError("cannot train on an empty dataset")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    rewriter = rewriter if rewriter is not None else build_rewriter(config.rewriter)
    embedder = embedder if embedder is not None else build_embedder(config.embedder)
    rng = np.random.default_rng(seed)
    _, anchors = build_bridge_items(pairs, rewriter, embedder, config)
    train_items = []
    queries = []
    truth = []
    videos = np.stack([np.asarray(v.pooled) for _, v in pairs])
    for row, (sample, _) in enumerate(pairs):
        info = anchors[sample.id]
        positives = info["variant_set"].positives
        held = int(rng.integers(len(positives)))
        queries.append(np.asarray(embedder.embed_one(positives[held].text)))
        truth.append(row)
        for i, item in enumerate(info["items"]):
            if i == held and len(positives) > 1:
                continue
            train_items.append(item)
    loss_cfg = loss_config_from_pipeline(config)
    dim = videos.shape[1]
    before = evaluate_retrieval(np.eye(dim), np.eye(dim), queries, truth, videos)
    w_text, w_video, losses = fit_projections(
        train_items, loss_cfg, epochs, lr, dim
    )
    after = evaluate_retrieval(w_text, w_video, queries, truth, videos)
    return TrainResult(
        w_text=w_text,
        w_video=w_video,
        losses=tuple(losses),
        initial_recall=before,
        final_recall=after,
        item_count=len(train_items),
        query_count=len(queries),
        items=tuple(train_items),
    )
