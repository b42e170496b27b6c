import math

import numpy as np
import pytest

from textbridge.bridge import (
    BridgeItem,
    LossConfig,
    evaluate_retrieval,
    gradient_check,
    loss_cl,
    loss_component_max,
    loss_gradient,
    loss_weighted,
    train_toy_dual_encoder,
)
from textbridge.core import (
    PipelineConfig,
    TextSample,
    VideoFeatures,
    VARIANT_AS_PRINTED,
    VARIANT_POSITIVE_NUMERATOR,
)

VARIANTS = (VARIANT_AS_PRINTED, VARIANT_POSITIVE_NUMERATOR)


def rand_unit(rng, d):
    x = rng.normal(size=d)
    return x / np.linalg.norm(x)


def vec_with_cosine(c):
    """Unit 3-vector whose cosine with e0 is exactly c."""
    return np.array([c, math.sqrt(max(0.0, 1.0 - c * c)), 0.0])


def random_item(rng, d=6, n_components=None, item_id="i", anchor_id="a"):
    c = n_components if n_components is not None else int(rng.integers(1, 5))
    return BridgeItem(
        item_id=item_id,
        anchor_id=anchor_id,
        video=rand_unit(rng, d),
        positive=rand_unit(rng, d),
        negatives=np.stack([rand_unit(rng, d) for _ in range(c)]),
        weight_s1=tuple(rng.uniform(0.0, 2.0, c)),
        weight_s2=float(rng.uniform(-1.0, 1.0)),
    )


@pytest.fixture
def basis():
    return np.eye(4)


class TestBridgeItem:
    def test_non_unit_vector_rejected(self, basis):
        with pytest.raises(ValueError):
            BridgeItem(
                item_id="i",
                anchor_id="a",
                video=basis[0] * 2.0,
                positive=basis[1],
                negatives=basis[2:3],
                weight_s1=(1.0,),
                weight_s2=1.0,
            )

    def test_dimension_mismatch_rejected(self, basis):
        with pytest.raises(ValueError):
            BridgeItem(
                item_id="i",
                anchor_id="a",
                video=basis[0],
                positive=np.array([1.0, 0.0]),
                negatives=basis[2:3],
                weight_s1=(1.0,),
                weight_s2=1.0,
            )

    def test_needs_a_component(self, basis):
        with pytest.raises(ValueError):
            BridgeItem(
                item_id="i",
                anchor_id="a",
                video=basis[0],
                positive=basis[1],
                negatives=np.zeros((0, 4)),
                weight_s1=(),
                weight_s2=1.0,
            )

    def test_weight_bounds(self, basis):
        with pytest.raises(ValueError):
            BridgeItem(
                item_id="i",
                anchor_id="a",
                video=basis[0],
                positive=basis[1],
                negatives=basis[2:3],
                weight_s1=(2.5,),
                weight_s2=1.0,
            )
        with pytest.raises(ValueError):
            BridgeItem(
                item_id="i",
                anchor_id="a",
                video=basis[0],
                positive=basis[1],
                negatives=basis[2:3],
                weight_s1=(1.0,),
                weight_s2=1.5,
            )


class TestLossConfig:
    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            LossConfig(beta=0.0)
        with pytest.raises(ValueError):
            LossConfig(beta=1.0)
        with pytest.raises(ValueError):
            LossConfig(tau=0.0)
        with pytest.raises(ValueError):
            LossConfig(variant="other")
        with pytest.raises(ValueError):
            LossConfig(reduction="max")


class TestLossCl:
    def test_symmetric_case_is_ln_two(self, basis):
        for variant in VARIANTS:
            for tau in (0.2, 1.0, 7.0):
                cfg = LossConfig(beta=0.5, tau=tau, variant=variant)
                got = loss_cl(basis[0], basis[1], basis[1], cfg)
                assert got == pytest.approx(math.log(2.0), abs=1e-9)

    def test_aligned_positive_spot_values(self, basis):
        cfg = LossConfig(beta=0.5, tau=1.0, variant=VARIANT_AS_PRINTED)
        got = loss_cl(basis[0], basis[0], basis[1], cfg)
        assert got == pytest.approx(math.log(1.0 + math.e), abs=1e-9)
        cfg = LossConfig(beta=0.5, tau=1.0, variant=VARIANT_POSITIVE_NUMERATOR)
        got = loss_cl(basis[0], basis[0], basis[1], cfg)
        assert got == pytest.approx(math.log(1.0 + math.e) - 1.0, abs=1e-9)

    def test_large_tau_limits(self, basis):
        for beta in (0.1, 0.3, 0.5, 0.9):
            as_printed = loss_cl(
                basis[0],
                basis[0],
                basis[1],
                LossConfig(beta=beta, tau=1e6, variant=VARIANT_AS_PRINTED),
            )
            swapped = loss_cl(
                basis[0],
                basis[0],
                basis[1],
                LossConfig(beta=beta, tau=1e6, variant=VARIANT_POSITIVE_NUMERATOR),
            )
            assert as_printed == pytest.approx(-math.log(beta), abs=1e-4)
            assert swapped == pytest.approx(-math.log(1.0 - beta), abs=1e-4)

    def test_positive_for_all_inputs(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            beta = float(rng.uniform(0.01, 0.99))
            tau = float(rng.uniform(0.05, 10.0))
            variant = VARIANTS[int(rng.integers(2))]
            cfg = LossConfig(beta=beta, tau=tau, variant=variant)
            v, p, n = (rand_unit(rng, 5) for _ in range(3))
            assert loss_cl(v, p, n, cfg) > 0.0

    def test_monotonicity_per_variant(self):
        e0 = np.array([1.0, 0.0, 0.0])
        cos_grid = [-0.9, -0.3, 0.2, 0.8]
        for variant, sign in ((VARIANT_POSITIVE_NUMERATOR, -1), (VARIANT_AS_PRINTED, 1)):
            cfg = LossConfig(beta=0.4, tau=0.7, variant=variant)
            fixed_n = vec_with_cosine(0.1)
            values = [loss_cl(e0, vec_with_cosine(c), fixed_n, cfg) for c in cos_grid]
            assert np.all(sign * np.diff(values) > 0.0)
            fixed_p = vec_with_cosine(0.1)
            values = [loss_cl(e0, fixed_p, vec_with_cosine(c), cfg) for c in cos_grid]
            assert np.all(sign * np.diff(values) < 0.0)

    def test_dimension_mismatch(self, basis):
        with pytest.raises(ValueError):
            loss_cl(basis[0], basis[1], np.array([1.0, 0.0]), LossConfig())

    def test_zero_vector_rejected(self, basis):
        with pytest.raises(ValueError):
            loss_cl(np.zeros(4), basis[1], basis[2], LossConfig())

    def test_accepts_general_norms(self, basis):
        cfg = LossConfig()
        a = loss_cl(basis[0], basis[1], basis[2], cfg)
        b = loss_cl(basis[0] * 3.0, basis[1] * 0.2, basis[2] * 9.0, cfg)
        assert a == pytest.approx(b, abs=1e-12)


class TestLossComponentMax:
    def test_single_component(self):
        rng = np.random.default_rng(2)
        item = random_item(rng, n_components=1)
        cfg = LossConfig()
        value, k = loss_component_max(item, cfg)
        assert k == 0
        assert value == pytest.approx(
            loss_cl(item.video, item.positive, item.negatives[0], cfg), abs=1e-12
        )

    def test_equal_components_tie_to_zero(self, basis):
        item = BridgeItem(
            item_id="i",
            anchor_id="a",
            video=basis[0],
            positive=basis[1],
            negatives=np.stack([basis[2], basis[2], basis[2]]),
            weight_s1=(1.0, 1.0, 1.0),
            weight_s2=1.0,
        )
        value, k = loss_component_max(item, LossConfig())
        assert k == 0
        assert value == pytest.approx(
            loss_cl(basis[0], basis[1], basis[2], LossConfig()), abs=1e-12
        )

    def test_matches_recomputed_maximum(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            item = random_item(rng, n_components=4)
            cfg = LossConfig(
                beta=float(rng.uniform(0.1, 0.9)),
                tau=float(rng.uniform(0.1, 5.0)),
                variant=VARIANTS[int(rng.integers(2))],
            )
            value, k = loss_component_max(item, cfg)
            singles = [
                loss_cl(item.video, item.positive, item.negatives[c], cfg)
                for c in range(4)
            ]
            assert value == pytest.approx(max(singles), abs=1e-12)
            assert k == singles.index(max(singles))
            for s in singles:
                assert value >= s - 1e-12


def resummation_oracle(items, config):
    """Recompute the weighted total from public single-triple calls."""
    losses = []
    raw = []
    for item in items:
        singles = [
            loss_cl(item.video, item.positive, item.negatives[c], config)
            for c in range(item.component_count)
        ]
        k = singles.index(max(singles))
        losses.append(singles[k])
        raw.append(max(item.weight_s1[k] * item.weight_s2, 0.0))
    if config.normalize:
        weights = [0.0] * len(items)
        anchors = {}
        for i, item in enumerate(items):
            anchors.setdefault(item.anchor_id, []).append(i)
        for members in anchors.values():
            mass = sum(raw[i] for i in members)
            for i in members:
                weights[i] = raw[i] / mass if mass > 0 else 1.0 / len(members)
    else:
        weights = raw
    total = sum(w * l for w, l in zip(weights, losses))
    if config.reduction == "mean":
        total /= len(items)
    return total


class TestLossWeighted:
    def test_unit_weight_single_item(self):
        rng = np.random.default_rng(4)
        item = random_item(rng, n_components=3)
        item = BridgeItem(
            item_id=item.item_id,
            anchor_id=item.anchor_id,
            video=item.video,
            positive=item.positive,
            negatives=item.negatives,
            weight_s1=(1.0, 1.0, 1.0),
            weight_s2=1.0,
        )
        cfg = LossConfig()
        report = loss_weighted([item], cfg)
        value, k = loss_component_max(item, cfg)
        assert report.total == pytest.approx(value, abs=1e-12)
        assert report.items[0].argmax == k
        assert report.items[0].weight == pytest.approx(1.0)

    def test_two_identical_items_mean(self):
        rng = np.random.default_rng(5)
        a = random_item(rng, n_components=2, item_id="x", anchor_id="a1")
        b = BridgeItem(
            item_id="y",
            anchor_id="a2",
            video=a.video,
            positive=a.positive,
            negatives=a.negatives,
            weight_s1=(1.0, 1.0),
            weight_s2=1.0,
        )
        a = BridgeItem(
            item_id="x",
            anchor_id="a1",
            video=a.video,
            positive=a.positive,
            negatives=a.negatives,
            weight_s1=(1.0, 1.0),
            weight_s2=1.0,
        )
        cfg = LossConfig(reduction="mean")
        single = loss_weighted([a], cfg).total
        double = loss_weighted([a, b], cfg).total
        assert double == pytest.approx(single, abs=1e-12)

    def test_matches_resummation_oracle(self):
        rng = np.random.default_rng(6)
        for trial in range(40):
            n = int(rng.integers(1, 9))
            items = [
                random_item(
                    rng,
                    item_id="i%d" % i,
                    anchor_id="a%d" % int(rng.integers(1, 4)),
                )
                for i in range(n)
            ]
            cfg = LossConfig(
                beta=float(rng.uniform(0.1, 0.9)),
                tau=float(rng.uniform(0.1, 5.0)),
                variant=VARIANTS[trial % 2],
                reduction=("sum", "mean")[int(rng.integers(2))],
                normalize=bool(rng.integers(2)),
            )
            report = loss_weighted(items, cfg)
            assert report.total == pytest.approx(
                resummation_oracle(items, cfg), abs=1e-12
            )

    def test_report_total_recombines_from_items(self):
        rng = np.random.default_rng(7)
        items = [random_item(rng, item_id="i%d" % i) for i in range(5)]
        cfg = LossConfig(reduction="sum")
        report = loss_weighted(items, cfg)
        rebuilt = sum(it.weight * max(it.component_losses) for it in report.items)
        assert report.total == pytest.approx(rebuilt, abs=1e-9)

    def test_doubling_weights_doubles_unnormalized_sum(self):
        rng = np.random.default_rng(8)
        cfg = LossConfig(reduction="sum", normalize=False)
        items = []
        doubled = []
        for i in range(4):
            item = random_item(rng, n_components=2, item_id="i%d" % i)
            s1 = tuple(float(w) for w in rng.uniform(0.0, 1.0, 2))
            s2 = 0.4
            items.append(
                BridgeItem(
                    item_id=item.item_id,
                    anchor_id=item.anchor_id,
                    video=item.video,
                    positive=item.positive,
                    negatives=item.negatives,
                    weight_s1=s1,
                    weight_s2=s2,
                )
            )
            doubled.append(
                BridgeItem(
                    item_id=item.item_id,
                    anchor_id=item.anchor_id,
                    video=item.video,
                    positive=item.positive,
                    negatives=item.negatives,
                    weight_s1=tuple(2.0 * w for w in s1),
                    weight_s2=s2,
                )
            )
        assert loss_weighted(doubled, cfg).total == pytest.approx(
            2.0 * loss_weighted(items, cfg).total, abs=1e-12
        )

    def test_empty_items_rejected(self):
        with pytest.raises(ValueError):
            loss_weighted([], LossConfig())

    def test_json_shape(self):
        rng = np.random.default_rng(9)
        report = loss_weighted([random_item(rng, n_components=2)], LossConfig())
        data = report.to_json_dict()
        assert set(data) == {"total", "items", "grad_check"}
        assert set(data["items"][0]) == {"id", "component_losses", "argmax", "weight"}
        assert data["grad_check"] is None


class TestLossGradient:
    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(10)
        for trial in range(20):
            n = int(rng.integers(1, 4))
            items = [
                random_item(rng, item_id="i%d" % i, anchor_id="a%d" % (i % 2))
                for i in range(n)
            ]
            cfg = LossConfig(
                beta=(0.1, 0.5, 0.9)[trial % 3],
                tau=(0.05, 1.0, 10.0)[trial % 3],
                variant=VARIANTS[trial % 2],
                reduction=("sum", "mean")[trial % 2],
            )
            assert gradient_check(items, cfg) <= 1e-5

    def test_zero_weight_means_zero_gradient(self):
        rng = np.random.default_rng(12)
        item = random_item(rng, n_components=2)
        item = BridgeItem(
            item_id="z",
            anchor_id="a",
            video=item.video,
            positive=item.positive,
            negatives=item.negatives,
            weight_s1=(0.0, 0.0),
            weight_s2=1.0,
        )
        grads = loss_gradient([item], LossConfig(normalize=False))
        assert not grads[0].video.any()
        assert not grads[0].positive.any()
        assert not grads[0].negatives.any()

    def test_symmetric_point_video_gradient_separates_pair(self):
        e0 = np.array([1.0, 0.0, 0.0])
        p = vec_with_cosine(0.3)
        n = np.array([0.3, -math.sqrt(1.0 - 0.09), 0.0])
        item = BridgeItem(
            item_id="s",
            anchor_id="a",
            video=e0,
            positive=p,
            negatives=n[None, :],
            weight_s1=(1.0,),
            weight_s2=1.0,
        )
        cfg = LossConfig(beta=0.5, variant=VARIANT_POSITIVE_NUMERATOR)
        grad = loss_gradient([item], cfg)[0]
        assert abs(float(np.dot(grad.video, p - n))) > 1e-6

    def test_only_argmax_negative_gets_gradient(self):
        rng = np.random.default_rng(13)
        item = random_item(rng, n_components=4)
        cfg = LossConfig()
        _, k = loss_component_max(item, cfg)
        grad = loss_gradient([item], cfg)[0]
        for c in range(4):
            if c == k:
                assert grad.negatives[c].any()
            else:
                assert not grad.negatives[c].any()


def toy_pairs(seed=3, count=4, dim=32):
    rng = np.random.default_rng(seed)
    texts = [
        "person opens the door",
        "a dog runs on the road",
        "the red car stops",
        "a cat sleeps near the window",
    ]
    pairs = []
    for i in range(count):
        sample = TextSample(id="s%d" % i, video_id="v%d" % i, text=texts[i % len(texts)])
        frames = rng.normal(size=(3, dim))
        pairs.append((sample, VideoFeatures.from_frames("v%d" % i, frames)))
    return pairs


def toy_config(dim=32):
    from dataclasses import replace

    base = PipelineConfig()
    return replace(base, embedder=replace(base.embedder, dim=dim))


class TestTrainer:
    def test_zero_learning_rate_is_identity(self):
        result = train_toy_dual_encoder(toy_pairs(), toy_config(), epochs=4, lr=0.0, seed=1)
        assert result.initial_recall == result.final_recall
        assert np.allclose(result.w_text, np.eye(32))

    def test_zero_epochs_is_identity(self):
        result = train_toy_dual_encoder(toy_pairs(), toy_config(), epochs=0, lr=0.5, seed=1)
        assert result.initial_recall == result.final_recall
        assert result.losses == ()

    def test_deterministic_per_seed(self):
        a = train_toy_dual_encoder(toy_pairs(), toy_config(), epochs=6, lr=1.0, seed=5)
        b = train_toy_dual_encoder(toy_pairs(), toy_config(), epochs=6, lr=1.0, seed=5)
        assert np.array_equal(a.w_text, b.w_text)
        assert np.array_equal(a.w_video, b.w_video)
        assert a.final_recall == b.final_recall

    def test_loss_decreases_on_toy_data(self):
        result = train_toy_dual_encoder(toy_pairs(), toy_config(), epochs=8, lr=1.0, seed=1)
        assert result.losses[-1] < result.losses[0]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train_toy_dual_encoder([], toy_config(), epochs=1, lr=0.1, seed=0)

    def test_holdout_queries_one_per_anchor(self):
        result = train_toy_dual_encoder(toy_pairs(), toy_config(), epochs=1, lr=0.1, seed=2)
        assert result.query_count == 4


class TestEvaluateRetrieval:
    def test_perfect_alignment(self):
        videos = np.eye(4)
        metrics = evaluate_retrieval(np.eye(4), np.eye(4), videos, [0, 1, 2, 3], videos)
        assert metrics[1] == 1.0
        assert metrics[5] == 1.0

    def test_rank_ties_resolve_to_lower_index(self):
        videos = np.stack([np.array([1.0, 0.0]), np.array([1.0, 0.0])])
        queries = np.array([[1.0, 0.0]])
        first = evaluate_retrieval(np.eye(2), np.eye(2), queries, [0], videos)
        second = evaluate_retrieval(np.eye(2), np.eye(2), queries, [1], videos)
        assert first[1] == 1.0
        assert second[1] == 0.0
