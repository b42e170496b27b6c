"""Command-line pipeline: augment, attributes, train, and report stages.

Each subcommand reads a JSON config and a JSONL dataset (or a prior run
artifact), writes one artifact plus a ``<output>.manifest.json`` manifest,
and never modifies its inputs.  Exit codes: 0 success, 1 runtime or check
failure, 2 config or usage error.  Setting ``TOOL_OFFLINE=1`` pins every
backend to its offline variant regardless of config.
"""

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .attribute import (
    build_nli,
    cluster_attributes,
    filter_pool,
    generate_attributes,
    rank_by_video,
    sweep_thresholds,
)
from .augment import build_rewriter, generate_variant_set
from .bridge import (
    gradient_check,
    loss_config_from_pipeline,
    loss_weighted,
    train_toy_dual_encoder,
)
from .core import config_hash, load_config, load_dataset
from .embed import build_embedder
from .errors import ArtifactError, ConfigError, DatasetError, TextBridgeError
from .score import compute_report

# Upper bound on raw attribute candidates generated per sample.
ATTRIBUTE_POOL_CAP = 20

# Fixed grids for the attribute threshold sweep persisted with each run.
SWEEP_GAMMA1 = (0.3, 0.5, 0.7)
SWEEP_GAMMA2 = (2.0, 3.0, 4.0)
SWEEP_GAMMA3 = (0.5, 0.7, 0.9)

GRAD_CHECK_TOLERANCE = 1e-5
GRAD_CHECK_ITEMS = 4

# Stages whose record counts must never grow from one to the next.
_FILTER_STAGES = ("generate", "cluster", "rank", "filter")


@dataclass(frozen=True)
class StageRecord:
    """One pipeline stage: wall time and records flowing out of it."""

    name: str
    seconds: float
    records: int


@dataclass(frozen=True)
class RunManifest:
    """Provenance sidecar written next to every command's output."""

    command: str
    config_hash: str
    seed: int
    input_path: str
    stages: tuple
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        counts = [s.records for s in self.stages if s.name in _FILTER_STAGES]
        for before, after in zip(counts, counts[1:]):
            if after > before:
                raise ValueError(
                    "filter-stage record counts must be non-increasing, got "
                    "%d -> %d" % (before, after)
                )

    def to_json_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "input_path": self.input_path,
            "stages": [
                {"name": s.name, "seconds": round(s.seconds, 6), "records": s.records}
                for s in self.stages
            ],
            "warnings": list(self.warnings),
        }


class _StageClock:
    """Collects (stage, seconds, records) rows as the command progresses."""

    def __init__(self):
        self.stages = []
        self._mark = time.perf_counter()

    def done(self, name: str, records: int) -> None:
        now = time.perf_counter()
        self.stages.append(StageRecord(name, now - self._mark, records))
        self._mark = now


def _effective_config(args):
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _check_paths(input_path: str, output_path: str) -> None:
    if os.path.abspath(input_path) == os.path.abspath(output_path):
        raise ConfigError("<output>", "output path must differ from input path")


def _manifest_path(output_path: str) -> str:
    return output_path + ".manifest.json"


def _write_outputs(writes) -> None:
    """Write (path, text) pairs; on any failure remove everything written."""
    done = []
    try:
        for path, text in writes:
            parent = os.path.dirname(os.path.abspath(path))
            os.makedirs(parent, exist_ok=True)
            done.append(path)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
    except BaseException:
        for path in done:
            try:
                os.remove(path)
            except OSError:
                pass
        raise


def _dump_artifact(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _map_samples(fn, items, parallelism: int) -> list:
    if parallelism > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _require_videos(pairs) -> None:
    missing = [sample.id for sample, video in pairs if video is None]
    if missing:
        raise DatasetError(
            "samples missing video features: %s" % ", ".join(missing)
        )


def _check_video_dims(pairs, embedder) -> None:
    """Cross-modal similarity needs text and video vectors in one space."""
    with_video = [(sample, video) for sample, video in pairs if video is not None]
    if not with_video:
        return
    text_dim = int(embedder.embed_one(with_video[0][0].text).values.shape[0])
    wrong = sorted(
        {int(video.pooled.shape[0]) for _, video in with_video} - {text_dim}
    )
    if wrong:
        raise DatasetError(
            "video features are %s-dimensional but the configured embedder "
            "produces %d-dimensional vectors"
            % ("/".join(str(d) for d in wrong), text_dim)
        )


def _recall_dict(metrics: dict) -> dict:
    return {
        "recall_at_1": metrics[1],
        "recall_at_5": metrics[5],
    }


def _variant_dict(variant) -> dict:
    target = variant.target
    if hasattr(target, "value"):
        target = target.value
    return {
        "text": variant.text,
        "polarity": variant.polarity,
        "level": variant.level,
        "target": target,
        "word_index": variant.word_index,
        "logprob": variant.logprob,
    }


def cmd_augment(args) -> int:
    """Emit each sample with its variant set and significance report."""
    config = _effective_config(args)
    _check_paths(args.input, args.output)
    clock = _StageClock()
    pairs = load_dataset(args.input)
    clock.done("load", len(pairs))
    warnings = []
    if not pairs:
        warnings.append("input dataset is empty")
    rewriter = build_rewriter(config.rewriter)
    embedder = build_embedder(config.embedder)

    def augment_one(pair):
        sample, _ = pair
        variant_set = generate_variant_set(rewriter, sample, config)
        report = compute_report(embedder, None, variant_set)
        return {
            "id": sample.id,
            "video_id": sample.video_id,
            "text": sample.text,
            "variants": {
                "positives": [_variant_dict(v) for v in variant_set.positives],
                "negatives": [_variant_dict(v) for v in variant_set.negatives],
                "probs": list(variant_set.probs),
                "failed_components": [
                    list(entry) for entry in variant_set.failed_components
                ],
            },
            "significance": {
                "s1": None if report.s1 is None else list(report.s1),
                "s2": list(report.s2),
            },
        }

    records = _map_samples(augment_one, pairs, config.parallelism)
    clock.done("augment", len(records))
    body = "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records)
    clock.done("write", len(records))
    manifest = RunManifest(
        command="augment",
        config_hash=config_hash(config),
        seed=config.seed,
        input_path=args.input,
        stages=clock.stages,
        warnings=warnings,
    )
    _write_outputs(
        [
            (args.output, body),
            (_manifest_path(args.output), _dump_artifact(manifest.to_json_dict())),
        ]
    )
    return 0


def _verdict_dict(verdict) -> dict:
    return {
        "text": verdict.text,
        "entailment": verdict.entailment,
        "tree_distance": verdict.tree_distance,
        "rouge": verdict.rouge,
        "o1": verdict.o1,
        "o2": verdict.o2,
        "o3": verdict.o3,
        "kept": verdict.kept,
    }


def cmd_attributes(args) -> int:
    """Build, rank, and filter attribute pools; persist verdicts and sweep."""
    config = _effective_config(args)
    _check_paths(args.input, args.output)
    clock = _StageClock()
    pairs = load_dataset(args.input)
    clock.done("load", len(pairs))
    warnings = []
    if not pairs:
        warnings.append("input dataset is empty")
    _require_videos(pairs)
    rewriter = build_rewriter(config.rewriter)
    embedder = build_embedder(config.embedder)
    _check_video_dims(pairs, embedder)
    nli = build_nli(config.nli)

    def pools_one(pair):
        sample, video = pair
        raw = generate_attributes(rewriter, embedder, sample, ATTRIBUTE_POOL_CAP)
        clustered = cluster_attributes(raw, config.n_c, config.seed)
        ranked = rank_by_video(clustered, video)
        filtered = filter_pool(ranked, sample, video, nli, config)
        sweep = sweep_thresholds(
            ranked,
            sample,
            video,
            nli,
            config,
            SWEEP_GAMMA1,
            SWEEP_GAMMA2,
            SWEEP_GAMMA3,
        )
        return raw, ranked, filtered, sweep

    results = _map_samples(pools_one, pairs, config.parallelism)
    raw_total = sum(len(raw) for raw, _, _, _ in results)
    clock.done("generate", raw_total)
    clock.done("cluster", raw_total)
    clock.done("rank", sum(len(ranked) for _, ranked, _, _ in results))
    kept_total = sum(len(filtered) for _, _, filtered, _ in results)
    clock.done("filter", kept_total)
    if pairs and kept_total == 0:
        warnings.append("every filtered pool is empty at the configured thresholds")

    sample_blocks = []
    sweep_totals = {}
    for (sample, _), (_, ranked, filtered, sweep) in zip(pairs, results):
        sample_blocks.append(
            {
                "id": sample.id,
                "pool": [
                    {
                        "text": c.text,
                        "cluster": c.cluster,
                        "video_sim": c.video_sim,
                        "selected": c.selected,
                    }
                    for c in ranked.candidates
                ],
                "verdicts": [_verdict_dict(v) for v in filtered.verdicts],
                "filtered": [c.text for c in filtered.candidates],
            }
        )
        for g1, g2, g3, kept in sweep:
            key = (g1, g2, g3)
            sweep_totals[key] = sweep_totals.get(key, 0) + kept
    sweep_rows = [
        [g1, g2, g3, sweep_totals[(g1, g2, g3)]]
        for g1 in SWEEP_GAMMA1
        for g2 in SWEEP_GAMMA2
        for g3 in SWEEP_GAMMA3
    ]
    clock.done("sweep", len(sweep_rows))
    payload = {
        "kind": "attributes_run",
        "config_hash": config_hash(config),
        "seed": config.seed,
        "samples": sample_blocks,
        "sweep": {
            "gamma1": list(SWEEP_GAMMA1),
            "gamma2": list(SWEEP_GAMMA2),
            "gamma3": list(SWEEP_GAMMA3),
            "rows": sweep_rows,
        },
    }
    body = _dump_artifact(payload)
    clock.done("write", len(sample_blocks))
    manifest = RunManifest(
        command="attributes",
        config_hash=config_hash(config),
        seed=config.seed,
        input_path=args.input,
        stages=clock.stages,
        warnings=warnings,
    )
    _write_outputs(
        [
            (args.output, body),
            (_manifest_path(args.output), _dump_artifact(manifest.to_json_dict())),
        ]
    )
    return 0


def cmd_train(args) -> int:
    """Train the toy dual encoder; persist loss report and recall metrics."""
    config = _effective_config(args)
    _check_paths(args.input, args.output)
    clock = _StageClock()
    pairs = load_dataset(args.input)
    clock.done("load", len(pairs))
    _require_videos(pairs)
    _check_video_dims(pairs, build_embedder(config.embedder))
    result = train_toy_dual_encoder(
        pairs, config, epochs=args.epochs, lr=args.lr, seed=config.seed
    )
    clock.done("train", result.item_count)
    loss_cfg = loss_config_from_pipeline(config)
    report = loss_weighted(result.items, loss_cfg)
    warnings = []
    exit_code = 0
    if args.grad_check:
        max_rel_err = gradient_check(result.items[:GRAD_CHECK_ITEMS], loss_cfg)
        report = replace(report, grad_check=max_rel_err)
        if max_rel_err > GRAD_CHECK_TOLERANCE:
            warnings.append(
                "gradient check failed: max_rel_err %.3e exceeds %.0e"
                % (max_rel_err, GRAD_CHECK_TOLERANCE)
            )
            exit_code = 1
        clock.done("grad_check", min(GRAD_CHECK_ITEMS, len(result.items)))
    payload = {
        "kind": "train_run",
        "config_hash": config_hash(config),
        "seed": config.seed,
        "loss": {
            "beta": loss_cfg.beta,
            "tau": loss_cfg.tau,
            "variant": loss_cfg.variant,
            "reduction": loss_cfg.reduction,
        },
        "loss_report": report.to_json_dict(),
        "losses": list(result.losses),
        "metrics": {
            "initial": _recall_dict(result.initial_recall),
            "final": _recall_dict(result.final_recall),
        },
        "item_count": result.item_count,
        "query_count": result.query_count,
    }
    body = _dump_artifact(payload)
    clock.done("write", result.item_count)
    manifest = RunManifest(
        command="train",
        config_hash=config_hash(config),
        seed=config.seed,
        input_path=args.input,
        stages=clock.stages,
        warnings=warnings,
    )
    _write_outputs(
        [
            (args.output, body),
            (_manifest_path(args.output), _dump_artifact(manifest.to_json_dict())),
        ]
    )
    return exit_code


def _load_artifact(path: str):
    """Classify a prior run artifact: ('train'|'attributes'|'augment', data)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ArtifactError("artifact not found: %s" % path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        kind = data.get("kind")
        if kind == "train_run":
            return "train", data
        if kind == "attributes_run":
            return "attributes", data
        raise ArtifactError("not a run artifact: %s" % path)
    records = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError:
            raise ArtifactError("not a run artifact: %s" % path)
        if not isinstance(record, dict) or "variants" not in record:
            raise ArtifactError("not a run artifact: %s" % path)
        records.append(record)
    return "augment", {"kind": "augment_run", "samples": records}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _train_report(data: dict):
    report = data["loss_report"]
    items = report["items"]
    max_c = max((len(it["component_losses"]) for it in items), default=0)
    header = ["item_id", "weight", "argmax", "weighted_loss"]
    header += ["component_%d" % c for c in range(max_c)]
    rows = []
    for it in items:
        losses = it["component_losses"]
        weighted = it["weight"] * losses[it["argmax"]]
        row = [it["id"], repr(it["weight"]), it["argmax"], repr(weighted)]
        row += [repr(x) for x in losses]
        row += [""] * (max_c - len(losses))
        rows.append(row)
    lines = ["train run summary"]
    lines.append("  items: %d  queries: %d" % (data["item_count"], data["query_count"]))
    lines.append(
        "  loss: beta=%g tau=%g variant=%s reduction=%s"
        % (
            data["loss"]["beta"],
            data["loss"]["tau"],
            data["loss"]["variant"],
            data["loss"]["reduction"],
        )
    )
    lines.append("  weighted loss total: %.12g" % report["total"])
    trajectory = data.get("losses", [])
    if trajectory:
        lines.append(
            "  training loss: first %.6g last %.6g over %d epochs"
            % (trajectory[0], trajectory[-1], len(trajectory))
        )
    for phase in ("initial", "final"):
        metrics = data["metrics"][phase]
        lines.append(
            "  %s recall@1 %.4f recall@5 %.4f"
            % (phase, metrics["recall_at_1"], metrics["recall_at_5"])
        )
    if report.get("grad_check") is not None:
        lines.append(
            "  gradient check max_rel_err: %.3e"
            % report["grad_check"]["max_rel_err"]
        )
    return "\n".join(lines) + "\n", _csv_text(header, rows)


def _attributes_report(data: dict):
    samples = data["samples"]
    kept = sum(len(s["filtered"]) for s in samples)
    pooled = sum(len(s["pool"]) for s in samples)
    lines = ["attributes run summary"]
    lines.append(
        "  samples: %d  pooled candidates: %d  kept: %d" % (len(samples), pooled, kept)
    )
    sweep = data.get("sweep")
    if sweep and sweep.get("rows"):
        lines.append("  threshold sweep (kept totals):")
        lines.append("    gamma1  gamma2  gamma3  kept")
        for g1, g2, g3, count in sweep["rows"]:
            lines.append("    %-7g %-7g %-7g %d" % (g1, g2, g3, count))
    rows = []
    for block in samples:
        for v in block["verdicts"]:
            rows.append(
                [
                    block["id"],
                    v["text"],
                    repr(v["entailment"]),
                    v["tree_distance"],
                    repr(v["rouge"]),
                    int(v["o1"]),
                    int(v["o2"]),
                    int(v["o3"]),
                    int(v["kept"]),
                ]
            )
    header = [
        "sample_id",
        "text",
        "entailment",
        "tree_distance",
        "rouge",
        "o1",
        "o2",
        "o3",
        "kept",
    ]
    return "\n".join(lines) + "\n", _csv_text(header, rows)


def _augment_report(data: dict):
    samples = data["samples"]
    total_pos = sum(len(s["variants"]["positives"]) for s in samples)
    total_neg = sum(len(s["variants"]["negatives"]) for s in samples)
    lines = ["augment run summary"]
    lines.append(
        "  samples: %d  positives: %d  negatives: %d"
        % (len(samples), total_pos, total_neg)
    )
    rows = []
    for s in samples:
        s2 = s["significance"]["s2"]
        mean_s2 = sum(s2) / len(s2) if s2 else 0.0
        rows.append(
            [
                s["id"],
                len(s["variants"]["positives"]),
                len(s["variants"]["negatives"]),
                repr(mean_s2),
            ]
        )
    header = ["sample_id", "positives", "negatives", "mean_s2"]
    return "\n".join(lines) + "\n", _csv_text(header, rows)


def cmd_report(args) -> int:
    """Render a prior artifact as a text summary plus a CSV table."""
    _check_paths(args.input, args.output)
    clock = _StageClock()
    kind, data = _load_artifact(args.input)
    record_count = len(data.get("samples", ())) if kind != "train" else len(
        data["loss_report"]["items"]
    )
    clock.done("load", record_count)
    if kind == "train":
        summary, table = _train_report(data)
    elif kind == "attributes":
        summary, table = _attributes_report(data)
    else:
        summary, table = _augment_report(data)
    clock.done("render", record_count)
    config = load_config(args.config) if args.config else None
    base, _ = os.path.splitext(args.output)
    csv_path = base + ".csv"
    manifest = RunManifest(
        command="report",
        config_hash=config_hash(config) if config else "",
        seed=config.seed if config else 0,
        input_path=args.input,
        stages=clock.stages,
    )
    _write_outputs(
        [
            (args.output, summary),
            (csv_path, table),
            (_manifest_path(args.output), _dump_artifact(manifest.to_json_dict())),
        ]
    )
    return 0


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textbridge",
        description="Text augmentation and video-text bridging pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--input", required=True, help="input dataset or artifact")
        p.add_argument("--output", required=True, help="output artifact path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p_augment = sub.add_parser(
        "augment", help="generate variants and significance scores per sample"
    )
    common(p_augment)
    p_augment.set_defaults(func=cmd_augment)

    p_attr = sub.add_parser(
        "attributes", help="build, rank, and filter attribute pools"
    )
    common(p_attr)
    p_attr.set_defaults(func=cmd_attributes)

    p_train = sub.add_parser("train", help="train the toy dual encoder")
    common(p_train)
    p_train.add_argument(
        "--epochs", type=_nonneg_int, default=20, help="training epochs"
    )
    p_train.add_argument(
        "--lr", type=_nonneg_float, default=0.5, help="learning rate"
    )
    p_train.add_argument(
        "--grad-check",
        action="store_true",
        help="verify analytic gradients against finite differences",
    )
    p_train.set_defaults(func=cmd_train)

    p_report = sub.add_parser(
        "report", help="summarize a prior run artifact as text plus CSV"
    )
    common(p_report, config_required=False)
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except TextBridgeError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
