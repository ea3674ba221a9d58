"""Stage orchestration: config, artifacts, manifests, and the full run.

Every stage consumes the previous stage's artifact file and writes its
own next to a manifest describing what happened (input digest, config
digest, counts, skips). Manifests carry no timestamps or absolute
paths, so a rerun with the same input and config reproduces every
output byte-for-byte; combined with the gateway's response cache this
is also what makes interrupted runs resumable — rerunning a stage
replays cached provider calls instead of paying for them again.

Artifact layout under ``output_dir``::

    expanded.jsonl                merged expansion output
    rounds/round_<i>.jsonl        newly created records per round
    embeddings.npy                float64 matrix, one row per record
    embedding_ids.json            row ids aligned with the matrix
    variety.jsonl                 variety-curated dataset
    variety_diagnostics.jsonl     id, row_variance, selected flag
    scored.jsonl                  dataset plus per-record score fields
    curated.jsonl                 final quality-curated dataset
    reports/                      composition, histogram, cost (json + txt)
    manifests/                    one manifest per stage plus run.json
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import composition_report, estimate_cost, score_histogram
from .expansion import ExpansionConfig, ExpansionError, expand_detailed
from .gateway import EmbeddingMatrix, LlmGateway, ProviderConfig, ResponseCache
from .providers import HttpProvider, mock_provider
from .quality import (
    QualityConfig,
    default_few_shot,
    load_few_shot,
    load_scored_dataset,
    quality_curate,
    save_scored_dataset,
    score_dataset,
)
from .records import Dataset, load_dataset, save_dataset
from .variety import VarietyConfig, variety_curate_detailed

logger = logging.getLogger("instrefine.pipeline")


class PipelineError(RuntimeError):
    """A stage could not run (bad config, missing prerequisite, ...)."""


class MissingArtifactError(PipelineError):
    """A prerequisite stage artifact does not exist."""

    def __init__(self, path: Path, hint: str):
        super().__init__(f"expected file {path} is missing; {hint}")
        self.path = path


@dataclass(frozen=True)
class MockSettings:
    enabled: bool = True
    seed: int = 0
    embed_dim: int = 1536


@dataclass(frozen=True)
class QualitySettings:
    """Quality-stage knobs as they appear in config files.

    Few-shot anchors are referenced by path (or default fixtures for
    the task profile); :meth:`resolve` turns this into a full
    :class:`~instrefine.quality.QualityConfig`.
    """

    weight_gpt: float = 0.8
    weight_len: float = 0.2
    length_ref: int = 2048
    length_score_max: float = 100.0
    keep_count: int | None = None
    keep_fraction: float | None = None
    few_shot_path: str | None = None

    def resolve(self, task_profile: str) -> QualityConfig:
        if self.few_shot_path is not None:
            few_shot = load_few_shot(self.few_shot_path)
        else:
            few_shot = default_few_shot(task_profile)
        return QualityConfig(
            few_shot=few_shot,
            weight_gpt=self.weight_gpt,
            weight_len=self.weight_len,
            length_ref=self.length_ref,
            length_score_max=self.length_score_max,
            keep_count=self.keep_count,
            keep_fraction=self.keep_fraction,
        )


@dataclass(frozen=True)
class ReportSettings:
    histogram_bin_width: float = 5.0
    hours_per_kitem: float = 2.5
    emission_rate: float = 0.09


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs, loadable from one JSON file.

    The credential never appears here; the provider section only names
    the environment variable it is read from.
    """

    input_path: str
    output_dir: str
    task_profile: str = "code"
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    variety: VarietyConfig = field(default_factory=VarietyConfig)
    quality: QualitySettings = field(default_factory=QualitySettings)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    mock: MockSettings = field(default_factory=MockSettings)
    reports: ReportSettings = field(default_factory=ReportSettings)
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if self.expansion.task_profile != self.task_profile:
            raise PipelineError(
                "expansion task_profile must match the pipeline task_profile"
            )

    # -- construction -----------------------------------------------------

    @staticmethod
    def from_dict(raw: dict) -> "PipelineConfig":
        try:
            expansion_raw = dict(raw.get("expansion", {}))
            expansion_raw["task_profile"] = raw.get("task_profile", "code")
            return PipelineConfig(
                input_path=raw["input_path"],
                output_dir=raw["output_dir"],
                task_profile=raw.get("task_profile", "code"),
                expansion=ExpansionConfig(**expansion_raw),
                variety=VarietyConfig(**raw.get("variety", {})),
                quality=QualitySettings(**raw.get("quality", {})),
                provider=ProviderConfig(**raw.get("provider", {})),
                mock=MockSettings(**raw.get("mock", {})),
                reports=ReportSettings(**raw.get("reports", {})),
                cache_dir=raw.get("cache_dir"),
            )
        except KeyError as exc:
            raise PipelineError(f"config is missing required key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise PipelineError(f"invalid config: {exc}") from exc

    @staticmethod
    def from_file(path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(path, "pass --config with a valid config file")
        with path.open("r", encoding="utf-8") as handle:
            try:
                raw = json.load(handle)
            except json.JSONDecodeError as exc:
                raise PipelineError(f"config {path} is not valid JSON: {exc}") from exc
        return PipelineConfig.from_dict(raw)

    # -- derived ----------------------------------------------------------

    def config_digest(self) -> str:
        """Digest of the semantic knobs only.

        Workspace locations (paths) are excluded so the same logical run
        in two directories produces identical manifests.
        """
        payload = dataclasses.asdict(self)
        payload.pop("input_path")
        payload.pop("output_dir")
        payload.pop("cache_dir")
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def out(self) -> Path:
        return Path(self.output_dir)

    def quality_config(self) -> QualityConfig:
        return self.quality.resolve(self.task_profile)


def build_gateway(config: PipelineConfig) -> LlmGateway:
    """Provider + cache per the config; mock mode needs no credential."""
    if config.mock.enabled:
        provider = mock_provider(config.mock.seed, embed_dim=config.mock.embed_dim)
    else:
        provider = HttpProvider(config.provider)
    cache_dir = Path(config.cache_dir) if config.cache_dir else config.out() / "cache"
    return LlmGateway(provider, config.provider, cache=ResponseCache(cache_dir))


# -- artifact helpers ---------------------------------------------------------


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(obj, handle, ensure_ascii=False, sort_keys=True, indent=2)
        handle.write("\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, hint)
    return path


def _load_stage_dataset(config: PipelineConfig, name: str, hint: str) -> Dataset:
    path = _require(config.out() / name, hint)
    return load_dataset(path, config.task_profile)


def _write_manifest(config: PipelineConfig, stage: str, body: dict) -> dict:
    manifest = {"stage": stage, "config_digest": config.config_digest(), **body}
    _write_json(config.out() / "manifests" / f"{stage}.json", manifest)
    return manifest


def embedding_text(record) -> str:
    """Text sent to the embedding model: all three content fields."""
    return f"{record.instruction}\n{record.input}\n{record.output}"


# -- stages -------------------------------------------------------------------


def stage_expand(config: PipelineConfig) -> dict:
    """Rewrite rounds + merge; writes expanded.jsonl and round files."""
    input_path = _require(Path(config.input_path), "point input_path at a dataset file")
    dataset = load_dataset(input_path, config.task_profile)
    gateway = build_gateway(config)

    rounds_dir = config.out() / "rounds"
    round_counts: list[dict] = []

    def keep_round(index: int, produced: Dataset) -> None:
        save_dataset(produced, rounds_dir / f"round_{index}.jsonl")
        round_counts.append({"round": index, "records": len(produced)})

    try:
        report = expand_detailed(
            dataset, gateway, config.expansion, round_hook=keep_round
        )
    except ExpansionError as exc:
        raise PipelineError(
            f"expansion aborted: {exc}; {len(round_counts)} completed round(s) "
            f"remain under {rounds_dir}"
        ) from exc
    save_dataset(report.merged, config.out() / "expanded.jsonl")
    return _write_manifest(
        config,
        "expand",
        {
            "input_digest": _sha256_file(input_path),
            "counts": {
                "input": len(dataset),
                "merged": len(report.merged),
                "rounds": round_counts,
            },
            "skips": [
                {"record_id": s.record_id, "stage": s.stage, "reason": s.reason}
                for s in report.skips
            ],
        },
    )


def stage_embed(config: PipelineConfig) -> dict:
    """Embed every expanded record; writes embeddings.npy + id list."""
    dataset = _load_stage_dataset(
        config, "expanded.jsonl", "run the expand stage first"
    )
    gateway = build_gateway(config)
    result = gateway.embed_batch([(r.id, embedding_text(r)) for r in dataset])
    for failure in result.failures:
        logger.warning("embedding failed for %s: %s", failure.item_id, failure.error)
    if result.failures and not config.expansion.skip_on_error:
        raise PipelineError(
            f"{len(result.failures)} records failed to embed "
            f"(first: {result.failures[0].item_id})"
        )
    np.save(config.out() / "embeddings.npy", result.matrix.values)
    _write_json(config.out() / "embedding_ids.json", list(result.matrix.row_ids))
    return _write_manifest(
        config,
        "embed",
        {
            "input_digest": _sha256_file(config.out() / "expanded.jsonl"),
            "counts": {
                "input": len(dataset),
                "embedded": result.matrix.n_rows,
                "dims": result.matrix.dims,
            },
            "skips": [
                {"record_id": f.item_id, "stage": "embed", "reason": str(f.error)}
                for f in result.failures
            ],
        },
    )


def load_embeddings(config: PipelineConfig) -> EmbeddingMatrix:
    values_path = _require(
        config.out() / "embeddings.npy", "run the embed stage first"
    )
    ids_path = _require(
        config.out() / "embedding_ids.json", "run the embed stage first"
    )
    with ids_path.open("r", encoding="utf-8") as handle:
        row_ids = json.load(handle)
    return EmbeddingMatrix(row_ids=tuple(row_ids), values=np.load(values_path))


def stage_variety(config: PipelineConfig) -> dict:
    """Variety curation; writes variety.jsonl plus per-record diagnostics."""
    dataset = _load_stage_dataset(
        config, "expanded.jsonl", "run the expand stage first"
    )
    embeddings = load_embeddings(config)
    embedded_ids = set(embeddings.row_ids)
    if embedded_ids - set(dataset.ids()):
        raise PipelineError("embeddings.npy carries ids not present in expanded.jsonl")
    if len(embedded_ids) < len(dataset):
        # Records whose embedding call failed are not eligible for curation.
        dataset = Dataset.from_records(
            (r for r in dataset if r.id in embedded_ids), config.task_profile
        )

    result = variety_curate_detailed(dataset, embeddings, config.variety)
    save_dataset(result.curated, config.out() / "variety.jsonl")
    with (config.out() / "variety_diagnostics.jsonl").open(
        "w", encoding="utf-8"
    ) as handle:
        for rid, score in zip(result.reduced.row_ids, result.scores):
            handle.write(
                json.dumps(
                    {
                        "id": rid,
                        "row_variance": score,
                        "selected": rid in result.selected_ids,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return _write_manifest(
        config,
        "variety",
        {
            "input_digest": _sha256_file(config.out() / "expanded.jsonl"),
            "counts": {
                "input": len(dataset),
                "selected": len(result.curated),
                "reduced_dim": result.reduced.dims,
            },
            "skips": [],
        },
    )


def stage_score(config: PipelineConfig) -> dict:
    """Rubric + length scoring; writes scored.jsonl."""
    dataset = _load_stage_dataset(
        config, "variety.jsonl", "run the variety stage first"
    )
    quality_config = config.quality_config()  # validate before any provider call
    gateway = build_gateway(config)
    assessments = score_dataset(dataset, gateway, quality_config)
    save_scored_dataset(dataset, assessments, config.out() / "scored.jsonl")
    failures = sum(1 for a in assessments if not a.gpt.parse_ok)
    return _write_manifest(
        config,
        "score",
        {
            "input_digest": _sha256_file(config.out() / "variety.jsonl"),
            "counts": {"scored": len(assessments), "parse_failures": failures},
            "skips": [],
        },
    )


def stage_quality(config: PipelineConfig) -> dict:
    """Keep the top-scored records; writes curated.jsonl."""
    scored_path = _require(
        config.out() / "scored.jsonl", "run the score stage first"
    )
    dataset, assessments = load_scored_dataset(scored_path, config.task_profile)
    curated = quality_curate(dataset, assessments, config.quality_config())
    save_dataset(curated, config.out() / "curated.jsonl")
    return _write_manifest(
        config,
        "quality",
        {
            "input_digest": _sha256_file(scored_path),
            "counts": {"input": len(dataset), "kept": len(curated)},
            "skips": [],
        },
    )


def stage_report(config: PipelineConfig) -> dict:
    """Composition, histogram, and cost reports over the run's artifacts."""
    curated = _load_stage_dataset(
        config, "curated.jsonl", "run the quality stage first"
    )
    scored_path = _require(config.out() / "scored.jsonl", "run the score stage first")
    _, assessments = load_scored_dataset(scored_path, config.task_profile)
    original = load_dataset(
        _require(Path(config.input_path), "point input_path at a dataset file"),
        config.task_profile,
    )
    expanded = _load_stage_dataset(
        config, "expanded.jsonl", "run the expand stage first"
    )

    reports_dir = config.out() / "reports"
    composition = composition_report(curated)
    _write_json(reports_dir / "composition.json", composition.to_dict())
    _write_text(reports_dir / "composition.txt", composition.to_text())

    histogram = score_histogram(assessments, config.reports.histogram_bin_width)
    _write_json(reports_dir / "histogram.json", histogram.to_dict())
    _write_text(reports_dir / "histogram.txt", histogram.to_text())

    entries = []
    for label, size in (
        ("original", len(original)),
        ("expanded", len(expanded)),
        ("curated", len(curated)),
    ):
        cost = estimate_cost(
            size, config.reports.hours_per_kitem, config.reports.emission_rate
        )
        entries.append({"label": label, **cost.to_dict()})
    _write_json(reports_dir / "cost.json", {"entries": entries})
    cost_lines = [f"{'dataset':>10} {'items':>8} {'gpu_hours':>10} {'co2_kg':>8}"]
    for entry in entries:
        cost_lines.append(
            f"{entry['label']:>10} {entry['dataset_size']:>8} "
            f"{entry['gpu_hours']:>10.2f} {entry['co2_kg']:>8.2f}"
        )
    _write_text(reports_dir / "cost.txt", "\n".join(cost_lines) + "\n")

    return _write_manifest(
        config,
        "report",
        {
            "input_digest": _sha256_file(config.out() / "curated.jsonl"),
            "counts": {
                "curated": len(curated),
                "histogram_total": histogram.total(),
            },
            "skips": [],
        },
    )


_STAGES = (
    ("expand", stage_expand),
    ("embed", stage_embed),
    ("variety", stage_variety),
    ("score", stage_score),
    ("quality", stage_quality),
    ("report", stage_report),
)


def run_all(config: PipelineConfig) -> dict:
    """Run every stage in order and chain their manifests into run.json.

    On failure the run manifest records the last completed stage, so an
    operator can see where to resume; rerunning is cheap because every
    provider call is served from the response cache.
    """
    config.quality_config()  # fail on bad quality settings before any provider call
    stage_manifests: dict[str, dict] = {}
    last_completed: str | None = None
    try:
        for name, stage in _STAGES:
            stage_manifests[name] = stage(config)
            last_completed = name
    except BaseException as exc:
        _write_json(
            config.out() / "manifests" / "run.json",
            {
                "status": "failed",
                "last_completed_stage": last_completed,
                "error": f"{type(exc).__name__}: {exc}",
                "config_digest": config.config_digest(),
                "stages": stage_manifests,
            },
        )
        raise
    manifest = {
        "status": "complete",
        "last_completed_stage": last_completed,
        "config_digest": config.config_digest(),
        "stages": stage_manifests,
    }
    _write_json(config.out() / "manifests" / "run.json", manifest)
    return manifest


__all__ = [
    "PipelineError",
    "MissingArtifactError",
    "MockSettings",
    "QualitySettings",
    "ReportSettings",
    "PipelineConfig",
    "build_gateway",
    "embedding_text",
    "load_embeddings",
    "stage_expand",
    "stage_embed",
    "stage_variety",
    "stage_score",
    "stage_quality",
    "stage_report",
    "run_all",
]
