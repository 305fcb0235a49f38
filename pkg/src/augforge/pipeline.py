"""Run orchestration: configuration, seeding, parallel scheduling, records.

Output bytes are a pure function of (config, input dataset, backend
behavior): every item draws its randomness from seeds derived per
(episode, augmentation index, stage), items write only inside their own
output directory, and the manifest is assembled in sorted order, so the
worker count never changes results.
"""

from __future__ import annotations

import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from augforge import __version__
from augforge.seeding import derive_seed, split_seed, seeded_index
from augforge.dataset import (
    DatasetError,
    DatasetManifest,
    load_episode,
    load_manifest,
    save_episode,
    save_manifest,
    validate_dataset,
)
from augforge.meshes import load_mesh_catalog
from augforge.geometry.kinematics import load_chain
from augforge.geometry.topdown import Workspace
from augforge.backends import BackendDescriptor, get_backend
from augforge.structured import (
    COMPONENTS,
    AugmentationPlan,
    PromptGrammar,
    StructuredConfig,
    apply_plan,
    plan_augmentation,
    sample_prompt,
)
from augforge.video import VideoContext, VideoPlan, augment_trajectory

__all__ = [
    "PipelineConfig",
    "FailureBudgetExceeded",
    "ValidationFailure",
    "derive_seed",
    "run_structured",
    "run_video",
    "stats",
    "reproduce_item",
]

FAILURE_BUDGET = 0.10
VIDEO_COMPONENTS = ("object_texture", "background")
MAX_PLAN_ATTEMPTS = 64


class ValidationFailure(Exception):
    """The input dataset does not satisfy the run's preconditions."""

    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class FailureBudgetExceeded(Exception):
    def __init__(self, failed: int, total: int, failures):
        super().__init__(f"{failed} of {total} items failed (> {FAILURE_BUDGET:.0%} budget)")
        self.failures = failures


@dataclass
class PipelineConfig:
    """One JSON document; command-line flags override individual fields."""

    global_seed: int = 0
    num_augmentations: int = 100
    workers: int = 1
    probabilities: dict = field(
        default_factory=lambda: {comp: 0.5 for comp in COMPONENTS}
    )
    max_distractors: int = 3
    grammar: PromptGrammar = field(default_factory=PromptGrammar)
    background_nouns: tuple = ("table",)
    workspace: Workspace = field(
        default_factory=lambda: Workspace((0.0, 1.0), (0.0, 1.0), 0.0, 0.01)
    )
    mesh_catalog: Optional[str] = None  # relative to the dataset root
    backends: dict = field(
        default_factory=lambda: {
            "inpaint": BackendDescriptor(kind="mock"),
            "segment": BackendDescriptor(kind="mock"),
            "track": BackendDescriptor(kind="mock"),
        }
    )
    video_probabilities: dict = field(
        default_factory=lambda: {"object_texture": 1.0, "background": 1.0}
    )
    include_originals: bool = False

    def __post_init__(self):
        if self.num_augmentations < 1:
            raise ValueError("num_augmentations must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for group in (self.probabilities, self.video_probabilities):
            for name, p in group.items():
                if not (0.0 <= p <= 1.0):
                    raise ValueError(f"probability {name!r} outside [0, 1]: {p}")

    @staticmethod
    def from_json(doc: dict) -> "PipelineConfig":
        kwargs = {}
        for key in ("global_seed", "num_augmentations", "workers", "max_distractors",
                    "mesh_catalog", "include_originals"):
            if key in doc:
                kwargs[key] = doc[key]
        if "probabilities" in doc:
            kwargs["probabilities"] = dict(doc["probabilities"])
        if "video_probabilities" in doc:
            kwargs["video_probabilities"] = dict(doc["video_probabilities"])
        if "grammar" in doc:
            g = doc["grammar"]
            kwargs["grammar"] = PromptGrammar(
                colors=tuple(g.get("colors", PromptGrammar().colors)),
                materials=tuple(g.get("materials", PromptGrammar().materials)),
                template=g.get("template", PromptGrammar().template),
            )
        if "background_nouns" in doc:
            kwargs["background_nouns"] = tuple(doc["background_nouns"])
        if "workspace" in doc:
            w = doc["workspace"]
            kwargs["workspace"] = Workspace(
                x_range=tuple(w["x_range"]),
                y_range=tuple(w["y_range"]),
                table_height=w["table_height"],
                topdown_resolution=w["topdown_resolution"],
            )
        if "backends" in doc:
            kwargs["backends"] = {
                role: BackendDescriptor.from_json(desc)
                for role, desc in doc["backends"].items()
            }
        return PipelineConfig(**kwargs)

    @staticmethod
    def load(path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return PipelineConfig.from_json(json.load(fh))


def _structured_config(config: PipelineConfig, dataset_root: Path) -> StructuredConfig:
    catalog = ()
    needs_catalog = any(
        config.probabilities.get(c, 0.0) > 0.0
        for c in ("object_shape", "receptacle_shape", "distractors")
    )
    if config.mesh_catalog is not None:
        catalog_path = Path(config.mesh_catalog)
        if not catalog_path.is_absolute():
            catalog_path = dataset_root / catalog_path
        catalog = tuple(load_mesh_catalog(catalog_path))
    elif (dataset_root / "meshes" / "catalog.json").exists():
        catalog = tuple(load_mesh_catalog(dataset_root / "meshes" / "catalog.json"))
    elif needs_catalog:
        raise ValidationFailure(
            ["shape/distractor components are enabled but the dataset has no mesh catalog"]
        )
    return StructuredConfig(
        probabilities=dict(config.probabilities),
        workspace=config.workspace,
        catalog=catalog,
        grammar=config.grammar,
        background_nouns=config.background_nouns,
        max_distractors=config.max_distractors,
    )


@dataclass
class AugmentationRecord:
    source_episode: str
    aug_index: int
    output_episode: str
    regime: str
    plan: dict
    backend: dict
    events: list
    engine_version: str = __version__

    def to_json(self) -> dict:
        return {
            "source_episode": self.source_episode,
            "aug_index": self.aug_index,
            "output_episode": self.output_episode,
            "regime": self.regime,
            "plan": self.plan,
            "backend": self.backend,
            "events": self.events,
            "engine_version": self.engine_version,
        }


def _backend_identity(backend) -> dict:
    health = backend.health()
    return {"name": health.get("name", "?"), "version": health.get("version", "?")}


def _run_items(config, items, worker_fn):
    """Run items through a bounded pool; returns (records, failures) sorted."""
    records = []
    failures = []

    def guarded(item):
        eid, k = item
        try:
            return ("ok", worker_fn(eid, k))
        except Exception as exc:  # noqa: BLE001 - per-item isolation is the contract
            return ("fail", {"source_episode": eid, "aug_index": k, "error": f"{type(exc).__name__}: {exc}"})

    if config.workers == 1:
        outcomes = [guarded(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(guarded, items))

    for status, payload in outcomes:
        (records if status == "ok" else failures).append(payload)
    records.sort(key=lambda r: (r.source_episode, r.aug_index))
    failures.sort(key=lambda f: (f["source_episode"], f["aug_index"]))
    return records, failures


def _copy_chains(dataset_root: Path, output_root: Path) -> None:
    chains = dataset_root / "chains"
    if chains.is_dir():
        shutil.copytree(chains, output_root / "chains", dirs_exist_ok=True)


def _finalize(
    output_root: Path,
    dataset_id: str,
    episode_entries: list,
    records: list,
    failures: list,
    total_items: int,
) -> DatasetManifest:
    manifest = DatasetManifest(
        dataset_id=dataset_id,
        episodes=sorted(episode_entries, key=lambda e: e["id"]),
        augmentations=[r.to_json() for r in records],
        failures=failures,
    )
    save_manifest(output_root, manifest)
    if len(failures) > FAILURE_BUDGET * total_items:
        raise FailureBudgetExceeded(len(failures), total_items, failures)
    return manifest


def run_structured(config: PipelineConfig, dataset_root, output_root) -> DatasetManifest:
    """Produce num_augmentations structured augmentations per source episode.

    Output episodes are named ``<source>__aug<k>``. Per-item failures are
    recorded and skipped; the run fails only when more than 10% of items
    fail.
    """
    dataset_root = Path(dataset_root)
    output_root = Path(output_root)
    problems = validate_dataset(dataset_root)
    if problems:
        raise ValidationFailure(problems)

    manifest_in = load_manifest(dataset_root)
    episode_ids = sorted(rec["id"] for rec in manifest_in.episodes)
    episodes = {eid: load_episode(dataset_root, eid) for eid in episode_ids}
    missing_masks = [
        eid
        for eid in episode_ids
        if episodes[eid].object_mask is None or episodes[eid].receptacle_mask is None
    ]
    if missing_masks:
        raise ValidationFailure(
            [f"episode {eid!r} has no object/receptacle masks" for eid in missing_masks]
        )

    scfg = _structured_config(config, dataset_root)
    backend = get_backend(config.backends["inpaint"])
    backend_id = _backend_identity(backend)
    output_root.mkdir(parents=True, exist_ok=True)
    _copy_chains(dataset_root, output_root)

    def worker(eid: str, k: int) -> AugmentationRecord:
        episode = episodes[eid]
        plan = plan_augmentation(scfg, episode, k, config.global_seed)
        augmented, events = apply_plan(episode, plan, scfg, backend)
        out_id = f"{eid}__aug{k}"
        save_episode(output_root, augmented.with_id(out_id))
        return AugmentationRecord(
            source_episode=eid,
            aug_index=k,
            output_episode=out_id,
            regime="structured",
            plan=plan.to_json(),
            backend=backend_id,
            events=events,
        )

    items = [(eid, k) for eid in episode_ids for k in range(config.num_augmentations)]
    records, failures = _run_items(config, items, worker)
    entries = [
        {"id": r.output_episode, "frames": episodes[r.source_episode].num_frames}
        for r in records
    ]
    return _finalize(
        output_root, f"{manifest_in.dataset_id}__structured", entries, records,
        failures, len(items),
    )


def _plan_video(config: PipelineConfig, episode, aug_index: int) -> VideoPlan:
    selected = set()
    for attempt in range(MAX_PLAN_ATTEMPTS):
        for comp in VIDEO_COMPONENTS:
            p = config.video_probabilities.get(comp, 0.0)
            draw = derive_seed(
                config.global_seed, episode.id, aug_index, 0, f"video-plan/{attempt}/{comp}"
            )
            if draw < int(p * 2.0**64):
                selected.add(comp)
        if selected:
            break
    else:
        raise ValueError(f"empty video plan unreachable after {MAX_PLAN_ATTEMPTS} attempts")

    seeds = {
        "object": derive_seed(config.global_seed, episode.id, aug_index, 0, "video/object"),
    }
    for name in episode.cameras:
        for t in range(episode.num_frames):
            seeds[f"background/{name}/{t}"] = derive_seed(
                config.global_seed, episode.id, aug_index, t, f"video/background/{name}"
            )
    prompt_seed = derive_seed(config.global_seed, episode.id, aug_index, 0, "video/prompt")
    noun = episode.object_label or "object"
    bg_noun = config.background_nouns[
        seeded_index(split_seed(prompt_seed, "bg-noun"), len(config.background_nouns))
    ]
    return VideoPlan(
        components=frozenset(selected),
        object_prompt=sample_prompt(config.grammar, noun, split_seed(prompt_seed, "object")),
        background_prompt=sample_prompt(config.grammar, bg_noun, split_seed(prompt_seed, "background")),
        seeds=seeds,
    )


def run_video(config: PipelineConfig, dataset_root, output_root) -> DatasetManifest:
    """Automatic per-trajectory augmentation over a whole dataset.

    With ``include_originals`` the source episodes are copied into the
    output verbatim alongside the augmented ones.
    """
    dataset_root = Path(dataset_root)
    output_root = Path(output_root)
    problems = validate_dataset(dataset_root)
    if problems:
        raise ValidationFailure(problems)

    manifest_in = load_manifest(dataset_root)
    episode_ids = sorted(rec["id"] for rec in manifest_in.episodes)
    episodes = {eid: load_episode(dataset_root, eid) for eid in episode_ids}
    chains = {}
    for eid in episode_ids:
        ref = episodes[eid].chain_ref
        if ref not in chains:
            chain_path = dataset_root / "chains" / f"{ref}.json"
            if not chain_path.exists():
                raise ValidationFailure([f"episode {eid!r} references missing chain {ref!r}"])
            chains[ref] = load_chain(chain_path)

    inpaint_backend = get_backend(config.backends["inpaint"])
    segment_backend = get_backend(config.backends["segment"])
    track_backend = get_backend(config.backends["track"])
    backend_id = _backend_identity(inpaint_backend)
    output_root.mkdir(parents=True, exist_ok=True)
    _copy_chains(dataset_root, output_root)

    def worker(eid: str, k: int) -> AugmentationRecord:
        episode = episodes[eid]
        plan = _plan_video(config, episode, k)
        ctx = VideoContext(
            chain=chains[episode.chain_ref],
            inpaint_backend=inpaint_backend,
            segment_backend=segment_backend,
            track_backend=track_backend,
        )
        augmented, events = augment_trajectory(episode, plan, ctx)
        out_id = f"{eid}__aug{k}"
        save_episode(output_root, augmented.with_id(out_id))
        return AugmentationRecord(
            source_episode=eid,
            aug_index=k,
            output_episode=out_id,
            regime="video",
            plan=plan.to_json(),
            backend=backend_id,
            events=events,
        )

    items = [(eid, k) for eid in episode_ids for k in range(config.num_augmentations)]
    records, failures = _run_items(config, items, worker)
    entries = [
        {"id": r.output_episode, "frames": episodes[r.source_episode].num_frames}
        for r in records
    ]
    if config.include_originals:
        for eid in episode_ids:
            shutil.copytree(
                dataset_root / "episodes" / eid,
                output_root / "episodes" / eid,
                dirs_exist_ok=True,
            )
            entries.append({"id": eid, "frames": episodes[eid].num_frames})
    return _finalize(
        output_root, f"{manifest_in.dataset_id}__video", entries, records,
        failures, len(items),
    )


@dataclass
class StatsReport:
    episodes: int
    frames: int
    episodes_with_masks: int
    object_labels: list
    receptacle_labels: list
    component_frequencies: dict
    augmentation_records: int
    warnings: list

    def to_json(self) -> dict:
        return {
            "episodes": self.episodes,
            "frames": self.frames,
            "episodes_with_masks": self.episodes_with_masks,
            "object_labels": self.object_labels,
            "receptacle_labels": self.receptacle_labels,
            "component_frequencies": self.component_frequencies,
            "augmentation_records": self.augmentation_records,
            "warnings": self.warnings,
        }


def stats(dataset_root) -> StatsReport:
    """Summarize a dataset: counts, labels, plan component frequencies."""
    dataset_root = Path(dataset_root)
    manifest = load_manifest(dataset_root)
    frames = 0
    with_masks = 0
    object_labels = set()
    receptacle_labels = set()
    for rec in manifest.episodes:
        eid = rec["id"]
        frames += rec["frames"]
        edir = dataset_root / "episodes" / eid
        meta_path = edir / "meta.json"
        if not meta_path.exists():
            raise DatasetError(f"missing file: {meta_path}")
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        if meta.get("object_label"):
            object_labels.add(meta["object_label"])
        if meta.get("receptacle_label"):
            receptacle_labels.add(meta["receptacle_label"])
        if (edir / "masks" / "000000.object.png").exists():
            with_masks += 1

    comp_counts = {}
    warnings = []
    for rec in manifest.augmentations:
        for comp in rec.get("plan", {}).get("components", []):
            comp_counts[comp] = comp_counts.get(comp, 0) + 1
        for event in rec.get("events", []):
            warnings.append(f"{rec['output_episode']}: {event}")
    n_records = len(manifest.augmentations)
    freqs = {
        comp: comp_counts[comp] / n_records for comp in sorted(comp_counts)
    } if n_records else {}
    return StatsReport(
        episodes=len(manifest.episodes),
        frames=frames,
        episodes_with_masks=with_masks,
        object_labels=sorted(object_labels),
        receptacle_labels=sorted(receptacle_labels),
        component_frequencies=freqs,
        augmentation_records=n_records,
        warnings=warnings,
    )


def reproduce_item(record: dict, dataset_root, output_root, config: PipelineConfig):
    """Re-run a single item from its augmentation record.

    With the same backend the reproduced episode is byte-identical to the
    original run's output.
    """
    dataset_root = Path(dataset_root)
    episode = load_episode(dataset_root, record["source_episode"])
    if record["regime"] == "structured":
        scfg = _structured_config(config, dataset_root)
        backend = get_backend(config.backends["inpaint"])
        plan = AugmentationPlan.from_json(record["plan"])
        augmented, _ = apply_plan(episode, plan, scfg, backend)
    else:
        plan = VideoPlan.from_json(record["plan"])
        chain = load_chain(dataset_root / "chains" / f"{episode.chain_ref}.json")
        ctx = VideoContext(
            chain=chain,
            inpaint_backend=get_backend(config.backends["inpaint"]),
            segment_backend=get_backend(config.backends["segment"]),
            track_backend=get_backend(config.backends["track"]),
        )
        augmented, _ = augment_trajectory(episode, plan, ctx)
    out = augmented.with_id(record["output_episode"])
    save_episode(output_root, out)
    return out
