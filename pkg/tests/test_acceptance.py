"""Acceptance criteria A1-A10 (primary engine) and A11 (service adapter).

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. Each criterion states its tolerance inline.
"""

import dataclasses
import hashlib
import json
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

from augforge.types import Image, Mask, DepthMap
from augforge.dataset import (
    DatasetManifest,
    load_episode,
    load_manifest,
    save_episode,
    save_manifest,
)
from augforge.backends import BackendDescriptor, InpaintRequest, get_backend
from augforge.backends.mock import MockBackend, fill_color
from augforge.geometry.raster import render_vertices_depth
from augforge.geometry.kinematics import forward_kinematics, save_chain
from augforge.pipeline import PipelineConfig, run_structured, run_video
from augforge.structured import (
    PromptGrammar,
    StructuredConfig,
    plan_augmentation,
    apply_plan,
    place_distractors,
    rewrite_language,
)
from augforge.policy import ActionChunk, temporal_aggregate
from augforge.video import (
    VideoContext,
    augment_trajectory,
    end_effector_pixel,
    robot_mask,
    seed_object_mask,
    track_object,
)

from conftest import (
    box_asset,
    default_catalog,
    default_workspace,
    make_episode,
    overhead_camera,
    rect_mask,
    tabletop_frame,
    write_dataset,
)
from oracles import mask_iou, random_convex_mesh, ray_cast_depth
from test_kinematics import _random_chain, fk_oracle
from test_video import moving_object_episode, video_plan


def report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def tree_hash(root) -> str:
    digest = hashlib.sha256()
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


@pytest.fixture(scope="module")
def big_run(tmp_path_factory):
    """The 10-episode x 100-augmentation structured run, workers 1 and 8."""
    base = tmp_path_factory.mktemp("acceptance")
    root = base / "dataset"
    write_dataset(root, n_episodes=10, size=64, frames=2)

    def config(workers):
        return PipelineConfig(num_augmentations=100, workers=workers, global_seed=202)

    out1 = base / "out_w1"
    t0 = time.perf_counter()
    manifest1 = run_structured(config(1), root, out1)
    elapsed1 = time.perf_counter() - t0

    out8 = base / "out_w8"
    t0 = time.perf_counter()
    manifest8 = run_structured(config(8), root, out8)
    elapsed8 = time.perf_counter() - t0
    return dict(
        root=root, out1=out1, out8=out8, manifest1=manifest1, manifest8=manifest8,
        elapsed1=elapsed1, elapsed8=elapsed8,
    )


def test_a1_semantic_invariance(big_run):
    """A1: 1,000 structured augmentations leave action payloads bit-identical."""
    manifest = big_run["manifest8"]
    sources = {}
    violations = 0
    checked = 0
    for rec in manifest.augmentations:
        src_id = rec["source_episode"]
        if src_id not in sources:
            sources[src_id] = load_episode(big_run["root"], src_id)
        augmented = load_episode(big_run["out8"], rec["output_episode"])
        source = sources[src_id]
        for sf, af in zip(source.frames, augmented.frames):
            if (
                sf.action.tobytes() != af.action.tobytes()
                or sf.joints.tobytes() != af.joints.tobytes()
                or sf.gripper != af.gripper
            ):
                violations += 1
        checked += 1
    report(
        "A1 semantic invariance",
        checked == 1000 and violations == 0,
        f"{checked} augmentations checked, {violations} action/joint/gripper violations",
    )


def test_a2_depth_preservation_texture_only(tmp_path):
    """A2: 500 texture-only augmentations leave depth bit-identical."""
    root = tmp_path / "ds"
    write_dataset(root, n_episodes=10, size=64, frames=2)
    config = PipelineConfig(
        num_augmentations=50,
        workers=4,
        global_seed=7,
        probabilities={
            "table_background": 1.0, "object_texture": 1.0, "receptacle_texture": 1.0,
            "object_shape": 0.0, "receptacle_shape": 0.0, "distractors": 0.0,
        },
    )
    out = tmp_path / "out"
    manifest = run_structured(config, root, out)
    sources = {rec["id"]: load_episode(root, rec["id"]) for rec in load_manifest(root).episodes}
    violations = 0
    for rec in manifest.augmentations:
        augmented = load_episode(out, rec["output_episode"])
        source = sources[rec["source_episode"]]
        for sf, af in zip(source.frames, augmented.frames):
            if sf.depth.values.tobytes() != af.depth.values.tobytes():
                violations += 1
    report(
        "A2 depth preservation",
        len(manifest.augmentations) == 500 and violations == 0,
        f"{len(manifest.augmentations)} texture-only items, {violations} depth changes",
    )


def test_a3_geometric_consistency():
    """A3: rasterizer matches the ray-cast oracle to 1e-4 m on 100 convex meshes."""
    from augforge.backends.mock import MockBackend
    from augforge.structured import augment_cross_category, fit_replacement

    # cross-category depth equals the rasterizer output exactly
    camera = overhead_camera(64)
    frame, obj, _ = tabletop_frame()
    asset = box_asset("probe", (0.13, 0.11, 0.07))
    out, new_mask = augment_cross_category(frame, obj, asset, "a probe", 5, camera, MockBackend())
    verts = fit_replacement(asset, obj, frame.depth, camera, 5)
    rdepth, rmask = render_vertices_depth(verts, asset.triangles, camera, 64, 64)
    exact = np.array_equal(out.depth.values[rmask.bits], rdepth.values[rmask.bits])

    rng = np.random.default_rng(33)
    cam = overhead_camera(64)
    worst = 0.0
    oracle_time = 0.0
    boundary_disagreements = 0
    for _ in range(100):
        verts, tris = random_convex_mesh(rng)
        verts = verts + np.array([0.5, 0.5, 0.0]) - [0, 0, verts[:, 2].min()]
        depth, mask = render_vertices_depth(verts, tris, cam, 64, 64)
        verts_cam = cam.pose.inverse().apply(verts)
        t0 = time.perf_counter()
        oracle = ray_cast_depth(verts_cam, tris, cam.fx, cam.fy, cam.cx, cam.cy, 64, 64)
        oracle_time += time.perf_counter() - t0
        oracle_mask = np.isfinite(oracle)
        boundary_disagreements += int((mask.bits ^ oracle_mask).sum())
        both = mask.bits & oracle_mask
        if both.any():
            worst = max(worst, float(np.abs(depth.values[both] - oracle[both]).max()))
    ok = exact and worst <= 1e-4 and oracle_time < 60.0 and boundary_disagreements <= 50
    report(
        "A3 geometric consistency",
        ok,
        f"cross-category exact={exact}, max |ddepth|={worst:.2e} m over 100 meshes, "
        f"oracle {oracle_time:.1f}s, {boundary_disagreements} boundary-tie pixels",
    )


def test_a4_forward_kinematics():
    """A4: 1,000 random 6-joint chains vs the homogeneous-matrix oracle, <= 1e-9."""
    rng = np.random.default_rng(4)
    worst_t = 0.0
    worst_r = 0.0
    for _ in range(1000):
        chain = _random_chain(rng, 6)
        q = rng.uniform(-3, 3, 6)
        fk = forward_kinematics(chain, q)
        frames, ee = fk_oracle(chain, q)
        for got, want in zip(fk.joint_transforms, frames):
            worst_t = max(worst_t, float(np.abs(got.translation - want[:3, 3]).max()))
            worst_r = max(worst_r, float(np.linalg.norm(got.rotation - want[:3, :3])))
        worst_t = max(worst_t, float(np.abs(fk.end_effector.translation - ee[:3, 3]).max()))
        worst_r = max(worst_r, float(np.linalg.norm(fk.end_effector.rotation - ee[:3, :3])))
    ok = worst_t <= 1e-9 and worst_r <= 1e-9
    report("A4 FK correctness", ok, f"max translation err {worst_t:.2e} m, rotation Frobenius {worst_r:.2e}")


def test_a5_collision_safety():
    """A5: 10,000 accepted distractor placements, brute-force bbox re-check."""
    from augforge.geometry.raster import bboxes_overlap

    backend = MockBackend()
    camera = overhead_camera(128)
    frame, obj, rec = tabletop_frame(128)
    assets = [
        box_asset("d1", (0.05, 0.05, 0.04), "distractor"),
        box_asset("d2", (0.04, 0.07, 0.05), "distractor"),
        box_asset("d3", (0.06, 0.04, 0.03), "distractor"),
    ]
    ws = default_workspace()
    grammar = PromptGrammar()
    accepted = 0
    violations = 0
    scene_seed = 0
    while accepted < 10_000:
        scene_seed += 1
        _, placed = place_distractors(
            frame, [obj, rec], assets, 12, scene_seed, camera, backend, ws, grammar
        )
        rects = [d.mask.bbox() for d in placed]
        protected_rects = [obj.bbox(), rec.bbox()]
        for i, rect in enumerate(rects):
            for other in protected_rects:
                if bboxes_overlap(rect, other):
                    violations += 1
            for j in range(i + 1, len(rects)):
                if bboxes_overlap(rect, rects[j]):
                    violations += 1
        accepted += len(placed)
    report(
        "A5 collision safety",
        violations == 0,
        f"{accepted} accepted placements across {scene_seed} scenes, {violations} overlaps",
    )


def test_a6_determinism_under_parallelism(big_run):
    """A6: workers 1 vs 8 byte-identical; 1,000 augmented episodes; < 5 min."""
    h1 = tree_hash(big_run["out1"])
    h8 = tree_hash(big_run["out8"])
    n = len(big_run["manifest1"].episodes)
    ok = h1 == h8 and n == 1000 and big_run["elapsed1"] < 300 and big_run["elapsed8"] < 300
    report(
        "A6 determinism under parallelism",
        ok,
        f"tree hashes {'equal' if h1 == h8 else 'DIFFER'}, {n} augmented episodes, "
        f"w1 {big_run['elapsed1']:.1f}s / w8 {big_run['elapsed8']:.1f}s (< 300 s)",
    )


def test_a7_language_augmentation():
    """A7: the box-to-plate example plus 50 templated cases, 0 failures."""
    failures = 0
    if rewrite_language("Put the apple in a box", "a box", "a plate") != "Put the apple in a plate":
        failures += 1
    objects = ["an apple", "a banana", "a red block", "the mug", "a toy car"]
    receptacles = ["a box", "a plate", "the blue tray", "a basket", "a bowl"]
    new_names = ["a bucket", "a carton"]
    cases = 0
    for obj in objects:
        for rec in receptacles:
            for new in new_names:
                text = f"Put {obj} in {rec}"
                want = f"Put {obj} in {new}"
                if rewrite_language(text, rec, new) != want:
                    failures += 1
                cases += 1
                if cases >= 50:
                    break
            if cases >= 50:
                break
        if cases >= 50:
            break
    report("A7 language augmentation", failures == 0, f"paper example + {cases} templated cases, {failures} failures")


def test_a8_video_regime(tmp_path):
    """A8: tracking IoU >= 0.8, constant object fill, robot pixels intact, 250 count."""
    episode, chain = moving_object_episode(n_frames=10)
    backend = MockBackend()
    cam = episode.cameras["front"]

    # tracked masks vs ground truth
    images = [f.rgb for f in episode.frames]
    px = end_effector_pixel(chain, episode.frames[0].joints, cam, 48, 48)
    rmask0 = robot_mask(chain, episode.frames[0].joints, chain.links, cam, 48, 48)
    initial = seed_object_mask(images[0], px, backend, rmask0)
    masks = track_object(images, initial, backend)
    min_iou = 1.0
    for t, mask in enumerate(masks):
        gt = rect_mask(48, 4 + 2 * t, 20, 13 + 2 * t, 29)
        min_iou = min(min_iou, mask_iou(mask.bits, gt.bits))

    # full augmentation: constant fill + robot pixels bit-identical
    ctx = VideoContext(chain=chain, inpaint_backend=backend,
                       segment_backend=backend, track_backend=backend)
    plan = video_plan(episode)
    augmented, _ = augment_trajectory(episode, plan, ctx)
    base = np.array(fill_color(plan.object_prompt, plan.seeds["object"]))
    allowed = {tuple(base), tuple(np.maximum(base.astype(int) - 32, 0))}
    fill_ok = True
    robot_ok = True
    for t, (orig, new) in enumerate(zip(episode.frames, augmented.frames)):
        rmask = robot_mask(chain, orig.joints, chain.links, cam, 48, 48)
        if not np.array_equal(new.rgb.pixels[rmask.bits], orig.rgb.pixels[rmask.bits]):
            robot_ok = False
        gt = rect_mask(48, 4 + 2 * t, 20, 13 + 2 * t, 29)
        region = gt.bits & ~rmask.bits
        colors = {tuple(c) for c in new.rgb.pixels[region].reshape(-1, 3)}
        if not colors <= allowed:
            fill_ok = False

    # the 50-trajectory x 4-augmentation configuration reproduces 250 episodes
    root = tmp_path / "vds"
    entries = []
    for i in range(50):
        ep, _ = moving_object_episode(n_frames=2)
        ep = dataclasses.replace(ep, id=f"traj-{i:03d}")
        save_episode(root, ep)
        entries.append({"id": ep.id, "frames": 2})
    save_chain(root / "chains" / "mini.json", chain)
    save_manifest(root, DatasetManifest(dataset_id="v50", episodes=entries))
    config = PipelineConfig(num_augmentations=4, workers=8, global_seed=1,
                            include_originals=True)
    manifest = run_video(config, root, tmp_path / "vout")
    total = len(manifest.episodes)

    ok = min_iou >= 0.8 and fill_ok and robot_ok and total == 250
    report(
        "A8 video regime",
        ok,
        f"min track IoU {min_iou:.3f} (>= 0.8), constant fill {fill_ok}, "
        f"robot pixels intact {robot_ok}, 50x4+originals -> {total} episodes (= 250)",
    )


def test_a9_temporal_aggregation():
    """A9: convexity/normalization over 10,000 random chunk sets; 1/3 to 1e-12."""
    chunks = [
        ActionChunk(issued_at=5, actions=np.array([[0.0], [0.0]])),
        ActionChunk(issued_at=4, actions=np.array([[9.0], [1.0]])),
    ]
    third = temporal_aggregate(chunks, 5, m=np.log(2.0))[0]
    example_ok = abs(third - 1.0 / 3.0) <= 1e-12

    rng = np.random.default_rng(9)
    violations = 0
    for _ in range(10_000):
        n = rng.integers(1, 6)
        chunks = []
        t = int(rng.integers(0, 10))
        for _ in range(n):
            h = int(rng.integers(1, 7))
            issued = int(rng.integers(max(0, t - h + 1), t + 1))
            chunks.append(ActionChunk(issued_at=issued, actions=rng.uniform(-4, 4, (h, 2))))
        m = float(rng.uniform(0.0, 3.0))
        out = temporal_aggregate(chunks, t, m)
        preds = np.stack([c.actions[t - c.issued_at] for c in chunks if c.covers(t)])
        if (out < preds.min(axis=0) - 1e-12).any() or (out > preds.max(axis=0) + 1e-12).any():
            violations += 1
        ages = np.array([t - c.issued_at for c in chunks if c.covers(t)], dtype=float)
        w = np.exp(-m * ages)
        w /= w.sum()
        if abs(w.sum() - 1.0) > 1e-12:
            violations += 1
    report(
        "A9 temporal aggregation",
        example_ok and violations == 0,
        f"1/3 example err {abs(third - 1/3):.1e} (<= 1e-12), {violations} invariant violations in 10,000 sets",
    )


def test_a10_throughput():
    """A10: structured augmentation >= 50 frames/s per worker at 256x256 (no disk I/O)."""
    episode = make_episode("perf-0", size=256, frames=1)
    cfg = StructuredConfig(
        probabilities={
            "table_background": 1.0, "object_texture": 1.0, "receptacle_texture": 1.0,
            "object_shape": 0.5, "receptacle_shape": 0.5, "distractors": 0.5,
        },
        workspace=default_workspace(),
        catalog=tuple(default_catalog()),
    )
    backend = MockBackend()
    # warm up caches and JIT-free paths
    plan = plan_augmentation(cfg, episode, 0, 1)
    apply_plan(episode, plan, cfg, backend)

    n = 60
    t0 = time.perf_counter()
    for k in range(n):
        plan = plan_augmentation(cfg, episode, k, 2)
        apply_plan(episode, plan, cfg, backend)
    elapsed = time.perf_counter() - t0
    fps = n / elapsed
    report("A10 throughput", fps >= 50.0, f"{fps:.0f} augmented frames/s at 256x256 (>= 50)")


ADAPTER_DIR = Path(__file__).resolve().parent.parent / "frontend"


@pytest.mark.skipif(
    not (ADAPTER_DIR / "dist" / "server.js").exists(),
    reason="service adapter not built (secondary component)",
)
def test_a11_adapter_conformance(tmp_path):
    """A11: golden fixtures byte-exact; structured run over HTTP, 0 protocol errors."""
    import socket
    import requests as _requests

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    proc = subprocess.Popen(
        ["node", str(ADAPTER_DIR / "dist" / "server.js"), "--port", str(port)],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )
    try:
        deadline = time.time() + 15
        health = None
        while time.time() < deadline:
            try:
                health = _requests.get(f"http://127.0.0.1:{port}/v1/health", timeout=1).json()
                break
            except Exception:
                time.sleep(0.2)
        assert health is not None, "adapter did not come up"
        assert "inpaint" in health["modes"]

        # golden fixtures recorded against the identity model
        fixtures = sorted((ADAPTER_DIR / "fixtures").glob("*.json"))
        assert fixtures, "no golden fixtures recorded"
        golden_ok = 0
        for fixture_path in fixtures:
            fixture = json.loads(fixture_path.read_text())
            reply = _requests.post(
                f"http://127.0.0.1:{port}{fixture['path']}", json=fixture["request"], timeout=30
            )
            assert reply.status_code == 200, fixture_path.name
            assert reply.json() == fixture["response"], f"fixture drift: {fixture_path.name}"
            golden_ok += 1

        # 10-episode structured run through the HTTP backend
        root = tmp_path / "ds"
        write_dataset(root, n_episodes=10, size=48, frames=1)
        desc = BackendDescriptor(kind="http", endpoint=f"http://127.0.0.1:{port}")
        config = PipelineConfig(
            num_augmentations=1, workers=4, global_seed=3,
            backends={"inpaint": desc, "segment": desc, "track": desc},
        )
        manifest = run_structured(config, root, tmp_path / "out")
        protocol_errors = len(manifest.failures)
        ok = golden_ok == len(fixtures) and protocol_errors == 0 and len(manifest.episodes) == 10
        report(
            "A11 adapter conformance",
            ok,
            f"{golden_ok} golden fixtures byte-exact, 10-episode HTTP run with "
            f"{protocol_errors} protocol errors",
        )
    finally:
        proc.terminate()
        proc.wait(timeout=10)
