import numpy as np
import pytest

from augforge.types import CameraModel, Episode, Frame, Image, Mask
from augforge.rigid import RigidTransform
from augforge.geometry.kinematics import Box, Capsule, Joint, KinematicChain, forward_kinematics
from augforge.backends.mock import MockBackend, fill_color
from augforge.video import (
    VideoContext,
    VideoPlan,
    VideoStageError,
    aggregate_masks,
    augment_trajectory,
    background_candidates,
    end_effector_pixel,
    robot_mask,
    seed_object_mask,
    track_object,
)

from conftest import overhead_camera, planar_chain, rect_mask
from oracles import mask_iou, ray_capsule_mask


def straight_chain(base, ee_offset):
    joint = Joint(
        origin=RigidTransform.translate(base),
        axis=[0.0, 0.0, 1.0],
        kind="revolute",
        limits=(-np.pi, np.pi),
    )
    return KinematicChain(
        joints=(joint,), end_effector_offset=RigidTransform.translate(ee_offset)
    )


# -- end effector pixel ------------------------------------------------------


def test_ee_pixel_on_optical_axis_is_principal_point():
    chain = planar_chain()
    # identity-pose camera 1 m behind the end effector at (2, 0, 0)
    cam = CameraModel(fx=100, fy=100, cx=32, cy=32,
                      pose=RigidTransform.translate([2.0, 0.0, -1.0]))
    assert end_effector_pixel(chain, [0.0, 0.0], cam, 64, 64) == (32, 32)


def test_ee_pixel_matches_fk_plus_projection_composition():
    from test_kinematics import _random_chain, fk_oracle
    from augforge.geometry.camera import project_point

    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(40):
        chain = _random_chain(rng, 4)
        q = rng.uniform(-2, 2, 4)
        cam = CameraModel(fx=60, fy=60, cx=32, cy=32,
                          pose=RigidTransform.translate(rng.uniform(-0.5, 0.5, 3) - [0, 0, 3]))
        _, ee = fk_oracle(chain, q)
        want = project_point(cam, ee[:3, 3])
        got = end_effector_pixel(chain, q, cam, 64, 64)
        if want is None:
            assert got is None
            continue
        u, v, _ = want
        if 0 <= int(np.floor(u)) < 64 and 0 <= int(np.floor(v)) < 64:
            assert got == (int(np.floor(u)), int(np.floor(v)))
            checked += 1
        else:
            assert got is None
    assert checked > 5


def test_ee_pixel_behind_camera():
    chain = straight_chain([0.0, 0.0, 0.0], [0.0, 0.0, -2.0])
    cam = CameraModel(fx=100, fy=100, cx=32, cy=32)
    assert end_effector_pixel(chain, [0.0], cam, 64, 64) is None


# -- robot mask ---------------------------------------------------------


def test_single_box_link_fills_view():
    joint = Joint(origin=RigidTransform.translate([0.5, 0.5, 0.0]), axis=[0, 0, 1],
                  kind="revolute", limits=(-4, 4))
    chain = KinematicChain(
        joints=(joint,),
        links=(Box(half_extents=np.array([2.0, 2.0, 0.1])),),
    )
    mask = robot_mask(chain, [0.0], chain.links, overhead_camera(64), 64, 64)
    assert mask.count == 64 * 64


def test_zero_joint_chain_gives_empty_mask():
    chain = KinematicChain(joints=())
    mask = robot_mask(chain, [], (), overhead_camera(32), 32, 32)
    assert mask.is_empty()


def test_missing_geometry_errors():
    chain = planar_chain()
    with pytest.raises(ValueError, match="link geometry"):
        robot_mask(chain, [0.0, 0.0], (None,), overhead_camera(32), 32, 32)


def test_two_link_arm_mask_matches_ray_cast_oracle():
    # a scene camera ~2 m from the arm, the regime the approximation targets
    radius = 0.2
    joint = lambda t: Joint(  # noqa: E731
        origin=RigidTransform.translate(t), axis=[0, 0, 1], kind="revolute",
        limits=(-np.pi, np.pi),
    )
    chain = KinematicChain(
        joints=(joint([0, 0, 0]), joint([1, 0, 0])),
        links=(
            Capsule(radius=radius, p0=np.zeros(3), p1=np.array([1.0, 0, 0])),
            Capsule(radius=radius, p0=np.zeros(3), p1=np.array([1.0, 0, 0])),
        ),
    )
    cam = CameraModel(fx=120, fy=120, cx=64, cy=64,
                      pose=RigidTransform.translate([1.0, 0.1, -2.2]))
    for q in ([0.3, -0.5], [1.2, 0.8], [-0.7, 1.5], [0.0, 0.0], [2.0, -1.0]):
        got = robot_mask(chain, q, chain.links, cam, 128, 128)
        fk = forward_kinematics(chain, q)
        oracle = np.zeros((128, 128), dtype=bool)
        for transform, capsule in zip(fk.joint_transforms, chain.links):
            p0 = transform.apply(capsule.p0)
            p1 = transform.apply(capsule.p1)
            oracle |= ray_capsule_mask(cam, p0, p1, radius * 1.1, 128, 128)
        assert mask_iou(got.bits, oracle) >= 0.98, q


# -- seeding and tracking ------------------------------------------------


def scene_with_rect(x0, y0, x1, y1, size=48, extras=()):
    pixels = np.full((size, size, 3), (90, 90, 90), dtype=np.uint8)
    pixels[y0 : y1 + 1, x0 : x1 + 1] = (200, 30, 30)
    for ex0, ey0, ex1, ey1, color in extras:
        pixels[ey0 : ey1 + 1, ex0 : ex1 + 1] = color
    return Image(pixels)


def test_seed_object_mask_picks_prompted_rectangle():
    img = scene_with_rect(10, 10, 20, 20)
    mask = seed_object_mask(img, (15, 15), MockBackend())
    assert np.array_equal(mask.bits, rect_mask(48, 10, 10, 20, 20).bits)


def test_seed_object_mask_background_point_is_empty():
    img = scene_with_rect(10, 10, 20, 20)
    assert seed_object_mask(img, (0, 0), MockBackend()).is_empty()


def test_seed_object_mask_subtracts_robot_exactly():
    img = scene_with_rect(10, 10, 20, 20)
    robot = rect_mask(48, 16, 10, 25, 20)  # covers half the object
    mask = seed_object_mask(img, (12, 15), MockBackend(), robot)
    expected = rect_mask(48, 10, 10, 20, 20).bits & ~robot.bits
    assert np.array_equal(mask.bits, expected)


def test_track_object_static_sequence():
    img = scene_with_rect(10, 10, 20, 20)
    initial = seed_object_mask(img, (15, 15), MockBackend())
    masks = track_object([img] * 6, initial, MockBackend())
    for m in masks:
        assert np.array_equal(m.bits, initial.bits)


def test_track_object_moving_rectangle_iou():
    images = [scene_with_rect(4 + 2 * t, 20, 13 + 2 * t, 29) for t in range(10)]
    initial = seed_object_mask(images[0], (8, 24), MockBackend())
    masks = track_object(images, initial, MockBackend())
    for t, m in enumerate(masks):
        gt = rect_mask(48, 4 + 2 * t, 20, 13 + 2 * t, 29)
        assert mask_iou(m.bits, gt.bits) >= 0.8


def test_track_object_reseeds_after_three_fallbacks():
    blank = Image(np.full((48, 48, 3), (90, 90, 90), dtype=np.uint8))
    visible = scene_with_rect(10, 10, 20, 20)
    # object visible at t=0, vanished for t=1..4 (tracker falls back)
    images = [visible, blank, blank, blank, blank]
    initial = seed_object_mask(visible, (15, 15), MockBackend())
    events: list = []
    reseeds = []

    def reseed(t):
        reseeds.append(t)
        return Mask.empty(48, 48)

    masks = track_object(images, initial, MockBackend(), reseed=reseed, events=events)
    assert reseeds == [3]  # third consecutive fallback triggers the reseed
    assert any("re-seeded" in e and "frame 3" in e for e in events)
    assert all(np.array_equal(m.bits, initial.bits) for m in masks)


# -- background candidates and aggregation --------------------------------


def test_background_candidates_filtering():
    img = scene_with_rect(
        10, 10, 20, 20,
        extras=((30, 30, 40, 40, (30, 200, 30)), (2, 40, 8, 46, (200, 200, 30))),
    )
    robot = rect_mask(48, 0, 38, 10, 47)  # covers the yellow block
    obj = rect_mask(48, 10, 10, 20, 20)  # the red block
    candidates = background_candidates(img, robot, obj, MockBackend())
    assert len(candidates) == 1  # only the green block survives
    blocked = robot.bits | obj.bits
    for c in candidates:
        assert not (c.bits & blocked).any()

    everything = background_candidates(img, Mask.empty(48, 48), Mask.empty(48, 48), MockBackend())
    assert len(everything) == 3


def test_aggregate_masks_properties():
    a = rect_mask(16, 0, 0, 3, 3)
    b = rect_mask(16, 8, 8, 11, 11)
    assert np.array_equal(aggregate_masks([a]).bits, a.bits)
    union = aggregate_masks([a, b])
    assert union.count == a.count + b.count  # disjoint
    rng = np.random.default_rng(2)
    masks = [Mask(rng.random((16, 16)) < 0.3) for _ in range(5)]
    got = aggregate_masks(masks)
    want = np.zeros((16, 16), dtype=bool)
    for y in range(16):
        for x in range(16):
            want[y, x] = any(m.bits[y, x] for m in masks)
    assert np.array_equal(got.bits, want)
    with pytest.raises(ValueError):
        aggregate_masks([])
    with pytest.raises(ValueError):
        aggregate_masks([a, Mask.empty(8, 8)])


# -- full trajectory -----------------------------------------------------


def moving_object_episode(n_frames=10, size=48):
    """Red block moves 2 px/frame; green robot blob lower-left; yellow block
    top-right as a background candidate. The end effector projects into the
    red block on every frame."""
    chain = KinematicChain(
        joints=(
            Joint(origin=RigidTransform.translate([0.05, 0.05, 0.0]), axis=[0, 0, 1],
                  kind="revolute", limits=(-np.pi, np.pi)),
        ),
        end_effector_offset=RigidTransform.translate([0.1271, 0.4396, 0.0]),
        links=(Capsule(radius=0.03, p0=np.zeros(3), p1=np.array([0.1, 0.0, 0.0])),),
    )
    frames = []
    for t in range(n_frames):
        img = scene_with_rect(
            4 + 2 * t, 20, 13 + 2 * t, 29, size=size,
            extras=((0, 43, 10, 47, (30, 200, 30)), (34, 4, 42, 10, (220, 220, 40))),
        )
        frames.append(
            Frame(rgb=img, depth=None, joints=np.zeros(1), gripper=0.0,
                  action=np.array([1.0, 2.0, float(t)]))
        )
    episode = Episode(
        id="video-0",
        frames=tuple(frames),
        task_text="push the red block",
        object_label="the red block",
        receptacle_label="",
        chain_ref="mini",
        cameras={"front": overhead_camera(size)},
        primary_camera="front",
    )
    return episode, chain


def video_plan(episode, components=("object_texture", "background")):
    seeds = {"object": 1111}
    for name in episode.cameras:
        for t in range(episode.num_frames):
            seeds[f"background/{name}/{t}"] = 50_000 + 7 * t
    return VideoPlan(
        components=frozenset(components),
        object_prompt="a blue metal block",
        background_prompt="a cluttered shelf",
        seeds=seeds,
    )


def test_ee_pixel_lands_on_object():
    episode, chain = moving_object_episode()
    cam = episode.cameras["front"]
    px = end_effector_pixel(chain, episode.frames[0].joints, cam, 48, 48)
    assert px is not None
    x, y = px
    assert 4 <= x <= 13 and 20 <= y <= 29


def test_augment_trajectory_contracts():
    episode, chain = moving_object_episode()
    backend = MockBackend()
    ctx = VideoContext(chain=chain, inpaint_backend=backend,
                       segment_backend=backend, track_backend=backend)
    plan = video_plan(episode)
    augmented, events = augment_trajectory(episode, plan, ctx)

    cam = episode.cameras["front"]
    base = np.array(fill_color(plan.object_prompt, plan.seeds["object"]))
    darker = np.maximum(base.astype(int) - 32, 0)
    allowed = {tuple(base), tuple(darker)}

    for t, (orig, new) in enumerate(zip(episode.frames, augmented.frames)):
        # actions and joints bit-identical
        assert orig.action.tobytes() == new.action.tobytes()
        assert orig.joints.tobytes() == new.joints.tobytes()
        # robot pixels bit-identical
        rmask = robot_mask(chain, orig.joints, chain.links, cam, 48, 48)
        assert not rmask.is_empty()
        assert np.array_equal(new.rgb.pixels[rmask.bits], orig.rgb.pixels[rmask.bits])
        # object region filled with the same trajectory-constant color
        gt = rect_mask(48, 4 + 2 * t, 20, 13 + 2 * t, 29)
        region = gt.bits & ~rmask.bits
        colors = {tuple(c) for c in new.rgb.pixels[region].reshape(-1, 3)}
        assert colors <= allowed, f"frame {t}: {colors - allowed}"
        # the yellow background block was inpainted with per-frame seeds
        bg_region = rect_mask(48, 34, 4, 42, 10)
        assert not np.array_equal(new.rgb.pixels[bg_region.bits], orig.rgb.pixels[bg_region.bits])

    # per-frame background seeds produce different fills on the same block
    bg_region = rect_mask(48, 34, 4, 42, 10).bits
    frame_fills = [augmented.frames[t].rgb.pixels[bg_region].tobytes() for t in range(3)]
    assert len(set(frame_fills)) > 1


def test_augment_trajectory_depth_passthrough_and_determinism():
    episode, chain = moving_object_episode(n_frames=4)
    backend = MockBackend()
    ctx = VideoContext(chain=chain, inpaint_backend=backend,
                       segment_backend=backend, track_backend=backend)
    plan = video_plan(episode)
    out1, _ = augment_trajectory(episode, plan, ctx)
    out2, _ = augment_trajectory(episode, plan, ctx)
    for f1, f2 in zip(out1.frames, out2.frames):
        assert f1.rgb.pixels.tobytes() == f2.rgb.pixels.tobytes()
        assert f1.depth is None


def test_augment_trajectory_fails_with_frame_provenance():
    episode, chain = moving_object_episode(n_frames=2)
    # break the end effector: push it behind the camera
    bad_chain = KinematicChain(
        joints=chain.joints,
        end_effector_offset=RigidTransform.translate([0.0, 0.0, 5.0]),
        links=chain.links,
    )
    backend = MockBackend()
    ctx = VideoContext(chain=bad_chain, inpaint_backend=backend,
                       segment_backend=backend, track_backend=backend)
    with pytest.raises(VideoStageError, match="frame 0"):
        augment_trajectory(episode, video_plan(episode), ctx)
