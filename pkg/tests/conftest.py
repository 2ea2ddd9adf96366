import numpy as np
import pytest

from motiongraph.pose import Joint, MotionSequence, PoseFrame, Skeleton


@pytest.fixture
def two_joint_skeleton():
    """Root plus one bone of unit length along +x."""
    return Skeleton(
        (
            Joint("root", None, (0.0, 0.0, 0.0), 0.05),
            Joint("tip", 0, (1.0, 0.0, 0.0), 0.05),
        )
    )


@pytest.fixture
def chain_skeleton():
    """Root -> a -> b -> c chain with distinct offsets."""
    return Skeleton(
        (
            Joint("root", None, (0.0, 0.0, 0.0), 0.08),
            Joint("a", 0, (1.0, 0.0, 0.0), 0.06),
            Joint("b", 1, (0.0, 2.0, 0.0), 0.05),
            Joint("c", 2, (0.0, 0.0, 0.5), 0.04),
        )
    )


def make_pose(skeleton, frame_index=0, root=(0.0, 0.0, 0.0), rotations=None):
    n = len(skeleton)
    rot = np.zeros((n, 3)) if rotations is None else np.asarray(rotations, dtype=float)
    return PoseFrame(frame_index=frame_index, root_translation=np.asarray(root, dtype=float), joint_rotations=rot)


def make_sequence(skeleton, pose_fn, n_frames, fps=30.0):
    """Build a MotionSequence from pose_fn(t) -> (root, rotations)."""
    frames = []
    for t in range(n_frames):
        root, rotations = pose_fn(t)
        frames.append(make_pose(skeleton, t, root, rotations))
    return MotionSequence(fps=fps, frames=frames)
