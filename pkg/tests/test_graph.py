import math

import numpy as np
import pytest

from motiongraph.errors import GraphParseError, StructuralError, ValidationError
from motiongraph.graph import (
    GraphEdge,
    GraphNode,
    Thresholds,
    VideoMotionGraph,
    build_graph,
    compute_thresholds,
    load_graph,
    save_graph,
)
from motiongraph.pose import compute_joint_states, pose_distance
from motiongraph.silhouette import SilhouetteMask, default_camera, image_distance, rasterize_sequence

from conftest import make_sequence


def swing_pose_fn(amplitude=0.6, period=24.0):
    def fn(t):
        rot = np.zeros((4, 3))
        rot[0, 2] = amplitude * math.sin(2 * math.pi * t / period)
        rot[1, 1] = 0.5 * amplitude * math.sin(2 * math.pi * t / period + 0.8)
        return (0.0, 0.0, 3.0), rot

    return fn


@pytest.fixture
def smooth_setup(chain_skeleton):
    seq = make_sequence(chain_skeleton, swing_pose_fn(), 40)
    states = compute_joint_states(chain_skeleton, seq)
    camera = default_camera((64, 64), focal_length=60.0)
    masks = rasterize_sequence(chain_skeleton, (s.positions for s in states), camera)
    return states, masks


def no_feature(n):
    return [(False, "")] * n


class TestThresholds:
    def test_mean_of_offset_pairs(self, smooth_setup):
        states, masks = smooth_setup
        thr = compute_thresholds(states, masks, offset_l=4)
        n = len(states)
        h, w = masks.shape[1:]
        feat = [
            pose_distance(states[m], states[m + 4]) for m in range(n - 4)
        ]
        img = [
            image_distance(SilhouetteMask(w, h, masks[m]), SilhouetteMask(w, h, masks[m + 4]))
            for m in range(n - 4)
        ]
        assert thr.tau_feat == pytest.approx(sum(feat) / len(feat), abs=1e-12)
        assert thr.tau_img == pytest.approx(sum(img) / len(img), abs=1e-12)
        assert thr.offset_l == 4

    def test_constant_sequence_zero_thresholds(self, chain_skeleton):
        seq = make_sequence(chain_skeleton, lambda t: ((0, 0, 3.0), None), 12)
        states = compute_joint_states(chain_skeleton, seq)
        camera = default_camera((32, 32), focal_length=30.0)
        masks = rasterize_sequence(chain_skeleton, (s.positions for s in states), camera)
        thr = compute_thresholds(states, masks, offset_l=4)
        assert thr.tau_feat == 0.0
        assert thr.tau_img == 0.0

    def test_default_offset_is_four(self):
        import inspect

        from motiongraph.graph import DEFAULT_OFFSET_L

        assert DEFAULT_OFFSET_L == 4
        sig = inspect.signature(compute_thresholds)
        assert sig.parameters["offset_l"].default == 4

    def test_offset_monotonicity_on_smooth_motion(self, chain_skeleton):
        # Slowly-varying motion: pair distances grow with temporal separation
        # over the tested l range, so thresholds must too.
        seq = make_sequence(chain_skeleton, swing_pose_fn(amplitude=0.5, period=200.0), 40)
        states = compute_joint_states(chain_skeleton, seq)
        camera = default_camera((64, 64), focal_length=60.0)
        masks = rasterize_sequence(chain_skeleton, (s.positions for s in states), camera)
        previous = compute_thresholds(states, masks, offset_l=1)
        for l in range(2, 7):
            current = compute_thresholds(states, masks, offset_l=l)
            assert current.tau_feat >= previous.tau_feat - 1e-12
            assert current.tau_img >= previous.tau_img - 1e-12
            previous = current

    def test_too_short_sequence(self, smooth_setup):
        states, masks = smooth_setup
        with pytest.raises(ValidationError):
            compute_thresholds(states[:4], masks[:4], offset_l=4)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValidationError):
            Thresholds(tau_feat=-0.1, tau_img=0.0, offset_l=4)


class TestBuildGraph:
    def test_zero_thresholds_only_natural_chain(self, smooth_setup):
        states, masks = smooth_setup
        g = build_graph(states, masks, no_feature(len(states)), Thresholds(0.0, 0.0, 4))
        assert len(g.edges) == len(states) - 1
        assert all(e.kind == "natural" for e in g.edges)

    def test_open_gate_full_count(self, smooth_setup):
        states, masks = smooth_setup
        states, masks = states[:10], masks[:10]
        g = build_graph(states, masks, no_feature(10), Thresholds(np.inf, 1.0, 4))
        n = 10
        synthetic = [e for e in g.edges if e.kind == "synthetic"]
        # All ordered pairs minus self and |m-n|=1 pairs: N^2 - 3N + 2.
        assert len(synthetic) == n * n - 3 * n + 2
        natural = [e for e in g.edges if e.kind == "natural"]
        assert len(natural) == n - 1

    def test_edges_satisfy_both_gates(self, smooth_setup):
        states, masks = smooth_setup
        thr = compute_thresholds(states, masks, offset_l=4)
        g = build_graph(states, masks, no_feature(len(states)), thr)
        h, w = masks.shape[1:]
        for e in g.edges:
            if e.kind == "natural":
                assert e.d_feat == 0.0 and e.d_img == 0.0
                continue
            assert e.d_feat <= thr.tau_feat
            assert e.d_img <= thr.tau_img
            assert abs(e.src - e.dst) >= 2
            # Stored distances match the pair operations bit-for-bit.
            assert e.d_feat == pose_distance(states[e.src], states[e.dst])
            assert e.d_img == image_distance(
                SilhouetteMask(w, h, masks[e.src]), SilhouetteMask(w, h, masks[e.dst])
            )

    def test_full_pair_recheck(self, smooth_setup):
        states, masks = smooth_setup
        thr = compute_thresholds(states, masks, offset_l=4)
        g = build_graph(states, masks, no_feature(len(states)), thr)
        h, w = masks.shape[1:]
        got = {(e.src, e.dst) for e in g.edges if e.kind == "synthetic"}
        expected = set()
        n = len(states)
        for m in range(n):
            for k in range(n):
                if abs(m - k) < 2:
                    continue
                if pose_distance(states[m], states[k]) > thr.tau_feat:
                    continue
                if (
                    image_distance(
                        SilhouetteMask(w, h, masks[m]), SilhouetteMask(w, h, masks[k])
                    )
                    > thr.tau_img
                ):
                    continue
                expected.add((m, k))
        assert got == expected

    def test_monotone_in_thresholds(self, smooth_setup):
        states, masks = smooth_setup
        thr = compute_thresholds(states, masks, offset_l=4)
        small = build_graph(states, masks, no_feature(len(states)), thr)
        bigger = build_graph(
            states,
            masks,
            no_feature(len(states)),
            Thresholds(thr.tau_feat * 1.5, min(1.0, thr.tau_img * 1.5), 4),
        )
        edges_small = {(e.src, e.dst) for e in small.edges}
        edges_big = {(e.src, e.dst) for e in bigger.edges}
        assert edges_small <= edges_big

    def test_min_jump_respected(self, smooth_setup):
        states, masks = smooth_setup
        g = build_graph(
            states, masks, no_feature(len(states)), Thresholds(np.inf, 1.0, 4), min_jump=8
        )
        assert all(abs(e.src - e.dst) >= 8 for e in g.edges if e.kind == "synthetic")

    def test_features_attached_to_nodes(self, smooth_setup):
        states, masks = smooth_setup
        features = no_feature(len(states))
        features[5] = (True, "")
        features[9] = (False, "hello")
        g = build_graph(states, masks, features, Thresholds(0.0, 0.0, 4))
        assert g.nodes[5].onset and g.nodes[5].keyword == ""
        assert not g.nodes[9].onset and g.nodes[9].keyword == "hello"

    def test_length_mismatch(self, smooth_setup):
        states, masks = smooth_setup
        with pytest.raises(StructuralError):
            build_graph(states, masks[:-1], no_feature(len(states)), Thresholds(0, 0, 4))
        with pytest.raises(StructuralError):
            build_graph(states, masks, no_feature(len(states) - 2), Thresholds(0, 0, 4))

    def test_determinism(self, smooth_setup):
        states, masks = smooth_setup
        thr = compute_thresholds(states, masks, offset_l=4)
        a = build_graph(states, masks, no_feature(len(states)), thr)
        b = build_graph(states, masks, no_feature(len(states)), thr)
        assert a.edges == b.edges


class TestGraphInvariants:
    def _nodes(self, n):
        return [GraphNode(i, False, "") for i in range(n)]

    def _chain(self, n):
        return [GraphEdge(i, i + 1, "natural", 0.0, 0.0) for i in range(n - 1)]

    def test_missing_natural_edge_rejected(self):
        edges = self._chain(4)[:-1]
        with pytest.raises(ValidationError):
            VideoMotionGraph(self._nodes(4), edges, Thresholds(0, 0, 4))

    def test_self_edge_rejected(self):
        edges = self._chain(3) + [GraphEdge(1, 1, "synthetic", 0.0, 0.0)]
        with pytest.raises(ValidationError):
            VideoMotionGraph(self._nodes(3), edges, Thresholds(0, 0, 4))

    def test_duplicate_edge_rejected(self):
        edges = self._chain(4) + [
            GraphEdge(0, 2, "synthetic", 0.0, 0.0),
            GraphEdge(0, 2, "synthetic", 0.0, 0.0),
        ]
        with pytest.raises(ValidationError):
            VideoMotionGraph(self._nodes(4), edges, Thresholds(0, 0, 4))


class TestSerialization:
    def _toy_graph(self):
        nodes = [GraphNode(0, True, ""), GraphNode(1, False, ""), GraphNode(2, False, "hi")]
        edges = [
            GraphEdge(0, 1, "natural", 0.0, 0.0),
            GraphEdge(1, 2, "natural", 0.0, 0.0),
            GraphEdge(0, 2, "synthetic", 0.123456789012345678, 0.5),
        ]
        return VideoMotionGraph(nodes, edges, Thresholds(0.2, 0.6, 4), fps=25.0)

    def test_roundtrip_field_equality(self):
        g = self._toy_graph()
        g2 = load_graph(save_graph(g))
        assert g2.nodes == g.nodes
        assert g2.edges == g.edges
        assert g2.thresholds == g.thresholds
        assert g2.fps == g.fps and g2.min_jump == g.min_jump

    def test_truncated_stream_is_parse_error(self):
        blob = save_graph(self._toy_graph())
        with pytest.raises(GraphParseError) as err:
            load_graph(blob[: len(blob) // 2])
        assert err.value.offset >= 0

    def test_garbage_is_parse_error(self):
        with pytest.raises(GraphParseError):
            load_graph(b"\xff\xfe not json")
        with pytest.raises(GraphParseError):
            load_graph(b'{"format": "something-else"}')

    def test_random_graph_roundtrip(self, smooth_setup):
        rng = np.random.default_rng(10)
        n = 1000
        nodes = [
            GraphNode(i, bool(rng.random() < 0.1), rng.choice(["", "", "hello", "two"]))
            for i in range(n)
        ]
        edges = [GraphEdge(i, i + 1, "natural", 0.0, 0.0) for i in range(n - 1)]
        seen = set()
        while len(seen) < 3000:
            m, k = rng.integers(0, n, size=2)
            if abs(int(m) - int(k)) < 2 or (int(m), int(k)) in seen:
                continue
            seen.add((int(m), int(k)))
            edges.append(
                GraphEdge(int(m), int(k), "synthetic", float(rng.random()), float(rng.random()))
            )
        g = VideoMotionGraph(nodes, edges, Thresholds(1.0, 1.0, 4))
        g2 = load_graph(save_graph(g))
        assert len(g2.edges) == len(g.edges)
        assert {(e.src, e.dst): (e.d_feat, e.d_img) for e in g2.edges} == {
            (e.src, e.dst): (e.d_feat, e.d_img) for e in g.edges
        }

    def test_bytes_stable(self):
        g = self._toy_graph()
        assert save_graph(g) == save_graph(load_graph(save_graph(g)))
