"""The video motion graph: reference frames as nodes, transitions as edges.

Natural edges chain consecutive frames at zero cost. Synthetic edges connect
disjoint frames whose pose distance (3D) and silhouette distance (image
space) both fall below thresholds calibrated from the sequence itself: the
mean distance between frames ``l`` apart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import GraphParseError, StructuralError, ValidationError
from .pose import JointState, pose_distance

DEFAULT_OFFSET_L = 4
DEFAULT_MIN_JUMP = 2

GRAPH_FORMAT = "motion-graph/1"


@dataclass(frozen=True)
class GraphNode:
    frame_index: int
    onset: bool
    keyword: str  # "" when no dictionary word is active


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    kind: str  # "natural" | "synthetic"
    d_feat: float
    d_img: float

    @property
    def cost(self) -> float:
        return self.d_feat + self.d_img


@dataclass(frozen=True)
class Thresholds:
    tau_feat: float
    tau_img: float
    offset_l: int

    def __post_init__(self):
        if self.tau_feat < 0 or self.tau_img < 0:
            raise ValidationError("thresholds must be >= 0")
        if self.offset_l < 1:
            raise ValidationError(f"offset_l must be >= 1, got {self.offset_l}")


@dataclass
class VideoMotionGraph:
    nodes: list[GraphNode]
    edges: list[GraphEdge]
    thresholds: Thresholds
    fps: float = 30.0
    min_jump: int = DEFAULT_MIN_JUMP
    velocity_weight: float = 1.0

    def __post_init__(self):
        n = len(self.nodes)
        seen: set[tuple[int, int]] = set()
        natural = set()
        for e in self.edges:
            if e.src == e.dst:
                raise ValidationError(f"self-edge at frame {e.src}")
            if (e.src, e.dst) in seen:
                raise ValidationError(f"duplicate edge ({e.src}, {e.dst})")
            seen.add((e.src, e.dst))
            if e.kind == "natural":
                if e.dst != e.src + 1:
                    raise ValidationError(
                        f"natural edge ({e.src}, {e.dst}) must connect consecutive frames"
                    )
                natural.add(e.src)
        if n >= 2 and natural != set(range(n - 1)):
            raise ValidationError("natural edges must form the full chain 0..N-1")
        for i, node in enumerate(self.nodes):
            if node.frame_index != i:
                raise ValidationError("node frame indices must be 0..N-1 in order")

    def __len__(self) -> int:
        return len(self.nodes)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Canonically ordered (src, dst, cost) arrays for the search kernels."""
        order = sorted(range(len(self.edges)), key=lambda i: (self.edges[i].src, self.edges[i].dst))
        src = np.array([self.edges[i].src for i in order], dtype=np.int64)
        dst = np.array([self.edges[i].dst for i in order], dtype=np.int64)
        cost = np.array([self.edges[i].cost for i in order], dtype=np.float64)
        return src, dst, cost

    def edge_index(self) -> dict[tuple[int, int], GraphEdge]:
        return {(e.src, e.dst): e for e in self.edges}

    @property
    def onset_flags(self) -> np.ndarray:
        return np.array([node.onset for node in self.nodes], dtype=bool)


def compute_thresholds(
    joint_states: Sequence[JointState],
    masks: np.ndarray,
    offset_l: int = DEFAULT_OFFSET_L,
    velocity_weight: float = 1.0,
) -> Thresholds:
    """Mean distance between frames (m, m + l), per metric.

    A larger ``offset_l`` admits more dissimilar frame pairs into the
    average, raising both thresholds and densifying the graph.
    """
    from .silhouette import SilhouetteMask, image_distance

    n = len(joint_states)
    if offset_l < 1:
        raise ValidationError(f"offset_l must be >= 1, got {offset_l}")
    if n <= offset_l:
        raise ValidationError(
            f"sequence of {n} frames is too short for threshold offset l={offset_l}"
        )
    if masks.shape[0] != n:
        raise StructuralError(f"{masks.shape[0]} masks for {n} joint states")
    h, w = masks.shape[1], masks.shape[2]
    feat = 0.0
    img = 0.0
    for m in range(n - offset_l):
        feat += pose_distance(joint_states[m], joint_states[m + offset_l], velocity_weight)
        img += image_distance(
            SilhouetteMask(w, h, masks[m]), SilhouetteMask(w, h, masks[m + offset_l])
        )
    count = n - offset_l
    return Thresholds(tau_feat=feat / count, tau_img=img / count, offset_l=offset_l)


def _approx_pair_distances(joint_states: Sequence[JointState], velocity_weight: float):
    """Full pairwise d_feat matrix via the Gram trick (gating only)."""
    pos = np.stack([s.positions.ravel() for s in joint_states]).astype(np.float64)
    vel = np.stack([s.velocities.ravel() for s in joint_states]).astype(np.float64)

    def sq_dists(x):
        sq = np.sum(x * x, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
        return np.maximum(d2, 0.0)

    return np.sqrt(sq_dists(pos)) + velocity_weight * np.sqrt(sq_dists(vel))


def build_graph(
    joint_states: Sequence[JointState],
    masks: np.ndarray,
    features: Sequence[tuple[bool, str]],
    thresholds: Thresholds,
    min_jump: int = DEFAULT_MIN_JUMP,
    velocity_weight: float = 1.0,
    fps: float = 30.0,
) -> VideoMotionGraph:
    """Assemble nodes and all natural + gated synthetic transitions.

    A synthetic edge (m, n) exists iff |m - n| >= min_jump and both
    d_feat(m, n) <= tau_feat and d_img(m, n) <= tau_img. Both directions are
    created (the metrics are symmetric, playback is directed). Pairs are
    pre-gated with a vectorized d_feat approximation, then re-checked with
    the exact per-pair operations so the stored distances match them
    bit-for-bit.
    """
    n = len(joint_states)
    if n < 2:
        raise ValidationError("need at least 2 frames to build a graph")
    if masks.shape[0] != n or len(features) != n:
        raise StructuralError(
            f"length mismatch: {n} joint states, {masks.shape[0]} masks, "
            f"{len(features)} feature records"
        )
    if min_jump < 2:
        raise ValidationError(f"min_jump must be >= 2, got {min_jump}")

    nodes = [
        GraphNode(frame_index=i, onset=bool(on), keyword=str(kw))
        for i, (on, kw) in enumerate(features)
    ]
    edges = [
        GraphEdge(src=i, dst=i + 1, kind="natural", d_feat=0.0, d_img=0.0)
        for i in range(n - 1)
    ]

    approx = _approx_pair_distances(joint_states, velocity_weight)
    margin = 1e-8 * (1.0 + thresholds.tau_feat)
    mm, nn = np.triu_indices(n, k=min_jump)
    cand = approx[mm, nn] <= thresholds.tau_feat + margin
    mm, nn = mm[cand], nn[cand]

    # Exact d_feat filter.
    keep = []
    feat_vals = []
    for m, k in zip(mm, nn):
        d = pose_distance(joint_states[m], joint_states[k], velocity_weight)
        if d <= thresholds.tau_feat:
            keep.append((int(m), int(k)))
            feat_vals.append(d)
    if keep:
        pairs = np.array(keep, dtype=np.int64)
        packed = kernels.pack_masks(masks)
        areas = masks.reshape(n, -1).sum(axis=1).astype(np.int64)
        inter = kernels.pair_intersections(packed, pairs)
        union = areas[pairs[:, 0]] + areas[pairs[:, 1]] - inter
        for (m, k), d_feat, i, u in zip(keep, feat_vals, inter, union):
            d_img = 0.0 if u == 0 else 1.0 - int(i) / int(u)
            if d_img <= thresholds.tau_img:
                edges.append(GraphEdge(m, k, "synthetic", d_feat, d_img))
                edges.append(GraphEdge(k, m, "synthetic", d_feat, d_img))

    edges[n - 1 :] = sorted(edges[n - 1 :], key=lambda e: (e.src, e.dst))
    return VideoMotionGraph(
        nodes=nodes,
        edges=edges,
        thresholds=thresholds,
        fps=fps,
        min_jump=min_jump,
        velocity_weight=velocity_weight,
    )


# ---------------------------------------------------------------------------
# serialization (JSON; floats use repr round-tripping, so scalars are
# bit-exact across save/load)
# ---------------------------------------------------------------------------


def save_graph(graph: VideoMotionGraph) -> bytes:
    doc = {
        "format": GRAPH_FORMAT,
        "fps": graph.fps,
        "min_jump": graph.min_jump,
        "velocity_weight": graph.velocity_weight,
        "thresholds": {
            "tau_feat": graph.thresholds.tau_feat,
            "tau_img": graph.thresholds.tau_img,
            "offset_l": graph.thresholds.offset_l,
        },
        "nodes": [
            {"frame": node.frame_index, "onset": node.onset, "keyword": node.keyword}
            for node in graph.nodes
        ],
        "edges": [
            {
                "src": e.src,
                "dst": e.dst,
                "kind": e.kind,
                "d_feat": e.d_feat,
                "d_img": e.d_img,
            }
            for e in graph.edges
        ],
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def load_graph(stream: bytes) -> VideoMotionGraph:
    try:
        doc = json.loads(stream.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise GraphParseError(f"graph stream is not UTF-8: {exc}", offset=exc.start) from exc
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"graph stream is not valid JSON: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(doc, dict) or doc.get("format") != GRAPH_FORMAT:
        raise GraphParseError(
            f"unsupported graph format {doc.get('format')!r}" if isinstance(doc, dict) else "graph document must be a JSON object"
        )
    try:
        nodes = [
            GraphNode(frame_index=int(n["frame"]), onset=bool(n["onset"]), keyword=str(n["keyword"]))
            for n in doc["nodes"]
        ]
        edges = [
            GraphEdge(
                src=int(e["src"]),
                dst=int(e["dst"]),
                kind=str(e["kind"]),
                d_feat=float(e["d_feat"]),
                d_img=float(e["d_img"]),
            )
            for e in doc["edges"]
        ]
        thresholds = Thresholds(
            tau_feat=float(doc["thresholds"]["tau_feat"]),
            tau_img=float(doc["thresholds"]["tau_img"]),
            offset_l=int(doc["thresholds"]["offset_l"]),
        )
        graph = VideoMotionGraph(
            nodes=nodes,
            edges=edges,
            thresholds=thresholds,
            fps=float(doc["fps"]),
            min_jump=int(doc["min_jump"]),
            velocity_weight=float(doc["velocity_weight"]),
        )
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise GraphParseError(f"graph document is malformed: {exc}") from exc
    return graph


def save_graph_file(graph: VideoMotionGraph, path: str | Path) -> None:
    Path(path).write_bytes(save_graph(graph))


def load_graph_file(path: str | Path) -> VideoMotionGraph:
    return load_graph(Path(path).read_bytes())
