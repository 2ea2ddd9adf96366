"""Beam search over the motion graph, matched to target audio segments.

Each target segment a_s -> a_{s+1} of duration L_s must be covered by a walk
that ends on a node whose audio feature matches the segment's endpoint
feature and whose length L' stays within the duration window
(low <= L'/L_s <= high). Candidates rank by transition cost
(sum of d_feat + d_img over traversed edges) plus duration cost
(sum of |1 - L'_s/L_s|); after every segment only the best ``beam_width``
paths survive.

Because every segment interior is featureless in the target by construction,
expansions route around onset-activated nodes: they may appear only as
segment start/terminal nodes (configurable).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .audio import EndpointFeature, SegmentList
from .errors import SegmentUnreachableError, StructuralError, ValidationError
from .graph import VideoMotionGraph

DEFAULT_BEAM_WIDTH = 20
DEFAULT_DURATION_WINDOW = (0.9, 1.1)
EXPANSION_SLACK = 8

SEARCH_RESULT_FORMAT = "search-result/1"


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = DEFAULT_BEAM_WIDTH
    duration_window: tuple[float, float] = DEFAULT_DURATION_WINDOW
    max_expansion_frames: int | None = None  # per-segment cap; None = derived
    duration_weight: float = 1.0
    avoid_onsets_mid_segment: bool = True
    dedup: bool = False

    def __post_init__(self):
        low, high = self.duration_window
        if not 0.0 < low <= 1.0 <= high:
            raise ValidationError(
                f"duration window must satisfy 0 < low <= 1 <= high, got {self.duration_window}"
            )
        if self.beam_width < 1:
            raise ValidationError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.duration_weight < 0:
            raise ValidationError("duration_weight must be >= 0")


@dataclass(frozen=True)
class PathCandidate:
    node_sequence: tuple[int, ...]
    transition_cost: float
    duration_cost: float
    segment_boundaries: tuple[int, ...]  # indices into node_sequence, [0, ...]

    @property
    def durations(self) -> tuple[int, ...]:
        """Achieved L'_s per segment (edge counts between boundaries)."""
        return tuple(
            b - a for a, b in zip(self.segment_boundaries, self.segment_boundaries[1:])
        )

    def total_cost(self, duration_weight: float = 1.0) -> float:
        return self.transition_cost + duration_weight * self.duration_cost


@dataclass(frozen=True)
class SearchResult:
    paths: tuple[PathCandidate, ...]  # sorted by total cost ascending
    seed: int
    config: BeamConfig

    @property
    def best(self) -> PathCandidate:
        if not self.paths:
            raise ValidationError("search produced no paths")
        return self.paths[0]

    @property
    def achieved_durations(self) -> tuple[int, ...]:
        return self.best.durations


def duration_bounds(target_length: int, low: float, high: float) -> tuple[int, int]:
    """Smallest and largest integer lengths accepted by the duration window.

    Acceptance is evaluated on the ratio L'/L_s (low <= L'/L_s <= high with
    exact float comparison), so exact boundaries such as 9/10 == 0.9 are
    accepted regardless of how low * L_s rounds.
    """
    lo = max(1, math.floor(low * target_length) - 1)
    while lo / target_length < low:
        lo += 1
    hi = math.ceil(high * target_length) + 1
    while hi / target_length > high:
        hi -= 1
    return lo, hi


def in_duration_window(
    achieved: int, target_length: int, window: tuple[float, float]
) -> bool:
    ratio = achieved / target_length
    return window[0] <= ratio <= window[1]


def _matches(node, feature: EndpointFeature) -> bool:
    if feature.kind == "end":
        return True
    if feature.kind == "onset":
        return node.onset
    if feature.kind == "keyword":
        return node.keyword == feature.word
    raise ValidationError(f"unknown endpoint feature kind {feature.kind!r}")


def _sort_key(candidate: PathCandidate, duration_weight: float):
    return (
        candidate.total_cost(duration_weight),
        candidate.node_sequence[-1],
        candidate.node_sequence,
    )


def expand_segment(
    graph: VideoMotionGraph,
    candidates: list[PathCandidate],
    target_feature: EndpointFeature,
    target_length: int,
    config: BeamConfig = BeamConfig(),
    segment_index: int = 0,
    _arrays=None,
) -> list[PathCandidate]:
    """Extend every candidate across one target segment.

    Returns all extensions whose appended walk ends on a matching node with
    a window-accepted length; the caller prunes. Raises
    SegmentUnreachableError when no candidate admits any such walk.
    """
    if not candidates:
        raise ValidationError("expand_segment needs at least one start candidate")
    if target_length < 1:
        raise ValidationError(f"target segment length must be >= 1, got {target_length}")

    low, high = config.duration_window
    lo_len, hi_len = duration_bounds(target_length, low, high)
    cap = config.max_expansion_frames
    if cap is None:
        cap = math.ceil(high * target_length) + EXPANSION_SLACK
    hi_len = min(hi_len, cap)
    if hi_len < lo_len:
        raise SegmentUnreachableError(
            segment_index,
            f"segment {segment_index}: expansion cap {cap} below minimum length {lo_len}",
        )

    src, dst, cost = _arrays if _arrays is not None else graph.edge_arrays()
    n = len(graph)
    if config.avoid_onsets_mid_segment:
        allowed = ~graph.onset_flags
    else:
        allowed = np.ones(n, dtype=bool)
    match = np.array([_matches(node, target_feature) for node in graph.nodes], dtype=bool)

    by_start: dict[int, list[PathCandidate]] = {}
    for cand in candidates:
        by_start.setdefault(cand.node_sequence[-1], []).append(cand)

    extended: list[PathCandidate] = []
    for start, group in sorted(by_start.items()):
        dist, parent = kernels.walk_distances(src, dst, cost, n, start, allowed, hi_len)
        for length in range(lo_len, hi_len + 1):
            if not in_duration_window(length, target_length, (low, high)):
                continue
            row = dist[length]
            hits = np.flatnonzero(np.isfinite(row) & match)
            if hits.size == 0:
                continue
            dur_inc = abs(1.0 - length / target_length)
            for v in hits:
                walk = [int(v)]
                node = int(v)
                for step in range(length, 0, -1):
                    node = int(parent[step, node])
                    walk.append(node)
                walk.reverse()  # walk[0] == start
                for cand in group:
                    extended.append(
                        PathCandidate(
                            node_sequence=cand.node_sequence + tuple(walk[1:]),
                            transition_cost=cand.transition_cost + float(row[v]),
                            duration_cost=cand.duration_cost + dur_inc,
                            segment_boundaries=cand.segment_boundaries
                            + (cand.segment_boundaries[-1] + length,),
                        )
                    )
    if not extended:
        raise SegmentUnreachableError(
            segment_index,
            f"segment {segment_index}: no walk of length {lo_len}..{hi_len} reaches a "
            f"node matching {target_feature.kind}"
            + (f"({target_feature.word})" if target_feature.word else ""),
        )
    return extended


def beam_search(
    graph: VideoMotionGraph,
    segments: SegmentList,
    config: BeamConfig = BeamConfig(),
    seed: int = 0,
    start_frame: int | None = None,
) -> SearchResult:
    """Find up to ``beam_width`` low-cost paths matching all target segments.

    Starts are ``beam_width`` random nodes under ``seed`` (all nodes, when the
    beam is at least as wide as the graph), or a single caller-pinned
    ``start_frame``. Deterministic for fixed inputs and seed.
    """
    if len(graph) < 1:
        raise ValidationError("graph has no nodes")
    if start_frame is not None:
        if not 0 <= start_frame < len(graph):
            raise ValidationError(f"start_frame {start_frame} outside 0..{len(graph) - 1}")
        starts = [start_frame]
    elif config.beam_width >= len(graph):
        starts = list(range(len(graph)))
    else:
        rng = np.random.default_rng(seed)
        starts = [int(s) for s in rng.choice(len(graph), size=config.beam_width, replace=False)]

    candidates = [
        PathCandidate(
            node_sequence=(s,),
            transition_cost=0.0,
            duration_cost=0.0,
            segment_boundaries=(0,),
        )
        for s in starts
    ]
    arrays = graph.edge_arrays()
    durations = segments.durations
    for s in range(segments.segment_count):
        candidates = expand_segment(
            graph,
            candidates,
            segments.features[s + 1],
            durations[s],
            config,
            segment_index=s,
            _arrays=arrays,
        )
        if config.dedup:
            unique = {c.node_sequence: c for c in candidates}
            candidates = list(unique.values())
        candidates.sort(key=lambda c: _sort_key(c, config.duration_weight))
        candidates = candidates[: config.beam_width]
    return SearchResult(paths=tuple(candidates), seed=seed, config=config)


def recompute_costs(
    graph: VideoMotionGraph, candidate: PathCandidate, target_durations
) -> tuple[float, float]:
    """Re-derive (transition_cost, duration_cost) from the graph.

    Accumulation mirrors the search exactly (per-segment partial sums), so
    equality with the reported costs is bitwise for identical inputs.
    """
    index = graph.edge_index()
    bounds = candidate.segment_boundaries
    if len(bounds) != len(target_durations) + 1:
        raise StructuralError(
            f"{len(bounds) - 1} matched segments vs {len(target_durations)} targets"
        )
    transition = 0.0
    duration = 0.0
    for s, target in enumerate(target_durations):
        seg_cost = 0.0
        for i in range(bounds[s], bounds[s + 1]):
            a, b = candidate.node_sequence[i], candidate.node_sequence[i + 1]
            edge = index.get((a, b))
            if edge is None:
                raise ValidationError(f"path step ({a}, {b}) is not a graph edge")
            seg_cost += edge.cost
        transition += seg_cost
        achieved = bounds[s + 1] - bounds[s]
        duration += abs(1.0 - achieved / target)
    return transition, duration


# ---------------------------------------------------------------------------
# playback resampling (speed adjustment to the target duration)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlaybackEntry:
    source_frame: int  # reference frame id (nearest run frame)
    position: float  # fractional index into the run, for downstream blending


@dataclass(frozen=True)
class ResampledRun:
    entries: tuple[PlaybackEntry, ...]
    speed_factor: float  # L' / L_s; >1 plays faster than source


def resample_segment(
    node_run,
    target_length: int,
    window: tuple[float, float] | None = DEFAULT_DURATION_WINDOW,
) -> ResampledRun:
    """Uniformly resample a frame run to ``target_length`` playback entries.

    Nearest-frame selection with round-half-up on the run position
    i * (L'-1) / (L_s-1); endpoints always map to the run's first and last
    frames. Pass ``window=None`` to skip the ratio validation (the search has
    already gated segment lengths; assembly re-resamples trimmed runs whose
    ratios may drift slightly).
    """
    run = [int(f) for f in node_run]
    if not run:
        raise ValidationError("cannot resample an empty run")
    if target_length < 1:
        raise ValidationError(f"target_length must be >= 1, got {target_length}")
    ratio = len(run) / target_length
    if window is not None and not in_duration_window(len(run), target_length, window):
        raise ValidationError(
            f"run length {len(run)} vs target {target_length}: ratio {ratio} "
            f"outside window {window}"
        )
    entries = []
    if target_length == 1:
        positions = [float(len(run) - 1)]
    else:
        positions = [i * (len(run) - 1) / (target_length - 1) for i in range(target_length)]
    for pos in positions:
        entries.append(PlaybackEntry(source_frame=run[math.floor(pos + 0.5)], position=pos))
    return ResampledRun(entries=tuple(entries), speed_factor=ratio)


# ---------------------------------------------------------------------------
# search-result file
# ---------------------------------------------------------------------------


def save_search_result(path: str | Path, result: SearchResult) -> None:
    doc = {
        "format": SEARCH_RESULT_FORMAT,
        "seed": result.seed,
        "beam_width": result.config.beam_width,
        "duration_window": list(result.config.duration_window),
        "duration_weight": result.config.duration_weight,
        "paths": [
            {
                "nodes": list(p.node_sequence),
                "transition_cost": p.transition_cost,
                "duration_cost": p.duration_cost,
                "boundaries": list(p.segment_boundaries),
            }
            for p in result.paths
        ],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_search_result(path: str | Path) -> SearchResult:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != SEARCH_RESULT_FORMAT:
        raise ValidationError(f"{path}: unknown search-result format {doc.get('format')!r}")
    config = BeamConfig(
        beam_width=int(doc["beam_width"]),
        duration_window=tuple(doc["duration_window"]),
        duration_weight=float(doc["duration_weight"]),
    )
    paths = tuple(
        PathCandidate(
            node_sequence=tuple(int(v) for v in p["nodes"]),
            transition_cost=float(p["transition_cost"]),
            duration_cost=float(p["duration_cost"]),
            segment_boundaries=tuple(int(b) for b in p["boundaries"]),
        )
        for p in doc["paths"]
    )
    return SearchResult(paths=paths, seed=int(doc["seed"]), config=config)
