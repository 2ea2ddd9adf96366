"""Command-line pipeline: reference performance in, edit decision list out.

Stages communicate only via files, so each subcommand can run in isolation:

    build-graph    pose track + reference features -> graph file
    analyze-audio  WAV + transcript -> feature + segment files
    search         graph + segments -> path file (seeded)
    assemble       path -> EDL file
    preview        EDL -> numbered PGM frames
    run            all of the above end-to-end

Usage problems (unknown flags, missing input files) exit with code 2 before
anything is written; pipeline failures exit 1 with a diagnostic naming the
stage.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from . import assembly, audio, graph as graph_mod, pose, search, silhouette
from .errors import MotionGraphError

STATUS_FAILURE = 1
STATUS_USAGE = 2


class _Stage:
    """Context that converts engine errors into stage-named diagnostics."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, MotionGraphError):
            raise SystemExit(f"error in {self.name}: {exc}")
        return False


def _require_files(parser: argparse.ArgumentParser, *paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            parser.error(f"input file not found: {p}")


def _parse_window(text: str) -> tuple[float, float]:
    try:
        low, high = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected two comma-separated numbers, got {text!r}"
        )
    return low, high


def _load_camera_arg(path: str | None) -> silhouette.CameraModel:
    if path is None:
        return silhouette.default_camera()
    return silhouette.load_camera(path)


def _add_search_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="random seed for start nodes")
    sub.add_argument(
        "--beam-width", type=int, default=search.DEFAULT_BEAM_WIDTH,
        help="number of candidate paths kept per segment",
    )
    sub.add_argument(
        "--duration-window", type=_parse_window, default=search.DEFAULT_DURATION_WINDOW,
        metavar="LOW,HIGH", help="accepted L'/L ratio band (default 0.9,1.1)",
    )
    sub.add_argument("--duration-weight", type=float, default=1.0)
    sub.add_argument(
        "--start-frame", type=int, default=None,
        help="pin all starts to one reference frame instead of sampling",
    )
    sub.add_argument(
        "--allow-onsets-mid-segment", action="store_true",
        help="let expansions pass through onset-activated nodes",
    )
    sub.add_argument("--dedup", action="store_true", help="drop duplicate paths per beam step")


def _beam_config(args) -> search.BeamConfig:
    return search.BeamConfig(
        beam_width=args.beam_width,
        duration_window=tuple(args.duration_window),
        duration_weight=args.duration_weight,
        avoid_onsets_mid_segment=not args.allow_onsets_mid_segment,
        dedup=args.dedup,
    )


def _cmd_build_graph(parser, args) -> int:
    _require_files(parser, args.poses, args.features, args.camera)
    with _Stage("build-graph"):
        skeleton, sequence = pose.load_pose_track(args.poses)
        features = audio.load_features(args.features)
        if len(features) != len(sequence):
            parser.error(
                f"feature file covers {len(features)} frames but pose track has "
                f"{len(sequence)}"
            )
        camera = _load_camera_arg(args.camera)
        states = pose.compute_joint_states(skeleton, sequence)
        masks = silhouette.rasterize_sequence(
            skeleton, (s.positions for s in states), camera
        )
        if args.dump_masks:
            dump = Path(args.dump_masks)
            dump.mkdir(parents=True, exist_ok=True)
            w, h = camera.image_size
            for i in range(masks.shape[0]):
                silhouette.write_pgm(
                    silhouette.SilhouetteMask(w, h, masks[i]), dump / f"mask_{i:06d}.pgm"
                )
        thresholds = graph_mod.compute_thresholds(
            states, masks, offset_l=args.threshold_offset, velocity_weight=args.velocity_weight
        )
        built = graph_mod.build_graph(
            states,
            masks,
            features.records(),
            thresholds,
            min_jump=args.min_jump,
            velocity_weight=args.velocity_weight,
            fps=sequence.fps,
        )
        graph_mod.save_graph_file(built, args.out)
    n_synth = sum(1 for e in built.edges if e.kind == "synthetic")
    print(
        f"graph: {len(built)} nodes, {len(built.edges)} edges ({n_synth} synthetic), "
        f"tau_feat={built.thresholds.tau_feat:.6g}, tau_img={built.thresholds.tau_img:.6g} "
        f"-> {args.out}"
    )
    return 0


def _cmd_analyze_audio(parser, args) -> int:
    _require_files(parser, args.wav, args.transcript, args.dictionary)
    with _Stage("analyze-audio"):
        samples, rate = audio.read_wav(args.wav)
        transcript = audio.load_transcript(args.transcript) if args.transcript else []
        dictionary = (
            audio.load_dictionary(args.dictionary)
            if args.dictionary
            else audio.default_dictionary()
        )
        config = audio.OnsetConfig(threshold_delta=args.onset_delta)
        track = audio.analyze_audio(
            samples, rate, args.fps, transcript, dictionary, config
        )
        audio.save_features(args.features_out, track)
        segments = audio.segment_target(track)
        audio.save_segments(args.segments_out, segments)
    print(
        f"features: {len(track)} frames, {int(track.onsets.sum())} onsets, "
        f"{segments.segment_count} segments -> {args.features_out}, {args.segments_out}"
    )
    return 0


def _cmd_search(parser, args) -> int:
    _require_files(parser, args.graph, args.segments)
    with _Stage("search"):
        built = graph_mod.load_graph_file(args.graph)
        segments = audio.load_segments(args.segments)
        result = search.beam_search(
            built, segments, _beam_config(args), seed=args.seed, start_frame=args.start_frame
        )
        search.save_search_result(args.out, result)
    best = result.best
    print(
        f"search: {len(result.paths)} paths, best cost "
        f"{best.total_cost(args.duration_weight):.6g} "
        f"({len(best.node_sequence)} nodes) -> {args.out}"
    )
    return 0


def _cmd_assemble(parser, args) -> int:
    _require_files(parser, args.graph, args.poses, args.segments, args.path, args.target_features)
    with _Stage("assemble"):
        built = graph_mod.load_graph_file(args.graph)
        _, sequence = pose.load_pose_track(args.poses)
        segments = audio.load_segments(args.segments)
        result = search.load_search_result(args.path)
        speech = (
            audio.load_features(args.target_features) if args.target_features else None
        )
        provenance = {
            "graph_sha256": hashlib.sha256(Path(args.graph).read_bytes()).hexdigest(),
            "search_seed": result.seed,
        }
        if args.path_index is not None:
            chosen = [(args.path_index, result.paths[args.path_index])]
        else:
            chosen = list(enumerate(result.paths))
        edl = None
        for rank, candidate in chosen:
            try:
                edl = assembly.assemble_edl(
                    candidate,
                    built,
                    segments,
                    sequence.frames,
                    k=args.blend_k,
                    provenance=dict(provenance, path_rank=rank),
                    speech_track=speech,
                )
                break
            except MotionGraphError as exc:
                if len(chosen) == 1:
                    raise
                print(f"assemble: path {rank} rejected ({exc}); trying next", file=sys.stderr)
        if edl is None:
            raise assembly.AssemblyError("no searched path can host the blend windows")
        assembly.save_edl(args.out, edl)
    n_trans = sum(1 for e in edl.entries if isinstance(e, assembly.TransitionEntry))
    print(
        f"edl: {edl.total_frames} output frames, {n_trans} transitions, "
        f"k={edl.blend_k} -> {args.out}"
    )
    return 0


def _cmd_preview(parser, args) -> int:
    _require_files(parser, args.edl, args.poses, args.camera)
    with _Stage("preview"):
        edl = assembly.load_edl(args.edl)
        skeleton, sequence = pose.load_pose_track(args.poses)
        camera = _load_camera_arg(args.camera)
        config = assembly.RenderConfig(
            image_size=tuple(camera.image_size),
            camera=camera,
            stroke_radius=args.stroke_radius,
            output_dir=args.out_dir,
        )
        written = assembly.render_preview(edl, skeleton, sequence.frames, config)
    print(f"preview: {len(written)} frames -> {args.out_dir}")
    return 0


def _cmd_run(parser, args) -> int:
    _require_files(
        parser, args.poses, args.ref_wav, args.ref_transcript, args.wav,
        args.transcript, args.camera, args.dictionary,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ns = argparse.Namespace(**vars(args))
    ns.features_out = out / "reference_features.json"
    ns.segments_out = out / "reference_segments.json"
    saved_wav, saved_tr = args.wav, args.transcript
    ns.wav, ns.transcript = args.ref_wav, args.ref_transcript
    _cmd_analyze_audio(parser, ns)

    ns.wav, ns.transcript = saved_wav, saved_tr
    ns.features_out = out / "target_features.json"
    ns.segments_out = out / "target_segments.json"
    _cmd_analyze_audio(parser, ns)

    ns.features = out / "reference_features.json"
    ns.out = out / "graph.json"
    _cmd_build_graph(parser, ns)

    ns.graph = out / "graph.json"
    ns.segments = out / "target_segments.json"
    ns.out = out / "path.json"
    _cmd_search(parser, ns)

    ns.path = out / "path.json"
    ns.target_features = out / "target_features.json"
    ns.path_index = None
    ns.out = out / "edl.json"
    _cmd_assemble(parser, ns)

    if args.preview:
        ns.edl = out / "edl.json"
        ns.out_dir = out / "preview"
        ns.stroke_radius = None
        _cmd_preview(parser, ns)
    print(f"run: artifacts in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motiongraph",
        description="Build a video motion graph from a reference performance and "
        "search it for playback paths matching a target audio.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="pose track + features -> graph file")
    p.add_argument("--poses", required=True, help="pose track JSON")
    p.add_argument("--features", required=True, help="reference audio features JSON")
    p.add_argument("--camera", default=None, help="camera JSON (default: built-in camera)")
    p.add_argument("--out", required=True, help="output graph file")
    p.add_argument("--threshold-offset", type=int, default=graph_mod.DEFAULT_OFFSET_L,
                   help="frame offset l for threshold calibration (default 4)")
    p.add_argument("--min-jump", type=int, default=graph_mod.DEFAULT_MIN_JUMP,
                   help="minimum |m-n| for synthetic transitions (default 2)")
    p.add_argument("--velocity-weight", type=float, default=1.0,
                   help="weight of the velocity term in d_feat (default 1.0)")
    p.add_argument("--dump-masks", default=None, metavar="DIR",
                   help="also write per-frame silhouette PGMs")
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("analyze-audio", help="WAV + transcript -> feature/segment files")
    p.add_argument("--wav", required=True, help="16-bit PCM WAV (mono or stereo)")
    p.add_argument("--transcript", default=None, help="word-timing JSON")
    p.add_argument("--dictionary", default=None, help="keyword dictionary JSON (default: built-in)")
    p.add_argument("--fps", type=float, default=30.0, help="video frame rate (default 30)")
    p.add_argument("--onset-delta", type=float, default=audio.OnsetConfig().threshold_delta,
                   help="onset peak threshold in local std units")
    p.add_argument("--features-out", required=True)
    p.add_argument("--segments-out", required=True)
    p.set_defaults(func=_cmd_analyze_audio)

    p = sub.add_parser("search", help="graph + segments -> path file")
    p.add_argument("--graph", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--out", required=True)
    _add_search_flags(p)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("assemble", help="path -> EDL file")
    p.add_argument("--graph", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--path", required=True, help="search-result file")
    p.add_argument("--target-features", default=None,
                   help="target feature file, for speech marks in the EDL")
    p.add_argument("--blend-k", type=int, default=assembly.DEFAULT_BLEND_K,
                   help="blend neighborhood size k (default 4)")
    p.add_argument("--path-index", type=int, default=None,
                   help="assemble exactly this path rank (default: best that fits)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("preview", help="EDL -> numbered PGM frames")
    p.add_argument("--edl", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--camera", default=None)
    p.add_argument("--stroke-radius", type=float, default=None,
                   help="override capsule radii (meters) when drawing")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_preview)

    p = sub.add_parser("run", help="end-to-end pipeline")
    p.add_argument("--poses", required=True)
    p.add_argument("--ref-wav", required=True)
    p.add_argument("--ref-transcript", default=None)
    p.add_argument("--wav", required=True, help="target audio WAV")
    p.add_argument("--transcript", default=None, help="target transcript JSON")
    p.add_argument("--camera", default=None)
    p.add_argument("--dictionary", default=None)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--onset-delta", type=float, default=audio.OnsetConfig().threshold_delta)
    p.add_argument("--threshold-offset", type=int, default=graph_mod.DEFAULT_OFFSET_L)
    p.add_argument("--min-jump", type=int, default=graph_mod.DEFAULT_MIN_JUMP)
    p.add_argument("--velocity-weight", type=float, default=1.0)
    p.add_argument("--blend-k", type=int, default=assembly.DEFAULT_BLEND_K)
    p.add_argument("--dump-masks", default=None)
    p.add_argument("--preview", action="store_true", help="also render the PGM preview")
    p.add_argument("--out-dir", required=True)
    _add_search_flags(p)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except SystemExit:
        raise
    except MotionGraphError as exc:
        print(f"error in {args.command}: {exc}", file=sys.stderr)
        return STATUS_FAILURE


if __name__ == "__main__":
    sys.exit(main())
