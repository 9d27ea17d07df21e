"""Operator commands: train, eval, serve, pipeline, dump-track.

Every command exits 0 exactly when it completed its contract; all failures
produce a one-line reason on stderr and a nonzero status. Verbosity comes
from the LANEDRIVE_LOG environment variable (error, info, debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys

import numpy as np

from lanedrive import agent as agentlib
from lanedrive import bridge as bridgelib
from lanedrive import config as configlib
from lanedrive import pgm, track as tracklib, vision
from lanedrive.env import LaneDriveEnv
from lanedrive.qnet import CheckpointError, load_checkpoint, save_checkpoint

log = logging.getLogger("lanedrive.cli")


def _setup_logging() -> None:
    level_name = os.environ.get("LANEDRIVE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        print(f"lanedrive: LANEDRIVE_LOG must be one of {sorted(levels)}, "
              f"got {level_name!r}", file=sys.stderr)
        level_name = "error"
    logging.basicConfig(level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override both env.seed and agent.seed")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a single config key")


def _load(args) -> configlib.RunConfig:
    return configlib.load_run_config(args.config, args.overrides, seed=args.seed)


def cmd_train(args) -> int:
    cfg = _load(args)
    episodes = cfg.episodes if args.episodes is None else args.episodes
    env = LaneDriveEnv(cfg.env)     # validates track before any output exists
    arch = configlib.resolve_arch(cfg.arch_preset, env.observation_shape,
                                  env.n_actions)
    net = None
    if args.resume:
        net = load_checkpoint(args.resume, expect_arch=arch)

    def on_episode(m):
        print(f"episode {m.episode}: steps={m.steps} reward={m.total_reward:.3f} "
              f"loss={m.mean_loss:.5f} eps={m.epsilon:.3f} laps={m.laps}",
              flush=True)

    net, metrics = agentlib.train_loop(
        env, cfg.agent, episodes, arch=arch, net=net,
        checkpoint_dir=cfg.checkpoint_dir,
        checkpoint_interval=cfg.checkpoint_interval,
        on_episode=on_episode)
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    save_checkpoint(net, os.path.join(cfg.checkpoint_dir, "ckpt_final.ldqn"))
    metrics_dir = os.path.dirname(cfg.metrics_file)
    if metrics_dir:
        os.makedirs(metrics_dir, exist_ok=True)
    agentlib.write_metrics_csv(cfg.metrics_file, metrics)
    print(f"wrote {cfg.metrics_file} and checkpoints under {cfg.checkpoint_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    env = LaneDriveEnv(cfg.env)
    net = load_checkpoint(args.checkpoint)
    if net.arch.input_shape != env.observation_shape:
        raise CheckpointError(
            f"checkpoint expects input {net.arch.input_shape}, env produces "
            f"{env.observation_shape}")
    if net.n_outputs != env.n_actions:
        raise CheckpointError(
            f"checkpoint has {net.n_outputs} outputs, env has "
            f"{env.n_actions} actions")
    if args.episodes == 0:
        return 0
    results = agentlib.evaluate(env, net, args.episodes, epsilon=args.epsilon)
    for m in results:
        print(f"episode {m.episode}: steps={m.steps} "
              f"reward={m.total_reward:.3f} laps={m.laps}")
    med = statistics.median(m.steps for m in results)
    print(f"median steps: {med:g}")
    return 0


def cmd_serve(args) -> int:
    cfg = _load(args)
    env = LaneDriveEnv(cfg.env)
    host, _, port_s = args.bind.rpartition(":")
    if not host or not port_s.isdigit():
        print(f"lanedrive: --bind needs host:port, got {args.bind!r}",
              file=sys.stderr)
        return 2
    server = bridgelib.BridgeServer(env, host=host, port=int(port_s))
    print(f"listening on {server.address[0]}:{server.address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


_PIPELINE_SUFFIXES = (".pgm", ".ppm")


def cmd_pipeline(args) -> int:
    if not os.path.isdir(args.input):
        print(f"lanedrive: input directory {args.input!r} not found",
              file=sys.stderr)
        return 1
    os.makedirs(args.output, exist_ok=True)
    stages = {"edges": args.edges, "hough": args.hough, "raster": args.raster}
    if not any(stages.values()):
        stages = dict.fromkeys(stages, True)
    names = sorted(n for n in os.listdir(args.input)
                   if n.lower().endswith(_PIPELINE_SUFFIXES))
    for name in names:
        img = pgm.read_image(os.path.join(args.input, name))
        if img.ndim == 3:
            img = vision.to_grayscale(img)
        h, w = img.shape
        stem = os.path.splitext(name)[0]
        edges = vision.canny(img)
        segments = vision.hough_segments(edges)
        left, right = vision.partition_filter_lines(segments, frame_width=w)
        if stages["edges"]:
            pgm.write_pgm(os.path.join(args.output, f"{stem}_edges.pgm"), edges)
        if stages["hough"]:
            overlay = img.copy()
            for seg in segments:
                vision.draw_segment(overlay, *seg.endpoints, value=255)
            pgm.write_pgm(os.path.join(args.output, f"{stem}_hough.pgm"), overlay)
        if stages["raster"]:
            raster = vision.rasterize_lines(left, right, 80, 80, src_w=w, src_h=h)
            pgm.write_pgm(os.path.join(args.output, f"{stem}_raster.pgm"), raster)
        kept = sum(seg is not None for seg in (left, right))
        log.info("%s: %d hough lines, %d kept", name, len(segments), kept)
    print(f"processed {len(names)} image(s) into {args.output}")
    return 0


def cmd_dump_track(args) -> int:
    cfg = _load(args)
    track = tracklib.build_track(tracklib.get_track_spec(cfg.env.track))
    os.makedirs(args.out, exist_ok=True)
    name = track.spec.name
    overhead = tracklib.render_overhead(track)
    pgm.write_pgm(os.path.join(args.out, f"{name}_overhead.pgm"), overhead)
    pos = tracklib.point_at(track, 0.0)
    tan = tracklib.tangent_at(track, 0.0)
    state = tracklib.CarState(x=float(pos[0]), y=float(pos[1]),
                              heading=float(np.arctan2(tan[1], tan[0])), speed=0.0)
    frame = tracklib.render_camera(track, state)
    pgm.write_pgm(os.path.join(args.out, f"{name}_start_view.pgm"), frame)
    print(f"track {name}: {len(track.spec.centerline)} points, "
          f"lane_half_width={track.spec.lane_half_width:g} m, "
          f"total_length={track.total_length:.4f} m")
    print(f"wrote {name}_overhead.pgm and {name}_start_view.pgm to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanedrive",
        description="Lane-driving RL lab: simulator, vision pipeline, DDQN "
                    "trainer, and TCP bridge.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run DDQN training")
    _common_flags(p)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy rollouts from a checkpoint")
    _common_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="expose the env over TCP")
    _common_flags(p)
    p.add_argument("--bind", default=f"127.0.0.1:{bridgelib.DEFAULT_PORT}",
                   metavar="ADDR:PORT")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("pipeline", help="run the segmentation pipeline over "
                                        "a directory of PGM/PPM images")
    _common_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--edges", action="store_true", help="dump edge maps")
    p.add_argument("--hough", action="store_true", help="dump hough overlays")
    p.add_argument("--raster", action="store_true", help="dump lane rasters")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("dump-track", help="write overhead/camera views of a track")
    _common_flags(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_dump_track)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except (configlib.ConfigError, tracklib.TrackError, CheckpointError,
            agentlib.TrainingDiverged, OSError, ValueError) as e:
        print(f"lanedrive: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
