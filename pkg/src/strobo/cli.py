"""Command line entry point: ``strobo {strobe,bgmodel,masks,synth}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .exceptions import INPUT_ERRORS, StroboError
from .pipeline import EXIT_INPUT, EXIT_NO_MOTION, EXIT_OK, EXIT_USAGE, PipelineConfig
from .synth import SceneSpec, write_scene

log = logging.getLogger("strobo")

# flag -> (PipelineConfig field, help)
_FLAGS = {
    "--input": ("input", "file.y4m or a numbered image pattern such as f%%05d.png"),
    "--output": ("output", "composite path (.png/.ppm); a directory for 'masks'"),
    "--format": ("format", "auto | y4m | images (default auto, by extension)"),
    "--fps": ("fps", "override the frame rate used for timestamps"),
    "--downscale": ("downscale", "integer factor for background modelling (default 1)"),
    "--alpha": ("alpha", "learning rate (default 0.02)"),
    "--components": ("components", "Gaussians per pixel (default 4)"),
    "--sigma0": ("sigma0", "initial variance of a new component (default 225)"),
    "--match-thresh": ("match_thresh", "squared Mahalanobis match gate (default 9)"),
    "--ct": ("ct", "complexity prior (default 0.05*alpha)"),
    "--cf": ("cf", "foreground weight fraction (default 0.1)"),
    "--cthr": ("cthr", "background density threshold (default 1e-5)"),
    "--threshold": ("threshold", "otsu | fixed:N (default otsu)"),
    "--morph-open": ("morph_open", "opening radius (default 1)"),
    "--morph-close": ("morph_close", "closing radius (default 2)"),
    "--min-area": ("min_area", "smallest blob as a fraction of the frame (default 0.001)"),
    "--dmin": ("dmin", "strobe spacing in px, or 'auto'; unset tunes for --target"),
    "--target": ("target", "strobe count range N,M (default 5,10)"),
    "--debug-dir": ("debug_dir", "write background, masks, blobs.csv, selection and config here"),
    "--seed": ("seed", "recorded in the config dump; the pipeline itself is deterministic"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    # every default is None so that only flags actually given override the config file
    p.add_argument("--config", help="key=value config file; flags override it")
    for flag, (_, help_) in _FLAGS.items():
        p.add_argument(flag, default=None, help=help_)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strobo", description="Stroboscopic composites from fixed-camera video.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("strobe", "full pipeline: background, segmentation, selection, composite"),
        ("bgmodel", "learn the background model and write the background image"),
        ("masks", "learn the background and write per-frame subject masks to --output (a directory)"),
    ):
        _pipeline_flags(sub.add_parser(name, help=help_))

    synth = sub.add_parser("synth", help="render a synthetic disk scene with ground truth")
    synth.add_argument("--output", required=True, help="file.y4m or a numbered pattern like f%%05d.ppm")
    synth.add_argument("--masks-dir")
    synth.add_argument("--width", type=int, default=320)
    synth.add_argument("--height", type=int, default=240)
    synth.add_argument("--frames", type=int, default=125)
    synth.add_argument("--background", choices=("gradient", "checker", "flat"), default="gradient")
    synth.add_argument("--radius", type=float, default=10.0)
    synth.add_argument("--disk-color", default="230,40,40")
    synth.add_argument("--start", default="30,120")
    synth.add_argument("--velocity", default="2.1,0")
    synth.add_argument("--accel", default=None)
    synth.add_argument("--noise", type=float, default=2.0)
    synth.add_argument("--fps", type=float, default=25.0)
    synth.add_argument("--seed", type=int, default=0)
    return parser


def _pair(text, kind=float):
    parts = [kind(v) for v in text.split(",")]
    return tuple(parts)


def make_config(args: argparse.Namespace) -> PipelineConfig:
    values = pipeline.read_config_file(args.config) if args.config else {}
    for name, _ in _FLAGS.values():
        raw = getattr(args, name)
        if raw is not None:
            values.update([pipeline.coerce(name, raw)])
    if values.get("dmin") is not None and values.get("dmin") != "auto":
        values["dmin"] = str(float(values["dmin"]))
    return PipelineConfig(**values)


def _run_synth(args) -> int:
    accel = _pair(args.accel) if args.accel else None
    spec = SceneSpec(
        width=args.width,
        height=args.height,
        n_frames=args.frames,
        background=args.background,
        disk_radius=args.radius,
        disk_color=_pair(args.disk_color, int),
        start=_pair(args.start),
        velocity=_pair(args.velocity),
        accel=accel,
        noise_sigma=args.noise,
        seed=args.seed,
        fps=args.fps,
    )
    write_scene(spec, args.output, args.masks_dir)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"strobo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        if args.command == "synth":
            return _run_synth(args)
        config = make_config(args).validate(image_output=args.command != "masks")
        if config.debug_dir:
            logging.getLogger("strobo").setLevel(logging.INFO)
        if args.command == "strobe":
            result = pipeline.run_strobe_pipeline(config)
        elif args.command == "bgmodel":
            result = pipeline.run_background_only(config)
        else:
            result = pipeline.run_masks(config, config.output)
    except INPUT_ERRORS as exc:
        print(f"strobo: cannot read input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StroboError, ValueError) as exc:
        print(f"strobo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if result.status == EXIT_NO_MOTION:
        print("strobo: no moving subject detected", file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
