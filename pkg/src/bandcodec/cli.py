"""Command-line front end: ``compress``, ``decompress``, ``eval``, ``gen`` and ``inspect``.

Settings come from three places, later ones winning: the built-in defaults,
a JSON config file (``--config`` or the ``HIHA_CONFIG`` environment variable)
whose keys are the :class:`~bandcodec.codec.CodecConfig` field names, and the
command-line flags.

Exit status is 0 on success, 1 when a frame misses the tolerance (unless
``--best-effort``) or an input cannot be used, and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import container, metrics, synth, trc
from .codec import CodecConfig
from .field import NormalizationParams, read_climatology, read_field, write_field
from .spectral import FREQ_UNITS, BandThresholds

CONFIG_ENV = "HIHA_CONFIG"


class CliError(Exception):
    """A problem with the inputs, reported as one line and exit status 1."""


def _split_paths(text: str) -> list[str]:
    return [p for p in (s.strip() for s in text.split(",")) if p]


def load_config(args: argparse.Namespace) -> CodecConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    base: dict = {}
    if path:
        try:
            with open(path) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(base, dict):
            raise CliError(f"config {path} must hold a JSON object")
    try:
        cfg = CodecConfig.from_dict(base)
        over: dict = {}
        for name in ("eps", "eps_retrain", "seed", "threads"):
            v = getattr(args, name)
            if v is not None:
                over[name] = v
        for stage in ("ssm", "mim", "idm", "trc"):
            if getattr(args, f"no_{stage}"):
                over[f"use_{stage}"] = False
        if args.quant16:
            over["quant16"] = True
        if args.omega is not None or args.nc is not None or args.freq_unit is not None:
            t = cfg.thresholds
            over["thresholds"] = BandThresholds(
                t.omega if args.omega is None else args.omega,
                t.n_c if args.nc is None else args.nc,
                t.freq_unit if args.freq_unit is None else args.freq_unit,
            )
        return cfg.replace(**over)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc


def _read_inputs(paths: list[str]):
    if not paths:
        raise CliError("no input files given")
    frames = []
    for p in paths:
        try:
            frames.append(read_field(p))
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot read {p}: {exc}") from exc
    return frames


def _read_clim(path):
    if not path:
        return None
    try:
        return read_climatology(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read climatology {path}: {exc}") from exc


def cmd_compress(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    frames = _read_inputs(_split_paths(args.inputs))
    clim = _read_clim(args.clim)
    try:
        t0 = time.perf_counter()
        chain = trc.compress_series(frames, cfg, clim)
        wall = time.perf_counter() - t0
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    meta = {"variable_name": frames[0].variable_name, "units": frames[0].units, "config": cfg}
    size = container.write_archive(args.out, chain, meta)
    ratio = container.compression_ratio(size, frames)
    rmses = [a.norm_rmse for a in chain.frames]
    report = {"archive": args.out, "bytes": size, "ratio": ratio, "wall_time": wall, "retrains": sorted(chain.retrain_markers)}
    for t, (art, r) in enumerate(zip(chain.frames, rmses)):
        kind = "delta" if isinstance(art, trc.TrcFrameArtifact) else "full"
        report[f"frame{t}_norm_rmse"] = r
        report[f"frame{t}_kind"] = kind
    print(metrics.format_report(report))
    if all(not np.isfinite(r) for r in rmses):
        print("error: every frame failed to fit", file=sys.stderr)
        return 1
    missed = [t for t, r in enumerate(rmses) if not r <= cfg.eps]
    if missed and not args.best_effort:
        print(f"error: frames {missed} missed eps={cfg.eps:g} (use --best-effort to accept)", file=sys.stderr)
        return 1
    return 0


def cmd_decompress(args: argparse.Namespace) -> int:
    with open(args.inputs, "rb") as fh:
        data = fh.read()
    chain, header = container.deserialize(data)
    n = len(chain.frames) if args.frames is None else args.frames + 1
    if not 0 < n <= len(chain.frames):
        raise CliError(f"--frames must lie in 0..{len(chain.frames) - 1}, got {args.frames}")
    clim = _read_clim(args.clim)
    fields, _, _ = container.decode(data, clim, n)
    os.makedirs(args.out, exist_ok=True)
    truth = _read_inputs(_split_paths(args.truth)) if args.truth else None
    report: dict = {"frames": n}
    for t, f in enumerate(fields):
        f = f.__class__(f.values, header.get("variable_name", "var"), header.get("units", ""), t)
        path = os.path.join(args.out, f"f{t}.out.grd")
        write_field(path, f)
        report[f"frame{t}_file"] = path
        if truth is not None and t < len(truth):
            report[f"frame{t}_rmse"] = metrics.rmse(truth[t].values, f.values)
            report[f"frame{t}_norm_rmse"] = metrics.normalized_rmse(truth[t].values, f.values, chain.frames[t].norm)
    print(metrics.format_report(report))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    truth = _read_inputs(_split_paths(args.inputs))
    approx = _read_inputs(_split_paths(args.recon))
    if len(truth) != len(approx):
        raise CliError(f"{len(truth)} reference files but {len(approx)} reconstructions")
    report: dict = {}
    for t, (a, b) in enumerate(zip(truth, approx)):
        if a.shape != b.shape:
            raise CliError(f"frame {t}: shapes {a.shape} and {b.shape} differ")
        norm = NormalizationParams(float(a.values.min()), float(a.values.max()))
        report[f"frame{t}_rmse"] = metrics.rmse(a.values, b.values)
        report[f"frame{t}_norm_rmse"] = metrics.normalized_rmse(a.values, b.values, norm)
        report[f"frame{t}_psnr"] = metrics.psnr(a.values, b.values) if not norm.degenerate else float("nan")
    if args.archive:
        report["ratio"] = container.compression_ratio(os.path.getsize(args.archive), truth)
    print(metrics.format_report(report))
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    shape = tuple(int(s) for s in args.shape.split("x"))
    if len(shape) != 3 or min(shape) < 1:
        raise CliError(f"--shape must look like 8x96x192, got {args.shape!r}")
    seed = 0 if args.seed is None else args.seed
    if args.spec:
        try:
            with open(args.spec) as fh:
                spec = synth.HarmonicSpec.from_json(fh.read())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"cannot read spec {args.spec}: {exc}") from exc
    else:
        spec = synth.random_spec(shape, seed=seed)
    try:
        frames = synth.gen_series(shape, spec, args.n_frames, drift=args.drift)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    paths = []
    for f in frames:
        path = os.path.join(args.out, f"f{f.frame_index}.grd")
        write_field(path, f)
        paths.append(path)
    with open(os.path.join(args.out, "spec.json"), "w") as fh:
        fh.write(spec.to_json())
    print(metrics.format_report({"frames": len(paths), "files": ",".join(paths)}))
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    with open(args.inputs, "rb") as fh:
        data = fh.read()
    shares = container.inspect(data)
    chain, header = container.deserialize(data)
    report = {"bytes": len(data), "frames": len(chain.frames), "retrains": sorted(chain.retrain_markers)}
    report.update({f"{k}_bytes": v for k, v in shares.items()})
    report.update({f"{k}_share": v / len(data) for k, v in shares.items()})
    print(metrics.format_report(report))
    return 0


def _codec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--eps", type=float, help="target normalised RMSE per frame (default 1e-3)")
    p.add_argument("--eps-retrain", type=float, help="retrain threshold for delta frames (default: eps)")
    p.add_argument("--omega", type=float, help="band-split Omega")
    p.add_argument("--nc", type=int, help="band-split hidden width n_c")
    p.add_argument("--freq-unit", choices=FREQ_UNITS, help="frequency unit of the band thresholds")
    p.add_argument("--threads", type=int, help="worker threads for block fits")
    p.add_argument("--seed", type=int, help="seed for every random choice")
    for stage in ("ssm", "mim", "idm", "trc"):
        p.add_argument(f"--no-{stage}", action="store_true", help=f"disable the {stage.upper()} stage")
    p.add_argument("--quant16", action="store_true", help="store networks in 16 bits where eps allows")
    p.add_argument("--best-effort", action="store_true", help="exit 0 even if a frame misses eps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bandcodec", description="Neural band codec for 3D atmospheric grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress frames into a .hha archive")
    p.add_argument("--in", dest="inputs", required=True, help="comma-separated field files, in frame order")
    p.add_argument("--out", required=True, help="archive path")
    p.add_argument("--clim", help="climatology field to subtract before coding")
    _codec_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode an archive to field files")
    p.add_argument("--in", dest="inputs", required=True, help="archive path")
    p.add_argument("--out", default=".", help="output directory (files f<i>.out.grd)")
    p.add_argument("--frames", type=int, help="decode frames 0..N only")
    p.add_argument("--clim", help="climatology used at compression time")
    p.add_argument("--truth", help="comma-separated originals, to report per-frame RMSE")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("eval", help="compare reconstructions with originals")
    p.add_argument("--in", dest="inputs", required=True, help="comma-separated original fields")
    p.add_argument("--recon", required=True, help="comma-separated reconstructed fields")
    p.add_argument("--archive", help="archive, to report the compression ratio")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="write synthetic frames")
    p.add_argument("--out", required=True, help="output directory (files f<i>.grd and spec.json)")
    p.add_argument("--spec", help="harmonic spec JSON (default: a random spec)")
    p.add_argument("--shape", default="8x96x192", help="levels x lat x lon")
    p.add_argument("--frames", dest="n_frames", type=int, default=1, help="number of frames")
    p.add_argument("--drift", type=float, default=0.0, help="phase increment per frame")
    p.add_argument("--seed", type=int, help="seed for the random spec")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("inspect", help="per-module byte shares of an archive")
    p.add_argument("--in", dest="inputs", required=True, help="archive path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except container.ArchiveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (CliError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
