"""Command-line entry point: ``dllapnet <subcommand> ...``.

Exit codes: 0 success, 1 a ``verify`` property failed, 2 usage or file error.
"""
from __future__ import annotations

import argparse
import sys

from . import io_codec, losses, metrics, verify
from .errors import (
    FormatError,
    InvalidArgumentError,
    InvalidStateError,
    MissingTensorError,
    UnsupportedConfigurationError,
)
from .model import count_flops, layer_macs, synthesize_batch
from .spectral import extract_mel, istft_batch, stft
from .streaming import synthesize_streaming, total_latency

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _config(path):
    return io_codec.load_config(path or "default")


def cmd_mel(args, out):
    cfg = _config(args.config)
    wave = io_codec.load_wav(args.inp, cfg.spectral.sample_rate)
    io_codec.save_mel(extract_mel(wave, cfg.spectral), args.out, cfg.n_mels)
    return EXIT_OK


def cmd_synth(args, out):
    cfg = _config(args.config)
    weights = io_codec.load_archive(args.weights)
    mel = io_codec.load_mel(args.inp, cfg.n_mels)
    if args.mode == "batch":
        wave = synthesize_batch(mel, weights, cfg)
    else:
        wave = synthesize_streaming(mel, weights, cfg, chunk=args.chunk)
    io_codec.save_wav(wave, args.out, cfg.spectral.sample_rate)
    return EXIT_OK


def cmd_copy_synth(args, out):
    sc = _config(args.config).spectral
    wave = io_codec.load_wav(args.inp, sc.sample_rate)
    if wave.size == 0:
        io_codec.save_wav(wave, args.out, sc.sample_rate)
        return EXIT_OK
    io_codec.save_wav(istft_batch(stft(wave, sc), sc, out_len=wave.size), args.out, sc.sample_rate)
    return EXIT_OK


def cmd_latency(args, out):
    for line in total_latency(_config(args.config)).lines():
        print(line, file=out)
    return EXIT_OK


def cmd_flops(args, out):
    cfg = _config(args.config)
    rows = layer_macs(cfg)
    total = count_flops(cfg)
    print(f"flops_per_second={total:.0f}", file=out)
    print(f"gflops_per_second={total / 1e9:.4f}", file=out)
    print(f"macs_per_frame={sum(n for _, n in rows)}", file=out)
    if args.pretty:
        width = max(len(name) for name, _ in rows)
        print(f"{'layer':<{width}}  macs/frame", file=out)
        for name, n in rows:
            print(f"{name:<{width}}  {n:>12,d}", file=out)
    else:
        for name, n in rows:
            print(f"layer.{name}={n}", file=out)
    return EXIT_OK


def cmd_verify(args, out):
    cfg = _config(args.config)
    results = verify.run_checks(cfg, seed=args.seed, frames=args.frames)
    for check in results:
        print(check.line(), file=out)
    failed = [c for c in results if c.passed is False]
    print(f"result={'fail' if failed else 'pass'}", file=out)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def cmd_loss(args, out):
    cfg = _config(args.config)
    teacher_cfg = _config(args.teacher_config) if args.teacher_config else cfg.teacher()
    wave = io_codec.load_wav(args.inp, cfg.spectral.sample_rate)
    if wave.size == 0:
        raise InvalidArgumentError(f"{args.inp}: empty waveform")
    weights = losses.LossWeights()
    if args.lkd is not None:
        weights = losses.LossWeights(lambda_kd=args.lkd)
    blocks = None if args.blocks is None else losses.first_blocks(args.blocks, cfg.num_blocks)
    report = losses.evaluate_losses(
        wave,
        io_codec.load_archive(args.student),
        io_codec.load_archive(args.teacher),
        cfg,
        teacher_cfg=teacher_cfg,
        active_blocks=blocks,
        weights=weights,
    )
    for line in report.lines():
        print(line, file=out)
    return EXIT_OK


def cmd_metrics(args, out):
    sr = _config(args.config).spectral
    ref = io_codec.load_wav(args.ref, sr.sample_rate)
    deg = io_codec.load_wav(args.deg, sr.sample_rate)
    for line in metrics.evaluate(ref, deg, sr).lines():
        print(line, file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dllapnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mel", help="extract a log-mel file from a WAV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_mel)

    p = sub.add_parser("synth", help="vocode a mel file")
    p.add_argument("--config", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("batch", "streaming"), default="batch")
    p.add_argument("--chunk", type=int, default=1, help="frames per streaming push")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("copy-synth", help="STFT then iSTFT a WAV, no model")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_copy_synth)

    p = sub.add_parser("latency", help="algorithmic latency of a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("flops", help="FLOPs per second of audio and per-layer MACs")
    p.add_argument("--config", required=True)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("verify", help="property checks with seeded random weights")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=50)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("loss", help="evaluate training criteria for one utterance")
    p.add_argument("--config", required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--student", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--blocks", type=int, choices=(0, 2, 4, 6, 8))
    p.add_argument("--lkd", type=float)
    p.add_argument("--teacher-config")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("metrics", help="objective metrics of a degraded WAV")
    p.add_argument("--ref", required=True)
    p.add_argument("--deg", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_metrics)
    return parser


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return args.func(args, out)
    except (
        OSError,
        FormatError,
        InvalidArgumentError,
        InvalidStateError,
        MissingTensorError,
        UnsupportedConfigurationError,
    ) as exc:
        print(f"dllapnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
