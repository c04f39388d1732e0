"""Command-line front end.

Subcommands: encode, decode, eval, grid, sweep. Exit codes: 0 success,
2 usage or configuration error, 3 unreadable file / bad format,
4 numeric failure.

The SEGSNR that ``encode`` reports (and writes with --report) is measured
against the 16-bit PCM rendering of the reconstruction — i.e. against the
exact waveform ``decode`` will produce as a WAV file — so an
encode/decode/eval pipeline agrees with the encoder's own report.
"""

import argparse
import os
import sys
from pathlib import Path

from . import codec, corpus, harness, wavio
from .bitstream import Bitstream
from .codec import CodecConfig
from .dsp import Signal, segsnr
from .errors import BitstreamError, ConfigError, NladpcmError, NumericError
from .harness import BUILD_ID, ExperimentGrid, gamma_sweep, run_grid, table1_rows, table2_rows
from .training import TrainConfig


def _int_list(text: str):
    return tuple(int(tok) for tok in text.split(",") if tok)


def _float_list(text: str):
    return [float(tok) for tok in text.split(",") if tok]


def _train_config_from_args(args) -> TrainConfig:
    return TrainConfig(
        algorithm=args.algorithm,
        performance=args.performance,
        gamma=args.gamma,
        epochs=args.epochs,
        n_starts=args.starts,
        selection=args.selection,
        validation=args.validation,
        patience=args.patience,
    )


def _codec_config_from_args(args) -> CodecConfig:
    train = _train_config_from_args(args) if args.predictor == "mlp" else None
    return CodecConfig(
        n_bits=args.n_bits,
        frame_len=args.frame_len,
        predictor=args.predictor,
        lpc_order=args.lpc_order,
        train=train,
        rng_seed=args.seed,
    )


def _report_lines(report, cfg_hash: str, seed) -> list:
    lines = [
        f"# build={BUILD_ID} seed={seed} config_hash={cfg_hash}",
        f"segsnr_db={report.segsnr_db!r}",
        f"std_db={report.std_db!r}",
        f"frames={report.frames_counted}",
        f"silent_frames_excluded={report.silent_frames_excluded}",
    ]
    return lines


def _cmd_encode(args) -> int:
    signal = wavio.read_wav(args.input)
    cfg = _codec_config_from_args(args)
    result = codec.encode(signal, cfg)
    Path(args.output).write_bytes(result.bitstream.to_bytes())

    # Report against the PCM rendering the decoder will produce.
    pcm = wavio.quantize_to_pcm(result.reconstruction.samples).astype("float64") / wavio.PCM_SCALE
    n = len(pcm)
    report = segsnr(Signal(signal.samples[:n], signal.sample_rate),
                    Signal(pcm, signal.sample_rate), cfg.frame_len)
    lines = _report_lines(report, cfg.config_text_hash(), cfg.rng_seed)
    if result.diagnostics.tail_samples_dropped:
        lines.append(f"tail_samples_dropped={result.diagnostics.tail_samples_dropped}")
    print("\n".join(lines))
    if args.recon:
        wavio.write_wav(args.recon, result.reconstruction)
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    bs = Bitstream.from_bytes(data)
    signal = codec.decode(bs, sample_rate=args.sample_rate)
    wavio.write_wav(args.output, signal)
    print(f"decoded {bs.header.n_samples} samples "
          f"({bs.header.predictor_kind}, {bs.header.n_bits} bits/sample)")
    return 0


def _cmd_eval(args) -> int:
    original = wavio.read_wav(args.original)
    reconstructed = wavio.read_wav(args.reconstructed)
    n = min(len(original), len(reconstructed))
    n = (n // args.frame_len) * args.frame_len
    report = segsnr(Signal(original.samples[:n], original.sample_rate),
                    Signal(reconstructed.samples[:n], reconstructed.sample_rate),
                    args.frame_len)
    lines = _report_lines(report, "-", "-")
    print("\n".join(lines))
    if args.csv:
        rows = ["frame,snr_db"] + [
            f"{i},{snr!r}" for i, snr in enumerate(report.per_frame_snr_db)
        ]
        Path(args.csv).write_text("\n".join(lines[:1] + rows) + "\n")
    return 0


def _load_corpus(spec: str):
    if spec == "synthetic":
        return corpus.default_desk_corpus()
    path = Path(spec)
    if path.is_dir():
        wavs = sorted(path.glob("*.wav"))
        if not wavs:
            raise BitstreamError(f"no WAV files under {path}")
        return [(w.stem, wavio.read_wav(w)) for w in wavs]
    if path.suffix == ".json":
        return corpus.load_manifest(path)
    raise ConfigError(f"corpus must be 'synthetic', a directory or a manifest JSON: {spec}")


def _cmd_grid(args) -> int:
    signals = _load_corpus(args.corpus)
    rows = {"all": table2_rows() + table1_rows(),
            "table1": table1_rows(),
            "table2": table2_rows()}[args.rows]
    grid = ExperimentGrid(corpus=signals, rows=rows, n_bits_values=args.n_bits,
                          seed=args.seed, frame_len=args.frame_len)
    csv_text = run_grid(grid, out_path=args.out)
    print(f"wrote {args.out} ({len(csv_text.splitlines())} lines)")
    return 0


def _cmd_sweep(args) -> int:
    signal = wavio.read_wav(args.input)
    csv_text = gamma_sweep(signal, gammas=args.gammas, epochs_values=args.epochs,
                           n_bits=args.n_bits, seed=args.seed,
                           frame_len=args.frame_len, out_path=args.out)
    print(f"wrote {args.out} ({len(csv_text.splitlines())} lines)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nladpcm",
                                     description="ADPCM codec with linear or neural prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="WAV to bitstream")
    enc.add_argument("input")
    enc.add_argument("output")
    enc.add_argument("--n-bits", type=int, default=4)
    enc.add_argument("--frame-len", type=int, default=200)
    enc.add_argument("--predictor", choices=("lpc", "mlp"), default="lpc")
    enc.add_argument("--lpc-order", type=int, default=10)
    enc.add_argument("--seed", type=int, default=0)
    enc.add_argument("--algorithm", choices=("lm", "br"), default="lm")
    enc.add_argument("--performance", choices=("mse", "msereg"), default="mse")
    enc.add_argument("--gamma", type=float, default=0.9)
    enc.add_argument("--epochs", type=int, default=6)
    enc.add_argument("--starts", type=int, default=5)
    enc.add_argument("--selection", default="best_train",
                     choices=("best_train", "committee_mean", "committee_median"))
    enc.add_argument("--validation", action="store_true")
    enc.add_argument("--patience", type=int, default=5)
    enc.add_argument("--recon", help="also write the local reconstruction WAV")
    enc.add_argument("--report", help="write the SEGSNR report to this file")
    enc.set_defaults(func=_cmd_encode)

    dec = sub.add_parser("decode", help="bitstream to WAV")
    dec.add_argument("input")
    dec.add_argument("output")
    dec.add_argument("--sample-rate", type=int, default=8000)
    dec.set_defaults(func=_cmd_decode)

    ev = sub.add_parser("eval", help="segmental SNR of a reconstruction")
    ev.add_argument("original")
    ev.add_argument("reconstructed")
    ev.add_argument("--frame-len", type=int, default=200)
    ev.add_argument("--csv", help="write per-frame SNRs to this CSV")
    ev.set_defaults(func=_cmd_eval)

    gr = sub.add_parser("grid", help="run the experiment grid")
    gr.add_argument("--corpus", default=os.environ.get("NLADPCM_CORPUS", "synthetic"),
                    help="'synthetic', a directory of WAVs, or a manifest JSON")
    gr.add_argument("--out", default="grid.csv")
    gr.add_argument("--rows", choices=("all", "table1", "table2"), default="all")
    gr.add_argument("--n-bits", type=_int_list, default=(2, 3, 4, 5))
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--frame-len", type=int, default=200)
    gr.set_defaults(func=_cmd_grid)

    sw = sub.add_parser("sweep", help="SEGSNR versus performance ratio")
    sw.add_argument("input")
    sw.add_argument("--gammas", type=_float_list, default=None)
    sw.add_argument("--epochs", type=_int_list, default=(6, 50))
    sw.add_argument("--n-bits", type=int, default=2)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--frame-len", type=int, default=200)
    sw.add_argument("--out", default="sweep.csv")
    sw.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BitstreamError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, NladpcmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
