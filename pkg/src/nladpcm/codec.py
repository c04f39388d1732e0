"""The ADPCM state machine.

Encoder and decoder share one transcoding core: the per-sample
predict-quantize-reconstruct loop and the per-frame predictor derivation
are the same code driven either by original samples (encoding) or by
received codes (decoding), which makes lockstep reconstruction hold by
construction within a build.

Backward adaptation derives the predictor of frame k from frame k-1 as
RECONSTRUCTED, never from the original, because the decoder only ever
sees reconstructed samples. Prediction history carries across frame
boundaries; training pairs never do.
"""

import ast
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dsp, mlp, quantizer, training
from .bitstream import Bitstream, BitstreamHeader
from .dsp import SegSnrReport, Signal
from .errors import BitstreamError, ConfigError, NumericError
from .quantizer import MULTIPLIER_TABLES, MULTIPLIER_TABLE_VERSION
from .training import TrainConfig

ADAPTATIONS = ("backward", "forward_unquantized")
PREDICTORS = ("lpc", "mlp")

_MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class CodecConfig:
    """Everything a decoder needs, minus the codes themselves."""

    n_bits: int = 4
    frame_len: int = dsp.DEFAULT_FRAME_LEN
    predictor: str = "lpc"
    lpc_order: int = 10
    train: TrainConfig = None
    rng_seed: int = 0
    adaptation: str = "backward"
    initial_step: float = quantizer.DEFAULT_INITIAL_STEP
    step_min: float = quantizer.DEFAULT_STEP_MIN
    step_max: float = quantizer.DEFAULT_STEP_MAX
    quantizer_reset_per_frame: bool = False

    def __post_init__(self):
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"predictor must be one of {PREDICTORS}")
        if self.adaptation not in ADAPTATIONS:
            raise ConfigError(f"adaptation must be one of {ADAPTATIONS}")
        if self.predictor == "mlp" and self.train is None:
            raise ConfigError("mlp predictor requires a TrainConfig")
        if self.predictor == "lpc" and self.train is not None:
            raise ConfigError("lpc predictor takes no TrainConfig")
        if self.predictor == "lpc" and self.lpc_order < 1:
            raise ConfigError("lpc_order must be >= 1")
        if self.frame_len <= self.order:
            raise ConfigError(
                f"frame_len {self.frame_len} must exceed predictor order {self.order}"
            )
        if not 0 <= self.rng_seed <= _MAX_SEED:
            raise ConfigError("rng_seed must fit in 64 bits")
        if self.validation_mode and self.adaptation == "forward_unquantized":
            raise ConfigError("validation has no role in forward adaptation")
        # Bounds and bit depth are checked by the quantizer itself.
        quantizer.init_state(self.n_bits, self.initial_step, self.step_min, self.step_max)

    @property
    def order(self) -> int:
        return mlp.N_INPUTS if self.predictor == "mlp" else self.lpc_order

    @property
    def validation_mode(self) -> bool:
        return self.predictor == "mlp" and self.train.validation

    def to_canonical(self) -> str:
        """Canonical key=value block embedded in the bitstream header."""
        items = {
            "adaptation": self.adaptation,
            "frame_len": self.frame_len,
            "initial_step": self.initial_step,
            "lpc_order": self.lpc_order,
            "multiplier_table_version": MULTIPLIER_TABLE_VERSION,
            "multipliers": MULTIPLIER_TABLES[self.n_bits],
            "n_bits": self.n_bits,
            "predictor": self.predictor,
            "quantizer_reset_per_frame": self.quantizer_reset_per_frame,
            "rng_seed": self.rng_seed,
            "step_max": self.step_max,
            "step_min": self.step_min,
        }
        if self.train is not None:
            for key, value in sorted(vars(self.train).items()):
                items[f"train.{key}"] = value
        return "\n".join(f"{k}={v!r}" for k, v in sorted(items.items()))

    @classmethod
    def from_canonical(cls, text: str) -> "CodecConfig":
        values = {}
        for line in text.strip().splitlines():
            key, _, raw = line.partition("=")
            values[key] = ast.literal_eval(raw)
        version = values.pop("multiplier_table_version")
        multipliers = values.pop("multipliers")
        train_kwargs = {
            k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("train.")
        }
        kwargs = {k: v for k, v in values.items() if not k.startswith("train.")}
        if train_kwargs:
            kwargs["train"] = TrainConfig(**train_kwargs)
        cfg = cls(**kwargs)
        if version != MULTIPLIER_TABLE_VERSION or tuple(multipliers) != MULTIPLIER_TABLES[cfg.n_bits]:
            raise ConfigError(
                f"multiplier table version {version} is not supported by this build"
            )
        return cfg

    def config_text_hash(self) -> str:
        from .bitstream import config_hash

        return config_hash(self.to_canonical())


@dataclass
class CodecDiagnostics:
    frames: int = 0
    tail_samples_dropped: int = 0
    degenerate_frames: list = field(default_factory=list)
    fallback_zero_frames: list = field(default_factory=list)
    predictor_fingerprints: list = field(default_factory=list)


@dataclass(frozen=True)
class EncodeResult:
    bitstream: Bitstream
    reconstruction: Signal
    report: SegSnrReport
    diagnostics: CodecDiagnostics


# ---------------------------------------------------------------------------
# Per-frame predictor evaluators
# ---------------------------------------------------------------------------


class _ZeroPredictor:
    fingerprint = ("zero",)

    def predict(self, history: np.ndarray) -> float:
        return 0.0


class _LpcPredictor:
    def __init__(self, coeffs: dsp.LpcCoefficients):
        self._reversed = coeffs.a[::-1].copy()
        self.fingerprint = ("lpc", tuple(coeffs.a))

    def predict(self, history: np.ndarray) -> float:
        return float(np.dot(self._reversed, history))


class _MlpPredictor:
    """Stacked evaluation of all committee members in one pass; matches
    training.committee_predict output exactly (same float operations order
    per member, fused identically by numpy mean/median)."""

    def __init__(self, predictor: training.TrainedPredictor, hidden: str):
        members = predictor.members
        self._w1 = np.concatenate([m.w1 for m in members], axis=0)   # (2M, 10)
        self._b1 = np.concatenate([m.b1 for m in members])
        self._w2 = np.stack([m.w2 for m in members])                 # (M, 2)
        self._b2 = np.array([m.b2 for m in members])
        self._m = len(members)
        self._hidden = hidden
        self._fusion = predictor.fusion
        self.fingerprint = ("mlp", tuple(tuple(m.flatten()) for m in members), predictor.fusion)

    def predict(self, history: np.ndarray) -> float:
        z = self._w1 @ history + self._b1
        if self._hidden == "tanh":
            h = np.tanh(z)
        else:
            h = 1.0 / (1.0 + np.exp(-z))
        outputs = (self._w2 * h.reshape(self._m, 2)).sum(axis=1) + self._b2
        if self._m == 1:
            return float(outputs[0])
        if self._fusion == "median":
            return float(np.median(outputs))
        return float(np.mean(outputs))


def _derive_predictor(cfg: CodecConfig, frame_index: int, recon: np.ndarray,
                      original: np.ndarray, diagnostics: CodecDiagnostics):
    """Predictor for one frame, from data a decoder can reproduce.

    backward: frame k trains on reconstructed frame k-1 (frame 0 is zero).
    backward + validation: frame k trains on reconstructed frame k-2 and
    validates on k-1 (frames 0 and 1 fall back to the plain rules).
    forward_unquantized: frame k trains on its own original samples.
    """
    L = cfg.frame_len
    val_slice = None
    if cfg.adaptation == "forward_unquantized":
        source = original[frame_index * L : (frame_index + 1) * L]
    elif frame_index == 0:
        return _ZeroPredictor()
    elif cfg.validation_mode and frame_index >= 2:
        source = recon[(frame_index - 2) * L : (frame_index - 1) * L]
        val_slice = recon[(frame_index - 1) * L : frame_index * L]
    else:
        source = recon[(frame_index - 1) * L : frame_index * L]

    if not np.any(source):
        diagnostics.degenerate_frames.append(frame_index)
        return _ZeroPredictor()

    if cfg.predictor == "lpc":
        acf = dsp.autocorrelation(source, cfg.lpc_order)
        coeffs = dsp.levinson_durbin(acf, cfg.lpc_order)
        return _LpcPredictor(coeffs)

    data = training.make_dataset(source, mlp.N_INPUTS)
    val_data = None
    if val_slice is not None:
        if np.any(val_slice):
            val_data = training.make_dataset(val_slice, mlp.N_INPUTS)
        else:
            # Silent validation frame: fall back to plain training.
            diagnostics.degenerate_frames.append(frame_index)
    train_cfg = cfg.train
    if val_data is None and train_cfg.validation:
        train_cfg = replace(train_cfg, validation=False)
    predictor = training.multi_start(
        data, train_cfg, cfg.rng_seed, frame_index, val_data=val_data
    )
    if predictor.fallback_zero:
        diagnostics.fallback_zero_frames.append(frame_index)
        return _ZeroPredictor()
    return _MlpPredictor(predictor, cfg.train.hidden)


def _transcode(cfg: CodecConfig, n_samples: int, original: np.ndarray = None,
               codes: np.ndarray = None, record_predictors: bool = False):
    """Shared encoder/decoder loop over whole frames.

    Encoding when ``original`` is given (codes are produced); decoding when
    ``codes`` is given. Returns (reconstruction, codes, diagnostics).
    """
    L = cfg.frame_len
    n_frames = n_samples // L
    diagnostics = CodecDiagnostics(frames=n_frames)
    recon = np.zeros(n_frames * L)
    out_codes = np.zeros(n_frames * L, dtype=np.int64) if original is not None else codes
    history = np.zeros(cfg.order)
    q = quantizer.init_state(cfg.n_bits, cfg.initial_step, cfg.step_min, cfg.step_max)
    encoding = original is not None

    for k in range(n_frames):
        if cfg.quantizer_reset_per_frame:
            q = quantizer.init_state(cfg.n_bits, cfg.initial_step, cfg.step_min, cfg.step_max)
        predictor = _derive_predictor(cfg, k, recon, original, diagnostics)
        if record_predictors:
            diagnostics.predictor_fingerprints.append(predictor.fingerprint)
        for pos in range(k * L, (k + 1) * L):
            x_hat = predictor.predict(history)
            if encoding:
                code = quantizer.quantize(original[pos] - x_hat, q)
                out_codes[pos] = code
            else:
                code = int(out_codes[pos])
            x_rec = x_hat + quantizer.dequantize(code, q)
            recon[pos] = x_rec
            history[:-1] = history[1:]
            history[-1] = x_rec
            q = quantizer.adapt(q, code)

    return recon, out_codes, diagnostics


def _check_input(signal: Signal):
    if len(signal) == 0:
        raise ValueError("cannot encode an empty signal")
    peak = float(np.max(np.abs(signal.samples)))
    if peak > 1.0:
        raise NumericError(f"signal must be normalized to [-1, 1], peak is {peak:.6g}")


def encode(signal: Signal, cfg: CodecConfig, record_predictors: bool = False) -> EncodeResult:
    """Encode whole frames of a normalized signal into a decodable bitstream.

    Frame 0 uses the zero predictor; afterwards the predictor follows the
    backward rules of ``_derive_predictor``. Returns the bitstream, the
    encoder's own reconstruction and its segmental SNR against the input.
    Trailing samples short of a frame are dropped and reported.
    """
    if cfg.adaptation != "backward":
        raise ConfigError("encode requires backward adaptation; "
                          "use forward_unquantized_mode for the diagnostic scheme")
    _check_input(signal)
    L = cfg.frame_len
    n_coded = (len(signal) // L) * L
    original = signal.samples[:n_coded]
    recon, codes, diagnostics = _transcode(
        cfg, n_coded, original=original, record_predictors=record_predictors
    )
    diagnostics.tail_samples_dropped = len(signal) - n_coded
    header = BitstreamHeader(
        n_bits=cfg.n_bits,
        frame_len=L,
        predictor_kind=cfg.predictor,
        config_text=cfg.to_canonical(),
        rng_seed=cfg.rng_seed,
        n_samples=n_coded,
    )
    bs = Bitstream(header=header, codes=codes)
    rec_signal = Signal(recon, signal.sample_rate)
    report = dsp.segsnr(Signal(original, signal.sample_rate), rec_signal, L)
    return EncodeResult(
        bitstream=bs, reconstruction=rec_signal, report=report, diagnostics=diagnostics
    )


def decode(bs, sample_rate: int = dsp.DEFAULT_SAMPLE_RATE) -> Signal:
    """Rebuild the waveform from a Bitstream (or its bytes).

    Re-runs the identical per-frame adaptation — including retraining the
    networks from the header seed — driven only by the decoded codes.
    """
    if isinstance(bs, (bytes, bytearray)):
        bs = Bitstream.from_bytes(bytes(bs))
    header = bs.header
    try:
        cfg = CodecConfig.from_canonical(header.config_text)
    except (ConfigError, ValueError, SyntaxError, KeyError, TypeError) as exc:
        raise BitstreamError(f"undecodable config block: {exc}")
    for name, header_value, config_value in [
        ("n_bits", header.n_bits, cfg.n_bits),
        ("frame_len", header.frame_len, cfg.frame_len),
        ("predictor", header.predictor_kind, cfg.predictor),
        ("rng_seed", header.rng_seed, cfg.rng_seed),
    ]:
        if header_value != config_value:
            raise BitstreamError(
                f"header field {name}={header_value!r} contradicts config {config_value!r}"
            )
    recon, _, _ = _transcode(cfg, header.n_samples, codes=bs.codes)
    return Signal(recon, sample_rate)


def forward_unquantized_mode(signal: Signal, cfg: CodecConfig):
    """Diagnostic scheme: the predictor of frame k is fit on frame k's own
    original samples, so the coefficients could never be transmitted.

    No bitstream is produced; returns (reconstruction, report, diagnostics)
    for comparison against backward runs.
    """
    if cfg.adaptation != "forward_unquantized":
        raise ConfigError("config must select forward_unquantized adaptation")
    _check_input(signal)
    L = cfg.frame_len
    n_coded = (len(signal) // L) * L
    original = signal.samples[:n_coded]
    recon, _, diagnostics = _transcode(cfg, n_coded, original=original)
    diagnostics.tail_samples_dropped = len(signal) - n_coded
    rec_signal = Signal(recon, signal.sample_rate)
    report = dsp.segsnr(Signal(original, signal.sample_rate), rec_signal, L)
    return rec_signal, report, diagnostics
