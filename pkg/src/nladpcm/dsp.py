"""Signal framing, linear prediction math and segmental SNR evaluation.

All functions here are pure: they never mutate their inputs and keep no
module state, so they are safe to call concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrameError, NumericError

DEFAULT_SAMPLE_RATE = 8000
DEFAULT_FRAME_LEN = 200

# Sentinel for frames reconstructed without any error; keeps reports finite.
SNR_CLAMP_DB = 99.0


@dataclass(frozen=True)
class Signal:
    """Mono waveform with amplitudes normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected 1-D sample array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise NumericError("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FrameView:
    """Contiguous, non-overlapping slice of a signal."""

    index: int
    samples: np.ndarray

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class LpcCoefficients:
    """Forward prediction coefficients x_hat[n] = sum_i a[i] * x[n-1-i].

    ``completed_order`` < ``order`` marks a recursion aborted on a
    non-positive intermediate error; trailing coefficients are zero.
    """

    order: int
    a: np.ndarray
    residual_energy: float
    completed_order: int = -1

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if len(a) != self.order:
            raise ValueError(f"expected {self.order} coefficients, got {len(a)}")
        object.__setattr__(self, "a", a)
        if self.completed_order < 0:
            object.__setattr__(self, "completed_order", self.order)
        if self.residual_energy < 0:
            raise ValueError("residual energy must be non-negative")


@dataclass(frozen=True)
class SegSnrReport:
    """Per-frame SNRs plus their mean (SEGSNR) and standard deviation.

    Frames with zero signal energy are excluded from ``per_frame_snr_db``
    and counted in ``silent_frames_excluded``; ``std_db`` is the population
    standard deviation (ddof=0) of the retained frames.
    """

    per_frame_snr_db: np.ndarray
    segsnr_db: float
    std_db: float
    frames_counted: int
    silent_frames_excluded: int = 0

    def __post_init__(self):
        snr = np.asarray(self.per_frame_snr_db, dtype=np.float64)
        object.__setattr__(self, "per_frame_snr_db", snr)
        if self.frames_counted != len(snr):
            raise ValueError("frames_counted must equal the number of per-frame values")


def frame_signal(signal: Signal, frame_len: int = DEFAULT_FRAME_LEN):
    """Split a signal into non-overlapping frames of ``frame_len`` samples.

    Returns ``(frames, tail_len)`` where ``tail_len`` is the number of
    trailing samples that did not fill a whole frame and were dropped.
    """
    if frame_len < 1:
        raise ValueError("frame_len must be >= 1")
    samples = signal.samples
    n_frames = len(samples) // frame_len
    tail_len = len(samples) - n_frames * frame_len
    frames = [
        FrameView(index=k, samples=samples[k * frame_len : (k + 1) * frame_len])
        for k in range(n_frames)
    ]
    return frames, tail_len


def autocorrelation(frame, max_lag: int) -> np.ndarray:
    """Autocorrelation r[tau] = sum_{n=tau}^{L-1} x[n] x[n-tau], tau=0..max_lag."""
    x = frame.samples if isinstance(frame, FrameView) else np.asarray(frame, dtype=np.float64)
    if max_lag >= len(x):
        raise ValueError(f"max_lag {max_lag} must be < frame length {len(x)}")
    r = np.empty(max_lag + 1)
    for tau in range(max_lag + 1):
        r[tau] = np.dot(x[tau:], x[: len(x) - tau])
    return r


def levinson_durbin(acf: np.ndarray, order: int) -> LpcCoefficients:
    """Solve the Toeplitz normal equations by the Levinson-Durbin recursion.

    Raises DegenerateFrameError when acf[0] <= 0 (zero-energy frame); a
    non-positive intermediate error aborts the recursion and the result is
    returned with ``completed_order`` flagging the partial solve.
    """
    acf = np.asarray(acf, dtype=np.float64)
    if len(acf) < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {len(acf)}")
    if acf[0] <= 0:
        raise DegenerateFrameError("zero or negative frame energy")

    a = np.zeros(order)
    err = float(acf[0])
    for i in range(1, order + 1):
        k = (acf[i] - np.dot(a[: i - 1], acf[i - 1 : 0 : -1])) / err
        a_prev = a[: i - 1].copy()
        a[i - 1] = k
        a[: i - 1] = a_prev - k * a_prev[::-1]
        err *= 1.0 - k * k
        if err <= 0:
            # Singular Toeplitz system beyond this lag; keep the partial fit.
            return LpcCoefficients(
                order=order, a=a, residual_energy=max(err, 0.0), completed_order=i
            )
    return LpcCoefficients(order=order, a=a, residual_energy=err)


def lpc_predict(coeffs: LpcCoefficients, history: np.ndarray) -> float:
    """One-step prediction from the last ``order`` samples, most recent last."""
    if len(history) != coeffs.order:
        raise ValueError(f"history length {len(history)} != order {coeffs.order}")
    return float(np.dot(coeffs.a, history[::-1]))


def segsnr(original: Signal, reconstructed: Signal, frame_len: int = DEFAULT_FRAME_LEN) -> SegSnrReport:
    """Per-frame SNR_k = 10 log10(sum x^2 / sum (x - x_rec)^2), averaged over frames.

    Zero-energy frames are excluded from the statistics; zero-error frames
    are clamped to +99 dB.
    """
    if len(original) != len(reconstructed):
        raise ValueError(
            f"length mismatch: original {len(original)} vs reconstructed {len(reconstructed)}"
        )
    frames_orig, _ = frame_signal(original, frame_len)
    frames_rec, _ = frame_signal(reconstructed, frame_len)

    snrs = []
    silent = 0
    for fo, fr in zip(frames_orig, frames_rec):
        sig_energy = float(np.dot(fo.samples, fo.samples))
        if sig_energy == 0.0:
            silent += 1
            continue
        err = fo.samples - fr.samples
        err_energy = float(np.dot(err, err))
        if err_energy == 0.0:
            snrs.append(SNR_CLAMP_DB)
        else:
            snrs.append(10.0 * np.log10(sig_energy / err_energy))

    snr_arr = np.asarray(snrs, dtype=np.float64)
    if len(snr_arr):
        mean = float(np.mean(snr_arr))
        std = float(np.std(snr_arr))
    else:
        mean = 0.0
        std = 0.0
    return SegSnrReport(
        per_frame_snr_db=snr_arr,
        segsnr_db=mean,
        std_db=std,
        frames_counted=len(snr_arr),
        silent_frames_excluded=silent,
    )
