"""16-bit PCM mono WAV reading and writing.

Samples are normalized by 1/32768 on read; on write they are scaled back,
rounded and symmetrically clamped to [-32767, 32767].
"""

import wave

import numpy as np

from .dsp import Signal
from .errors import BitstreamError

PCM_SCALE = 32768.0
PCM_CLAMP = 32767


def read_wav(path) -> Signal:
    """Load a mono 16-bit PCM WAV file as a normalized Signal."""
    try:
        with wave.open(str(path), "rb") as wav:
            if wav.getnchannels() != 1:
                raise BitstreamError(f"{path}: expected mono, got {wav.getnchannels()} channels")
            if wav.getsampwidth() != 2:
                raise BitstreamError(f"{path}: expected 16-bit PCM, got {8 * wav.getsampwidth()}-bit")
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        raise BitstreamError(f"{path}: not a readable WAV file ({exc})")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Signal(samples, sample_rate=rate)


def quantize_to_pcm(samples: np.ndarray) -> np.ndarray:
    """Round to the int16 grid with the symmetric clamp used on write."""
    return np.clip(np.rint(np.asarray(samples) * PCM_SCALE), -PCM_CLAMP, PCM_CLAMP).astype("<i2")


def write_wav(path, signal: Signal):
    """Write a normalized Signal as mono 16-bit PCM."""
    ints = quantize_to_pcm(signal.samples)
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(signal.sample_rate)
        wav.writeframes(ints.tobytes())
