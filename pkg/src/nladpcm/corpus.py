"""Deterministic synthetic test signals and the corpus manifest format.

Real 8-speaker recordings are not redistributable, so the shipped desk
corpus is synthetic: stationary and time-varying autoregressive signals,
speech-like voiced/unvoiced alternation and a nonlinear recursion. Every
generator is fully determined by (kind, seed, n_samples).

A corpus manifest is a JSON file:

    {"version": 1,
     "signals": [{"name": "tv-0", "kind": "ar_timevarying",
                  "seed": 7, "n_samples": 6000}]}

Running ``python -m nladpcm.corpus OUTDIR`` materializes the default desk
corpus as WAV files plus its manifest.
"""

import json
from pathlib import Path

import numpy as np

from .dsp import DEFAULT_SAMPLE_RATE, Signal
from .errors import ConfigError

MANIFEST_VERSION = 1
PEAK_NORM = 0.95


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _normalize(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    if peak == 0:
        return x
    return x * (PEAK_NORM / peak)


def ar_stationary(seed: int, n_samples: int, coeffs=(0.9, -0.2), noise_std=0.1) -> np.ndarray:
    """Stable AR process driven by white Gaussian noise."""
    rng = _rng(seed)
    order = len(coeffs)
    x = np.zeros(n_samples + order)
    noise = rng.normal(0.0, noise_std, size=n_samples + order)
    c = np.asarray(coeffs)
    for i in range(order, len(x)):
        x[i] = np.dot(c, x[i - order : i][::-1]) + noise[i]
    return _normalize(x[order:])


def _two_formant_filter(excitation: np.ndarray, radii: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Cascade of two time-varying 2-pole resonators."""
    y = excitation
    for sec in range(2):
        r = radii[sec]
        th = thetas[sec]
        out = np.zeros_like(y)
        y1 = y2 = 0.0
        for i in range(len(y)):
            out[i] = y[i] + 2.0 * r[i] * np.cos(th[i]) * y1 - r[i] * r[i] * y2
            y2 = y1
            y1 = out[i]
        y = out
    return y


def _interp_segments(rng, n_samples, low, high, seg_len):
    """Piecewise-linear trajectory between random breakpoint values."""
    n_seg = max(2, n_samples // seg_len + 1)
    points = rng.uniform(low, high, size=n_seg)
    return np.interp(np.arange(n_samples), np.arange(n_seg) * seg_len, points)


def ar_timevarying(seed: int, n_samples: int) -> np.ndarray:
    """Noise through two resonators whose poles drift like moving formants."""
    rng = _rng(seed)
    excitation = rng.normal(0.0, 1.0, size=n_samples)
    radii = np.stack([
        _interp_segments(rng, n_samples, 0.88, 0.97, 1600),
        _interp_segments(rng, n_samples, 0.80, 0.92, 1600),
    ])
    thetas = np.stack([
        _interp_segments(rng, n_samples, 0.08 * np.pi, 0.22 * np.pi, 1600),
        _interp_segments(rng, n_samples, 0.30 * np.pi, 0.55 * np.pi, 1600),
    ])
    envelope = 0.3 + 0.7 * np.abs(np.sin(np.linspace(0, 4.7, n_samples)))
    return _normalize(_two_formant_filter(excitation, radii, thetas) * envelope)


def speechlike(seed: int, n_samples: int, with_silence: bool = False) -> np.ndarray:
    """Voiced/unvoiced alternation: pulse-train or noise excitation through
    drifting resonators, optionally with exact-zero pauses."""
    rng = _rng(seed)
    excitation = np.zeros(n_samples)
    pos = 0
    segments = []
    while pos < n_samples:
        seg_len = int(rng.integers(600, 1800))
        kind = rng.choice(["voiced", "unvoiced", "pause"] if with_silence else ["voiced", "unvoiced"],
                          p=[0.55, 0.3, 0.15] if with_silence else [0.65, 0.35])
        segments.append((pos, min(pos + seg_len, n_samples), kind))
        pos += seg_len
    for start, end, kind in segments:
        if kind == "voiced":
            pitch = rng.integers(40, 100)  # 80-200 Hz at 8 kHz
            pulses = np.arange(start, end, pitch)
            excitation[pulses] = 1.0
            excitation[start:end] += rng.normal(0.0, 0.02, size=end - start)
        elif kind == "unvoiced":
            excitation[start:end] = rng.normal(0.0, 0.25, size=end - start)
        # pauses stay exactly zero
    radii = np.stack([
        _interp_segments(rng, n_samples, 0.90, 0.97, 1200),
        _interp_segments(rng, n_samples, 0.82, 0.93, 1200),
    ])
    thetas = np.stack([
        _interp_segments(rng, n_samples, 0.06 * np.pi, 0.20 * np.pi, 1200),
        _interp_segments(rng, n_samples, 0.28 * np.pi, 0.60 * np.pi, 1200),
    ])
    out = _two_formant_filter(excitation, radii, thetas)
    if with_silence:
        for start, end, kind in segments:
            if kind == "pause":
                out[start:end] = 0.0
    return _normalize(out)


def nonlinear(seed: int, n_samples: int) -> np.ndarray:
    """Drifting recursion with a product term no linear predictor can model."""
    rng = _rng(seed)
    x = np.zeros(n_samples + 2)
    noise = rng.normal(0.0, 0.08, size=n_samples + 2)
    a1 = _interp_segments(rng, n_samples + 2, 0.7, 1.3, 1400)
    a2 = _interp_segments(rng, n_samples + 2, -0.8, -0.3, 1400)
    b = _interp_segments(rng, n_samples + 2, 0.4, 1.1, 1400)
    env = 0.35 + 0.65 * np.abs(np.sin(np.linspace(0, 5.3, n_samples + 2)))
    for i in range(2, len(x)):
        x[i] = np.tanh(a1[i] * x[i - 1] + a2[i] * x[i - 2] + b[i] * x[i - 1] * x[i - 2]) + noise[i]
    return _normalize(x[2:] * env[2:])


def white_noise(seed: int, n_samples: int) -> np.ndarray:
    rng = _rng(seed)
    return _normalize(rng.normal(0.0, 1.0, size=n_samples))


GENERATORS = {
    "ar_stationary": ar_stationary,
    "ar_timevarying": ar_timevarying,
    "speechlike": speechlike,
    "speechlike_silence": lambda seed, n: speechlike(seed, n, with_silence=True),
    "nonlinear": nonlinear,
    "white_noise": white_noise,
}


def signal_from_spec(kind: str, seed: int, n_samples: int,
                     sample_rate: int = DEFAULT_SAMPLE_RATE) -> Signal:
    if kind not in GENERATORS:
        raise ConfigError(f"unknown signal kind {kind!r}; choose from {sorted(GENERATORS)}")
    return Signal(GENERATORS[kind](seed, n_samples), sample_rate=sample_rate)


DESK_KINDS = ["ar_timevarying", "speechlike", "nonlinear", "speechlike_silence"]


def default_desk_corpus(n_signals: int = 10, n_samples: int = 6000, seed: int = 2024):
    """Deterministic nonstationary (speech-like) corpus as (name, Signal) pairs.

    Stationary generators are deliberately excluded: frame-to-frame change
    is what separates the adaptation schemes being compared.
    """
    kinds = DESK_KINDS
    out = []
    for i in range(n_signals):
        kind = kinds[i % len(kinds)]
        name = f"{kind}-{i}"
        out.append((name, signal_from_spec(kind, seed + i, n_samples)))
    return out


def load_manifest(path):
    """Generate the signals described by a manifest JSON file."""
    manifest = json.loads(Path(path).read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise ConfigError(f"unsupported manifest version {manifest.get('version')}")
    out = []
    for entry in manifest["signals"]:
        out.append((
            entry["name"],
            signal_from_spec(entry["kind"], int(entry["seed"]), int(entry["n_samples"])),
        ))
    return out


def write_default_corpus(out_dir, n_signals: int = 10, n_samples: int = 6000, seed: int = 2024):
    """Materialize the default desk corpus as WAVs plus a manifest."""
    from . import wavio

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = DESK_KINDS
    entries = []
    for i in range(n_signals):
        kind = kinds[i % len(kinds)]
        name = f"{kind}-{i}"
        sig = signal_from_spec(kind, seed + i, n_samples)
        wavio.write_wav(out_dir / f"{name}.wav", sig)
        entries.append({"name": name, "kind": kind, "seed": seed + i, "n_samples": n_samples})
    manifest = {"version": MANIFEST_VERSION, "signals": entries}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out_dir / "manifest.json"


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "corpus"
    path = write_default_corpus(target)
    print(f"wrote default desk corpus: {path}")
