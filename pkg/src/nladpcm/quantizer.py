"""Backward-adaptive mid-rise quantizer with one-word-memory step adaptation.

The step size is driven only by the transmitted code, never by the
unquantized residual, so a decoder replaying the code stream tracks the
encoder state exactly. The multiplier tables below are bitstream format
constants: changing them breaks decodability and requires a new
``MULTIPLIER_TABLE_VERSION``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericError

MULTIPLIER_TABLE_VERSION = 1

# Step multipliers indexed by code magnitude: inner levels shrink the step,
# outer levels grow it.
MULTIPLIER_TABLES = {
    2: (0.845, 1.96),
    3: (0.845, 1.0, 1.0, 1.4),
    4: (0.845, 0.87, 0.91, 0.96, 1.01, 1.08, 1.25, 1.60),
    5: (
        0.845, 0.855, 0.87, 0.885, 0.90, 0.92, 0.945, 0.975,
        1.0, 1.015, 1.045, 1.09, 1.15, 1.25, 1.45, 1.75,
    ),
}

# Signals are normalized to [-1, 1]; these bounds span the speech dynamic
# range after that normalization.
DEFAULT_INITIAL_STEP = 0.02
DEFAULT_STEP_MIN = 1e-5
DEFAULT_STEP_MAX = 0.5


@dataclass(frozen=True)
class QuantizerState:
    """Immutable quantizer state; ``adapt`` returns an updated copy."""

    n_bits: int
    step: float
    step_min: float = DEFAULT_STEP_MIN
    step_max: float = DEFAULT_STEP_MAX
    multipliers: tuple = ()

    @property
    def n_levels(self) -> int:
        """Magnitude levels per sign: 2^(n_bits - 1)."""
        return 1 << (self.n_bits - 1)


def init_state(
    n_bits: int,
    initial_step: float = DEFAULT_INITIAL_STEP,
    step_min: float = DEFAULT_STEP_MIN,
    step_max: float = DEFAULT_STEP_MAX,
) -> QuantizerState:
    """Build a quantizer state with the default multiplier table for ``n_bits``."""
    if n_bits not in MULTIPLIER_TABLES:
        raise ConfigError(f"n_bits must be in {sorted(MULTIPLIER_TABLES)}, got {n_bits}")
    if not (step_min <= initial_step <= step_max):
        raise ConfigError(
            f"initial_step {initial_step} outside [{step_min}, {step_max}]"
        )
    return QuantizerState(
        n_bits=n_bits,
        step=float(initial_step),
        step_min=float(step_min),
        step_max=float(step_max),
        multipliers=MULTIPLIER_TABLES[n_bits],
    )


def quantize(residual: float, state: QuantizerState) -> int:
    """Mid-rise quantization of a residual into a signed integer code.

    Codes pack sign and magnitude into [-2^(n_bits-1), 2^(n_bits-1) - 1]:
    value >= 0 means +, magnitude = value; value < 0 means -, magnitude =
    -value - 1. A residual of exactly 0 takes the positive sign.
    """
    if not math.isfinite(residual):
        raise NumericError(f"non-finite residual: {residual}")
    level = min(int(abs(residual) / state.step), state.n_levels - 1)
    if residual < 0:
        return -level - 1
    return level


def dequantize(code: int, state: QuantizerState) -> float:
    """Mid-rise reconstruction level sign * (magnitude + 0.5) * step."""
    n_levels = state.n_levels
    if not (-n_levels <= code < n_levels):
        raise ValueError(f"code {code} out of range for {state.n_bits} bits")
    if code < 0:
        return -(-code - 1 + 0.5) * state.step
    return (code + 0.5) * state.step


def code_magnitude(code: int) -> int:
    """Magnitude level carried by a signed code value."""
    return -code - 1 if code < 0 else code


def adapt(state: QuantizerState, code: int) -> QuantizerState:
    """One-word-memory step update: step' = clamp(step * m[|level|], bounds).

    Depends only on the transmitted code, keeping encoder and decoder in
    lockstep.
    """
    mult = state.multipliers[code_magnitude(code)]
    new_step = min(max(state.step * mult, state.step_min), state.step_max)
    return replace(state, step=new_step)


def pack_codes(codes: np.ndarray, n_bits: int) -> bytes:
    """Pack signed codes as n_bits-wide two's complement, MSB-first per byte."""
    codes = np.asarray(codes, dtype=np.int64)
    unsigned = (codes & ((1 << n_bits) - 1)).astype(np.uint8)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.uint8)
    bits = (unsigned[:, None] >> shifts) & 1
    return np.packbits(bits.ravel()).tobytes()


def unpack_codes(data: bytes, n_bits: int, n_codes: int) -> np.ndarray:
    """Inverse of ``pack_codes``; returns signed code values."""
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if len(bits) < n_codes * n_bits:
        raise ValueError(
            f"need {n_codes * n_bits} bits for {n_codes} codes, got {len(bits)}"
        )
    bits = bits[: n_codes * n_bits].reshape(n_codes, n_bits)
    weights = 1 << np.arange(n_bits - 1, -1, -1)
    unsigned = bits @ weights
    # Sign-extend from n_bits to int64.
    signed = np.where(unsigned >= (1 << (n_bits - 1)), unsigned - (1 << n_bits), unsigned)
    return signed.astype(np.int64)
