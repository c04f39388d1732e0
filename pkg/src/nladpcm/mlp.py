"""The 10-2-1 perceptron predictor: init, forward pass and error Jacobian.

Weight flattening order is a bitstream format constant: w1 row-major
(20 values), then b1 (2), then w2 (2), then b2 (1) — 25 parameters total,
matching the coefficient count of an order-25 linear predictor.

Weight initialization is drawn from a counter-based Philox stream keyed by
(seed, frame_index, init_index), so a decoder regenerates identical
starting weights from the bitstream header alone.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

N_INPUTS = 10
N_HIDDEN = 2
N_WEIGHTS = N_HIDDEN * N_INPUTS + N_HIDDEN + N_HIDDEN + 1  # 25

# Uniform[-0.5, 0.5] scaled by 1/sqrt(fan-in) keeps the hidden units
# unsaturated at epoch 0.
INIT_HALF_WIDTH = 0.5


@dataclass(frozen=True)
class MlpWeights:
    """Immutable weight set for the 10-2-1 network."""

    w1: np.ndarray  # (2, 10) input-to-hidden
    b1: np.ndarray  # (2,) hidden biases
    w2: np.ndarray  # (2,) hidden-to-output
    b2: float
    hidden: str = "tanh"  # "tanh" or "logistic"

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        if w1.shape != (N_HIDDEN, N_INPUTS) or b1.shape != (N_HIDDEN,) or w2.shape != (N_HIDDEN,):
            raise ValueError("weight shapes must be (2, 10), (2,), (2,)")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", float(self.b2))
        if self.hidden not in ("tanh", "logistic"):
            raise ValueError(f"unknown hidden activation: {self.hidden}")

    def flatten(self) -> np.ndarray:
        """25-vector in the documented order: w1 row-major, b1, w2, b2."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def from_flat(cls, flat: np.ndarray, hidden: str = "tanh") -> "MlpWeights":
        flat = np.asarray(flat, dtype=np.float64)
        if len(flat) != N_WEIGHTS:
            raise ValueError(f"expected {N_WEIGHTS} values, got {len(flat)}")
        return cls(
            w1=flat[:20].reshape(N_HIDDEN, N_INPUTS),
            b1=flat[20:22],
            w2=flat[22:24],
            b2=flat[24],
            hidden=hidden,
        )

    @classmethod
    def zeros(cls, hidden: str = "tanh") -> "MlpWeights":
        return cls.from_flat(np.zeros(N_WEIGHTS), hidden=hidden)


def _rng_stream(rng_seed: int, frame_index: int, init_index: int) -> np.random.Generator:
    """Deterministic Philox stream for one (seed, frame, init) triple."""
    ss = np.random.SeedSequence(
        entropy=int(rng_seed), spawn_key=(int(frame_index), int(init_index))
    )
    return np.random.Generator(np.random.Philox(ss))


def init_random(
    rng_seed: int, init_index: int, frame_index: int = 0, hidden: str = "tanh"
) -> MlpWeights:
    """Draw starting weights from the documented per-(seed, frame, init) stream.

    25 uniforms are drawn in flattening order, then scaled by 1/sqrt(fan-in)
    of the owning layer (10 for the hidden layer, 2 for the output layer).
    """
    rng = _rng_stream(rng_seed, frame_index, init_index)
    flat = rng.uniform(-INIT_HALF_WIDTH, INIT_HALF_WIDTH, size=N_WEIGHTS)
    flat[:22] /= np.sqrt(N_INPUTS)   # w1 and b1
    flat[22:] /= np.sqrt(N_HIDDEN)   # w2 and b2
    return MlpWeights.from_flat(flat, hidden=hidden)


def _activate(z: np.ndarray, hidden: str):
    """Hidden activation and its derivative at z."""
    if hidden == "tanh":
        h = np.tanh(z)
        return h, 1.0 - h * h
    h = 1.0 / (1.0 + np.exp(-z))
    return h, h * (1.0 - h)


def forward(w: MlpWeights, x: np.ndarray) -> float:
    """Network output w2 . act(w1 x + b1) + b2 (linear output unit)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (N_INPUTS,):
        raise ValueError(f"expected {N_INPUTS} inputs, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite network input")
    h, _ = _activate(w.w1 @ x + w.b1, w.hidden)
    return float(w.w2 @ h + w.b2)


def forward_batch(w: MlpWeights, inputs: np.ndarray) -> np.ndarray:
    """Vectorized ``forward`` over an (N, 10) input matrix."""
    h, _ = _activate(inputs @ w.w1.T + w.b1, w.hidden)
    return h @ w.w2 + w.b2


def jacobian(w: MlpWeights, inputs: np.ndarray, targets: np.ndarray):
    """Errors e = target - output and the exact Jacobian J[i, j] = de_i/dw_j.

    Column order follows the weight flattening. Returns (J, e) with J of
    shape (N, 25).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(targets)
    z = inputs @ w.w1.T + w.b1          # (N, 2)
    h, dh = _activate(z, w.hidden)      # (N, 2)
    y = h @ w.w2 + w.b2
    e = targets - y

    # de/dw = -dy/dw throughout.
    back = w.w2 * dh                    # (N, 2): dy/dz_k
    jac = np.empty((n, N_WEIGHTS))
    # dy/dw1[k, j] = back_k * x_j, laid out row-major over (k, j).
    jac[:, :20] = -(back[:, :, None] * inputs[:, None, :]).reshape(n, 20)
    jac[:, 20:22] = -back               # dy/db1_k
    jac[:, 22:24] = -h                  # dy/dw2_k
    jac[:, 24] = -1.0                   # dy/db2
    return jac, e
