"""Per-frame weight computation: Levenberg-Marquardt under mse or msereg,
Bayesian regularization, early stopping on a validation frame, multi-start
selection and committee construction.

One LM solver serves every regime. The objective is always written as a
sum of squared residuals ``||r||^2`` with

    r = [c_data * e ; c_reg * w]

so that c_data = sqrt(gamma/N), c_reg = sqrt((1-gamma)/n) makes ||r||^2
equal the regularized error exactly (gamma = 1 reduces it to the plain
mean squared error), while c_data = sqrt(beta), c_reg = sqrt(alpha) gives
the Bayesian objective beta*sum(e^2) + alpha*sum(w^2).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import mlp
from .errors import ConfigError, DegenerateFrameError
from .mlp import MlpWeights, N_WEIGHTS

# Guard for the alpha update when the weights collapse to zero.
WEIGHT_ENERGY_FLOOR = 1e-12

ALGORITHMS = ("lm", "br")
PERFORMANCES = ("mse", "msereg")
SELECTIONS = ("best_train", "committee_mean", "committee_median")
FUSIONS = ("mean", "median")


@dataclass(frozen=True)
class TrainConfig:
    """Training regime for one predictor; serializes into the bitstream."""

    algorithm: str = "lm"
    performance: str = "mse"
    gamma: float = 0.9
    epochs: int = 6
    n_starts: int = 5
    selection: str = "best_train"
    validation: bool = False
    patience: int = 5
    mu0: float = 1e-2
    mu_inc: float = 10.0
    mu_dec: float = 0.1
    mu_max: float = 1e10
    hidden: str = "tanh"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.performance not in PERFORMANCES:
            raise ConfigError(f"performance must be one of {PERFORMANCES}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.epochs < 1 or self.n_starts < 1 or self.patience < 1:
            raise ConfigError("epochs, n_starts and patience must be >= 1")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")
        if min(self.mu0, self.mu_inc, self.mu_dec, self.mu_max) <= 0:
            raise ConfigError("mu constants must be positive")
        if self.hidden not in ("tanh", "logistic"):
            raise ConfigError(f"unknown hidden activation {self.hidden}")

    @property
    def fusion(self):
        if self.selection == "committee_mean":
            return "mean"
        if self.selection == "committee_median":
            return "median"
        return None

    def to_canonical(self) -> str:
        """Canonical key=value text block; its bytes are hashed into the bitstream."""
        items = sorted(vars(self).items())
        return "\n".join(f"{k}={v!r}" for k, v in items)

    @classmethod
    def from_canonical(cls, text: str) -> "TrainConfig":
        kwargs = {}
        for line in text.strip().splitlines():
            key, _, value = line.partition("=")
            kwargs[key] = eval(value, {"__builtins__": {}})  # repr'd literals only
        return cls(**kwargs)


@dataclass(frozen=True)
class PredictionSample:
    """One training pair: 10 past samples (most recent last) and the next one."""

    input: np.ndarray
    target: float


@dataclass(frozen=True)
class Dataset:
    """Sequence of prediction pairs stored as arrays."""

    inputs: np.ndarray   # (N, order)
    targets: np.ndarray  # (N,)

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, i: int) -> PredictionSample:
        return PredictionSample(input=self.inputs[i], target=float(self.targets[i]))


@dataclass
class TrainDiagnostics:
    """Trace of one training run."""

    final_perf: float = math.inf
    final_mse: float = math.inf
    stop_epoch: int = 0
    stop_reason: str = "epochs"
    perf_trace: list = field(default_factory=list)      # perf after each accepted step
    step_pairs: list = field(default_factory=list)      # (perf_before, perf_after)
    hyper_trace: list = field(default_factory=list)     # (alpha, beta, gamma_eff), BR only
    implied_ratio_trace: list = field(default_factory=list)  # beta*E_D/(beta*E_D+alpha*E_W)
    val_trace: list = field(default_factory=list)       # validation mse per epoch
    best_val_epoch: int = 0


@dataclass(frozen=True)
class TrainedPredictor:
    """Outcome of multi-start training: one winner or a full committee."""

    kind: str                      # "single" | "committee"
    members: tuple                 # MlpWeights, length 1 or n_starts
    fusion: str = None             # "mean" | "median" when kind == "committee"
    selected_index: int = 0
    member_diagnostics: tuple = ()
    fallback_zero: bool = False

    def __post_init__(self):
        if not self.members:
            raise ValueError("members must be nonempty")
        if (self.fusion is not None) != (self.kind == "committee"):
            raise ValueError("fusion present iff kind == committee")


def make_dataset(frame_samples: np.ndarray, order: int = mlp.N_INPUTS) -> Dataset:
    """Sliding-window pairs strictly inside one frame: L - order of them."""
    x = np.asarray(frame_samples, dtype=np.float64)
    if len(x) <= order:
        raise DegenerateFrameError(
            f"frame of {len(x)} samples cannot form order-{order} pairs"
        )
    windows = np.lib.stride_tricks.sliding_window_view(x, order + 1)
    return Dataset(inputs=windows[:, :order].copy(), targets=windows[:, order].copy())


def mse(e: np.ndarray) -> float:
    """Mean squared error (1/N) sum e^2."""
    e = np.asarray(e, dtype=np.float64)
    if len(e) == 0:
        raise ValueError("error vector must be nonempty")
    return float(np.dot(e, e) / len(e))


def msereg(e: np.ndarray, w, gamma: float) -> float:
    """Regularized error gamma*mse + (1-gamma)*(1/n)*sum w_j^2."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    flat = w.flatten() if isinstance(w, MlpWeights) else np.asarray(w, dtype=np.float64)
    return gamma * mse(e) + (1.0 - gamma) * float(np.dot(flat, flat) / len(flat))


# ---------------------------------------------------------------------------
# Levenberg-Marquardt core
# ---------------------------------------------------------------------------


@dataclass
class _LmState:
    w: np.ndarray            # flat weights, length 25
    mu: float
    jac: np.ndarray          # error Jacobian at w
    e: np.ndarray            # errors at w
    alpha: float = 0.0       # BR hyperparameters; unused for plain LM
    beta: float = 1.0
    diag: TrainDiagnostics = field(default_factory=TrainDiagnostics)


def _coeffs(cfg: TrainConfig, state: _LmState, n_samples: int):
    """Residual weights (c_data^2, c_reg^2) of the current objective."""
    if cfg.algorithm == "br":
        return state.beta, state.alpha
    if cfg.performance == "msereg":
        return cfg.gamma / n_samples, (1.0 - cfg.gamma) / N_WEIGHTS
    return 1.0 / n_samples, 0.0


def _perf(cd2: float, cr2: float, e: np.ndarray, w: np.ndarray) -> float:
    return cd2 * float(np.dot(e, e)) + cr2 * float(np.dot(w, w))


def _init_state(data: Dataset, init: MlpWeights, cfg: TrainConfig) -> _LmState:
    w = init.flatten()
    jac, e = mlp.jacobian(init, data.inputs, data.targets)
    return _LmState(w=w, mu=cfg.mu0, jac=jac, e=e)


def _advance(state: _LmState, data: Dataset, cfg: TrainConfig) -> bool:
    """Run one accepted LM step (with inner mu retries). Returns False when
    training must stop: damping exhausted, stationary point, or zero error.
    """
    n = len(data)
    cd2, cr2 = _coeffs(cfg, state, n)
    perf_cur = _perf(cd2, cr2, state.e, state.w)
    if perf_cur == 0.0:
        state.diag.stop_reason = "zero_error"
        return False

    a_mat = cd2 * (state.jac.T @ state.jac) + cr2 * np.eye(N_WEIGHTS)
    grad = cd2 * (state.jac.T @ state.e) + cr2 * state.w
    if not np.any(grad):
        state.diag.stop_reason = "stationary"
        return False

    while state.mu <= cfg.mu_max:
        try:
            delta = np.linalg.solve(a_mat + state.mu * np.eye(N_WEIGHTS), grad)
        except np.linalg.LinAlgError:
            state.mu *= cfg.mu_inc
            continue
        w_trial = state.w - delta
        weights_trial = MlpWeights.from_flat(w_trial, hidden=cfg.hidden)
        e_trial = data.targets - mlp.forward_batch(weights_trial, data.inputs)
        perf_trial = _perf(cd2, cr2, e_trial, w_trial)
        if math.isfinite(perf_trial) and perf_trial < perf_cur:
            state.w = w_trial
            state.e = e_trial
            state.jac, _ = mlp.jacobian(weights_trial, data.inputs, data.targets)
            state.mu *= cfg.mu_dec
            state.diag.perf_trace.append(perf_trial)
            state.diag.step_pairs.append((perf_cur, perf_trial))
            state.diag.stop_epoch += 1
            if cfg.algorithm == "br":
                _update_hyperparameters(state, n)
            return True
        state.mu *= cfg.mu_inc

    state.diag.stop_reason = "mu_max"
    return False


def _update_hyperparameters(state: _LmState, n_samples: int):
    """Refresh (alpha, beta) from the effective number of parameters.

    gamma_eff = n - 2*alpha*tr(H^-1) with H = 2*beta*J'J + 2*alpha*I. The
    very first update starts from alpha = 0, where that formula degenerates
    to the constant n; it is bootstrapped with the all-parameters-effective
    prior alpha = n/(2*E_W) before evaluating gamma_eff, which keeps every
    recorded value strictly inside (0, n).
    """
    n = N_WEIGHTS
    e_d = float(np.dot(state.e, state.e))
    e_w = max(float(np.dot(state.w, state.w)), WEIGHT_ENERGY_FLOOR)
    if e_d == 0.0:
        state.diag.stop_reason = "zero_error"
        return
    jtj = state.jac.T @ state.jac
    if state.alpha == 0.0:
        state.alpha = n / (2.0 * e_w)
    hess = 2.0 * state.beta * jtj + 2.0 * state.alpha * np.eye(n)
    gamma_eff = n - 2.0 * state.alpha * float(np.trace(np.linalg.inv(hess)))
    state.alpha = gamma_eff / (2.0 * e_w)
    state.beta = (n_samples - gamma_eff) / (2.0 * e_d)
    state.diag.hyper_trace.append((state.alpha, state.beta, gamma_eff))
    # Data-fit share of the objective; loosely comparable to the fixed
    # performance ratio, without claiming equivalence.
    fit = state.beta * e_d
    state.diag.implied_ratio_trace.append(fit / (fit + state.alpha * e_w))


def _finalize(state: _LmState, cfg: TrainConfig, n_samples: int):
    cd2, cr2 = _coeffs(cfg, state, n_samples)
    state.diag.final_perf = _perf(cd2, cr2, state.e, state.w)
    state.diag.final_mse = mse(state.e)
    weights = MlpWeights.from_flat(state.w, hidden=cfg.hidden)
    return weights, state.diag


def train_lm(data: Dataset, init: MlpWeights, cfg: TrainConfig):
    """Levenberg-Marquardt under mse or msereg for cfg.epochs accepted steps.

    Returns (weights, diagnostics); the accepted-step performance trace is
    strictly decreasing by construction.
    """
    if len(data) == 0:
        raise ValueError("dataset must be nonempty")
    cfg = replace(cfg, algorithm="lm")
    state = _init_state(data, init, cfg)
    for _ in range(cfg.epochs):
        if not _advance(state, data, cfg):
            break
    return _finalize(state, cfg, len(data))


def train_bayes(data: Dataset, init: MlpWeights, cfg: TrainConfig):
    """Bayesian regularization: LM on beta*E_D + alpha*E_W with (alpha, beta)
    re-estimated from gamma_eff after every accepted step.

    Returns (weights, diagnostics); diagnostics.hyper_trace holds the full
    (alpha, beta, gamma_eff) history.
    """
    if len(data) == 0:
        raise ValueError("dataset must be nonempty")
    cfg = replace(cfg, algorithm="br")
    state = _init_state(data, init, cfg)
    for _ in range(cfg.epochs):
        if not _advance(state, data, cfg):
            break
    return _finalize(state, cfg, len(data))


def train_with_validation(train_data: Dataset, val_data: Dataset, cfg: TrainConfig, init: MlpWeights):
    """Epoch-by-epoch base training with early stopping on validation mse.

    Stops after cfg.patience consecutive epochs without a new validation
    minimum (or at cfg.epochs / base-trainer exhaustion) and returns the
    weight snapshot recorded at the minimum.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("datasets must be nonempty")
    state = _init_state(train_data, init, cfg)
    best_w = state.w.copy()
    best_val = math.inf
    best_epoch = 0
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        if not _advance(state, train_data, cfg):
            break
        weights = MlpWeights.from_flat(state.w, hidden=cfg.hidden)
        val_err = mse(val_data.targets - mlp.forward_batch(weights, val_data.inputs))
        state.diag.val_trace.append(val_err)
        if val_err < best_val:
            best_val = val_err
            best_w = state.w.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                state.diag.stop_reason = "validation"
                break
    state.diag.best_val_epoch = best_epoch
    # Report the snapshot, not the last state.
    snap = _LmState(w=best_w, mu=state.mu, jac=state.jac, e=state.e,
                    alpha=state.alpha, beta=state.beta, diag=state.diag)
    weights = MlpWeights.from_flat(best_w, hidden=cfg.hidden)
    snap.e = train_data.targets - mlp.forward_batch(weights, train_data.inputs)
    return _finalize(snap, cfg, len(train_data))


def _train_one(data: Dataset, init: MlpWeights, cfg: TrainConfig, val_data=None):
    if cfg.validation:
        if val_data is None:
            raise ConfigError("validation training requires a validation dataset")
        return train_with_validation(data, val_data, cfg, init)
    if cfg.algorithm == "br":
        return train_bayes(data, init, cfg)
    return train_lm(data, init, cfg)


def multi_start(data: Dataset, cfg: TrainConfig, rng_seed: int, frame_index: int,
                val_data: Dataset = None) -> TrainedPredictor:
    """Train cfg.n_starts networks from the per-(seed, frame, index) streams.

    best_train keeps the member with the smallest final training
    performance (ties broken by lowest init index); committee selections
    keep every member that trained to a finite result.
    """
    members = []
    for idx in range(cfg.n_starts):
        init = mlp.init_random(rng_seed, idx, frame_index=frame_index, hidden=cfg.hidden)
        weights, diag = _train_one(data, init, cfg, val_data)
        members.append((idx, weights, diag))

    def _is_finite(weights, diag):
        return math.isfinite(diag.final_perf) and np.all(np.isfinite(weights.flatten()))

    usable = [(i, w, d) for i, w, d in members if _is_finite(w, d)]
    if not usable:
        return TrainedPredictor(
            kind="single",
            members=(MlpWeights.zeros(hidden=cfg.hidden),),
            selected_index=-1,
            member_diagnostics=tuple(d for _, _, d in members),
            fallback_zero=True,
        )

    if cfg.selection == "best_train":
        # BR members carry per-member (alpha, beta) scales, so their F values
        # are not comparable across starts; fall back to plain training mse.
        metric = (lambda d: d.final_mse) if cfg.algorithm == "br" else (lambda d: d.final_perf)
        idx, weights, _ = min(usable, key=lambda t: (metric(t[2]), t[0]))
        return TrainedPredictor(
            kind="single",
            members=(weights,),
            selected_index=idx,
            member_diagnostics=tuple(d for _, _, d in members),
        )

    return TrainedPredictor(
        kind="committee",
        members=tuple(w for _, w, _ in usable),
        fusion=cfg.fusion,
        selected_index=-1,
        member_diagnostics=tuple(d for _, _, d in members),
    )


def committee_predict(members, fusion: str, x: np.ndarray) -> float:
    """Fuse every member's output on one input by mean or median.

    The median of an even count is the average of the two middle values.
    """
    if not members:
        raise ValueError("committee must be nonempty")
    if fusion not in FUSIONS:
        raise ValueError(f"fusion must be one of {FUSIONS}")
    outputs = np.array([mlp.forward(m, x) for m in members])
    if fusion == "mean":
        return float(np.mean(outputs))
    return float(np.median(outputs))
