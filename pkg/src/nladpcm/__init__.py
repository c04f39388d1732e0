"""ADPCM waveform codec with backward-adaptive linear and neural prediction."""

from .bitstream import Bitstream, BitstreamHeader
from .codec import CodecConfig, EncodeResult, decode, encode, forward_unquantized_mode
from .dsp import (
    FrameView,
    LpcCoefficients,
    SegSnrReport,
    Signal,
    autocorrelation,
    frame_signal,
    levinson_durbin,
    lpc_predict,
    segsnr,
)
from .errors import BitstreamError, ConfigError, DegenerateFrameError, NladpcmError, NumericError
from .mlp import MlpWeights, forward, init_random, jacobian
from .quantizer import QuantizerState, adapt, dequantize, init_state, quantize
from .training import (
    Dataset,
    PredictionSample,
    TrainConfig,
    TrainedPredictor,
    committee_predict,
    make_dataset,
    mse,
    msereg,
    multi_start,
    train_bayes,
    train_lm,
    train_with_validation,
)

__version__ = "0.1.0"
