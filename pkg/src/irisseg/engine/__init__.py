from .fftconv import conv2d_backward, conv2d_forward, fast_len
from .layers import (
    BatchNorm2d,
    concat_channels,
    maxpool2,
    relu,
    sigmoid,
    split_channels,
    unpool2,
    unpool2_backward,
)
from .loss import bce_loss
from .network import Network, binarize, build_network, predict
from .optim import SGDMomentum
from .train import TrainConfig, train
from .weights_io import load_weights, save_weights
