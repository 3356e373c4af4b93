"""Builders for the four networks the trainer knows by name.

* ``cnn-baseline``  plain conv/pool stack; classifier head, or an
  encoder-decoder segmenter without skip connections
* ``vgg16``         13 convs in the 2-2-3-3-3 stage layout, dense head
* ``resnet50``      7x7 stem, bottleneck stages 3-4-6-3, average-pool head
* ``resunet``       U-shaped segmenter built from pre-activated residual
  blocks with squeeze-excitation gates and skip concatenations

Every builder takes the input size as an argument and checks its
divisibility requirement; nothing is pinned to 256.  Builds are seeded,
so two builds with the same arguments start from identical weights.
"""

import numpy as np

from . import ops
from .blocks import BottleneckBlock, ConvBlock, PreactResidualBlock, param_count
from .layers import (BatchNorm2d, Conv2d, ConvTranspose2x2, Dense, Layer,
                     MaxPool2x2, ReLU)
from .tensor import Tensor, concat

DEFAULT_CHANNELS = (8, 16, 32, 64, 128, 256, 128, 64, 32, 16, 8)
MODEL_NAMES = ("cnn-baseline", "vgg16", "resnet50", "resunet")


def validate_channel_sequence(channels):
    seq = tuple(int(c) for c in channels)
    if len(seq) < 3 or len(seq) % 2 == 0:
        raise ValueError(f"channel sequence needs an odd length >= 3, got {len(seq)}")
    if any(c < 1 for c in seq):
        raise ValueError(f"channel widths must be positive: {seq}")
    if seq != seq[::-1]:
        raise ValueError(f"channel sequence must be palindromic, got {seq}")
    return seq


def _check_divisible(input_size, factor, name):
    h, w = input_size
    if h < factor or w < factor or h % factor or w % factor:
        raise ValueError(
            f"{name} needs input sizes divisible by {factor}, got {h}x{w}")
    return (int(h), int(w))


class ModelGraph:
    """A named network with an input contract and a train/eval switch."""

    def __init__(self, name, net, head, in_channels, input_size, structure):
        self.name = name
        self.net = net
        self.head = head
        self.in_channels = in_channels
        self.input_size = tuple(input_size)
        self.structure = dict(structure)
        self.mode = "eval"
        names = [n for n, _ in net.named_params()]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter names in {name}")

    def train(self):
        self.mode = "train"
        return self

    def eval(self):
        self.mode = "eval"
        return self

    def named_params(self):
        return dict(self.net.named_params())

    def named_state(self):
        return dict(self.net.named_state())

    def param_audit(self):
        return param_count(self.net)

    def set_dtype(self, dtype):
        self.net.set_dtype(dtype)
        return self

    def forward(self, x, train=None):
        if train is None:
            train = self.mode == "train"
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x))
        if x.data.ndim != 4:
            raise ValueError(f"expected NCHW batch, got shape {x.data.shape}")
        n, c, h, w = x.data.shape
        if c != self.in_channels or (h, w) != self.input_size:
            raise ValueError(
                f"{self.name} expects {self.in_channels}x{self.input_size[0]}"
                f"x{self.input_size[1]} inputs, got {c}x{h}x{w}")
        return self.net.forward(x, train)

    __call__ = forward


class _GapClassifier(Layer):
    """Feature stack -> global average pool -> dense -> softmax."""

    def __init__(self, features, width, rng, dtype):
        self.features = features
        self.fc = Dense(width, 2, rng, dtype=dtype)

    def forward(self, x, train=False):
        for layer in self.features:
            x = layer.forward(x, train)
        return ops.softmax(self.fc(ops.global_avg_pool(x), train))


class _DenseClassifier(Layer):
    """Feature stack -> flatten -> two dense layers -> softmax."""

    def __init__(self, features, flat, hidden, rng, dtype):
        self.features = features
        self.fc1 = Dense(flat, hidden, rng, dtype=dtype)
        self.fc2 = Dense(hidden, 2, rng, dtype=dtype)

    def forward(self, x, train=False):
        for layer in self.features:
            x = layer.forward(x, train)
        n = x.data.shape[0]
        x = x.reshape(n, x.data.size // n)
        return ops.softmax(self.fc2(ops.relu(self.fc1(x, train)), train))


class _EncoderDecoder(Layer):
    """Hourglass of plain conv blocks, no skip connections."""

    def __init__(self, in_channels, channels, rng, dtype):
        half = len(channels) // 2
        front, mid = channels[:half], channels[half]
        self.enc = []
        c = in_channels
        for w in front:
            self.enc.append(ConvBlock(c, w, rng, dtype=dtype))
            c = w
        self.mid = ConvBlock(c, mid, rng, dtype=dtype)
        self.up = []
        self.dec = []
        prev = mid
        for w in reversed(front):
            self.up.append(ConvTranspose2x2(prev, w, rng, dtype=dtype))
            self.dec.append(ConvBlock(w, w, rng, dtype=dtype))
            prev = w
        self.head = Conv2d(prev, 1, 1, rng, dtype=dtype)

    def forward(self, x, train=False):
        h = x
        for block in self.enc:
            h = ops.max_pool2d(block(h, train))
        h = self.mid(h, train)
        for up, block in zip(self.up, self.dec):
            h = block(up(h, train), train)
        return ops.sigmoid(self.head(h, train))


class _ResUNet(Layer):
    """Residual U-shape with mirror-level skip concatenations."""

    def __init__(self, in_channels, channels, se_enabled, se_ratio, rng, dtype):
        half = len(channels) // 2
        front, mid = channels[:half], channels[half]
        se = se_ratio if se_enabled else None
        self.use_skips = True
        self.enc = []
        c = in_channels
        for w in front:
            self.enc.append(PreactResidualBlock(c, w, rng, se_ratio=se, dtype=dtype))
            c = w
        self.mid = PreactResidualBlock(c, mid, rng, se_ratio=se, dtype=dtype)
        self.up = []
        self.dec = []
        prev = mid
        for w in reversed(front):
            self.up.append(ConvTranspose2x2(prev, w, rng, dtype=dtype))
            self.dec.append(PreactResidualBlock(2 * w, w, rng, se_ratio=se, dtype=dtype))
            prev = w
        self.head = Conv2d(prev, 1, 1, rng, dtype=dtype)

    def forward(self, x, train=False):
        skips = []
        h = x
        for block in self.enc:
            h = block(h, train)
            skips.append(h)
            h = ops.max_pool2d(h)
        h = self.mid(h, train)
        for up, block, skip in zip(self.up, self.dec, reversed(skips)):
            h = up(h, train)
            if not self.use_skips:
                skip = Tensor(np.zeros_like(skip.data))
            h = block(concat([skip, h]), train)
        return ops.sigmoid(self.head(h, train))


class _ResNet50(Layer):
    def __init__(self, in_channels, widths, counts, rng, dtype):
        self.stem = Conv2d(in_channels, widths[0], 7, rng, stride=2, padding=3,
                           dtype=dtype)
        self.stem_bn = BatchNorm2d(widths[0], dtype=dtype)
        self.blocks = []
        c = widths[0]
        for stage, (mid, count) in enumerate(zip(widths, counts)):
            for i in range(count):
                stride = 2 if stage > 0 and i == 0 else 1
                self.blocks.append(
                    BottleneckBlock(c, mid, rng, stride=stride,
                                    projection=(i == 0), dtype=dtype))
                c = 4 * mid
        self.fc = Dense(c, 2, rng, dtype=dtype)

    def forward(self, x, train=False):
        h = ops.relu(self.stem_bn(self.stem(x, train), train))
        h = ops.max_pool2d(h)
        for block in self.blocks:
            h = block(h, train)
        return ops.softmax(self.fc(ops.global_avg_pool(h), train))


def _scaled(width, scale):
    return max(1, int(round(width * scale)))


def build_cnn_baseline(input_size, head="classifier", in_channels=1, seed=0,
                       width_scale=1.0, channels=DEFAULT_CHANNELS,
                       dtype=np.float64):
    rng = np.random.default_rng(seed)
    if head == "classifier":
        input_size = _check_divisible(input_size, 8, "cnn-baseline classifier")
        widths = [_scaled(w, width_scale) for w in (64, 128, 256)]
        features = []
        c = in_channels
        for w in widths:
            features.append(ConvBlock(c, w, rng, dtype=dtype))
            features.append(ConvBlock(w, w, rng, dtype=dtype))
            features.append(MaxPool2x2())
            c = w
        net = _GapClassifier(features, c, rng, dtype)
        structure = {"conv_layers": 6, "pools": 3}
    elif head == "segmenter":
        seq = validate_channel_sequence(channels)
        levels = len(seq) // 2
        input_size = _check_divisible(input_size, 2 ** levels,
                                      "cnn-baseline segmenter")
        net = _EncoderDecoder(in_channels, seq, rng, dtype)
        structure = {"levels": levels, "upconvs": levels, "skips": False}
    else:
        raise ValueError(f"unknown head kind {head!r}")
    return ModelGraph("cnn-baseline", net, head, in_channels, input_size, structure)


def build_vgg16_classifier(input_size, in_channels=1, seed=0, width_scale=1.0,
                           hidden=256, dtype=np.float64):
    input_size = _check_divisible(input_size, 32, "vgg16")
    rng = np.random.default_rng(seed)
    stages = ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3))
    features = []
    c = in_channels
    for width, count in stages:
        w = _scaled(width, width_scale)
        for _ in range(count):
            features.append(Conv2d(c, w, 3, rng, padding="same", dtype=dtype))
            features.append(ReLU())
            c = w
        features.append(MaxPool2x2())
    flat = c * (input_size[0] // 32) * (input_size[1] // 32)
    net = _DenseClassifier(features, flat, hidden, rng, dtype)
    structure = {"conv_layers": 13, "pools": 5,
                 "stages": tuple(n for _, n in stages)}
    return ModelGraph("vgg16", net, "classifier", in_channels, input_size,
                      structure)


def build_resnet50_classifier(input_size, in_channels=1, seed=0,
                              width_scale=1.0, dtype=np.float64):
    input_size = _check_divisible(input_size, 32, "resnet50")
    rng = np.random.default_rng(seed)
    widths = [_scaled(w, width_scale) for w in (64, 128, 256, 512)]
    counts = (3, 4, 6, 3)
    net = _ResNet50(in_channels, widths, counts, rng, dtype)
    structure = {
        "stem_convs": 1,
        "pools": 1,
        "blocks": sum(counts),
        "block_convs": 3 * sum(counts),
        "projection_convs": len(counts),
        "stage_layout": counts,
    }
    return ModelGraph("resnet50", net, "classifier", in_channels, input_size,
                      structure)


def build_resunet_segmenter(input_size, channels=DEFAULT_CHANNELS,
                            se_enabled=True, se_ratio=4, in_channels=1,
                            seed=0, dtype=np.float64):
    seq = validate_channel_sequence(channels)
    levels = len(seq) // 2
    input_size = _check_divisible(input_size, 2 ** levels, "resunet")
    rng = np.random.default_rng(seed)
    net = _ResUNet(in_channels, seq, se_enabled, se_ratio, rng, dtype)
    structure = {
        "encoder_levels": levels,
        "bottleneck_width": seq[levels],
        "upconvs": levels,
        "skips": True,
        "se_blocks": len(seq) if se_enabled else 0,
    }
    return ModelGraph("resunet", net, "segmenter", in_channels, input_size,
                      structure)


def build_model(name, input_size, head=None, **kwargs):
    """Build a network by its CLI name."""
    if name == "cnn-baseline":
        return build_cnn_baseline(input_size, head=head or "classifier", **kwargs)
    if name == "vgg16":
        if head not in (None, "classifier"):
            raise ValueError("vgg16 only has a classifier head")
        return build_vgg16_classifier(input_size, **kwargs)
    if name == "resnet50":
        if head not in (None, "classifier"):
            raise ValueError("resnet50 only has a classifier head")
        return build_resnet50_classifier(input_size, **kwargs)
    if name == "resunet":
        if head not in (None, "segmenter"):
            raise ValueError("resunet only has a segmenter head")
        return build_resunet_segmenter(input_size, **kwargs)
    raise ValueError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}")
