"""Reusable network blocks and parameter accounting.

Composition rules the models rely on:

* ``ConvBlock``          conv3x3(same) -> batch norm -> relu
* ``PreactResidualBlock`` two (bn -> relu -> conv3x3) legs plus a skip;
  optional channel-gating ``SEBlock`` on the residual leg before the add
* ``SEBlock``            squeeze (global average) -> two dense layers ->
  sigmoid gate broadcast over the channel axis
* ``BottleneckBlock``    1x1 reduce -> 3x3 (optionally strided) -> 1x1
  expand to 4x the middle width, relu after the skip addition

``param_count`` reports trainable/non-trainable totals; the only
intrinsically non-trainable values are batch-norm running statistics,
everything else moves between the two buckets with ``requires_grad``.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .layers import BatchNorm2d, Conv2d, Dense, Layer, ReLU


class ConvBlock(Layer):
    def __init__(self, in_channels, out_channels, rng, dtype=np.float64):
        self.conv = Conv2d(in_channels, out_channels, 3, rng, padding="same", dtype=dtype)
        self.bn = BatchNorm2d(out_channels, dtype=dtype)
        self.act = ReLU()

    def forward(self, x, train=False):
        return self.act(self.bn(self.conv(x, train), train), train)


class SEBlock(Layer):
    """Squeeze-and-excitation channel gate."""

    def __init__(self, channels, ratio, rng, dtype=np.float64):
        if ratio <= 0 or channels % ratio != 0:
            raise ValueError(
                f"se ratio {ratio} must be a positive divisor of {channels} channels")
        self.fc1 = Dense(channels, channels // ratio, rng, dtype=dtype)
        self.fc2 = Dense(channels // ratio, channels, rng, dtype=dtype)

    def forward(self, x, train=False):
        n, c = x.data.shape[:2]
        squeezed = ops.global_avg_pool(x)
        gate = ops.sigmoid(self.fc2(ops.relu(self.fc1(squeezed))))
        return x * gate.reshape(n, c, 1, 1)


class PreactResidualBlock(Layer):
    """bn -> relu -> conv, twice, added to an identity or projected skip.

    With all conv weights and biases at zero the identity form returns its
    input bit for bit, which is the property that makes stacking safe.
    """

    def __init__(self, in_channels, out_channels, rng,
                 projection=None, se_ratio=None, dtype=np.float64):
        if projection is None:
            projection = in_channels != out_channels
        if not projection and in_channels != out_channels:
            raise ValueError(
                f"residual block {in_channels}->{out_channels} needs a projection skip")
        self.bn1 = BatchNorm2d(in_channels, dtype=dtype)
        self.conv1 = Conv2d(in_channels, out_channels, 3, rng, padding="same", dtype=dtype)
        self.bn2 = BatchNorm2d(out_channels, dtype=dtype)
        self.conv2 = Conv2d(out_channels, out_channels, 3, rng, padding="same", dtype=dtype)
        if projection:
            self.proj = Conv2d(in_channels, out_channels, 1, rng, dtype=dtype)
        if se_ratio is not None:
            self.se = SEBlock(out_channels, se_ratio, rng, dtype=dtype)

    def forward(self, x, train=False):
        h = self.conv1(ops.relu(self.bn1(x, train)), train)
        h = self.conv2(ops.relu(self.bn2(h, train)), train)
        se = getattr(self, "se", None)
        if se is not None:
            h = se(h, train)
        proj = getattr(self, "proj", None)
        skip = x if proj is None else proj(x, train)
        return skip + h


class BottleneckBlock(Layer):
    def __init__(self, in_channels, mid_channels, rng,
                 stride=1, projection=None, dtype=np.float64):
        out_channels = 4 * mid_channels
        if projection is None:
            projection = stride != 1 or in_channels != out_channels
        if not projection and (stride != 1 or in_channels != out_channels):
            raise ValueError(
                f"bottleneck {in_channels}->{out_channels} stride {stride} "
                "needs a projection skip")
        self.out_channels = out_channels
        self.conv1 = Conv2d(in_channels, mid_channels, 1, rng, dtype=dtype)
        self.bn1 = BatchNorm2d(mid_channels, dtype=dtype)
        self.conv2 = Conv2d(mid_channels, mid_channels, 3, rng,
                            stride=stride, padding=1, dtype=dtype)
        self.bn2 = BatchNorm2d(mid_channels, dtype=dtype)
        self.conv3 = Conv2d(mid_channels, out_channels, 1, rng, dtype=dtype)
        self.bn3 = BatchNorm2d(out_channels, dtype=dtype)
        if projection:
            self.proj = Conv2d(in_channels, out_channels, 1, rng,
                               stride=stride, dtype=dtype)
            self.proj_bn = BatchNorm2d(out_channels, dtype=dtype)

    def forward(self, x, train=False):
        h = ops.relu(self.bn1(self.conv1(x, train), train))
        h = ops.relu(self.bn2(self.conv2(h, train), train))
        h = self.bn3(self.conv3(h, train), train)
        proj = getattr(self, "proj", None)
        skip = x if proj is None else self.proj_bn(proj(x, train), train)
        return ops.relu(skip + h)


@dataclass(frozen=True)
class ParamAudit:
    total: int
    trainable: int
    non_trainable: int

    def __add__(self, other):
        return ParamAudit(self.total + other.total,
                          self.trainable + other.trainable,
                          self.non_trainable + other.non_trainable)


def param_count(obj):
    """Audit anything exposing ``named_params`` and ``named_state``.

    Frozen parameters count as non-trainable alongside the running
    statistics, so the audit tracks ``requires_grad`` flips.
    """
    trainable = 0
    frozen = 0
    for _, p in obj.named_params():
        if p.requires_grad:
            trainable += p.data.size
        else:
            frozen += p.data.size
    state = sum(s.size for _, s in obj.named_state())
    return ParamAudit(trainable + frozen + state, trainable, frozen + state)
