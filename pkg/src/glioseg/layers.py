"""Parameterized layers: thin stateful wrappers over the ops.

A ``Layer`` discovers its parameters (``Tensor`` attributes) and sublayers
(``Layer`` attributes, or lists of them) from instance attributes in
definition order, which yields stable dotted parameter names like
``enc2.block.conv1.weight`` — the names freeze selectors and weight
archives address.
"""

import numpy as np

from . import ops
from .tensor import Tensor


def he_normal(rng, shape, fan_in, dtype=np.float64):
    """Fan-in-scaled zero-mean normal draw."""
    std = np.sqrt(2.0 / fan_in)
    return Tensor((std * rng.standard_normal(shape)).astype(dtype), requires_grad=True)


class Layer:
    _state_names = ()

    def forward(self, x, train=False):
        raise NotImplementedError

    def __call__(self, x, train=False):
        return self.forward(x, train)

    def sublayers(self):
        for key, value in vars(self).items():
            if isinstance(value, Layer):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Layer):
                        yield f"{key}{i}", item

    def named_params(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor):
                yield prefix + key, value
        for key, sub in self.sublayers():
            yield from sub.named_params(f"{prefix}{key}.")

    def named_state(self, prefix=""):
        """Non-parameter arrays (batch-norm running statistics)."""
        for key in self._state_names:
            yield prefix + key, getattr(self, key)
        for key, sub in self.sublayers():
            yield from sub.named_state(f"{prefix}{key}.")

    def set_dtype(self, dtype):
        for _, p in self.named_params():
            p.data = p.data.astype(dtype)
        # state must be rebound, not assigned into: writing through the old
        # buffer would keep its original dtype
        for key in self._state_names:
            setattr(self, key, getattr(self, key).astype(dtype))
        for _, sub in self.sublayers():
            sub.set_dtype(dtype)
        return self


class Sequential(Layer):
    def __init__(self, *items):
        self.items = list(items)

    def forward(self, x, train=False):
        for layer in self.items:
            x = layer.forward(x, train)
        return x


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel_size, rng,
                 stride=1, padding=0, dtype=np.float64):
        k = kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = he_normal(rng, (out_channels, in_channels, k, k),
                                in_channels * k * k, dtype)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def forward(self, x, train=False):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2x2(Layer):
    def __init__(self, in_channels, out_channels, rng, dtype=np.float64):
        self.weight = he_normal(rng, (in_channels, out_channels, 2, 2),
                                in_channels * 4, dtype)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def forward(self, x, train=False):
        return ops.conv2d_transpose(x, self.weight, self.bias)


class BatchNorm2d(Layer):
    _state_names = ("running_mean", "running_var")

    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float64):
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x, train=False):
        # Frozen layers (gamma and beta non-trainable) keep their stats.
        update = self.gamma.requires_grad or self.beta.requires_grad
        return ops.batch_norm(x, self.gamma, self.beta,
                              self.running_mean, self.running_var,
                              train=train, eps=self.eps, momentum=self.momentum,
                              update_running=update)


class Dense(Layer):
    def __init__(self, in_features, out_features, rng, dtype=np.float64):
        self.weight = he_normal(rng, (in_features, out_features), in_features, dtype)
        self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True)

    def forward(self, x, train=False):
        return ops.dense(x, self.weight, self.bias)


class ReLU(Layer):
    def forward(self, x, train=False):
        return ops.relu(x)


class Sigmoid(Layer):
    def forward(self, x, train=False):
        return ops.sigmoid(x)


class Softmax(Layer):
    def forward(self, x, train=False):
        return ops.softmax(x)


class MaxPool2x2(Layer):
    def forward(self, x, train=False):
        return ops.max_pool2d(x)


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        return ops.global_avg_pool(x)


class Flatten(Layer):
    def forward(self, x, train=False):
        n = x.data.shape[0]
        return x.reshape(n, x.data.size // n)
