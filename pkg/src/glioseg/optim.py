"""Parameter updates and layer freezing for transfer learning.

Both optimizers key their state by parameter name and skip non-trainable
parameters entirely: a frozen tensor is neither moved nor does its optimizer
state advance, so unfreezing later resumes exactly where it left off.
"""

import fnmatch
from dataclasses import dataclass

import numpy as np


class Optimizer:
    def __init__(self, named_params, lr):
        if lr <= 0:
            raise ValueError("learning rate must be > 0")
        self.params = dict(named_params)
        self.lr = lr

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def _updatable(self):
        for name, p in self.params.items():
            if not p.requires_grad or p.grad is None:
                continue
            if not np.isfinite(p.grad).all():
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
            yield name, p

    def step(self):
        raise NotImplementedError


class SGD(Optimizer):
    """Plain gradient descent: p <- p - lr * g."""

    def step(self):
        for _, p in self._updatable():
            p.data -= self.lr * p.grad


class Adam(Optimizer):
    """Adam with bias correction; per-parameter timestep."""

    def __init__(self, named_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(named_params, lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {}
        self.v = {}
        self.t = {}

    def step(self):
        for name, p in self._updatable():
            g = p.grad
            m = self.m.setdefault(name, np.zeros_like(p.data))
            v = self.v.setdefault(name, np.zeros_like(p.data))
            t = self.t.get(name, 0) + 1
            self.t[name] = t
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(named_params, config):
    """Build the optimizer named in a TrainConfig."""
    if config.optimizer == "sgd":
        return SGD(named_params, config.learning_rate)
    if config.optimizer == "adam":
        return Adam(named_params, config.learning_rate,
                    config.adam_beta1, config.adam_beta2, config.adam_eps)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


@dataclass(frozen=True)
class FreezeSelector:
    """Glob patterns over parameter names (e.g. ``enc*``, ``*.bn.*``)."""

    patterns: tuple

    @classmethod
    def parse(cls, text):
        """Comma-separated pattern list as it appears in config files."""
        patterns = tuple(p.strip() for p in text.split(",") if p.strip())
        return cls(patterns)

    def matches(self, names):
        return [n for n in names if any(fnmatch.fnmatchcase(n, pat) for pat in self.patterns)]


def freeze(model, selector):
    """Mark every matched parameter non-trainable.

    The selector must match at least one parameter and leave at least one
    trainable.  Frozen batch-norm layers stop updating running statistics
    (their layers check the trainable flags of gamma/beta).
    Returns the list of newly frozen parameter names.
    """
    if isinstance(selector, (list, tuple)):
        selector = FreezeSelector(tuple(selector))
    elif isinstance(selector, str):
        selector = FreezeSelector.parse(selector)
    params = dict(model.named_params())
    matched = selector.matches(params.keys())
    if not matched:
        raise ValueError(f"freeze selector {selector.patterns} matches no parameter")
    if len(matched) == len(params):
        raise ValueError("freeze selector would freeze every parameter")
    for name in matched:
        params[name].requires_grad = False
    return matched
