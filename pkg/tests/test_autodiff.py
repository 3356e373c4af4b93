"""Backward-pass correctness: hand values, finite differences, graph rules."""

import numpy as np
import pytest

from glioseg import ops
from glioseg.gradcheck import grad_check
from glioseg.tensor import Tensor, concat, no_grad


class TestBackwardBasics:
    def test_relu_subgradient(self):
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        ops.relu(x).sum().backward()
        assert np.array_equal(x.grad, [1.0, 0.0, 1.0])

    def test_sigmoid_derivative_at_zero(self):
        x = Tensor(np.array([0.0]), requires_grad=True)
        ops.sigmoid(x).sum().backward()
        assert abs(x.grad[0] - 0.25) < 1e-12

    def test_accumulation_is_addition(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        (x * 3.0 + x * 4.0).sum().backward()
        assert x.grad[0] == 7.0

    def test_non_participating_parameter_gets_no_gradient(self):
        x = Tensor(np.array([1.0]), requires_grad=True)
        unused = Tensor(np.array([5.0]), requires_grad=True)
        (x * 2.0).sum().backward()
        assert unused.grad is None

    def test_requires_grad_false_never_accumulates(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=False)
        w = Tensor(np.array([3.0, 4.0]), requires_grad=True)
        (x * w).sum().backward()
        assert x.grad is None
        assert np.array_equal(w.grad, [1.0, 2.0])

    def test_backward_rejects_non_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2.0).backward()

    def test_no_grad_suppresses_graph(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = ops.relu(x)
        assert not y.requires_grad
        assert y._backward_fn is None

    def test_broadcast_add_unbroadcasts(self):
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        b = Tensor(np.zeros(3), requires_grad=True)
        (x + b).sum().backward()
        assert np.array_equal(b.grad, [2.0, 2.0, 2.0])
        assert np.array_equal(x.grad, np.ones((2, 3)))

    def test_matmul_gradients(self):
        a = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        b = Tensor(np.array([[3.0], [4.0]]), requires_grad=True)
        (a @ b).sum().backward()
        assert np.array_equal(a.grad, [[3.0, 4.0]])
        assert np.array_equal(b.grad, [[1.0], [2.0]])

    def test_concat_splits_gradient(self):
        a = Tensor(np.ones((1, 2, 2, 2)), requires_grad=True)
        b = Tensor(np.ones((1, 3, 2, 2)), requires_grad=True)
        out = concat([a, b], axis=1)
        (out * Tensor(np.arange(5.0).reshape(1, 5, 1, 1))).sum().backward()
        assert np.allclose(a.grad, np.broadcast_to([[0.0], [1.0]], (2, 1))[None, :, :, None] * np.ones((1, 2, 2, 2)) + 0)
        assert a.grad[0, 1, 0, 0] == 1.0
        assert b.grad[0, 2, 1, 1] == 4.0


class TestGradCheckHarness:
    def test_linear_function_is_exact(self, rng):
        w = Tensor(rng.standard_normal(8), requires_grad=True)
        x = Tensor(rng.standard_normal(8))
        assert grad_check(lambda: (w * x).sum(), [w]) < 1e-10

    def test_relu_away_from_kink_is_tight(self, rng):
        x = Tensor(np.where(rng.standard_normal(16) >= 0, 1, -1) *
                   (0.1 + rng.random(16)), requires_grad=True)
        co = Tensor(rng.standard_normal(16))
        assert grad_check(lambda: (ops.relu(x) * co).sum(), [x]) < 1e-6

    def test_rejects_bad_eps(self):
        w = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ValueError):
            grad_check(lambda: w.sum(), [w], eps=0.0)

    def test_reports_non_finite(self):
        w = Tensor(np.array([0.0]), requires_grad=True)
        with np.errstate(divide="ignore"), pytest.raises(FloatingPointError):
            grad_check(lambda: (Tensor(np.array([1.0])) / w).sum(), [w])


def _finite_diff(fn, arr, eps=1e-5):
    """Independent central-difference loop (not grad_check)."""
    g = np.zeros_like(arr)
    flat = arr.flat
    for i in range(arr.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = fn()
        flat[i] = orig - eps
        fm = fn()
        flat[i] = orig
        g.flat[i] = (fp - fm) / (2 * eps)
    return g


class TestConvGradients:
    def test_conv_weight_gradient_matches_finite_differences(self, rng):
        x = Tensor(rng.standard_normal((2, 2, 6, 6)))
        w = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal(3), requires_grad=True)
        co = Tensor(rng.standard_normal((2, 3, 6, 6)))

        def loss():
            return (ops.conv2d(x, w, b, padding="same") * co).sum()

        loss().backward()
        analytic = w.grad.copy()
        numeric = _finite_diff(lambda: float(loss().data), w.data)
        rel = np.abs(analytic - numeric) / np.maximum(
            np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
        assert rel.max() < 1e-4

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_every_op_passes_grad_check(self, seed):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.standard_normal((2, 3, 6, 6)), requires_grad=True)
        w = Tensor(0.5 * rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
        b = Tensor(0.1 * rng.standard_normal(4), requires_grad=True)
        wu = Tensor(0.5 * rng.standard_normal((3, 2, 2, 2)), requires_grad=True)
        gamma = Tensor(1.0 + 0.1 * rng.standard_normal(3), requires_grad=True)
        beta = Tensor(0.1 * rng.standard_normal(3), requires_grad=True)
        co = rng.standard_normal((2, 4, 6, 6))
        cu = rng.standard_normal((2, 2, 12, 12))

        cases = {
            "conv2d": (lambda: (ops.conv2d(x, w, b, padding="same") * co).sum(), [x, w, b]),
            "conv2d_s2": (lambda: (ops.conv2d(x, w, b, stride=2, padding=1) ** 2).sum(), [x, w, b]),
            "conv2d_transpose": (lambda: (ops.conv2d_transpose(x, wu) * cu).sum(), [x, wu]),
            "max_pool": (lambda: (ops.max_pool2d(x) ** 2).sum(), [x]),
            "batch_norm": (
                lambda: (ops.batch_norm(x, gamma, beta, np.zeros(3), np.ones(3), train=True) * co[:, :3]).sum(),
                [x, gamma, beta],
            ),
            "sigmoid": (lambda: (ops.sigmoid(x) ** 2).sum(), [x]),
            "softmax": (lambda: (ops.softmax(x) * co[:, :3]).sum(), [x]),
            "global_avg_pool": (lambda: (ops.global_avg_pool(x) ** 2).sum(), [x]),
        }
        for name, (fn, params) in cases.items():
            err = grad_check(fn, params)
            assert err < 1e-4, f"{name} grad error {err:.3e} at seed {seed}"

    def test_full_chain_conv_bn_relu_sigmoid_dice(self, rng):
        from glioseg.losses import dice_loss

        x = Tensor(rng.standard_normal((2, 2, 6, 6)))
        w = Tensor(0.5 * rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
        b = Tensor(np.zeros(1), requires_grad=True)
        gamma = Tensor(np.ones(1), requires_grad=True)
        beta = Tensor(np.zeros(1), requires_grad=True)
        target = (rng.random((2, 1, 6, 6)) > 0.5).astype(float)

        def loss():
            y = ops.conv2d(x, w, b, padding="same")
            y = ops.batch_norm(y, gamma, beta, np.zeros(1), np.ones(1), train=True)
            y = ops.relu(y + 0.2)
            return dice_loss(ops.sigmoid(y), Tensor(target))

        assert grad_check(loss, [w, b, gamma, beta]) < 1e-4
