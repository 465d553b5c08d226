import numpy as np
import pytest

from tsxbench.nn.autodiff import Tensor, concat, conv1d
from helpers import rel_error


def numeric_grad(fn, arrays, eps=1e-6):
    out = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = arr[i]
            arr[i] = old + eps
            up = fn()
            arr[i] = old - eps
            down = fn()
            arr[i] = old
            g[i] = (up - down) / (2 * eps)
        out.append(g)
    return out


rng = np.random.default_rng(0)
A = rng.normal(size=(3, 4))
B = rng.normal(size=(4, 2))
V = rng.normal(size=(4,))
P = rng.uniform(0.5, 2.0, size=(3, 4))

CASES = {
    "add_broadcast": (lambda a, v: a + v, [A, V]),
    "mul_broadcast": (lambda a, v: a * v, [A, V]),
    "sub_rsub": (lambda a, p: (a - p) * (1.0 - p), [A, P]),
    "matmul": (lambda a, b: a @ b, [A, B]),
    "getitem": (lambda a: a[1:, ::2], [A]),
    "fancy_getitem": (lambda a: a[np.array([0, 0, 2]), np.array([1, 1, 3])], [A]),
    "sum_axis": (lambda a: a.sum(axis=0), [A]),
    "mean": (lambda a: a.mean(axis=1), [A]),
    "reshape_transpose": (lambda a: a.reshape(2, 6).transpose(1, 0), [A]),
    "relu": (lambda a: a.relu(), [A]),
    "tanh": (lambda a: a.tanh(), [A]),
    "sigmoid": (lambda a: a.sigmoid(), [A]),
    "exp_log": (lambda p: p.exp() + p.log(), [P]),
    "log_softmax": (lambda a: a.log_softmax(axis=1), [A]),
    "concat": (lambda a, p: concat([a, p], axis=1), [A, P]),
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_op_gradients(name):
    fn, arrays = CASES[name]
    arrays = [a.copy() for a in arrays]
    weight = None

    def scalar():
        out = fn(*[Tensor(a) for a in arrays]).data
        return float((out * weight).sum())

    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(*tensors)
    weight = np.random.default_rng(1).normal(size=out.shape)
    (out * Tensor(weight)).sum().backward()
    for t, num in zip(tensors, numeric_grad(scalar, arrays)):
        assert rel_error(t.grad, num, floor=1e-4).max() < 1e-5


@pytest.mark.parametrize("padding", [0, 2, 3])
def test_conv1d_matches_direct_sum_and_gradients(padding):
    r = np.random.default_rng(padding)
    x, w, b = r.normal(size=(2, 3, 9)), r.normal(size=(4, 3, 5)), r.normal(size=4)

    def direct(x, w, b):
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
        t_out = xp.shape[2] - w.shape[2] + 1
        return np.stack([np.einsum("bck,ock->bo", xp[:, :, t:t + w.shape[2]], w) for t in range(t_out)],
                        axis=-1) + b[None, :, None]

    tensors = [Tensor(a, requires_grad=True) for a in (x, w, b)]
    out = conv1d(*tensors, padding=padding)
    np.testing.assert_allclose(out.data, direct(x, w, b), atol=1e-12)
    weight = r.normal(size=out.shape)
    (out * Tensor(weight)).sum().backward()
    nums = numeric_grad(lambda: float((direct(x, w, b) * weight).sum()), [x, w, b])
    for t, num in zip(tensors, nums):
        assert rel_error(t.grad, num, floor=1e-4).max() < 1e-5


def test_shared_node_accumulates():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x + x
    y.sum().backward()
    np.testing.assert_allclose(x.grad, [5.0])


def test_deep_chain_does_not_recurse():
    x = Tensor(np.ones(3), requires_grad=True)
    y = x
    for _ in range(5000):
        y = y * 1.0
    y.sum().backward()
    np.testing.assert_allclose(x.grad, 1.0)


def test_constants_carry_no_graph():
    a = Tensor(np.ones(2))
    b = a * 3
    assert not b.requires_grad and b._parents == ()
