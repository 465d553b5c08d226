"""Shared oracles for the test modules."""
import numpy as np

from tsxbench.nn.autodiff import Tensor
from tsxbench.nn.models import build_model


def rel_error(analytic, numeric, floor=1e-6):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def gradient_check(architecture, seed, eps=1e-5, entries=6):
    """Max relative error of input and parameter gradients against central differences.

    The scalar checked is ``sum(r * logits)`` for a random weighting ``r``;
    ``entries`` random coordinates of the input and of every parameter tensor
    are perturbed.
    """
    rng = np.random.default_rng(seed)
    n_features, t_steps, batch = int(rng.integers(1, 4)), int(rng.integers(6, 13)), int(rng.integers(1, 3))
    kwargs = {"channels": int(rng.integers(2, 6)), "n_blocks": int(rng.integers(1, 4))} \
        if architecture == "TemporalConv" else {"hidden": int(rng.integers(2, 8))}
    model = build_model(architecture, n_features, t_steps, seed=seed, **kwargs)
    for p in model.parameters():  # a nonzero head so every path carries gradient
        p.data = p.data + rng.normal(0, 0.3, size=p.shape)
    x = rng.normal(size=(batch, n_features, t_steps))
    weight = rng.normal(size=(batch, model.n_classes))

    def scalar():
        return float((model.logits(Tensor(x)).data * weight).sum())

    xt = Tensor(x.copy(), requires_grad=True)
    (model.logits(xt) * Tensor(weight)).sum().backward()
    grads = {"input": xt.grad}
    grads.update({k: p.grad.copy() for k, p in model.params.items()})
    for p in model.parameters():
        p.grad = None

    worst = 0.0
    targets = [("input", x)] + [(k, p.data) for k, p in model.params.items()]
    for name, arr in targets:
        for _ in range(entries):
            idx = tuple(int(rng.integers(0, s)) for s in arr.shape)
            old = arr[idx]
            arr[idx] = old + eps
            up = scalar()
            arr[idx] = old - eps
            down = scalar()
            arr[idx] = old
            numeric = (up - down) / (2 * eps)
            worst = max(worst, float(rel_error(grads[name][idx], numeric)))
    return worst


def brute_complexity(a):
    mag = [abs(v) for v in np.ravel(a)]
    total = sum(mag)
    return -sum((m / total) * np.log(m / total) for m in mag if m > 0)


def brute_racc(a, mask):
    mag = [abs(v) for v in np.ravel(a)]
    gt = [bool(v) for v in np.ravel(mask)]
    k = sum(gt)
    order = sorted(range(len(mag)), key=lambda i: (-mag[i], i))
    return sum(gt[i] for i in order[:k]) / k


def brute_macc(a, mask):
    mag = [abs(v) for v in np.ravel(a)]
    gt = [bool(v) for v in np.ravel(mask)]
    return sum(m for m, g in zip(mag, gt) if g) / sum(mag)


def mean_shift_scorer(ds):
    """Linear scorer along the class-mean difference, thresholded halfway."""
    from tsxbench.nn.models import LinearScorer

    m1 = ds.x_train[ds.y_train == 1].mean(axis=0)
    m0 = ds.x_train[ds.y_train == 0].mean(axis=0)
    w = m1 - m0
    return LinearScorer(w, -float(np.sum(w * (m1 + m0) / 2)))


# wall-clock seconds of expensive session fixtures, keyed by fixture name
TIMINGS: dict[str, float] = {}
# "CRITERION n PASS|FAIL: detail" lines collected by the acceptance suite
VERDICTS: list[str] = []


def random_pairs(n, seed=0):
    """Random (attribution, nonempty mask) pairs of varied shapes, some with tied scores."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        shape = (int(rng.integers(1, 6)), int(rng.integers(2, 12)))
        a = rng.normal(size=shape) * (rng.random(shape) < 0.8)
        if rng.random() < 0.3:
            a = np.round(a, 1)  # force ties
        if not np.any(a):
            a.flat[0] = 1.0
        mask = rng.random(shape) < rng.uniform(0.05, 0.6)
        if not mask.any():
            mask.flat[int(rng.integers(mask.size))] = True
        yield a, mask
