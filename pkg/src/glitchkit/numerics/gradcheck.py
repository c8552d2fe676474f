"""Finite-difference checks of every layer op and of the full detector.

Op-level checks run in float64 so that central differences with h = 1e-3
measure the analytic gradient rather than float32 rounding. Each op is
reduced to a scalar through a fixed random projection ``sum(out * R)``.
"""

from dataclasses import dataclass

import numpy as np

from ..seeding import derive_rng
from . import nn
from .tensor import Tape, Tensor, backward

OP_TOLERANCE = 1e-3
NET_TOLERANCE = 1e-2
STEP = 1e-3
# relative error floor: gradients smaller than this are compared absolutely
REL_FLOOR = 1e-6


@dataclass
class CheckResult:
    name: str
    instance: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.max_rel_error < self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} #{self.instance}  max_rel_err={self.max_rel_error:.2e}  tol={self.tolerance:.0e}"


def relative_error(analytic, numeric):
    a, n = np.asarray(analytic, np.float64), np.asarray(numeric, np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_gradient(f, arr, h=STEP, indices=None):
    """Central differences of scalar ``f()`` w.r.t. entries of ``arr`` (modified in place, then restored)."""
    flat = arr.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = []
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out.append((fp - fm) / (2 * h))
    return np.asarray(out)


def check_function(name, fn, arrays, rng, instance, tolerance=OP_TOLERANCE, max_entries=None):
    """Compare tape gradients of ``sum(fn(*tensors) * R)`` against central differences for every input."""
    tensors = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    out_shape = fn(*[Tensor(a, dtype=np.float64) for a in arrays]).shape
    proj = rng.standard_normal(out_shape)

    def scalar():
        return float((fn(*[Tensor(t.data, dtype=np.float64) for t in tensors]).data * proj).sum())

    with Tape() as tape:
        out = fn(*tensors)
        loss = (out * Tensor(proj, dtype=np.float64)).sum()
    grads = backward(tape, loss)
    worst = 0.0
    for t in tensors:
        analytic = grads.get(t, np.zeros_like(t.data)).reshape(-1)
        indices = None
        if max_entries is not None and t.data.size > max_entries:
            indices = np.sort(rng.choice(t.data.size, max_entries, replace=False))
            analytic = analytic[indices]
        numeric = numeric_gradient(scalar, t.data, indices=indices)
        worst = max(worst, relative_error(analytic, numeric))
    return CheckResult(name, instance, worst, tolerance)


def _same_branches(forward, arr, i, h=STEP):
    """True if perturbing ``arr.flat[i]`` by +-h keeps every ReLU/max-pool branch unchanged."""
    flat = arr.reshape(-1)
    old = flat[i]
    traces = []
    for delta in (0.0, h, -h):
        flat[i] = old + delta
        with nn.branch_trace() as trace:
            forward()
        traces.append(trace)
    flat[i] = old
    base = traces[0]
    return all(len(t) == len(base) and all(np.array_equal(a, b) for a, b in zip(t, base)) for t in traces[1:])


def _smooth_sample(forward, arr, count, rng):
    """Up to ``count`` flat indices of ``arr`` where the finite-difference step stays on one smooth piece."""
    picked = []
    for i in rng.permutation(arr.size):
        if _same_branches(forward, arr, int(i)):
            picked.append(int(i))
            if len(picked) == count:
                break
    return np.sort(np.asarray(picked, dtype=np.int64))


def _away_from_zero(rng, shape, margin=1e-2):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * (margin + np.abs(x)), x)


def _distinct(rng, shape):
    # values separated by >> h so max-pool winners never swap under perturbation
    n = int(np.prod(shape))
    return (rng.permutation(n).astype(np.float64) * 0.05 + rng.uniform(0, 0.01)).reshape(shape)


def op_checks(seed=0, instances=5):
    results = []
    for k in range(instances):
        rng = derive_rng(seed, "gradcheck", k)
        n, c, h, w = 2, int(rng.integers(1, 4)), int(rng.integers(3, 7)), int(rng.integers(3, 7))
        o = int(rng.integers(1, 4))
        results.append(check_function(
            "conv2d(s=1,p=1)", lambda x, wt, b: nn.conv2d(x, wt, b, 1, 1),
            [rng.standard_normal((n, c, h, w)), rng.standard_normal((o, c, 3, 3)), rng.standard_normal(o)], rng, k,
        ))
        results.append(check_function(
            "conv2d(s=2,p=0)", lambda x, wt, b: nn.conv2d(x, wt, b, 2, 0),
            [rng.standard_normal((n, c, 7, 5)), rng.standard_normal((o, c, 3, 3)), rng.standard_normal(o)], rng, k,
        ))
        bn_stats = [rng.standard_normal(c), rng.uniform(0.5, 2.0, c)]

        def bn_train(x, g, b):
            return nn.batchnorm2d(x, g, b, Tensor(bn_stats[0].copy()), Tensor(bn_stats[1].copy()), training=True)

        def bn_eval(x, g, b):
            return nn.batchnorm2d(x, g, b, Tensor(bn_stats[0]), Tensor(bn_stats[1]), training=False)

        bn_in = [rng.standard_normal((n, c, h, w)) * 2 + 1, rng.standard_normal(c), rng.standard_normal(c)]
        results.append(check_function("batchnorm2d(train)", bn_train, bn_in, rng, k))
        results.append(check_function("batchnorm2d(eval)", bn_eval, bn_in, rng, k))
        results.append(check_function(
            "maxpool2d(2)", lambda x: nn.maxpool2d(x, 2, 2), [_distinct(rng, (n, c, 4, 6))], rng, k,
        ))
        results.append(check_function(
            "linear", nn.linear,
            [rng.standard_normal((3, 4)), rng.standard_normal((5, 4)), rng.standard_normal(5)], rng, k,
        ))
        results.append(check_function("relu", nn.relu, [_away_from_zero(rng, (3, 7))], rng, k))
        results.append(check_function("softmax", nn.softmax, [rng.standard_normal((3, 4)) * 3], rng, k))
        labels = rng.integers(0, 3, size=4)
        results.append(check_function(
            "cross_entropy_loss", lambda z: nn.cross_entropy_loss(z, labels), [rng.standard_normal((4, 3)) * 2], rng, k,
        ))
        results.append(check_function("flatten", nn.flatten, [rng.standard_normal((2, 3, 2, 2))], rng, k))
    return results


def _float64_copy(model):
    from ..glitchnet.model import GlitchNet

    twin = GlitchNet(model.config)
    for name, t in model.tensors.items():
        twin.tensors[name] = Tensor(t.data.astype(np.float64), requires_grad=t.requires_grad, dtype=np.float64, name=name)
    return twin


def network_checks(seed=0, instances=5, pixels=10, params_per_instance=12):
    """Full detector (64x32 input, channel_scale 1/4).

    Per instance: the class-1 logit's gradient w.r.t. ``pixels`` sampled
    input pixels (inference-mode BN), and the training-mode loss gradient
    w.r.t. sampled parameter entries. Samples whose +-h step would flip a
    ReLU or max-pool branch are skipped, since the function has a kink there.
    """
    from ..glitchnet.config import desk_config
    from ..glitchnet.model import GlitchNet

    cfg = desk_config()
    results = []
    for k in range(instances):
        rng = derive_rng(seed, "gradcheck-net", k)
        model = _float64_copy(GlitchNet(cfg, seed=seed + k))
        # a few training passes give non-trivial running statistics
        for _ in range(3):
            model.forward(Tensor(rng.uniform(0, 1, (4, 3, 32, 64)), dtype=np.float64), training=True)
        running = {k_: t.data.copy() for k_, t in model.tensors.items() if not t.requires_grad}

        image = rng.uniform(0, 1, (1, 3, 32, 64))
        x = Tensor(image, requires_grad=True, dtype=np.float64)
        with Tape() as tape:
            logit = model.forward(x, training=False)[0, 1]
        grads = backward(tape, logit)

        def class1_logit():
            return float(model.forward(Tensor(image, dtype=np.float64), training=False).data[0, 1])

        idx = _smooth_sample(class1_logit, image, pixels, rng)

        numeric = numeric_gradient(class1_logit, image, indices=idx)
        results.append(CheckResult("glitchnet d logit1 / d input", k,
                                   relative_error(grads[x].reshape(-1)[idx], numeric), NET_TOLERANCE))

        batch = rng.uniform(0, 1, (2, 3, 32, 64))
        labels = np.array([0, 1])

        def restore_running():
            for k_, v in running.items():
                model.tensors[k_].data = v.copy()

        def train_loss():
            restore_running()
            return float(nn.cross_entropy_loss(model.forward(Tensor(batch, dtype=np.float64), training=True), labels).data)

        restore_running()
        with Tape() as tape:
            loss = nn.cross_entropy_loss(model.forward(Tensor(batch, dtype=np.float64), training=True), labels)
        pgrads = backward(tape, loss)
        params = model.parameters()
        worst = 0.0
        for j in rng.choice(len(params), params_per_instance, replace=False):
            p = params[int(j)]
            picked = _smooth_sample(train_loss, p.data, 1, rng)
            if not len(picked):
                continue
            i = int(picked[0])
            numeric = numeric_gradient(train_loss, p.data, indices=[i])
            worst = max(worst, relative_error(pgrads[p].reshape(-1)[[i]], numeric))
        restore_running()
        results.append(CheckResult("glitchnet d loss / d params", k, worst, NET_TOLERANCE))
    return results


def run_gradcheck(seed=0, instances=5):
    return op_checks(seed, instances) + network_checks(seed, instances)
