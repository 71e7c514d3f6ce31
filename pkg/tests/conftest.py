import numpy as np
import pytest

from proctrack.autodiff import Tensor


def finite_difference_grad(f, tensors, h=1e-5):
    """Central finite differences of scalar f() w.r.t. each tensor's data."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f()
            flat[i] = orig - h
            lo = f()
            flat[i] = orig
            gf[i] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(build_loss, params, h=1e-5, tol=1e-4):
    """build_loss() returns a fresh scalar Tensor over `params` each call.

    Compares backward() gradients against central finite differences.
    """
    loss = build_loss()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for p in params]
    for p in params:
        p.grad = None
    numeric = finite_difference_grad(lambda: float(build_loss().data), params, h=h)
    worst = max(max_rel_error(a, n) for a, n in zip(analytic, numeric))
    assert worst < tol, f"gradient mismatch: max rel error {worst:.3e}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def leaf(rng, *shape):
    return Tensor(rng.normal(0, 1, shape), requires_grad=True)
