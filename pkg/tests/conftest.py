import numpy as np


def central_difference(f, x, step=1e-6):
    """Float64 central finite-difference gradient of scalar f at x."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        hi = f(x)
        flat[idx] = orig - step
        lo = f(x)
        flat[idx] = orig
        g[idx] = (hi - lo) / (2.0 * step)
    return grad


def assert_grad_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    np.testing.assert_allclose(
        np.asarray(analytic, dtype=np.float64),
        np.asarray(numeric, dtype=np.float64),
        rtol=rtol,
        atol=atol,
    )


def random_orthogonal(d, seed):
    """Haar-ish random orthogonal matrix via QR."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))
