"""Independent reference implementations used to cross-check the package.

Everything here deliberately avoids the library's own code paths: dense LU
solves instead of Cholesky, scalar python loops instead of vectorized numpy,
and raw trigonometry instead of the array-model helpers.
"""

import math

import numpy as np


def kkt_lcmv(r, c, d):
    """Solve min w^H R w s.t. C^H w = d through the full KKT system with a
    dense LU factorization. Returns the weight vector."""
    n, k = c.shape
    kkt = np.zeros((n + k, n + k), dtype=np.complex128)
    kkt[:n, :n] = r
    kkt[:n, n:] = c
    kkt[n:, :n] = c.conj().T
    rhs = np.concatenate([np.zeros(n, dtype=np.complex128), np.asarray(d, dtype=np.complex128)])
    return np.linalg.solve(kkt, rhs)[:n]


def brute_steering(num_elements, spacing, carrier_hz, theta, range_m):
    """Near-field steering vector from first principles, scalar math only."""
    c0 = 299792458.0
    beta = 2.0 * math.pi * carrier_hz / c0
    ux = range_m * math.sin(theta)
    uy = range_m * math.cos(theta)
    out = []
    for n in range(1, num_elements + 1):
        xn = (n - (num_elements + 1) / 2.0) * spacing
        rn = math.sqrt((ux - xn) ** 2 + uy**2)
        out.append((range_m / rn) * complex(math.cos(beta * rn), math.sin(beta * rn)))
    return np.array(out)


def scalar_rmse(pred, truth):
    """Per-sample RMSE then batch mean, pure python."""
    b, n = pred.shape
    total = 0.0
    for i in range(b):
        sq = 0.0
        for j in range(n):
            diff = pred[i][j] - truth[i][j]
            sq += diff * diff
        total += math.sqrt(sq / n)
    return total / b


def scalar_cmae(pred, truth):
    """Mean circular absolute error, pure python."""
    b, n = pred.shape
    total = 0.0
    for i in range(b):
        for j in range(n):
            d = math.fmod(abs(pred[i][j] - truth[i][j]), 2.0 * math.pi)
            total += min(d, 2.0 * math.pi - d)
    return total / (b * n)


def scalar_forward(weights, biases, x):
    """MLP forward pass with python loops (ReLU hidden, linear output)."""
    rows = []
    for row in np.asarray(x):
        h = list(row)
        for layer, (w, b) in enumerate(zip(weights, biases)):
            nxt = []
            for j in range(w.shape[1]):
                z = b[j]
                for i in range(w.shape[0]):
                    z += h[i] * w[i, j]
                if layer < len(weights) - 1:
                    z = max(z, 0.0)
                nxt.append(z)
            h = nxt
        rows.append(h)
    return np.array(rows)


def random_hpd(rng, n, diag_boost=None):
    """Random Hermitian positive-definite matrix."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    boost = n if diag_boost is None else diag_boost
    return a @ a.conj().T + boost * np.eye(n)
