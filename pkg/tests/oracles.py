"""Independent reference computations used by the tests.

Nothing here imports the package: each oracle recomputes a quantity from its
textbook definition with plain numpy / scipy so that implementation and
oracle cannot share a bug.
"""

import numpy as np
from scipy import optimize


def jacobi_eigvals(A, tol=1e-12, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=np.float64)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2) * 2)
        if off <= tol * max(1.0, np.linalg.norm(A)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1))
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q], R[q, p] = s, -s
                A = R.T @ A @ R
    return np.sort(np.diag(A))


def cayley_explicit(G, H):
    """Literal formula with an explicit inverse."""
    p = G.shape[0]
    Z = G.T - G + H.T @ H
    inv = np.linalg.inv(np.eye(p) + Z)
    return np.vstack([inv @ (np.eye(p) - Z), -2 * H @ inv])


def central_grad(f, x, h=1e-6):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def ftn_forward_unscaled(U, W, Y, lam, b, by, mu, x, act=lambda v: np.maximum(v, 0)):
    """``z = act(W z + U x + b)`` solved by back-substitution over rows, then
    ``y = mu x + Y z + by``; valid because ``W`` is strictly lower triangular.

    Row-by-row evaluation of the compact representation, independent of the
    block structure used by the package.
    """
    m = U.shape[0]
    z = np.zeros(m)
    for i in range(m):
        z[i] = act(W[i, :i] @ z[:i] + U[i] @ x + b[i])
    return mu * x + Y @ z + by


def root_inverse(F, y, x0):
    """Solve ``F(x) = y`` with a generic nonlinear root finder."""
    sol = optimize.root(lambda x: F(x) - y, x0, method="hybr", tol=1e-13)
    return sol.x


def adam_reference(grad, w0, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """Adam written out from its update equations for a scalar parameter."""
    w, m, v = float(w0), 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return w


def rosenbrock_ref(x, y, a=1.0, b=1.0):
    return (x - a) ** 2 / 200 + 0.5 * (y - b * x * x) ** 2
