"""Independent reference implementations used by the tests.

Everything here is written with explicit Python loops or generic numerical
routines so that it shares no code path with the package.
"""

import itertools

import numpy as np


def tr_loops(g1, g2, g3):
    r1, n1, _ = g1.shape
    _, n2, r3 = g2.shape
    _, n3, _ = g3.shape
    out = np.zeros((n1, n2, n3))
    for i, j, k in itertools.product(range(n1), range(n2), range(n3)):
        s = 0.0
        for a in range(r1):
            for b in range(g1.shape[2]):
                for c in range(r3):
                    s += g1[a, i, b] * g2[b, j, c] * g3[c, k, a]
        out[i, j, k] = s
    return out


def btr_loops(left, right):
    # five nested sums: bonds of both rings and the interaction index
    g1, g2, g3 = left
    g4, g5, g6 = right
    n1, n2, R = g1.shape[1], g2.shape[1], g3.shape[1]
    n3, n4 = g5.shape[1], g6.shape[1]
    r1, r2 = g1.shape[0], g4.shape[0]
    out = np.zeros((n1, n2, n3, n4))
    for i, j, t, p in itertools.product(range(n1), range(n2), range(n3), range(n4)):
        s = 0.0
        for r in range(R):
            left_val = sum(g1[a, i, b] * g2[b, j, c] * g3[c, r, a]
                           for a in range(r1) for b in range(r1) for c in range(r1))
            right_val = sum(g4[a, r, b] * g5[b, t, c] * g6[c, p, a]
                            for a in range(r2) for b in range(r2) for c in range(r2))
            s += left_val * right_val
        out[i, j, t, p] = s
    return out


def contract_loops(x, y, x_modes, y_modes):
    x_free = [k for k in range(x.ndim) if k not in x_modes]
    y_free = [k for k in range(y.ndim) if k not in y_modes]
    out_shape = [x.shape[k] for k in x_free] + [y.shape[k] for k in y_free]
    summed = [x.shape[k] for k in x_modes]
    out = np.zeros(out_shape)
    for idx in itertools.product(*[range(n) for n in out_shape]):
        xi = [0] * x.ndim
        yi = [0] * y.ndim
        for pos, k in enumerate(x_free):
            xi[k] = idx[pos]
        for pos, k in enumerate(y_free):
            yi[k] = idx[len(x_free) + pos]
        s = 0.0
        for c in itertools.product(*[range(n) for n in summed]):
            for pos in range(len(c)):
                xi[x_modes[pos]] = c[pos]
                yi[y_modes[pos]] = c[pos]
            s += x[tuple(xi)] * y[tuple(yi)]
        out[idx] = s
    return out


def objective_loops(A, B, cores, B4D, T4D, D, p):
    n1, n2, n3, n4 = D.shape
    R = A.shape[2]
    trl = tr_loops(*cores[0])
    trr = tr_loops(*cores[1])
    fit = l1 = data = 0.0
    for i, j, t, q in itertools.product(range(n1), range(n2), range(n3), range(n4)):
        ab = sum(A[i, j, r] * B[r, t, q] for r in range(R))
        fit += (B4D[i, j, t, q] - ab) ** 2
        l1 += abs(T4D[i, j, t, q])
        data += (D[i, j, t, q] - B4D[i, j, t, q] - T4D[i, j, t, q]) ** 2
    left = float(np.sum((A - trl) ** 2))
    right = float(np.sum((B - trr) ** 2))
    return (p.alpha / 2 * fit + p.lambda1 * l1 + p.beta1 / 2 * left
            + p.beta2 / 2 * right + p.beta3 / 2 * data)


def gradient_descent(f_grad, x0, lipschitz, iters=20000, tol=1e-13):
    """Plain gradient descent with step 1/L on a smooth strongly convex function."""
    x = x0.copy()
    for _ in range(iters):
        g = f_grad(x)
        x_new = x - g / lipschitz
        if np.max(np.abs(x_new - x)) < tol:
            return x_new
        x = x_new
    return x


def prox_l1_grid(x, xi, half_width=None, n=200001):
    """Per-element minimizer of xi*|t| + (t - x)^2/2 by dense 1-D grid search.

    The grid is centred on the element and refined once around the coarse
    minimizer.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for idx, v in np.ndenumerate(x):
        w = half_width or (abs(v) + xi + 1.0)
        grid = np.linspace(v - w, v + w, n)
        grid = np.append(grid, 0.0)
        obj = xi * np.abs(grid) + 0.5 * (grid - v) ** 2
        best = grid[np.argmin(obj)]
        fine = np.linspace(best - 4 * w / n, best + 4 * w / n, 2001)
        fine = np.append(fine, 0.0)
        obj = xi * np.abs(fine) + 0.5 * (fine - v) ** 2
        out[idx] = fine[np.argmin(obj)]
    return out
