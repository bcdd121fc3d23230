"""NumPy implementation of the seeking inner loop (fallback for ``_ckernel``).

``advance`` performs up to ``n_steps`` synchronous updates in place::

    y_i <- y_i - omega * sum_{j in N_i} (y_i - y_j) - alpha * f_i * (f_i . y_i - target_i)

and writes the per-step residuals (sum of row norms, Frobenius norm) into
``res_sum[:k]`` / ``res_fro[:k]``. It stops early once the row-norm residual
drops below ``tau`` after at least ``first_stop`` steps, or when an entry
leaves ``[-limit, limit]``.

Returns ``(steps_done, status, worst)`` with status 0 (ran all steps),
1 (converged) or 2 (diverged); ``worst`` is the offending magnitude.
"""

import numpy as np

RUNNING = 0
CONVERGED = 1
DIVERGED = 2


def advance(y, work, nbr_ptr, nbr_idx, f, target, omega, alpha, tau,
            n_steps, first_stop, res_sum, res_fro, limit):
    n = y.shape[0]
    degree = np.diff(nbr_ptr).astype(float)
    adj = np.zeros((n, n))
    for i in range(n):
        adj[i, nbr_idx[nbr_ptr[i]:nbr_ptr[i + 1]]] = 1.0
    k = 0
    while k < n_steps:
        g = np.einsum("ic,ic->i", f, y) - target
        np.subtract(y, omega * (degree[:, None] * y - adj @ y) + alpha * f * g[:, None], out=work)
        step = work - y
        row = np.sqrt(np.einsum("ic,ic->i", step, step))
        y[...] = work
        res_sum[k] = row.sum()
        res_fro[k] = np.sqrt(np.dot(row, row))
        k += 1
        mag = np.abs(work)
        if not np.all(mag <= limit):
            worst = float(np.nan) if np.isnan(mag).any() else float(mag.max())
            return k, DIVERGED, worst
        if res_sum[k - 1] < tau and k >= first_stop:
            return k, CONVERGED, 0.0
    return k, RUNNING, 0.0
