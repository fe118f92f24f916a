"""Compiled heat-bath sweeps.  All randomness arrives as pre-drawn uniforms."""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _heat_bath(tilt, support, logw, u):
    k = support.shape[0]
    top = -np.inf
    for a in range(k):
        x = tilt * support[a] + logw[a]
        if x > top:
            top = x
    z = 0.0
    for a in range(k):
        z += np.exp(tilt * support[a] + logw[a] - top)
    target = u * z
    acc = 0.0
    for a in range(k - 1):
        acc += np.exp(tilt * support[a] + logw[a] - top)
        if target < acc:
            return support[a]
    return support[k - 1]


@njit(cache=True)
def sweeps_csr(spins, fields, indptr, indices, data, beta, b_field, support, logw, u):
    """Systematic-scan sweeps over a CSR coupling; ``u`` has shape (sweeps, n)."""
    n = spins.shape[0]
    for s in range(u.shape[0]):
        for i in range(n):
            new = _heat_bath(beta * fields[i] + b_field, support, logw, u[s, i])
            delta = new - spins[i]
            if delta != 0.0:
                spins[i] = new
                for k in range(indptr[i], indptr[i + 1]):
                    fields[indices[k]] += data[k] * delta


@njit(cache=True)
def sweeps_block(spins, labels, w, block_sums, beta, b_field, support, logw, u):
    """Sweeps for block-constant couplings: ``m_i = sum_b w[l_i, b] S_b - w[l_i, l_i] s_i``."""
    n = spins.shape[0]
    nb = w.shape[0]
    for s in range(u.shape[0]):
        for i in range(n):
            li = labels[i]
            m = -w[li, li] * spins[i]
            for b in range(nb):
                m += w[li, b] * block_sums[b]
            new = _heat_bath(beta * m + b_field, support, logw, u[s, i])
            delta = new - spins[i]
            if delta != 0.0:
                spins[i] = new
                block_sums[li] += delta


@njit(cache=True, inline="always")
def _logistic(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def ergm_sweeps(adj, deg, cn, n, c_edge, c_star, c_tri, u):
    """Edge heat-bath sweeps in lexicographic pair order.

    ``eta_ij = c_edge + c_star (d_i' + d_j') + c_tri cn_ij`` with degrees
    that exclude the pair itself; ``cn`` is the common-neighbour matrix and
    is kept exact under every toggle.
    """
    for s in range(u.shape[0]):
        p = 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                y = adj[i, j]
                di = deg[i] - y
                dj = deg[j] - y
                eta = c_edge + c_star * (di + dj) + c_tri * cn[i, j]
                new = 1 if u[s, p] < _logistic(eta) else 0
                p += 1
                if new != y:
                    delta = new - y
                    adj[i, j] = new
                    adj[j, i] = new
                    deg[i] += delta
                    deg[j] += delta
                    for k in range(n):
                        if adj[j, k] and k != i:
                            cn[i, k] += delta
                            cn[k, i] += delta
                        if adj[i, k] and k != j:
                            cn[j, k] += delta
                            cn[k, j] += delta


@njit(cache=True)
def ergm_v_edge(adj, deg, cn, n, c_edge, c_star, c_tri):
    """Sum over ordered pair-pairs sharing one vertex of (Y - L)(L_loo - L)."""
    npairs = n * (n - 1) // 2
    resid = np.empty((n, n))
    lam = np.empty((n, n))
    for i in range(n):
        resid[i, i] = 0.0
        lam[i, i] = 0.0
        for j in range(i + 1, n):
            y = adj[i, j]
            eta = c_edge + c_star * (deg[i] - y + deg[j] - y) + c_tri * cn[i, j]
            lj = _logistic(eta)
            lam[i, j] = lj
            lam[j, i] = lj
            resid[i, j] = y - lj
            resid[j, i] = y - lj
    total = 0.0
    # removed pair {a, b} and target {a, k}: share vertex a
    for a in range(n):
        for b in range(n):
            if b == a or adj[a, b] == 0:
                continue
            r = resid[a, b]
            for k in range(n):
                if k == a or k == b:
                    continue
                y_ak = adj[a, k]
                eta = (
                    c_edge
                    + c_star * (deg[a] - y_ak + deg[k] - y_ak)
                    + c_tri * cn[a, k]
                )
                eta_loo = eta - c_star - c_tri * adj[b, k]
                total += r * (_logistic(eta_loo) - lam[a, k])
    return total / npairs
