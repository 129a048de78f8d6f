"""Compiled sequential sweeps shared by BP, Gibbs sampling and Perturbed BP.

One kernel covers all three: each variable recomputes its incoming
factor messages, its marginal, and its outgoing messages, then (when
uniforms are supplied) samples a value and mixes the outgoing messages
toward the point mass on that value with weight ``gammas[s]``.
"""
import numpy as np
from numba import njit

TINY = 1e-300

CONVERGED = 0
MAX_ITERS = 1
CONTRADICTION = 2


@njit(cache=True)
def factor_message(e, fac_ptr, edge_fac, edge_var, dom, tab_ptr, tables, v2f, out, xs):
    """Unnormalized factor-to-variable message along edge ``e`` into ``out``.

    ``xs`` is scratch of length >= arity, used as a row-major odometer.
    """
    I = edge_fac[e]
    start = fac_ptr[I]
    k = fac_ptr[I + 1] - start
    p = e - start
    out[:] = 0.0
    for q in range(k):
        xs[q] = 0
    t0 = tab_ptr[I]
    size = tab_ptr[I + 1] - t0
    for t in range(size):
        c = tables[t0 + t]
        if c != 0.0:
            w = c
            for q in range(k):
                if q != p:
                    w *= v2f[start + q, xs[q]]
            out[xs[p]] += w
        q = k - 1
        while q >= 0:
            xs[q] += 1
            if xs[q] < dom[edge_var[start + q]]:
                break
            xs[q] = 0
            q -= 1


@njit(cache=True)
def _normalize(v, d):
    z = 0.0
    for x in range(d):
        z += v[x]
    if z < TINY:
        for x in range(d):
            v[x] = 0.0
        return False
    for x in range(d):
        v[x] /= z
    return True


@njit(cache=True)
def sample_index(p, d, u):
    """Inverse-CDF draw from normalized ``p[:d]`` with uniform ``u``."""
    acc = 0.0
    last = -1
    for x in range(d):
        if p[x] > 0.0:
            last = x
            acc += p[x]
            if u < acc:
                return x
    return last


@njit(cache=True)
def sweeps(dom, mask, var_ptr, var_edges, edge_var, edge_fac, fac_ptr,
           tab_ptr, tables, max_degree, max_arity, v2f, f2v, marg, orders, gammas, uniforms,
           particle, counts, count_from, eps, check):
    """Run ``len(gammas)`` sweeps in place.

    Returns ``(status, sweeps_completed, variable)``; ``variable`` is the
    contradiction site or -1.
    """
    dmax = mask.shape[1]
    sampling = uniforms.shape[0] > 0
    pre = np.empty((max_degree + 1, dmax))
    suf = np.empty((max_degree + 1, dmax))
    new = np.empty(dmax)
    xs = np.empty(max(max_arity, 1), dtype=np.int64)
    n_sweeps = gammas.shape[0]
    for s in range(n_sweeps):
        gamma = gammas[s]
        order = orders[s % orders.shape[0]]
        change = 0.0
        for i in order:
            d = dom[i]
            a = var_ptr[i]
            deg = var_ptr[i + 1] - a
            for r in range(deg):
                e = var_edges[a + r]
                factor_message(e, fac_ptr, edge_fac, edge_var, dom, tab_ptr, tables, v2f, f2v[e], xs)
                _normalize(f2v[e], d)
            # prefix/suffix products give every leave-one-out product exactly
            for x in range(d):
                pre[0, x] = mask[i, x]
                suf[deg, x] = 1.0
            for r in range(deg):
                e = var_edges[a + r]
                for x in range(d):
                    pre[r + 1, x] = pre[r, x] * f2v[e, x]
            for r in range(deg - 1, -1, -1):
                e = var_edges[a + r]
                for x in range(d):
                    suf[r, x] = suf[r + 1, x] * f2v[e, x]
            for x in range(d):
                new[x] = pre[deg, x]
            if not _normalize(new, d):
                return CONTRADICTION, s, i
            for x in range(d):
                diff = abs(new[x] - marg[i, x])
                if diff > change:
                    change = diff
                marg[i, x] = new[x]
            xhat = -1
            if sampling:
                xhat = sample_index(new, d, uniforms[s, i])
                particle[i] = xhat
                if s >= count_from:
                    counts[i, xhat] += 1
            for r in range(deg):
                e = var_edges[a + r]
                for x in range(d):
                    v2f[e, x] = pre[r, x] * suf[r + 1, x]
                _normalize(v2f[e], d)
                if sampling:
                    for x in range(d):
                        v2f[e, x] = (1.0 - gamma) * v2f[e, x] + (gamma if x == xhat else 0.0)
        if check and change < eps:
            return CONVERGED, s + 1, -1
    return MAX_ITERS, n_sweeps, -1


def run_sweeps(graph, v2f, f2v, marg, orders, gammas, uniforms=None, particle=None,
               counts=None, count_from=0, eps=0.0, check=False):
    """Python-side wrapper that unpacks the flat graph arrays."""
    fl = graph.flat
    if uniforms is None:
        uniforms = np.empty((0, graph.n_vars))
    if particle is None:
        particle = np.zeros(graph.n_vars, dtype=np.int64)
    if counts is None:
        counts = np.zeros((1, 1), dtype=np.int64)
        count_from = np.iinfo(np.int64).max
    status, done, var = sweeps(
        fl.dom, fl.mask, fl.var_ptr, fl.var_edges, fl.edge_var, fl.edge_fac, fl.fac_ptr,
        fl.tab_ptr, fl.tables, fl.max_degree, fl.max_arity, v2f, f2v, marg,
        np.ascontiguousarray(orders, dtype=np.int64), np.ascontiguousarray(gammas, dtype=np.float64),
        np.ascontiguousarray(uniforms, dtype=np.float64), particle, counts, int(count_from),
        float(eps), bool(check),
    )
    return int(status), int(done), int(var)
