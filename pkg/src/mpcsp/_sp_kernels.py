"""Compiled survey-propagation updates.

Surveys are distributions over warning messages, i.e. over nonempty
subsets of a variable's domain encoded as bitmasks (bit ``v`` set when
value ``v`` is allowed).  Column 0, the empty set, is always zero.
"""
import numpy as np
from numba import njit

TINY = 1e-300

CONVERGED = 0
MAX_ITERS = 1
CONTRADICTION = 2


@njit(cache=True)
def build_lookup(dom, edge_var, edge_fac, fac_ptr, tab_ptr, tables, lut_ptr, lut):
    """Max-product factor output for every combination of incoming warnings.

    For target edge ``e`` the combinations enumerate nonempty subsets of
    the other scope variables' domains, mixed radix, last position fastest.
    """
    n_e = edge_var.shape[0]
    xs = np.zeros(64, dtype=np.int64)
    ys = np.zeros(64, dtype=np.int64)
    for e in range(n_e):
        I = edge_fac[e]
        start = fac_ptr[I]
        k = fac_ptr[I + 1] - start
        p = e - start
        n_combo = lut_ptr[e + 1] - lut_ptr[e]
        for q in range(k):
            ys[q] = 1
        for c in range(n_combo):
            out = 0
            for q in range(k):
                xs[q] = 0
            t0 = tab_ptr[I]
            for t in range(tab_ptr[I + 1] - t0):
                if tables[t0 + t] != 0.0:
                    ok = True
                    for q in range(k):
                        if q != p and ((ys[q] >> xs[q]) & 1) == 0:
                            ok = False
                            break
                    if ok:
                        out |= 1 << xs[p]
                q = k - 1
                while q >= 0:
                    xs[q] += 1
                    if xs[q] < dom[edge_var[start + q]]:
                        break
                    xs[q] = 0
                    q -= 1
            lut[lut_ptr[e] + c] = out
            q = k - 1
            while q >= 0:
                if q != p:
                    ys[q] += 1
                    if ys[q] < (1 << dom[edge_var[start + q]]):
                        break
                    ys[q] = 1
                q -= 1


@njit(cache=True)
def factor_survey(e, dom, edge_var, edge_fac, fac_ptr, lut_ptr, lut, size_pow, v2f, out, ys):
    """Normalized factor-to-variable survey along ``e``; returns False if all zero."""
    I = edge_fac[e]
    start = fac_ptr[I]
    k = fac_ptr[I + 1] - start
    p = e - start
    out[:] = 0.0
    for q in range(k):
        ys[q] = 1
    base = lut_ptr[e]
    for c in range(lut_ptr[e + 1] - base):
        w = 1.0
        for q in range(k):
            if q != p:
                w *= v2f[start + q, ys[q]]
        if w != 0.0:
            y = lut[base + c]
            if y != 0:
                out[y] += w
        q = k - 1
        while q >= 0:
            if q != p:
                ys[q] += 1
                if ys[q] < (1 << dom[edge_var[start + q]]):
                    break
                ys[q] = 1
            q -= 1
    return _finish(out, 1 << dom[edge_var[e]], size_pow)


@njit(cache=True)
def _finish(v, nsub, size_pow):
    v[0] = 0.0
    z = 0.0
    for y in range(1, nsub):
        v[y] *= size_pow[y]
        z += v[y]
    if z < TINY:
        v[:] = 0.0
        return False
    for y in range(1, nsub):
        v[y] /= z
    return True


@njit(cache=True)
def and_combine(a, b, nsub, out):
    """``out[z] = sum over x & y == z of a[x] * b[y]``."""
    out[:] = 0.0
    for x in range(nsub):
        ax = a[x]
        if ax == 0.0:
            continue
        for y in range(nsub):
            by = b[y]
            if by != 0.0:
                out[x & y] += ax * by


@njit(cache=True)
def project_values(sub, d, out):
    """Values marginal implied by a subset marginal (superset sums)."""
    z = 0.0
    for x in range(d):
        s = 0.0
        bit = 1 << x
        for y in range(1, 1 << d):
            if y & bit:
                s += sub[y]
        out[x] = s
        z += s
    if z >= TINY:
        for x in range(d):
            out[x] /= z


@njit(cache=True)
def sweeps(dom, maskbits, var_ptr, var_edges, edge_var, edge_fac, fac_ptr, lut_ptr, lut,
           size_pow, max_degree, max_arity, v2f, f2v, marg_sub, marg_val, orders, gammas,
           uniforms, particle, eps, check):
    """Sequential SP sweeps in place; mirrors the BP kernel's contract."""
    S = v2f.shape[1]
    dmax = marg_val.shape[1]
    sampling = uniforms.shape[0] > 0
    pre = np.zeros((max_degree + 1, S))
    suf = np.zeros((max_degree + 1, S))
    tmp = np.zeros(S)
    vals = np.zeros(dmax)
    ys = np.zeros(max(max_arity, 1), dtype=np.int64)
    for s in range(gammas.shape[0]):
        gamma = gammas[s]
        order = orders[s % orders.shape[0]]
        change = 0.0
        for i in order:
            d = dom[i]
            nsub = 1 << d
            full = nsub - 1
            a = var_ptr[i]
            deg = var_ptr[i + 1] - a
            for r in range(deg):
                e = var_edges[a + r]
                factor_survey(e, dom, edge_var, edge_fac, fac_ptr, lut_ptr, lut, size_pow, v2f, f2v[e], ys)
            pre[0, :] = 0.0
            pre[0, maskbits[i]] = 1.0
            suf[deg, :] = 0.0
            suf[deg, full] = 1.0
            for r in range(deg):
                and_combine(pre[r], f2v[var_edges[a + r]], nsub, pre[r + 1])
            for r in range(deg - 1, -1, -1):
                and_combine(f2v[var_edges[a + r]], suf[r + 1], nsub, suf[r])
            for y in range(nsub):
                tmp[y] = pre[deg, y]
            if not _finish(tmp, nsub, size_pow):
                return CONTRADICTION, s, i
            for y in range(nsub):
                diff = abs(tmp[y] - marg_sub[i, y])
                if diff > change:
                    change = diff
                marg_sub[i, y] = tmp[y]
            project_values(tmp, d, vals)
            for x in range(d):
                marg_val[i, x] = vals[x]
            xhat = -1
            if sampling:
                acc = 0.0
                u = uniforms[s, i]
                for x in range(d):
                    if vals[x] > 0.0:
                        xhat = x
                        acc += vals[x]
                        if u < acc:
                            break
                particle[i] = xhat
            for r in range(deg):
                e = var_edges[a + r]
                and_combine(pre[r], suf[r + 1], nsub, v2f[e])
                _finish(v2f[e], nsub, size_pow)
                if sampling:
                    single = 1 << xhat
                    for y in range(1, nsub):
                        v2f[e, y] = (1.0 - gamma) * v2f[e, y] + (gamma if y == single else 0.0)
        if check and change < eps:
            return CONVERGED, s + 1, -1
    return MAX_ITERS, gammas.shape[0], -1
