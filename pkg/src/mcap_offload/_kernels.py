"""Per-CAP min-max resource allocation kernels.

For the users sharing one CAP, with constant delay parts ``k`` and per-resource
work ``a_ir`` (delay contribution ``a_ir / x_ir``), the smallest common delay
``t`` is the root of ``lambda_max(sum_i w_i w_i^T / (t - k_i)) = 1`` where
``w_ir = sqrt(a_ir / B_r)``.  At the root the Perron vector ``y`` of that
3x3 matrix gives every user's share: ``x_ir`` proportional to
``w_ir (w_i . y) / (t - k_i)``.

Two implementations share that contract: a loop kernel compiled with numba and
a vectorized numpy twin.  ``MCAP_OFFLOAD_DISABLE_JIT=1`` (or numba missing)
selects the numpy path.
"""
from __future__ import annotations

import math
import os

import numpy as np

_FLAG = "MCAP_OFFLOAD_DISABLE_JIT"
_REL = 4.0 * np.finfo(float).eps
_MAX_BISECT = 400

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def jit_requested() -> bool:
    return numba is not None and os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes")


# -- numba path ----------------------------------------------------------------

def _pd3(m):
    # Sylvester: all leading minors positive
    if m[0, 0] <= 0.0:
        return False
    d2 = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if d2 <= 0.0:
        return False
    d3 = (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
          - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
          + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    return d3 > 0.0


def _gram(k, w, members, t):
    q = np.zeros((3, 3))
    for i in members:
        s = 1.0 / (t - k[i])
        for r in range(3):
            if w[i, r] == 0.0:
                continue
            for c in range(3):
                q[r, c] += w[i, r] * w[i, c] * s
    return q


def _feasible(k, w, members, t):
    q = _gram(k, w, members, t)
    for r in range(3):
        for c in range(3):
            q[r, c] = -q[r, c]
        q[r, r] += 1.0
    return _pd3(q)


def _block_loop(k, w, budget, members, x, nu):
    """Solve one connected block; fills x and nu for its members, returns t."""
    lo = -np.inf
    hi = -np.inf
    counts = np.zeros(3)
    for i in members:
        lo = max(lo, k[i])
        for r in range(3):
            if w[i, r] > 0.0:
                counts[r] += 1.0
    for i in members:
        d = k[i]
        for r in range(3):
            d += w[i, r] * w[i, r] * counts[r]
        hi = max(hi, d)
    for _ in range(_MAX_BISECT):
        if hi - lo <= _REL * abs(hi):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _feasible(k, w, members, mid):
            hi = mid
        else:
            lo = mid
    q = _gram(k, w, members, hi)
    vals, vecs = np.linalg.eigh(q)
    y = vecs[:, 2].copy()
    if y.sum() < 0.0:
        y = -y
    for r in range(3):
        if y[r] < 0.0:
            y[r] = 0.0
    tot = np.zeros(3)
    for i in members:
        v = 0.0
        for r in range(3):
            v += w[i, r] * y[r]
        nu[i] = v / (hi - k[i])
        for r in range(3):
            tot[r] += nu[i] * w[i, r]
    for i in members:
        for r in range(3):
            if w[i, r] > 0.0 and tot[r] > 0.0:
                x[i, r] = budget[r] * nu[i] * w[i, r] / tot[r]
    return hi


def _components(w):
    """Label active users by connected block of the user/column incidence graph."""
    n = w.shape[0]
    parent = np.arange(3)
    for i in range(n):
        first = -1
        for r in range(3):
            if w[i, r] > 0.0:
                if first < 0:
                    first = r
                else:
                    a, b = first, r
                    while parent[a] != a:
                        a = parent[a]
                    while parent[b] != b:
                        b = parent[b]
                    if a != b:
                        parent[max(a, b)] = min(a, b)
    label = np.full(n, -1)
    for i in range(n):
        for r in range(3):
            if w[i, r] > 0.0:
                a = r
                while parent[a] != a:
                    a = parent[a]
                label[i] = a
                break
    return label


def _fixed_loop(k, work, budget):
    """Min-max with fixed per-resource budgets. Returns (x, nu, t, label)."""
    n = k.shape[0]
    w = np.zeros((n, 3))
    for i in range(n):
        for r in range(3):
            if work[i, r] > 0.0:
                w[i, r] = math.sqrt(work[i, r] / budget[r])
    x = np.zeros((n, 3))
    nu = np.zeros(n)
    label = _components(w)
    t = -np.inf
    for i in range(n):
        if label[i] < 0:
            t = max(t, k[i])
    for comp in range(3):
        cnt = 0
        for i in range(n):
            if label[i] == comp:
                cnt += 1
        if cnt == 0:
            continue
        members = np.empty(cnt, dtype=np.int64)
        cnt = 0
        for i in range(n):
            if label[i] == comp:
                members[cnt] = i
                cnt += 1
        t = max(t, _block_loop(k, w, budget, members, x, nu))
    return x, nu, t, label


def _bandwidth_bound(a_sum, b_sum, c_ul, c_dl, c_total):
    """min of A^2/Bu + B^2/Bd over the feasible (Bu, Bd) region."""
    if c_ul + c_dl <= c_total:
        bu, bd = c_ul, c_dl
    elif a_sum + b_sum == 0.0:
        return 0.0
    else:
        bu = c_total * a_sum / (a_sum + b_sum)
        bu = min(max(bu, c_total - c_dl), c_ul)
        bd = c_total - bu
    v = 0.0
    if a_sum > 0.0:
        v += a_sum * a_sum / bu
    if b_sum > 0.0:
        v += b_sum * b_sum / bd
    return v


def _dual_loop(k, a, b, c, nu, label, c_ul, c_dl, c_total, f_a):
    """Lagrangian lower bound on the CAP's min-max delay from weights nu**2."""
    n = k.shape[0]
    best = -np.inf
    for i in range(n):
        if label[i] < 0:
            best = max(best, k[i])
    for comp in range(3):
        s2 = 0.0
        for i in range(n):
            if label[i] == comp:
                s2 += nu[i] * nu[i]
        if s2 == 0.0:
            continue
        base = 0.0
        sa = 0.0
        sb = 0.0
        sc = 0.0
        for i in range(n):
            if label[i] == comp:
                mu = nu[i] * nu[i] / s2
                r = math.sqrt(mu)
                base += mu * k[i]
                sa += r * math.sqrt(a[i])
                sb += r * math.sqrt(b[i])
                sc += r * math.sqrt(c[i])
        val = base + _bandwidth_bound(sa, sb, c_ul, c_dl, c_total)
        if sc > 0.0:
            val += sc * sc / f_a
        best = max(best, val)
    return best


def _cap_loop(k, a, b, c, c_ul, c_dl, c_total, f_a):
    n = k.shape[0]
    work = np.zeros((n, 3))
    if c_ul + c_dl <= c_total:
        for i in range(n):
            work[i, 0] = a[i]
            work[i, 1] = b[i]
            work[i, 2] = c[i]
        x, nu, t, label = _fixed_loop(k, work, np.array([c_ul, c_dl, f_a]))
        up = x[:, 0].copy()
        down = x[:, 1].copy()
    else:
        # only the shared cap binds: pool up/down as one resource of size c_total
        for i in range(n):
            s = math.sqrt(a[i]) + math.sqrt(b[i])
            work[i, 0] = s * s
            work[i, 2] = c[i]
        x, nu, t, label = _fixed_loop(k, work, np.array([c_total, 1.0, f_a]))
        up = np.zeros(n)
        down = np.zeros(n)
        for i in range(n):
            sa = math.sqrt(a[i])
            sb = math.sqrt(b[i])
            if sa + sb > 0.0:
                up[i] = x[i, 0] * sa / (sa + sb)
                down[i] = x[i, 0] * sb / (sa + sb)
        bu = up.sum()
        lo_b = c_total - c_dl
        if bu > c_ul * (1.0 + 1e-12) or bu < lo_b * (1.0 - 1e-12):
            bu = c_ul if bu > c_ul else lo_b
            for i in range(n):
                work[i, 0] = a[i]
                work[i, 1] = b[i]
            x, nu, t, label = _fixed_loop(k, work, np.array([bu, c_total - bu, f_a]))
            up = x[:, 0].copy()
            down = x[:, 1].copy()
    f = x[:, 2].copy()
    lb = _dual_loop(k, a, b, c, nu, label, c_ul, c_dl, c_total, f_a)
    return up, down, f, t, lb


def _profile_loop(sites, cloud, up_work, down_work, cycles, local_time, cloud_time,
                  c_ul, c_dl, c_total, f_a):
    n, m = up_work.shape
    c_up = np.zeros((n, m))
    c_down = np.zeros((n, m))
    f_cap = np.zeros((n, m))
    delay = np.zeros(n)
    lower = -np.inf
    for i in range(n):
        if sites[i] == 0:
            delay[i] = local_time[i]
            lower = max(lower, local_time[i])
    for j in range(m):
        cnt = 0
        for i in range(n):
            if sites[i] == j + 1:
                cnt += 1
        if cnt == 0:
            continue
        idx = np.empty(cnt, dtype=np.int64)
        cnt = 0
        for i in range(n):
            if sites[i] == j + 1:
                idx[cnt] = i
                cnt += 1
        k = np.zeros(cnt)
        a = np.zeros(cnt)
        b = np.zeros(cnt)
        c = np.zeros(cnt)
        for p in range(cnt):
            i = idx[p]
            a[p] = up_work[i, j]
            b[p] = down_work[i, j]
            if cloud[i]:
                k[p] = cloud_time[i]
            else:
                c[p] = cycles[i]
        up, down, f, t, lb = _cap_loop(k, a, b, c, c_ul[j], c_dl[j], c_total[j], f_a[j])
        lower = max(lower, lb)
        for p in range(cnt):
            i = idx[p]
            c_up[i, j] = up[p]
            c_down[i, j] = down[p]
            f_cap[i, j] = f[p]
            d = k[p]
            if a[p] > 0.0:
                d += a[p] / up[p]
            if b[p] > 0.0:
                d += b[p] / down[p]
            if c[p] > 0.0:
                d += c[p] / f[p]
            delay[i] = d
    return c_up, c_down, f_cap, delay, lower


# -- numpy path ----------------------------------------------------------------

def _np_components(w):
    active = w > 0
    parent = list(range(3))

    def find(r):
        while parent[r] != r:
            r = parent[r]
        return r

    for row in active:
        cols = np.flatnonzero(row)
        for r in cols[1:]:
            a, b = find(cols[0]), find(r)
            if a != b:
                parent[max(a, b)] = min(a, b)
    label = np.full(w.shape[0], -1)
    has = active.any(1)
    first = active.argmax(1)
    label[has] = [find(r) for r in first[has]]
    return label


def _np_block(k, w, budget):
    lo = k.max()
    counts = (w > 0).sum(0)
    hi = float(np.max(k + (w * w * counts).sum(1)))
    eye = np.eye(3)
    for _ in range(_MAX_BISECT):
        if hi - lo <= _REL * abs(hi):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        q = (w.T / (mid - k)) @ w
        try:
            np.linalg.cholesky(eye - q)
            hi = mid
        except np.linalg.LinAlgError:
            lo = mid
    q = (w.T / (hi - k)) @ w
    y = np.linalg.eigh(q)[1][:, 2]
    if y.sum() < 0:
        y = -y
    y = np.clip(y, 0.0, None)
    nu = (w @ y) / (hi - k)
    tot = nu @ w
    share = np.divide(nu[:, None] * w, tot, out=np.zeros_like(w), where=tot > 0)
    return share * budget, nu, hi


def _np_fixed(k, work, budget):
    w = np.sqrt(work / budget)
    label = _np_components(w)
    x = np.zeros_like(w)
    nu = np.zeros(len(k))
    t = float(k[label < 0].max()) if (label < 0).any() else -np.inf
    for comp in np.unique(label[label >= 0]):
        sel = label == comp
        xs, nus, ts = _np_block(k[sel], w[sel], budget)
        x[sel], nu[sel] = xs, nus
        t = max(t, ts)
    return x, nu, t, label


def _np_dual(k, a, b, c, nu, label, c_ul, c_dl, c_total, f_a):
    best = float(k[label < 0].max()) if (label < 0).any() else -np.inf
    for comp in np.unique(label[label >= 0]):
        sel = label == comp
        mu = nu[sel] ** 2 / np.sum(nu[sel] ** 2)
        r = np.sqrt(mu)
        val = mu @ k[sel] + _bandwidth_bound_py(r @ np.sqrt(a[sel]), r @ np.sqrt(b[sel]),
                                             c_ul, c_dl, c_total)
        sc = r @ np.sqrt(c[sel])
        val += sc * sc / f_a
        best = max(best, float(val))
    return best


def _cap_numpy(k, a, b, c, c_ul, c_dl, c_total, f_a):
    if c_ul + c_dl <= c_total:
        x, nu, t, label = _np_fixed(k, np.column_stack([a, b, c]), np.array([c_ul, c_dl, f_a]))
        up, down = x[:, 0], x[:, 1]
    else:
        sa, sb = np.sqrt(a), np.sqrt(b)
        pooled = (sa + sb) ** 2
        x, nu, t, label = _np_fixed(k, np.column_stack([pooled, np.zeros_like(a), c]),
                                    np.array([c_total, 1.0, f_a]))
        frac = np.divide(sa, sa + sb, out=np.zeros_like(sa), where=(sa + sb) > 0)
        up = x[:, 0] * frac
        down = x[:, 0] - up
        down[(sa + sb) == 0] = 0.0
        bu = up.sum()
        lo_b = c_total - c_dl
        if bu > c_ul * (1 + 1e-12) or bu < lo_b * (1 - 1e-12):
            bu = c_ul if bu > c_ul else lo_b
            x, nu, t, label = _np_fixed(k, np.column_stack([a, b, c]),
                                        np.array([bu, c_total - bu, f_a]))
            up, down = x[:, 0], x[:, 1]
    lb = _np_dual(k, a, b, c, nu, label, c_ul, c_dl, c_total, f_a)
    return up.copy(), down.copy(), x[:, 2].copy(), t, lb


def _profile_numpy(sites, cloud, up_work, down_work, cycles, local_time, cloud_time,
                   c_ul, c_dl, c_total, f_a):
    n, m = up_work.shape
    c_up = np.zeros((n, m))
    c_down = np.zeros((n, m))
    f_cap = np.zeros((n, m))
    delay = np.zeros(n)
    loc = sites == 0
    delay[loc] = local_time[loc]
    lower = float(local_time[loc].max()) if loc.any() else -np.inf
    for j in range(m):
        idx = np.flatnonzero(sites == j + 1)
        if idx.size == 0:
            continue
        cl = cloud[idx]
        k = np.where(cl, cloud_time[idx], 0.0)
        a = up_work[idx, j]
        b = down_work[idx, j]
        c = np.where(cl, 0.0, cycles[idx])
        up, down, f, t, lb = _cap_numpy(k, a, b, c, c_ul[j], c_dl[j], c_total[j], f_a[j])
        lower = max(lower, lb)
        c_up[idx, j], c_down[idx, j], f_cap[idx, j] = up, down, f
        with np.errstate(divide="ignore", invalid="ignore"):
            d = (k + np.where(a > 0, a / up, 0.0) + np.where(b > 0, b / down, 0.0)
                 + np.where(c > 0, c / f, 0.0))
        delay[idx] = d
    return c_up, c_down, f_cap, delay, lower


# -- dispatch ------------------------------------------------------------------

_bandwidth_bound_py = _bandwidth_bound

if numba is not None:
    # numba resolves globals at first compile, so rebinding the helpers here
    # makes the loop kernels call compiled code throughout
    _jit = numba.njit(cache=True)
    _pd3 = _jit(_pd3)
    _gram = _jit(_gram)
    _feasible = _jit(_feasible)
    _block_loop = _jit(_block_loop)
    _components = _jit(_components)
    _fixed_loop = _jit(_fixed_loop)
    _bandwidth_bound = _jit(_bandwidth_bound)
    _dual_loop = _jit(_dual_loop)
    _cap_loop = _jit(_cap_loop)
    _profile_loop = _jit(_profile_loop)


def allocate_profile(sites, cloud, arrays, use_jit: bool | None = None):
    """Min-max allocation for every CAP of a fixed profile.

    Returns ``(c_up, c_down, f_cap, delay, round_time_lower_bound)``.
    """
    if use_jit is None:
        use_jit = jit_requested()
    args = (np.ascontiguousarray(sites, dtype=np.int64), np.ascontiguousarray(cloud, dtype=np.bool_),
            arrays.up_work, arrays.down_work, arrays.cycles, arrays.local_time,
            arrays.cloud_time, arrays.c_ul, arrays.c_dl, arrays.c_total, arrays.f_a)
    if use_jit and numba is not None:
        return _profile_loop(*args)
    return _profile_numpy(*args)


def cap_minmax(k, a, b, c, c_ul, c_dl, c_total, f_a, use_jit: bool | None = None):
    """Single-CAP entry point, mainly for tests and benchmarks."""
    if use_jit is None:
        use_jit = jit_requested()
    k, a, b, c = (np.ascontiguousarray(v, dtype=float) for v in (k, a, b, c))
    if use_jit and numba is not None:
        return _cap_loop(k, a, b, c, float(c_ul), float(c_dl), float(c_total), float(f_a))
    return _cap_numpy(k, a, b, c, c_ul, c_dl, c_total, f_a)
