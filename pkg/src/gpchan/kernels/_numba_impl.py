"""Numba-compiled kernels. Loop bodies mirror the numpy fallback exactly
(same accumulation order) so the two backends agree to floating tolerance.
"""

import math

import numpy as np
from numba import njit

_LOG_FLOOR = 1e-30


@njit(cache=True, nogil=True)
def _proj_scaled_simplex(v, target):
    """Euclidean projection of v onto {w >= 0, sum(w) = target}."""
    n = v.size
    u = np.sort(v)[::-1]
    theta = 0.0
    cum = 0.0
    for j in range(n):
        cum += u[j]
        th = (cum - target) / (j + 1)
        if u[j] - th > 0.0:
            theta = th
    out = np.empty(n)
    for i in range(n):
        d = v[i] - theta
        out[i] = d if d > 0.0 else 0.0
    return out


@njit(cache=True, nogil=True)
def _project_policy(q_raw, cell_of, cell_target, out):
    """Project each (state, cell) block onto its scaled simplex."""
    n_s, n_u = q_raw.shape
    n_c = cell_target.shape[1]
    for s in range(n_s):
        for c in range(n_c):
            cnt = 0
            for u in range(n_u):
                if cell_of[s, u] == c:
                    cnt += 1
            if cnt == 0:
                continue
            t = cell_target[s, c]
            if t <= 0.0:
                for u in range(n_u):
                    if cell_of[s, u] == c:
                        out[s, u] = 0.0
                continue
            vals = np.empty(cnt)
            j = 0
            for u in range(n_u):
                if cell_of[s, u] == c:
                    vals[j] = q_raw[s, u]
                    j += 1
            proj = _proj_scaled_simplex(vals, t)
            j = 0
            for u in range(n_u):
                if cell_of[s, u] == c:
                    out[s, u] = proj[j]
                    j += 1


@njit(cache=True, nogil=True)
def project_policy(q_raw, cell_of, cell_target):
    out = np.empty_like(q_raw)
    _project_policy(q_raw, cell_of, cell_target, out)
    return out


@njit(cache=True, nogil=True)
def policy_value(q, pat, p_s, w):
    """I(U;Y) - I(U;S) for weights q[s,u] = P(u|s) and map pat[u,s] = x."""
    n_s, n_u = q.shape
    n_y = w.shape[2]
    pu = np.zeros(n_u)
    puy = np.zeros((n_u, n_y))
    for s in range(n_s):
        for u in range(n_u):
            m = p_s[s] * q[s, u]
            if m > 0.0:
                pu[u] += m
                x = pat[u, s]
                for y in range(n_y):
                    puy[u, y] += m * w[s, x, y]
    py = np.zeros(n_y)
    for u in range(n_u):
        for y in range(n_y):
            py[y] += puy[u, y]
    i_uy = 0.0
    for u in range(n_u):
        for y in range(n_y):
            v = puy[u, y]
            if v > 0.0:
                i_uy += v * math.log(v / (pu[u] * py[y]))
    i_us = 0.0
    for s in range(n_s):
        for u in range(n_u):
            v = p_s[s] * q[s, u]
            if v > 0.0:
                i_us += v * math.log(q[s, u] / pu[u])
    return i_uy - i_us


@njit(cache=True, nogil=True)
def policy_value_batch(qs, pat, p_s, w):
    n = qs.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = policy_value(qs[i], pat, p_s, w)
    return out


@njit(cache=True, nogil=True)
def _policy_grad(q, pat, p_s, w, grad):
    n_s, n_u = q.shape
    n_y = w.shape[2]
    pu = np.zeros(n_u)
    puy = np.zeros((n_u, n_y))
    for s in range(n_s):
        for u in range(n_u):
            m = p_s[s] * q[s, u]
            if m > 0.0:
                pu[u] += m
                x = pat[u, s]
                for y in range(n_y):
                    puy[u, y] += m * w[s, x, y]
    py = np.zeros(n_y)
    for u in range(n_u):
        for y in range(n_y):
            py[y] += puy[u, y]
    for s in range(n_s):
        for u in range(n_u):
            if p_s[s] <= 0.0:
                grad[s, u] = 0.0
                continue
            x = pat[u, s]
            acc = 0.0
            for y in range(n_y):
                wv = w[s, x, y]
                if wv > 0.0:
                    if pu[u] > _LOG_FLOOR:
                        c = puy[u, y] / pu[u]
                    else:
                        c = wv
                    if c < _LOG_FLOOR:
                        c = _LOG_FLOOR
                    pyv = py[y] if py[y] > _LOG_FLOOR else _LOG_FLOOR
                    acc += wv * math.log(c / pyv)
            qv = q[s, u] if q[s, u] > _LOG_FLOOR else _LOG_FLOOR
            puv = pu[u] if pu[u] > _LOG_FLOOR else _LOG_FLOOR
            grad[s, u] = p_s[s] * (acc - 1.0 - math.log(qv / puv))


@njit(cache=True, nogil=True)
def ascend_policy(q0, pat, p_s, w, cell_of, cell_target, max_iter, gtol):
    """Projected gradient ascent with backtracking line search.

    Returns the reached weights and objective value; stops on projected
    gradient norm below gtol, on line-search failure, or after max_iter.
    """
    n_s, n_u = q0.shape
    q = np.empty((n_s, n_u))
    _project_policy(q0, cell_of, cell_target, q)
    val = policy_value(q, pat, p_s, w)
    grad = np.empty((n_s, n_u))
    qtmp = np.empty((n_s, n_u))
    qnew = np.empty((n_s, n_u))
    for _ in range(max_iter):
        _policy_grad(q, pat, p_s, w, grad)
        for s in range(n_s):
            for u in range(n_u):
                qtmp[s, u] = q[s, u] + grad[s, u]
        _project_policy(qtmp, cell_of, cell_target, qnew)
        pg = 0.0
        for s in range(n_s):
            for u in range(n_u):
                d = qnew[s, u] - q[s, u]
                pg += d * d
        if math.sqrt(pg) <= gtol:
            break
        alpha = 1.0
        improved = False
        while alpha >= 1e-12:
            for s in range(n_s):
                for u in range(n_u):
                    qtmp[s, u] = q[s, u] + alpha * grad[s, u]
            _project_policy(qtmp, cell_of, cell_target, qnew)
            nv = policy_value(qnew, pat, p_s, w)
            if nv > val + 1e-14:
                for s in range(n_s):
                    for u in range(n_u):
                        q[s, u] = qnew[s, u]
                val = nv
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return q, val


@njit(cache=True, nogil=True)
def rate_max_quick(v, p_s, marg, limit, pats, ms_flat, ms_off, ms_size,
                   max_iter, gtol):
    """Budgeted constrained-rate maximization used as the membership oracle
    inside exponent scans: ascend from structured seeds for every admissible
    pattern multiset, returning early once the limit is exceeded. The best
    rate found is a lower bound on the true maximum."""
    n_s = p_s.size
    n_x = marg.shape[1]
    n_ms = ms_size.size
    best = 0.0
    for i in range(n_ms):
        u_size = ms_size[i]
        off = ms_off[i]
        pat_sub = np.empty((u_size, n_s), dtype=np.int64)
        for u in range(u_size):
            for s in range(n_s):
                pat_sub[u, s] = pats[ms_flat[off + u], s]
        # coverage: every positive-mass input letter needs a preimage
        ok = True
        for s in range(n_s):
            if p_s[s] <= 0.0:
                continue
            for x in range(n_x):
                if marg[s, x] > 0.0:
                    found = False
                    for u in range(u_size):
                        if pat_sub[u, s] == x:
                            found = True
                            break
                    if not found:
                        ok = False
                        break
            if not ok:
                break
        if not ok:
            continue
        cell_of = np.empty((n_s, u_size), dtype=np.int64)
        for s in range(n_s):
            for u in range(u_size):
                cell_of[s, u] = pat_sub[u, s]
        # seed 1: uniform within cells; seed 2: mass on first cell member
        for seed_kind in range(2):
            q0 = np.zeros((n_s, u_size))
            for s in range(n_s):
                for x in range(n_x):
                    cnt = 0
                    for u in range(u_size):
                        if cell_of[s, u] == x:
                            cnt += 1
                    if cnt == 0:
                        continue
                    if seed_kind == 0:
                        for u in range(u_size):
                            if cell_of[s, u] == x:
                                q0[s, u] = marg[s, x] / cnt
                    else:
                        for u in range(u_size):
                            if cell_of[s, u] == x:
                                q0[s, u] = marg[s, x]
                                break
            _q, val = ascend_policy(q0, pat_sub, p_s, v, cell_of, marg,
                                    max_iter, gtol)
            if val > best:
                best = val
            if best > limit:
                return best
    return best


@njit(cache=True, nogil=True)
def scan_v_grid(cand, row_kl, row_h, row_w, row_s, row_x, p_s, p_x,
                i_xs, pat_all, pu_pat, row_of,
                rate_limit, kl_cap, und_idx, und_kl, best_combo):
    """Depth-first scan of the per-row candidate grid for hypothetical
    channels, pruned by partial divergence sums.

    Candidate rows must be sorted ascending by row_kl. A leaf whose
    conditional-information upper bound is within rate_limit is feasible
    outright; one whose achievable-rate lower bound (best of the identity
    coupling and the state-independent pattern coupling) already exceeds
    rate_limit is rejected; the rest are recorded as undecided for an exact
    rate check outside. Returns (best confirmed divergence, undecided count,
    overflow flag).
    """
    n_rows, n_cand, n_y = cand.shape
    n_s = p_s.size
    n_x = p_x.size
    n_pat = pu_pat.size
    max_und = und_kl.size
    best = np.inf
    n_und = 0
    overflow = 0
    suffix = np.zeros(n_rows + 1)
    for r in range(n_rows - 1, -1, -1):
        suffix[r] = suffix[r + 1] + row_kl[r, 0]
    idx = np.zeros(n_rows, dtype=np.int64)
    partial = np.zeros(n_rows + 1)
    pys = np.empty((n_s, n_y))
    pyx = np.empty((n_x, n_y))
    py = np.empty(n_y)
    for r in range(n_rows):
        best_combo[r] = -1
    r = 0
    idx[0] = 0
    while r >= 0:
        if idx[r] >= n_cand:
            r -= 1
            if r >= 0:
                idx[r] += 1
            continue
        bound = kl_cap if kl_cap < best else best
        pk = partial[r] + row_kl[r, idx[r]]
        if pk + suffix[r + 1] >= bound:
            r -= 1
            if r >= 0:
                idx[r] += 1
            continue
        if r < n_rows - 1:
            partial[r + 1] = pk
            r += 1
            idx[r] = 0
            continue
        # leaf: rate bounds for the assembled channel
        for y in range(n_y):
            py[y] = 0.0
        for s in range(n_s):
            for y in range(n_y):
                pys[s, y] = 0.0
        for x in range(n_x):
            for y in range(n_y):
                pyx[x, y] = 0.0
        h_rows = 0.0
        for rr in range(n_rows):
            wgt = row_w[rr]
            ci = idx[rr]
            for y in range(n_y):
                v = wgt * cand[rr, ci, y]
                py[y] += v
                pys[row_s[rr], y] += v
                pyx[row_x[rr], y] += v
            h_rows += wgt * row_h[rr, ci]
        ub = -h_rows
        for s in range(n_s):
            if p_s[s] > 0.0:
                hh = 0.0
                for y in range(n_y):
                    vv = pys[s, y] / p_s[s]
                    if vv > 0.0:
                        hh -= vv * math.log(vv)
                ub += p_s[s] * hh
        if ub <= rate_limit:
            if pk < best:
                best = pk
                for rr in range(n_rows):
                    best_combo[rr] = idx[rr]
            idx[r] += 1
            continue
        hy = 0.0
        for y in range(n_y):
            if py[y] > 0.0:
                hy -= py[y] * math.log(py[y])
        ixy = hy
        for x in range(n_x):
            if p_x[x] > 0.0:
                hh = 0.0
                for y in range(n_y):
                    vv = pyx[x, y] / p_x[x]
                    if vv > 0.0:
                        hh -= vv * math.log(vv)
                ixy -= p_x[x] * hh
        lb = ixy - i_xs
        # state-independent pattern coupling: I(U;Y) with U the pattern index
        i_pat = hy
        for ui in range(n_pat):
            pv = pu_pat[ui]
            if pv > 0.0:
                hh = 0.0
                for y in range(n_y):
                    acc = 0.0
                    for s in range(n_s):
                        if p_s[s] > 0.0:
                            rr = row_of[s, pat_all[ui, s]]
                            acc += p_s[s] * cand[rr, idx[rr], y]
                    if acc > 0.0:
                        hh -= acc * math.log(acc)
                i_pat -= pv * hh
        if i_pat > lb:
            lb = i_pat
        if lb <= rate_limit:
            if n_und < max_und:
                for rr in range(n_rows):
                    und_idx[n_und, rr] = idx[rr]
                und_kl[n_und] = pk
                n_und += 1
            else:
                overflow = 1
        idx[r] += 1
    return best, n_und, overflow


@njit(cache=True, nogil=True)
def exact_error_table(f_table, phi, p_s, w, n, n_msgs):
    """Exact per-message error probability by full enumeration of state and
    output sequences (row-major mixed-radix indices, first letter most
    significant)."""
    n_states = p_s.size
    n_x = w.shape[1]
    n_y = w.shape[2]
    sn = f_table.shape[1]
    yn = phi.size
    out = np.zeros(n_msgs)
    sdig = np.empty(n, dtype=np.int64)
    xdig = np.empty(n, dtype=np.int64)
    for m in range(n_msgs):
        acc = 0.0
        for si in range(sn):
            tmp = si
            for t in range(n - 1, -1, -1):
                sdig[t] = tmp % n_states
                tmp //= n_states
            ps = 1.0
            for t in range(n):
                ps *= p_s[sdig[t]]
            if ps == 0.0:
                continue
            xi = f_table[m, si]
            tmp = xi
            for t in range(n - 1, -1, -1):
                xdig[t] = tmp % n_x
                tmp //= n_x
            err = 0.0
            for yi in range(yn):
                tmp = yi
                wn = 1.0
                for t in range(n - 1, -1, -1):
                    yd = tmp % n_y
                    tmp //= n_y
                    wn *= w[sdig[t], xdig[t], yd]
                if phi[yi] != m:
                    err += wn
            acc += ps * err
        out[m] = acc
    return out


@njit(cache=True, nogil=True)
def ml_decoder(f_table, p_s, w, n, n_msgs):
    """State-averaged maximum-likelihood decoder table; ties to smaller m."""
    n_states = p_s.size
    n_x = w.shape[1]
    n_y = w.shape[2]
    sn = f_table.shape[1]
    yn = n_y ** n
    lik = np.zeros((n_msgs, yn))
    sdig = np.empty(n, dtype=np.int64)
    xdig = np.empty(n, dtype=np.int64)
    for m in range(n_msgs):
        for si in range(sn):
            tmp = si
            for t in range(n - 1, -1, -1):
                sdig[t] = tmp % n_states
                tmp //= n_states
            ps = 1.0
            for t in range(n):
                ps *= p_s[sdig[t]]
            if ps == 0.0:
                continue
            xi = f_table[m, si]
            tmp = xi
            for t in range(n - 1, -1, -1):
                xdig[t] = tmp % n_x
                tmp //= n_x
            for yi in range(yn):
                tmp = yi
                wn = 1.0
                for t in range(n - 1, -1, -1):
                    yd = tmp % n_y
                    tmp //= n_y
                    wn *= w[sdig[t], xdig[t], yd]
                lik[m, yi] += ps * wn
    phi = np.empty(yn, dtype=np.int64)
    for yi in range(yn):
        bm = 0
        bv = lik[0, yi]
        for m in range(1, n_msgs):
            if lik[m, yi] > bv:
                bv = lik[m, yi]
                bm = m
        phi[yi] = bm
    return phi


@njit(cache=True, nogil=True)
def code_search_scan(start, stop, n_msgs, n, p_s, w, sn):
    """Scan encoder tables with integer codes in [start, stop); each encoder
    is decoded with the averaged-ML rule. Returns (best max error, encoder
    code), ties to the smaller code."""
    n_x = w.shape[1]
    kx = 1
    for _ in range(n):
        kx *= n_x
    digits = n_msgs * sn
    f = np.empty((n_msgs, sn), dtype=np.int64)
    best_err = np.inf
    best_e = np.int64(-1)
    for e in range(start, stop):
        tmp = e
        for pos in range(digits):
            f[pos // sn, pos % sn] = tmp % kx
            tmp //= kx
        phi = ml_decoder(f, p_s, w, n, n_msgs)
        errs = exact_error_table(f, phi, p_s, w, n, n_msgs)
        mx = 0.0
        for m in range(n_msgs):
            if errs[m] > mx:
                mx = errs[m]
        if mx < best_err:
            best_err = mx
            best_e = e
    return best_err, best_e


@njit(cache=True, nogil=True)
def code_search_scan_exhaustive_decoders(start, stop, n_msgs, n, p_s, w, sn):
    """Like code_search_scan but minimizing over every decoder table as well
    (tiniest instances only). Returns (error, encoder code, decoder code)."""
    n_x = w.shape[1]
    n_y = w.shape[2]
    kx = 1
    yn = 1
    for _ in range(n):
        kx *= n_x
        yn *= n_y
    n_dec = 1
    for _ in range(yn):
        n_dec *= n_msgs
    digits = n_msgs * sn
    f = np.empty((n_msgs, sn), dtype=np.int64)
    phi = np.empty(yn, dtype=np.int64)
    best_err = np.inf
    best_e = np.int64(-1)
    best_d = np.int64(-1)
    for e in range(start, stop):
        tmp = e
        for pos in range(digits):
            f[pos // sn, pos % sn] = tmp % kx
            tmp //= kx
        for d in range(n_dec):
            tmp = d
            for yi in range(yn):
                phi[yi] = tmp % n_msgs
                tmp //= n_msgs
            errs = exact_error_table(f, phi, p_s, w, n, n_msgs)
            mx = 0.0
            for m in range(n_msgs):
                if errs[m] > mx:
                    mx = errs[m]
            if mx < best_err:
                best_err = mx
                best_e = e
                best_d = d
    return best_err, best_e, best_d


@njit(cache=True, nogil=True)
def mc_tally(f_row, phi, cum_s, cum_w, m, u_state, u_noise, n):
    """Count decoding errors for message m over a batch of uniform draws.

    u_state and u_noise are (batch, n) uniforms; states and outputs are read
    off the cumulative distributions so both backends make identical draws.
    """
    batch = u_state.shape[0]
    n_states = cum_s.size
    n_x = cum_w.shape[1]
    n_y = cum_w.shape[2]
    errors = 0
    sdig = np.empty(n, dtype=np.int64)
    xdig = np.empty(n, dtype=np.int64)
    for b in range(batch):
        si = 0
        for t in range(n):
            u = u_state[b, t]
            sd = 0
            while sd < n_states - 1 and u >= cum_s[sd]:
                sd += 1
            sdig[t] = sd
            si = si * n_states + sd
        xi = f_row[si]
        tmp = xi
        for t in range(n - 1, -1, -1):
            xdig[t] = tmp % n_x
            tmp //= n_x
        yi = 0
        for t in range(n):
            u = u_noise[b, t]
            yd = 0
            while yd < n_y - 1 and u >= cum_w[sdig[t], xdig[t], yd]:
                yd += 1
            yi = yi * n_y + yd
        if phi[yi] != m:
            errors += 1
    return errors
