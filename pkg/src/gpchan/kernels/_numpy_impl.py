"""Pure-numpy fallback kernels. Same function set and semantics as the
numba backend (identical tie-breaking and iteration order); vectorized over
the innermost dimensions instead of JIT-compiled loops.
"""

import math

import numpy as np

_LOG_FLOOR = 1e-30


def _proj_scaled_simplex(v, target):
    u = np.sort(v)[::-1]
    cum = np.cumsum(u)
    th_all = (cum - target) / np.arange(1, v.size + 1)
    mask = u - th_all > 0.0
    theta = th_all[np.nonzero(mask)[0][-1]] if mask.any() else 0.0
    return np.maximum(v - theta, 0.0)


def _project_policy(q_raw, cell_of, cell_target):
    n_s, n_u = q_raw.shape
    out = np.zeros_like(q_raw)
    for s in range(n_s):
        for c in range(cell_target.shape[1]):
            members = cell_of[s] == c
            if not members.any():
                continue
            t = cell_target[s, c]
            if t <= 0.0:
                out[s, members] = 0.0
            else:
                out[s, members] = _proj_scaled_simplex(q_raw[s, members], t)
    return out


project_policy = _project_policy


def _policy_dists(q, pat, p_s, w):
    n_s = q.shape[0]
    wrow = w[np.arange(n_s)[None, :], pat, :]  # (U, S, Y)
    mass = (p_s[None, :] * q.T)  # (U, S)
    pu = mass.sum(axis=1)
    puy = (mass[:, :, None] * wrow).sum(axis=1)  # (U, Y)
    py = puy.sum(axis=0)
    return wrow, mass, pu, puy, py


def policy_value(q, pat, p_s, w):
    _, mass, pu, puy, py = _policy_dists(q, pat, p_s, w)
    pos = puy > 0.0
    denom = pu[:, None] * py[None, :]
    i_uy = float(np.sum(puy[pos] * np.log(puy[pos] / denom[pos])))
    pos = mass > 0.0
    ratio = q.T[pos] / pu[np.nonzero(pos)[0]]
    i_us = float(np.sum(mass[pos] * np.log(ratio)))
    return i_uy - i_us


def policy_value_batch(qs, pat, p_s, w):
    return np.array([policy_value(qs[i], pat, p_s, w) for i in range(qs.shape[0])])


def _policy_grad(q, pat, p_s, w):
    wrow, _, pu, puy, py = _policy_dists(q, pat, p_s, w)
    pu_safe = np.maximum(pu, _LOG_FLOOR)
    cond = puy / pu_safe[:, None]  # (U, Y)
    unused = pu <= _LOG_FLOOR  # atoms with no mass: substitute their own channel row
    py_safe = np.maximum(py, _LOG_FLOOR)
    log_term = np.empty_like(wrow)  # (U, S, Y)
    for s in range(q.shape[0]):
        c = np.where(unused[:, None], wrow[:, s, :], cond)
        log_term[:, s, :] = np.log(np.maximum(c, _LOG_FLOOR) / py_safe[None, :])
    acc = (wrow * log_term).sum(axis=2)  # (U, S)
    qv = np.maximum(q.T, _LOG_FLOOR)
    grad = p_s[None, :] * (acc - 1.0 - np.log(qv / pu_safe[:, None]))
    grad = np.where(p_s[None, :] > 0.0, grad, 0.0)
    return grad.T  # (S, U)


def ascend_policy(q0, pat, p_s, w, cell_of, cell_target, max_iter, gtol):
    q = _project_policy(q0, cell_of, cell_target)
    val = policy_value(q, pat, p_s, w)
    for _ in range(max_iter):
        grad = _policy_grad(q, pat, p_s, w)
        probe = _project_policy(q + grad, cell_of, cell_target)
        if math.sqrt(float(np.sum((probe - q) ** 2))) <= gtol:
            break
        alpha = 1.0
        improved = False
        while alpha >= 1e-12:
            qnew = _project_policy(q + alpha * grad, cell_of, cell_target)
            nv = policy_value(qnew, pat, p_s, w)
            if nv > val + 1e-14:
                q, val = qnew, nv
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return q, val


def _entropy_rows(rows):
    out = np.zeros(rows.shape[:-1])
    pos = rows > 0.0
    contrib = np.zeros_like(rows)
    contrib[pos] = rows[pos] * np.log(rows[pos])
    return -contrib.sum(axis=-1)


def rate_max_quick(v, p_s, marg, limit, pats, ms_flat, ms_off, ms_size,
                   max_iter, gtol):
    n_s = p_s.size
    n_x = marg.shape[1]
    best = 0.0
    for i in range(ms_size.size):
        u_size = int(ms_size[i])
        off = int(ms_off[i])
        pat_sub = pats[ms_flat[off: off + u_size]]
        ok = True
        for s in range(n_s):
            if p_s[s] <= 0.0:
                continue
            need = set(np.nonzero(marg[s] > 0.0)[0])
            if not need <= set(pat_sub[:, s]):
                ok = False
                break
        if not ok:
            continue
        cell_of = pat_sub.T.copy()
        for seed_kind in range(2):
            q0 = np.zeros((n_s, u_size))
            for s in range(n_s):
                for x in range(n_x):
                    members = np.nonzero(cell_of[s] == x)[0]
                    if members.size == 0:
                        continue
                    if seed_kind == 0:
                        q0[s, members] = marg[s, x] / members.size
                    else:
                        q0[s, members[0]] = marg[s, x]
            _q, val = ascend_policy(q0, pat_sub, p_s, v, cell_of, marg,
                                    max_iter, gtol)
            if val > best:
                best = val
            if best > limit:
                return best
    return best


def scan_v_grid(cand, row_kl, row_h, row_w, row_s, row_x, p_s, p_x,
                i_xs, pat_all, pu_pat, row_of,
                rate_limit, kl_cap, und_idx, und_kl, best_combo,
                batch=65536):
    n_rows, n_cand, n_y = cand.shape
    max_und = und_kl.size
    total = n_cand ** n_rows
    best = np.inf
    best_combo[:] = -1
    n_und = 0
    overflow = 0
    dims = (n_cand,) * n_rows
    for lo in range(0, total, batch):
        hi = min(lo + batch, total)
        flat = np.arange(lo, hi)
        idx = np.stack(np.unravel_index(flat, dims), axis=1)  # (B, rows)
        kl_tot = np.zeros(hi - lo)
        py = np.zeros((hi - lo, n_y))
        pys = np.zeros((hi - lo, p_s.size, n_y))
        pyx = np.zeros((hi - lo, p_x.size, n_y))
        h_rows = np.zeros(hi - lo)
        for r in range(n_rows):
            sel = idx[:, r]
            kl_tot += row_kl[r, sel]
            contrib = row_w[r] * cand[r, sel, :]
            py += contrib
            pys[:, row_s[r], :] += contrib
            pyx[:, row_x[r], :] += contrib
            h_rows += row_w[r] * row_h[r, sel]
        ub = -h_rows
        for s in range(p_s.size):
            if p_s[s] > 0.0:
                ub += p_s[s] * _entropy_rows(pys[:, s, :] / p_s[s])
        ixy = _entropy_rows(py)
        for x in range(p_x.size):
            if p_x[x] > 0.0:
                ixy -= p_x[x] * _entropy_rows(pyx[:, x, :] / p_x[x])
        lb = np.maximum(ixy - i_xs, 0.0)
        # state-independent pattern coupling lower bound
        i_pat = _entropy_rows(py)
        for ui in range(pu_pat.size):
            if pu_pat[ui] > 0.0:
                pyu = np.zeros((hi - lo, n_y))
                for s in range(p_s.size):
                    if p_s[s] > 0.0:
                        rr = row_of[s, pat_all[ui, s]]
                        pyu += p_s[s] * cand[rr, idx[:, rr], :]
                i_pat -= pu_pat[ui] * _entropy_rows(pyu)
        lb = np.maximum(lb, i_pat)
        bound = min(kl_cap, best)
        interesting = kl_tot < bound
        confirmed = interesting & (ub <= rate_limit)
        if confirmed.any():
            sub = np.nonzero(confirmed)[0]
            k = sub[np.argmin(kl_tot[sub])]
            if kl_tot[k] < best:
                best = kl_tot[k]
                best_combo[:] = idx[k]
        undecided = interesting & (ub > rate_limit) & (lb <= rate_limit)
        for k in np.nonzero(undecided)[0]:
            if kl_tot[k] >= min(kl_cap, best):
                continue
            if n_und < max_und:
                und_idx[n_und, :] = idx[k]
                und_kl[n_und] = kl_tot[k]
                n_und += 1
            else:
                overflow = 1
    return best, n_und, overflow


def _product_row(w, sdig, xdig):
    out = np.ones(1)
    for t in range(len(sdig)):
        out = np.kron(out, w[sdig[t], xdig[t]])
    return out


def _digits(value, base, n):
    out = np.empty(n, dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[t] = value % base
        value //= base
    return out


def exact_error_table(f_table, phi, p_s, w, n, n_msgs):
    n_states = p_s.size
    n_x = w.shape[1]
    sn = f_table.shape[1]
    out = np.zeros(n_msgs)
    for m in range(n_msgs):
        acc = 0.0
        for si in range(sn):
            sdig = _digits(si, n_states, n)
            ps = float(np.prod(p_s[sdig]))
            if ps == 0.0:
                continue
            xdig = _digits(f_table[m, si], n_x, n)
            wn = _product_row(w, sdig, xdig)
            acc += ps * float(wn[phi != m].sum())
        out[m] = acc
    return out


def ml_decoder(f_table, p_s, w, n, n_msgs):
    n_states = p_s.size
    n_x = w.shape[1]
    n_y = w.shape[2]
    sn = f_table.shape[1]
    yn = n_y ** n
    lik = np.zeros((n_msgs, yn))
    for m in range(n_msgs):
        for si in range(sn):
            sdig = _digits(si, n_states, n)
            ps = float(np.prod(p_s[sdig]))
            if ps == 0.0:
                continue
            xdig = _digits(f_table[m, si], n_x, n)
            lik[m] += ps * _product_row(w, sdig, xdig)
    return np.argmax(lik, axis=0).astype(np.int64)


def code_search_scan(start, stop, n_msgs, n, p_s, w, sn):
    kx = w.shape[1] ** n
    digits = n_msgs * sn
    best_err = np.inf
    best_e = np.int64(-1)
    f = np.empty((n_msgs, sn), dtype=np.int64)
    for e in range(start, stop):
        tmp = e
        for pos in range(digits):
            f[pos // sn, pos % sn] = tmp % kx
            tmp //= kx
        phi = ml_decoder(f, p_s, w, n, n_msgs)
        errs = exact_error_table(f, phi, p_s, w, n, n_msgs)
        mx = float(errs.max())
        if mx < best_err:
            best_err = mx
            best_e = np.int64(e)
    return best_err, best_e


def code_search_scan_exhaustive_decoders(start, stop, n_msgs, n, p_s, w, sn):
    kx = w.shape[1] ** n
    yn = w.shape[2] ** n
    n_dec = n_msgs ** yn
    digits = n_msgs * sn
    best_err = np.inf
    best_e = np.int64(-1)
    best_d = np.int64(-1)
    f = np.empty((n_msgs, sn), dtype=np.int64)
    for e in range(start, stop):
        tmp = e
        for pos in range(digits):
            f[pos // sn, pos % sn] = tmp % kx
            tmp //= kx
        for d in range(n_dec):
            phi = _digits_lsf(d, n_msgs, yn)
            errs = exact_error_table(f, phi, p_s, w, n, n_msgs)
            mx = float(errs.max())
            if mx < best_err:
                best_err = mx
                best_e = np.int64(e)
                best_d = np.int64(d)
    return best_err, best_e, best_d


def _digits_lsf(value, base, n):
    """Least-significant-first digits (matches the decoder enumeration order
    of the numba backend)."""
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = value % base
        value //= base
    return out


def mc_tally(f_row, phi, cum_s, cum_w, m, u_state, u_noise, n):
    n_states = cum_s.size
    n_x = cum_w.shape[1]
    n_y = cum_w.shape[2]
    sdig = np.minimum(np.searchsorted(cum_s, u_state, side="right"), n_states - 1)
    pow_s = n_states ** np.arange(n - 1, -1, -1)
    si = sdig @ pow_s
    xi = f_row[si]
    pow_x = n_x ** np.arange(n - 1, -1, -1)
    xdig = (xi[:, None] // pow_x[None, :]) % n_x
    rows = cum_w[sdig, xdig, :]  # (B, n, Y)
    ydig = np.minimum((u_noise[:, :, None] >= rows).sum(axis=2), n_y - 1)
    pow_y = n_y ** np.arange(n - 1, -1, -1)
    yi = ydig @ pow_y
    return int(np.sum(phi[yi] != m))
