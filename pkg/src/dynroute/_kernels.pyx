# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the functions in ``_purekernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log2, fabs

cnp.import_array()

cdef double EULER_GAMMA = 0.57721566490153286061
cdef double _SWITCH = 1.0
cdef double _EPS = 1e-16


cdef double _exp_e1(double b) noexcept nogil:
    cdef double term, total, add, tiny, bn, c, d, h, an, delta
    cdef int n, i
    if b <= _SWITCH:
        term = -b
        total = 0.0
        n = 1
        while True:
            add = term / n
            total += add
            if fabs(add) < _EPS * fabs(total) or n > 200:
                break
            n += 1
            term *= -b / n
        return exp(b) * (-EULER_GAMMA - log(b) - total)
    tiny = 1e-300
    bn = b + 1.0
    c = 1.0 / tiny
    d = 1.0 / bn
    h = d
    i = 1
    while i < 500:
        an = -(<double>i) * i
        bn += 2.0
        d = an * d + bn
        if d == 0.0:
            d = tiny
        c = bn + an / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        h *= delta
        if fabs(delta - 1.0) < _EPS:
            break
        i += 1
    return h


def exp_e1(double b):
    return _exp_e1(b)


def opp_integrals(double inv_gbar, coeffs):
    cdef double[::1] a = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] drate = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dwin = np.zeros(n)
    cdef double rate = 0.0, win = 0.0, b, sign, g, h, dh
    cdef long mask
    cdef Py_ssize_t z
    for mask in range(1 << n):
        b = inv_gbar
        sign = 1.0
        for z in range(n):
            if (mask >> z) & 1:
                b += a[z]
                sign = -sign
        g = _exp_e1(b)
        h = g / b
        dh = (g * (b - 1.0) - 1.0) / (b * b)
        rate += sign * h
        win += sign / b
        for z in range(n):
            if (mask >> z) & 1:
                drate[z] += sign * dh
                dwin[z] -= sign / (b * b)
    return inv_gbar * rate, inv_gbar * win, inv_gbar * drate, inv_gbar * dwin


def mm1_wait_exceed(interarrivals, services, double deadline):
    cdef double[::1] ia = np.ascontiguousarray(interarrivals, dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(services, dtype=np.float64)
    cdef Py_ssize_t i, n = ia.shape[0]
    cdef double w = 0.0
    cdef long count = 0
    with nogil:
        for i in range(n):
            if i > 0:
                w = w + sv[i - 1] - ia[i]
                if w < 0.0:
                    w = 0.0
            if w > deadline:
                count += 1
    return count


cdef inline long _pick(double[::1] cum, long lo, long hi, double u) noexcept nogil:
    cdef long p
    cdef double target
    if hi <= lo or cum[hi - 1] <= 0.0:
        return -1
    target = u * cum[hi - 1]
    for p in range(lo, hi):
        if target < cum[p]:
            return p
    return hi - 1


cdef inline long _link_of(long[::1] pair_off, long base, long nl, long p) noexcept nogil:
    cdef long a
    for a in range(nl):
        if p < pair_off[base + a + 1]:
            return a
    return nl - 1


def saturated_slots(int mode, n_links_, link_off_, gbar_, beta_, pair_off_, pair_cum_,
                    double bits_per_use, expo_, unif_, out_bits_):
    cdef long[::1] n_links = np.ascontiguousarray(n_links_, dtype=np.int64)
    cdef long[::1] link_off = np.ascontiguousarray(link_off_, dtype=np.int64)
    cdef double[::1] gbar = np.ascontiguousarray(gbar_, dtype=np.float64)
    cdef double[::1] beta = np.ascontiguousarray(beta_, dtype=np.float64)
    cdef long[::1] pair_off = np.ascontiguousarray(pair_off_, dtype=np.int64)
    cdef double[::1] pair_cum = np.ascontiguousarray(pair_cum_, dtype=np.float64)
    cdef double[:, :, ::1] expo = np.ascontiguousarray(expo_, dtype=np.float64)
    cdef double[:, ::1] unif = np.ascontiguousarray(unif_, dtype=np.float64)
    cdef double[::1] out_bits = out_bits_
    cdef Py_ssize_t s, n_slots = unif.shape[0], n_nodes = n_links.shape[0]
    cdef long n, base, nl, a, ja, lo, hi, p
    cdef double u, best, phi, g
    with nogil:
        for s in range(n_slots):
            for n in range(n_nodes):
                base = link_off[n]
                nl = n_links[n]
                u = unif[s, n]
                if mode == 0:
                    best = -1.0
                    ja = 0
                    for a in range(nl):
                        phi = beta[base + a] * expo[s, n, a]
                        if phi > best:
                            best = phi
                            ja = a
                    lo = pair_off[base + ja]
                    hi = pair_off[base + ja + 1]
                    p = _pick(pair_cum, lo, hi, u)
                    if p < 0:
                        continue
                else:
                    lo = pair_off[base]
                    hi = pair_off[base + nl]
                    p = _pick(pair_cum, lo, hi, u)
                    if p < 0:
                        continue
                    ja = _link_of(pair_off, base, nl, p)
                g = gbar[base + ja] * expo[s, n, ja]
                out_bits[p] += bits_per_use * log2(1.0 + g)


cdef inline void _push(long q, double t, long[::1] q_head, long[::1] q_count,
                       double[::1] q_resid, double[:, ::1] q_times, long[::1] q_started,
                       long cap, double packet_bits, long[:, ::1] stats) noexcept nogil:
    stats[q, 0] += 1
    if q_count[q] >= cap:
        stats[q, 2] += 1
        return
    if q_count[q] == 0:
        q_resid[q] = packet_bits
        q_started[q] = 0
    q_times[q, (q_head[q] + q_count[q]) % cap] = t
    q_count[q] += 1


def closed_loop_slots(int mode, double t0, double slot, double bits_per_use, double packet_bits,
                      n_links_, link_off_, gbar_, beta_, pair_off_, pair_cum_,
                      pair_src_q_, pair_dst_q_, pair_tokens_rate_, tokens_, token_cap_,
                      q_deadline_, q_head_, q_count_, q_resid_, q_times_, q_started_,
                      arr_q_, arr_times_, expo_, unif_, stats_, pair_rx_, node_order_):
    cdef long[::1] n_links = np.ascontiguousarray(n_links_, dtype=np.int64)
    cdef long[::1] link_off = np.ascontiguousarray(link_off_, dtype=np.int64)
    cdef double[::1] gbar = np.ascontiguousarray(gbar_, dtype=np.float64)
    cdef double[::1] beta = np.ascontiguousarray(beta_, dtype=np.float64)
    cdef long[::1] pair_off = np.ascontiguousarray(pair_off_, dtype=np.int64)
    cdef double[::1] pair_cum = np.ascontiguousarray(pair_cum_, dtype=np.float64)
    cdef long[::1] pair_src_q = np.ascontiguousarray(pair_src_q_, dtype=np.int64)
    cdef long[::1] pair_dst_q = np.ascontiguousarray(pair_dst_q_, dtype=np.int64)
    cdef double[::1] pair_tokens_rate = np.ascontiguousarray(pair_tokens_rate_, dtype=np.float64)
    cdef double[::1] tokens = tokens_
    cdef double[::1] token_cap = np.ascontiguousarray(token_cap_, dtype=np.float64)
    cdef double[::1] q_deadline = np.ascontiguousarray(q_deadline_, dtype=np.float64)
    cdef long[::1] q_head = q_head_
    cdef long[::1] q_count = q_count_
    cdef double[::1] q_resid = q_resid_
    cdef double[:, ::1] q_times = q_times_
    cdef long[::1] q_started = q_started_
    cdef long[::1] arr_q = np.ascontiguousarray(arr_q_, dtype=np.int64)
    cdef double[::1] arr_times = np.ascontiguousarray(arr_times_, dtype=np.float64)
    cdef double[:, :, ::1] expo = np.ascontiguousarray(expo_, dtype=np.float64)
    cdef double[:, ::1] unif = np.ascontiguousarray(unif_, dtype=np.float64)
    cdef long[:, ::1] stats = stats_
    cdef double[::1] pair_rx = pair_rx_
    cdef long[::1] node_order = np.ascontiguousarray(node_order_, dtype=np.int64)

    cdef Py_ssize_t s, n_slots = unif.shape[0]
    cdef long cap = q_times.shape[1]
    cdef long n_arr = arr_times.shape[0], n_q = q_count.shape[0], n_p = tokens.shape[0]
    cdef long n_order = node_order.shape[0]
    cdef long ai = 0, q, dq, p, oi, n, base, nl, a, ja, lo, hi, nxt
    cdef double now, u, best, phi, budget, sent, r, t
    with nogil:
        for s in range(n_slots):
            now = t0 + s * slot
            while ai < n_arr and arr_times[ai] < now:
                _push(arr_q[ai], arr_times[ai], q_head, q_count, q_resid, q_times,
                      q_started, cap, packet_bits, stats)
                ai += 1
            for q in range(n_q):
                while q_count[q] > 0 and q_started[q] == 0 and \
                        now - q_times[q, q_head[q]] > q_deadline[q]:
                    q_head[q] = (q_head[q] + 1) % cap
                    q_count[q] -= 1
                    q_resid[q] = packet_bits
                    stats[q, 1] += 1
                # a part-sent head stays; expire the waiting packets behind it
                while q_count[q] > 1 and q_started[q] == 1 and \
                        now - q_times[q, (q_head[q] + 1) % cap] > q_deadline[q]:
                    nxt = (q_head[q] + 1) % cap
                    q_times[q, nxt] = q_times[q, q_head[q]]
                    q_head[q] = nxt
                    q_count[q] -= 1
                    stats[q, 1] += 1
            for p in range(n_p):
                t = tokens[p] + pair_tokens_rate[p]
                tokens[p] = t if t < token_cap[p] else token_cap[p]
            for oi in range(n_order):
                n = node_order[oi]
                base = link_off[n]
                nl = n_links[n]
                u = unif[s, n]
                if mode == 0:
                    best = -1.0
                    ja = 0
                    for a in range(nl):
                        phi = beta[base + a] * expo[s, n, a]
                        if phi > best:
                            best = phi
                            ja = a
                    lo = pair_off[base + ja]
                    hi = pair_off[base + ja + 1]
                    p = _pick(pair_cum, lo, hi, u)
                else:
                    lo = pair_off[base]
                    hi = pair_off[base + nl]
                    p = _pick(pair_cum, lo, hi, u)
                    ja = _link_of(pair_off, base, nl, p) if p >= 0 else 0
                if p < 0:
                    continue
                budget = bits_per_use * log2(1.0 + gbar[base + ja] * expo[s, n, ja])
                if tokens[p] < budget:
                    budget = tokens[p]
                q = pair_src_q[p]
                dq = pair_dst_q[p]
                sent = 0.0
                while budget > 0.0 and q_count[q] > 0:
                    r = q_resid[q]
                    if r <= budget:
                        budget -= r
                        sent += r
                        q_head[q] = (q_head[q] + 1) % cap
                        q_count[q] -= 1
                        q_resid[q] = packet_bits
                        q_started[q] = 0
                        stats[q, 4] += 1
                        pair_rx[p] += packet_bits
                        if dq < 0:
                            stats[q, 3] += 1
                        else:
                            _push(dq, now + slot, q_head, q_count, q_resid, q_times,
                                  q_started, cap, packet_bits, stats)
                    else:
                        q_resid[q] = r - budget
                        q_started[q] = 1
                        sent += budget
                        budget = 0.0
                tokens[p] -= sent
    return ai
