"""Pure-Python implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
The compiled module is preferred at import time (see ``_backend``).
"""
import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_SWITCH = 1.0
_EPS = 1e-16


def exp_e1(b):
    """Return exp(b) * E1(b) for b > 0."""
    if b <= _SWITCH:
        # E1(b) = -gamma - ln b - sum_{n>=1} (-b)^n / (n n!)
        term = -b
        total = 0.0
        n = 1
        while True:
            add = term / n
            total += add
            if abs(add) < _EPS * abs(total) or n > 200:
                break
            n += 1
            term *= -b / n
        return math.exp(b) * (-EULER_GAMMA - math.log(b) - total)
    # modified Lentz on exp(b) E1(b) = 1/(b+1- 1/(b+3- 4/(b+5- ...)))
    tiny = 1e-300
    bn = b + 1.0
    c = 1.0 / tiny
    d = 1.0 / bn
    h = d
    i = 1
    while i < 500:
        an = -float(i * i)
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
        if abs(delta - 1.0) < _EPS:
            break
        i += 1
    return h


def opp_integrals(inv_gbar, coeffs):
    """Inclusion-exclusion integrals for one contested link.

    With c = inv_gbar and competing exponents a_z = coeffs[z], returns
    ``(rate, win, drate, dwin)`` where::

        rate = c * int exp(-c g) prod_z (1 - exp(-a_z g)) ln(1 + g) dg
        win  = c * int exp(-c g) prod_z (1 - exp(-a_z g)) dg

    and ``drate``/``dwin`` are their derivatives with respect to each a_z.
    Rates are in nats per channel use.
    """
    n = len(coeffs)
    rate = 0.0
    win = 0.0
    drate = np.zeros(n)
    dwin = np.zeros(n)
    for mask in range(1 << n):
        b = inv_gbar
        sign = 1.0
        for z in range(n):
            if mask >> z & 1:
                b += coeffs[z]
                sign = -sign
        g = exp_e1(b)
        h = g / b
        dh = (g * (b - 1.0) - 1.0) / (b * b)
        rate += sign * h
        win += sign / b
        for z in range(n):
            if mask >> z & 1:
                drate[z] += sign * dh
                dwin[z] -= sign / (b * b)
    return inv_gbar * rate, inv_gbar * win, inv_gbar * drate, inv_gbar * dwin


def mm1_wait_exceed(interarrivals, services, deadline):
    """Count customers whose FIFO queueing wait exceeds ``deadline`` (Lindley recursion)."""
    w = 0.0
    count = 0
    n = len(interarrivals)
    for i in range(n):
        if i > 0:
            w = w + services[i - 1] - interarrivals[i]
            if w < 0.0:
                w = 0.0
        if w > deadline:
            count += 1
    return count


def saturated_slots(mode, n_links, link_off, gbar, beta, pair_off, pair_cum,
                    bits_per_use, expo, unif, out_bits):
    """Backlogged-buffer slot loop.

    ``mode`` 0 selects the link by weighted SNR (then a source per link
    cumulative table), mode 1 draws a (link, source) pair from a per-node
    cumulative table. ``out_bits`` is indexed by pair and accumulated in place.
    Pairs of node ``n`` link ``a`` live in ``pair_off[link_off[n] + a]`` ..
    ``pair_off[link_off[n] + a + 1]``.
    """
    n_slots, n_nodes = unif.shape[0], len(n_links)
    for s in range(n_slots):
        for n in range(n_nodes):
            base = link_off[n]
            nl = n_links[n]
            u = unif[s, n]
            if mode == 0:
                # exact ties have probability zero under continuous fading
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
                g = gbar[base + ja] * expo[s, n, ja]
            else:
                lo = pair_off[base]
                hi = pair_off[base + nl]
                p = _pick(pair_cum, lo, hi, u)
                if p < 0:
                    continue
                ja = _link_of(pair_off, base, nl, p)
                g = gbar[base + ja] * expo[s, n, ja]
            out_bits[p] += bits_per_use * math.log2(1.0 + g)


def _pick(cum, lo, hi, u):
    if hi <= lo or cum[hi - 1] <= 0.0:
        return -1
    target = u * cum[hi - 1]
    for p in range(lo, hi):
        if target < cum[p]:
            return p
    return hi - 1


def _link_of(pair_off, base, nl, p):
    for a in range(nl):
        if p < pair_off[base + a + 1]:
            return a
    return nl - 1


def closed_loop_slots(mode, t0, slot, bits_per_use, packet_bits,
                      n_links, link_off, gbar, beta, pair_off, pair_cum,
                      pair_src_q, pair_dst_q, pair_tokens_rate, tokens, token_cap,
                      q_deadline, q_head, q_count, q_resid, q_times, q_started,
                      arr_q, arr_times, expo, unif, stats, pair_rx, node_order):
    """Packet-level slot loop over one control period.

    Queues are ring buffers ``q_times[q, :]`` of per-node arrival times. The
    ``stats`` array accumulates, per queue: [arrived packets, dropped (deadline),
    dropped (overflow), delivered packets, transmitted packets]. ``pair_rx``
    accumulates bits fully received per pair (for arrival-rate estimates).
    Returns the index into ``arr_times`` reached.
    """
    n_slots = unif.shape[0]
    cap = q_times.shape[1]
    n_arr = len(arr_times)
    ai = 0
    for s in range(n_slots):
        now = t0 + s * slot
        # arrivals that occurred before this slot began
        while ai < n_arr and arr_times[ai] < now:
            q = arr_q[ai]
            _push(q, arr_times[ai], q_head, q_count, q_resid, q_times, q_started,
                  cap, packet_bits, stats)
            ai += 1
        # deadline expiry of packets that have not started transmission
        for q in range(len(q_count)):
            while q_count[q] > 0 and not q_started[q] and \
                    now - q_times[q, q_head[q]] > q_deadline[q]:
                q_head[q] = (q_head[q] + 1) % cap
                q_count[q] -= 1
                q_resid[q] = packet_bits
                stats[q, 1] += 1
            # a part-sent head stays; expire the waiting packets behind it
            while q_count[q] > 1 and q_started[q] and \
                    now - q_times[q, (q_head[q] + 1) % cap] > q_deadline[q]:
                nxt = (q_head[q] + 1) % cap
                q_times[q, nxt] = q_times[q, q_head[q]]
                q_head[q] = nxt
                q_count[q] -= 1
                stats[q, 1] += 1
        for p in range(len(tokens)):
            tokens[p] = min(tokens[p] + pair_tokens_rate[p], token_cap[p])
        for n in node_order:
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
            budget = bits_per_use * math.log2(1.0 + gbar[base + ja] * expo[s, n, ja])
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


def _push(q, t, q_head, q_count, q_resid, q_times, q_started, cap, packet_bits, stats):
    stats[q, 0] += 1
    if q_count[q] >= cap:
        stats[q, 2] += 1
        return
    if q_count[q] == 0:
        q_resid[q] = packet_bits
        q_started[q] = 0
    q_times[q, (q_head[q] + q_count[q]) % cap] = t
    q_count[q] += 1
