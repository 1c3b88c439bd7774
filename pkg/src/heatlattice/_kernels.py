"""Compiled hot loops (numba).

Everything here mirrors the pure-Python reference implementations in
:mod:`heatlattice.forward` and :mod:`heatlattice.dual`, draw for draw: the
same xoshiro256++ state layout, the same consumption order per event, the
same neighbor-code and packet-location encodings. The test suite pins kernel
runs against the Python reference on shared streams, so any drift between the
two implementations is caught as a position/energy mismatch.

Encodings
---------
* Neighbor codes: ``>= 0`` interior site index, ``-(b+1)`` bath index ``b``.
* Packet locations: ``c < nsites`` at site ``c``; ``nsites <= c <
  nsites+nbath`` at bath ``c - nsites``; otherwise carried by particle
  ``c - nsites - nbath``.
* Per forward event the stream is consumed as (particle, direction, p[,
  bath draw]); per dual event as (particle, direction[, q, q swap draws]).
"""

from __future__ import annotations

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# xoshiro256++ core (state: uint64[4], shared with heatlattice.rng.Rng)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _rotl(x, k):
    return np.uint64((x << k) | (x >> (np.uint64(64) - k)))


@njit(cache=True, inline="always")
def _next_u64(s):
    s0 = s[0]
    result = _rotl(s0 + s[3], np.uint64(23)) + s0
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], np.uint64(45))
    return result


@njit(cache=True, inline="always")
def _uniform(s):
    # 53-bit mantissa in [0, 1)
    return (_next_u64(s) >> np.uint64(11)) * 1.1102230246251565e-16


@njit(cache=True, inline="always")
def _randint(s, n):
    return np.int64(_uniform(s) * n)


@njit(cache=True, inline="always")
def _exponential(s, mean):
    return -np.log(1.0 - _uniform(s)) * mean


# ---------------------------------------------------------------------------
# forward chain
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _forward_event(s, nbr, bath_T, xi, eta, pos):
    """One embedded-chain event, no bookkeeping. Mutates xi/eta/pos."""
    M = eta.shape[0]
    twod = nbr.shape[1]
    k = _randint(s, M)
    v = pos[k]
    direction = _randint(s, twod)
    p = _uniform(s)
    code = nbr[v, direction]
    pooled = xi[v] + eta[k]
    if code >= 0:
        # recanonicalized so site + particle == pooled bitwise (Sterbenz)
        new_particle = pooled - p * pooled
        xi[v] = pooled - new_particle
        eta[k] = new_particle
        pos[k] = code
    else:
        xi[v] = p * pooled
        eta[k] = _exponential(s, bath_T[-code - 1])


@njit(cache=True, nogil=True)
def forward_burn(s, nbr, bath_T, xi, eta, pos, n_events):
    for _ in range(n_events):
        _forward_event(s, nbr, bath_T, xi, eta, pos)


@njit(cache=True, nogil=True)
def forward_sample(
    s,
    nbr,
    bath_T,
    xi,
    eta,
    pos,
    n_events,
    thin,
    batch_bounds,  # int64[B+1], cumulative event indices, batch_bounds[0] == 0
    batch_m,  # float64[B, 3, nsites] out: per-batch event-averages of xi^1..3
    rec_site_ids,  # int64[k1]; k1 == 0 disables the energy series
    rec_energy,  # float64[n_rec, k1]
    count_site_ids,  # int64[k2]; k2 == 0 disables the count series
    rec_counts,  # int32[n_rec, k2]
    joint_site,  # int64; -1 disables the joint record
    rec_joint,  # float64[n_rec, 2 + kmax]: count, xi, then eta slots
    site_counts,  # int64[nsites], must agree with pos on entry
    occ,  # int64[nsites] occupation accumulator
    occ_stride,  # int64; 0 disables snapshots
    bath_touch,  # int64[nbath]
    bath_in,  # float64[nbath]
    bath_out,  # float64[nbath]
):
    """Sampling window: run ``n_events`` events with full bookkeeping.

    Batch averages use a lazy flush: per site we remember the event index
    since which the current energy has been in place and integrate segment
    contributions only when the value changes (or at a batch boundary), so
    the per-event cost stays O(1) while the averages are exact event
    averages of the post-event states.
    """
    nsites, twod = nbr.shape
    M = eta.shape[0]
    nbatches = batch_m.shape[0]
    kmax = rec_joint.shape[1] - 2

    k1 = rec_site_ids.shape[0]
    k2 = count_site_ids.shape[0]

    acc = np.zeros((3, nsites), dtype=np.float64)
    last = np.ones(nsites, dtype=np.int64)  # current value counts from this event on
    batch = 0
    snapshots = 0

    for e in range(1, n_events + 1):
        k = _randint(s, M)
        v = pos[k]
        direction = _randint(s, twod)
        p = _uniform(s)
        code = nbr[v, direction]
        pooled = xi[v] + eta[k]

        # close the segment of the old value at site v: events last[v] .. e-1
        span = e - last[v]
        if span > 0:
            x = xi[v]
            acc[0, v] += x * span
            x2 = x * x
            acc[1, v] += x2 * span
            acc[2, v] += x2 * x * span
        last[v] = e

        if code >= 0:
            # recanonicalized so site + particle == pooled bitwise (Sterbenz)
            new_particle = pooled - p * pooled
            xi[v] = pooled - new_particle
            eta[k] = new_particle
            site_counts[v] -= 1
            site_counts[code] += 1
            pos[k] = code
        else:
            new_site = p * pooled
            b = -code - 1
            draw = _exponential(s, bath_T[b])
            bath_touch[b] += 1
            bath_out[b] += pooled - new_site
            bath_in[b] += draw
            xi[v] = new_site
            eta[k] = draw

        if thin > 0 and e % thin == 0:
            r = e // thin - 1
            if r < rec_energy.shape[0] and k1 > 0:
                for t in range(k1):
                    rec_energy[r, t] = xi[rec_site_ids[t]]
            if r < rec_counts.shape[0] and k2 > 0:
                for t in range(k2):
                    rec_counts[r, t] = np.int32(site_counts[count_site_ids[t]])
            if joint_site >= 0 and r < rec_joint.shape[0]:
                rec_joint[r, 0] = site_counts[joint_site]
                rec_joint[r, 1] = xi[joint_site]
                for t in range(kmax):
                    rec_joint[r, 2 + t] = np.nan
                slot = 0
                for j in range(M):
                    if pos[j] == joint_site and slot < kmax:
                        rec_joint[r, 2 + slot] = eta[j]
                        slot += 1

        if occ_stride > 0 and e % occ_stride == 0:
            for j in range(M):
                occ[pos[j]] += 1
            snapshots += 1

        if batch < nbatches and e == batch_bounds[batch + 1]:
            # flush every site through event e, then bank the batch averages
            start = batch_bounds[batch]
            length = float(e - start)
            for v2 in range(nsites):
                span2 = e - last[v2] + 1
                if span2 > 0:
                    x = xi[v2]
                    acc[0, v2] += x * span2
                    x2 = x * x
                    acc[1, v2] += x2 * span2
                    acc[2, v2] += x2 * x * span2
                last[v2] = e + 1
                for m in range(3):
                    batch_m[batch, m, v2] = acc[m, v2] / length
                    acc[m, v2] = 0.0
            batch += 1

    return snapshots


# ---------------------------------------------------------------------------
# dual packet chain
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _dual_event(s, nbr, loc, pos, buf, nsites, nbath):
    """One dual-chain event. Returns (pool size, packets absorbed)."""
    M = pos.shape[0]
    twod = nbr.shape[1]
    N = loc.shape[0]
    j = _randint(s, M)
    direction = _randint(s, twod)
    v = pos[j]
    code = nbr[v, direction]
    carried_code = nsites + nbath + j

    if code >= 0:
        w = code
        pos[j] = w
        n = 0
        for i in range(N):
            if loc[i] == carried_code:
                buf[n] = i
                n += 1
        for i in range(N):
            if loc[i] == w:
                buf[n] = i
                n += 1
        if n > 0:
            q = _randint(s, n + 1)
            for t in range(q):
                r = t + _randint(s, n - t)
                tmp = buf[t]
                buf[t] = buf[r]
                buf[r] = tmp
            for t in range(q):
                loc[buf[t]] = w
            for t in range(q, n):
                loc[buf[t]] = carried_code
        return n, 0

    bath_code = nsites + (-code - 1)
    absorbed = 0
    for i in range(N):
        if loc[i] == carried_code:
            loc[i] = bath_code
            absorbed += 1
    n = 0
    for i in range(N):
        if loc[i] == v:
            buf[n] = i
            n += 1
    if n > 0:
        q = _randint(s, n + 1)
        for t in range(q):
            r = t + _randint(s, n - t)
            tmp = buf[t]
            buf[t] = buf[r]
            buf[r] = tmp
        for t in range(q, n):
            loc[buf[t]] = carried_code
    return n, absorbed


@njit(cache=True, nogil=True)
def dual_steps(s, nbr, loc, pos, n_steps, nsites, nbath):
    buf = np.empty(loc.shape[0], dtype=np.int64)
    for _ in range(n_steps):
        _dual_event(s, nbr, loc, pos, buf, nsites, nbath)


@njit(cache=True, nogil=True)
def dual_absorb(s, nbr, loc, pos, nsites, nbath, step_cap):
    """Run until every packet sits at a bath vertex. Returns steps, or -1 at cap."""
    N = loc.shape[0]
    buf = np.empty(N, dtype=np.int64)
    free = 0
    for i in range(N):
        if not (nsites <= loc[i] < nsites + nbath):
            free += 1
    steps = 0
    while free > 0:
        if steps >= step_cap:
            return np.int64(-1)
        _, absorbed = _dual_event(s, nbr, loc, pos, buf, nsites, nbath)
        free -= absorbed
        steps += 1
    return steps


@njit(cache=True, nogil=True)
def init_positions_uniform(s, pos, nsites):
    for j in range(pos.shape[0]):
        pos[j] = _randint(s, nsites)


@njit(cache=True, nogil=True)
def init_positions_restricted(s, pos, nsites, site, count):
    """Uniform over position tuples with exactly ``count`` particles at ``site``.

    A uniform ``count``-subset of particles is pinned to the site; the rest
    are placed uniformly over the remaining sites.
    """
    M = pos.shape[0]
    idx = np.empty(M, dtype=np.int64)
    for j in range(M):
        idx[j] = j
    for t in range(count):
        r = t + _randint(s, M - t)
        tmp = idx[t]
        idx[t] = idx[r]
        idx[r] = tmp
    for t in range(M):
        if t < count:
            pos[idx[t]] = site
        else:
            r = _randint(s, nsites - 1)
            pos[idx[t]] = r if r < site else r + 1


@njit(cache=True, nogil=True)
def dual_absorb_replicas(
    states,  # uint64[R, 4], one stream per replica (mutated)
    nbr,
    loc0,  # int64[N] initial packet locations (template)
    M,
    nsites,
    nbath,
    step_cap,
    out_loc,  # int64[R, N] final locations
):
    """Independent absorption runs; uniform particle initialization."""
    R = states.shape[0]
    N = loc0.shape[0]
    pos = np.empty(M, dtype=np.int64)
    loc = np.empty(N, dtype=np.int64)
    for r in range(R):
        s = states[r]
        init_positions_uniform(s, pos, nsites)
        for i in range(N):
            loc[i] = loc0[i]
        steps = dual_absorb(s, nbr, loc, pos, nsites, nbath, step_cap)
        if steps < 0:
            return np.int64(r)  # caller raises
        for i in range(N):
            out_loc[r, i] = loc[i]
    return np.int64(-1)


@njit(cache=True, nogil=True)
def sticking_episodes(
    s,
    nbr,
    start_site,
    M,
    nsites,
    nbath,
    n_episodes,
    out,  # int64[n_episodes]: kappa, or -1 for "never separated" (joint absorption)
    step_cap,
):
    """Collect sticking episodes of a packet pair started together.

    Runs two-packet dual chains (fresh replica once both packets are
    absorbed). Whenever the projected locations coincide at a non-bath
    location an episode begins; every event whose pool touches a packet
    counts as one collapsed step, and the episode closes when the
    projections differ (kappa recorded) or the pair is jointly absorbed (-1).
    Returns the number of episodes recorded (== n_episodes unless the global
    step cap intervened).
    """
    pos = np.empty(M, dtype=np.int64)
    loc = np.empty(2, dtype=np.int64)
    buf = np.empty(2, dtype=np.int64)
    filled = 0
    total_steps = 0
    carried_base = nsites + nbath

    while filled < n_episodes and total_steps < step_cap:
        # fresh replica: both packets at the start site, uniform particles
        init_positions_uniform(s, pos, nsites)
        loc[0] = start_site
        loc[1] = start_site
        active = True
        kappa = 0

        while total_steps < step_cap:
            pooled, absorbed = _dual_event(s, nbr, loc, pos, buf, nsites, nbath)
            total_steps += 1
            touched = pooled > 0 or absorbed > 0
            if not touched:
                continue

            at_bath0 = nsites <= loc[0] < carried_base
            at_bath1 = nsites <= loc[1] < carried_base
            proj0 = pos[loc[0] - carried_base] if loc[0] >= carried_base else loc[0]
            proj1 = pos[loc[1] - carried_base] if loc[1] >= carried_base else loc[1]

            if active:
                kappa += 1
                if at_bath0 and at_bath1:
                    # joint absorption: the projections never separated
                    out[filled] = -1
                    filled += 1
                    active = False
                elif proj0 != proj1:
                    out[filled] = kappa
                    filled += 1
                    active = False
                if filled >= n_episodes:
                    break
            else:
                if proj0 == proj1 and not (at_bath0 or at_bath1):
                    active = True
                    kappa = 0
            if at_bath0 or at_bath1:
                break  # an absorbed packet can never re-stick; replica done
    return filled


# ---------------------------------------------------------------------------
# duality check (both sides share the F evaluator)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _f_eval(loc, xi, eta, bath_T, nsites, nbath):
    """Duality observable: product over packets with factorial weights.

    Packets sharing a site or particle contribute base/(m+1) for the m-th
    repeat, assembling x^n / n! without computing factorials. Absorbed
    packets contribute the plain temperature (T^n, no factorial).
    """
    N = loc.shape[0]
    f = 1.0
    for i in range(N):
        c = loc[i]
        if nsites <= c < nsites + nbath:
            f *= bath_T[c - nsites]
            continue
        m = 0
        for i2 in range(i):
            if loc[i2] == c:
                m += 1
        base = xi[c] if c < nsites else eta[c - nsites - nbath]
        f *= base / (m + 1)
    return f


@njit(cache=True, nogil=True)
def duality_forward_side(
    s, nbr, bath_T, xi0, eta0, loc_star, t_events, out
):
    """Replicated forward runs; F(fixed packets, evolved energies)."""
    nsites = nbr.shape[0]
    nbath = bath_T.shape[0]
    M = eta0.shape[0]
    xi = np.empty(nsites, dtype=np.float64)
    eta = np.empty(M, dtype=np.float64)
    pos = np.empty(M, dtype=np.int64)
    for r in range(out.shape[0]):
        for v in range(nsites):
            xi[v] = xi0[v]
        for j in range(M):
            eta[j] = eta0[j]
        init_positions_uniform(s, pos, nsites)
        for _ in range(t_events):
            _forward_event(s, nbr, bath_T, xi, eta, pos)
        out[r] = _f_eval(loc_star, xi, eta, bath_T, nsites, nbath)


@njit(cache=True, nogil=True)
def duality_dual_side(
    s, nbr, bath_T, xi_star, eta_star, loc0, t_events, out
):
    """Replicated dual runs; F(evolved packets, fixed energies)."""
    nsites = nbr.shape[0]
    nbath = bath_T.shape[0]
    M = eta_star.shape[0]
    N = loc0.shape[0]
    loc = np.empty(N, dtype=np.int64)
    buf = np.empty(N, dtype=np.int64)
    pos = np.empty(M, dtype=np.int64)
    for r in range(out.shape[0]):
        for i in range(N):
            loc[i] = loc0[i]
        init_positions_uniform(s, pos, nsites)
        for _ in range(t_events):
            _dual_event(s, nbr, loc, pos, buf, nsites, nbath)
        out[r] = _f_eval(loc, xi_star, eta_star, bath_T, nsites, nbath)


# ---------------------------------------------------------------------------
# harmonic reference
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def gauss_seidel(nbr, bath_vals, u, tol, max_sweeps):
    """In-place Gauss-Seidel for the mean-value system. Returns (sweeps, residual).

    sweeps == -1 signals the cap was hit before the residual met tol.
    """
    nsites, twod = nbr.shape
    inv = 1.0 / twod
    res = np.inf
    for sweep in range(max_sweeps):
        for i in range(nsites):
            acc = 0.0
            for k in range(twod):
                c = nbr[i, k]
                acc += u[c] if c >= 0 else bath_vals[-c - 1]
            u[i] = acc * inv
        res = 0.0
        for i in range(nsites):
            acc = 0.0
            for k in range(twod):
                c = nbr[i, k]
                acc += u[c] if c >= 0 else bath_vals[-c - 1]
            diff = abs(u[i] - acc * inv)
            if diff > res:
                res = diff
        if res <= tol:
            return np.int64(sweep + 1), res
    return np.int64(-1), res


@njit(cache=True, nogil=True)
def ssrw_hit_values(s, nbr, bath_T, start, out):
    """Independent SSRWs from ``start``; records T at the first bath hit."""
    for r in range(out.shape[0]):
        i = start
        while True:
            code = nbr[i, _randint(s, nbr.shape[1])]
            if code >= 0:
                i = code
            else:
                out[r] = bath_T[-code - 1]
                break
