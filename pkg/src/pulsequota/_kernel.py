"""Compiled inner loops for the impulsive SDE.

Everything here is ``nopython``/``nogil`` so ensemble paths can run on
worker threads.  Growth laws are passed in flattened form
``(kind, params, table_x, table_y)``; ``RATE_FUNCTIONS[kind]``
is the matching compiled rate function; see :meth:`GrowthLaw.kernel_args`.
"""

import math

from numba import njit

LAW_LOGISTIC = 0
LAW_CONSTANT = 1
LAW_TABLE = 2
LAW_PLAIN_LOGISTIC = 3

MODE_GRID = 0
MODE_INTERPOLATE = 1
MODE_BRIDGE = 2

# float state slots
F_N = 0
F_ANCHOR = 1      # time of the last reset (or 0)
F_ENV_LO = 2
F_ENV_HI = 3
F_INTEGRAL = 4
F_SIZE = 5

# int state slots
I_STEPS_SINCE_ANCHOR = 0
I_GLOBAL_STEP = 1
I_CLOSURES = 2
I_CLAMPS = 3
I_ENV_STEPS = 4
I_ENV_VIOLATIONS = 5
I_ENV_ACTIVE = 6
I_DONE = 7
I_CONSUMED = 8
I_N_RECORDS = 9
I_N_EVENTS = 10
I_SIZE = 11


@njit(cache=True, nogil=True, inline="always")
def rate_logistic(params, tx, ty, n):
    y = n / params[1]
    if params[2] != 1.0:
        y = y ** params[2]
    x = 1.0 - y
    if params[3] == 1.0:
        return params[0] * x
    if x >= 0.0:
        return params[0] * x ** params[3]
    # sign-preserving power keeps r < 0 above K for any nu
    return -params[0] * (-x) ** params[3]


@njit(cache=True, nogil=True, inline="always")
def rate_plain_logistic(params, tx, ty, n):
    return params[0] * (1.0 - n / params[1])


@njit(cache=True, nogil=True, inline="always")
def rate_constant(params, tx, ty, n):
    return params[0]


@njit(cache=True, nogil=True, inline="always")
def rate_table(params, tx, ty, n):
    lo = 0
    hi = tx.shape[0] - 1
    if n <= tx[0]:
        return ty[0]
    if n >= tx[hi]:
        return ty[hi]
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if tx[mid] <= n:
            lo = mid
        else:
            hi = mid
    w = (n - tx[lo]) / (tx[hi] - tx[lo])
    return ty[lo] + w * (ty[hi] - ty[lo])


# one compiled stepper per law family; a runtime switch in the hot loop
# defeats LLVM's optimisation of the whole loop
RATE_FUNCTIONS = (rate_logistic, rate_constant, rate_table, rate_plain_logistic)


@njit(cache=True, nogil=True, inline="always")
def em_update(rate, params, tx, ty, sigma, n, dt, db, floor):
    """One Euler-Maruyama step; returns (new abundance, clamped flag)."""
    nxt = n + rate(params, tx, ty, n) * n * dt + sigma * n * db
    if nxt < floor:
        return floor, True
    return nxt, False


@njit(cache=True, nogil=True, inline="always")
def crossing_offset(n_prev, n_next, dt, k_plus, sigma, mode, u):
    """Return (crossed, offset into the step) for one step of length dt."""
    if n_next >= k_plus:
        if mode == MODE_GRID or n_next == k_plus:
            return True, dt
        return True, dt * (k_plus - n_prev) / (n_next - n_prev)
    if mode == MODE_BRIDGE and sigma > 0.0:
        var = sigma * sigma * n_prev * n_prev * dt
        p = math.exp(-2.0 * (k_plus - n_prev) * (k_plus - n_next) / var)
        if u < p:
            return True, 0.5 * dt
    return False, dt


@njit(cache=True, nogil=True)
def advance(rate, fs, ist, incs, unis, dt, params, tx, ty, sigma,
            k_plus, k_minus, mode, floor, t_max, max_closures, stride,
            rec_t, rec_n, rec_e, ev_t, ev_len,
            avg_from, env_lo_drift, env_hi_drift):
    """Step one path through a block of Brownian increments.

    Mutates ``fs``/``ist`` in place; recorded rows and events for this
    block land at the start of ``rec_*`` / ``ev_*`` with counts in
    ``ist[I_N_RECORDS]`` / ``ist[I_N_EVENTS]``.  ``stride == 0`` disables
    sample recording.  ``max_closures <= 0`` means unlimited.
    """
    n = fs[F_N]
    anchor = fs[F_ANCHOR]
    env_lo = fs[F_ENV_LO]
    env_hi = fs[F_ENV_HI]
    integral = fs[F_INTEGRAL]
    j = ist[I_STEPS_SINCE_ANCHOR]
    gstep = ist[I_GLOBAL_STEP]
    closures = ist[I_CLOSURES]
    clamps = ist[I_CLAMPS]
    env_steps = ist[I_ENV_STEPS]
    env_viol = ist[I_ENV_VIOLATIONS]
    env_active = ist[I_ENV_ACTIVE] == 1
    consumed = ist[I_CONSUMED]
    done = False
    n_rec = 0
    n_ev = 0
    ca = math.exp(env_lo_drift * dt)
    cb = math.exp(env_hi_drift * dt)
    stop = t_max + 1e-9 * dt
    use_u = mode == MODE_BRIDGE
    for i in range(incs.shape[0]):
        t_prev = anchor + j * dt
        if t_prev + dt > stop:
            done = True
            break
        db = incs[i]
        consumed += 1
        n_next, clamped = em_update(rate, params, tx, ty, sigma, n, dt, db, floor)
        if clamped:
            clamps += 1
        if t_prev >= avg_from:
            integral += 0.5 * (n + n_next) * dt
        u = unis[i] if use_u else 1.0
        crossed, off = crossing_offset(n, n_next, dt, k_plus, sigma, mode, u)
        gstep += 1
        if env_active:
            if crossed:
                env_active = False
            else:
                e = math.exp(sigma * db)
                env_lo *= ca * e
                env_hi *= cb * e
                env_steps += 1
                if not (env_lo <= n_next <= env_hi):
                    env_viol += 1
        if crossed:
            length = j * dt + off
            tc = anchor + length
            ev_t[n_ev] = tc
            ev_len[n_ev] = length
            n_ev += 1
            if stride > 0:
                rec_t[n_rec] = tc
                rec_n[n_rec] = k_plus
                rec_e[n_rec] = 1
                rec_t[n_rec + 1] = tc
                rec_n[n_rec + 1] = k_minus
                rec_e[n_rec + 1] = 0
                n_rec += 2
            n = k_minus
            anchor = tc
            j = 0
            closures += 1
            if max_closures > 0 and closures >= max_closures:
                done = True
                break
        else:
            n = n_next
            j += 1
            if stride > 0 and gstep % stride == 0:
                rec_t[n_rec] = anchor + j * dt
                rec_n[n_rec] = n
                rec_e[n_rec] = 0
                n_rec += 1
    fs[F_N] = n
    fs[F_ANCHOR] = anchor
    fs[F_ENV_LO] = env_lo
    fs[F_ENV_HI] = env_hi
    fs[F_INTEGRAL] = integral
    ist[I_STEPS_SINCE_ANCHOR] = j
    ist[I_GLOBAL_STEP] = gstep
    ist[I_CLOSURES] = closures
    ist[I_CLAMPS] = clamps
    ist[I_ENV_STEPS] = env_steps
    ist[I_ENV_VIOLATIONS] = env_viol
    ist[I_ENV_ACTIVE] = 1 if env_active else 0
    ist[I_CONSUMED] = consumed
    ist[I_DONE] = 1 if done else 0
    ist[I_N_RECORDS] = n_rec
    ist[I_N_EVENTS] = n_ev
