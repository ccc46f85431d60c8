"""The per-slot simulation loop, written once in nopython-compatible style.

This module must stay importable and runnable without numba: the package
exposes the same function either as-is (pure python) or wrapped in
``numba.njit``.  Keep it free of python objects, dicts and closures; only
scalars, numpy arrays and plain control flow are allowed.
"""

from __future__ import annotations

import numpy as np

# Mirrors model.MACHINE_* / KNOW_*; duplicated here as plain ints so the
# compiled function does not pull in the model module.
_BUSY = -1
_FREE = 0
_AMBIGUOUS = 0


def run_slots(
    horizon,
    n_users,
    arrival_rates,
    service_rates,
    flip_prob,
    post_busy_prob,
    max_age_sched,     # 0 -> randomized scheduling, 1 -> oldest-age scheduling
    sampling_table,    # (2^N,) sampling probability per active-set mask
    cum_schedule,      # (2^N, N) cumulative scheduling mass per mask
    saturated,         # bool: fixed active set, no queues/arrivals
    sat_mask,          # active-set mask used when saturated
    u_arrival,         # (T, N) uniforms, shape (0, 0) when saturated
    u_service,         # (T, N)
    u_flip,            # (T,)
    u_sampling,        # (T,)
    u_schedule,        # (T,)
    u_post,            # (T,)
    queues,            # (N,) int64, in/out
    ages,              # (N,) int64, in/out
    state0,            # machine state entering the first slot
    know0,             # knowledge state entering the first slot
    burn_in,           # slots at the start excluded from the sums below
    trace_stride,      # record total queue length every this many slots
    age_sum,           # (N,) float64 out: sum of ages over counted slots
    queue_sum,         # (N,) float64 out: sum of queue lengths over counted slots
    completions,       # (N,) int64 out: completions in counted slots
    arrivals,          # (N,) int64 out: arrivals in counted slots
    trace_total_queue, # (ceil(T / stride),) int64 out
):
    """Advance the system `horizon` slots; returns (samples, state, knowledge).

    Slot anatomy: (1) if the machine is not serving, look at the active set,
    maybe pay for a sample and, on Free, assign a user's job immediately;
    (2) record ages and queue lengths; (3) resolve service completion or the
    idle Free<->Busy flip; (4) admit arrivals; (5) advance ages, resetting a
    completed user to 1.  Machine state: -1 Busy, 0 Free, j+1 Serving user j.
    Knowledge: -1 Busy, 0 Ambiguous, j+1 Serving, -2 Known-Free.
    """
    state = state0
    know = know0
    samples = 0

    for t in range(horizon):
        counted = t >= burn_in

        # --- sampling decision and job assignment -------------------------
        if state < 1:
            if saturated:
                mask = sat_mask
            else:
                mask = 0
                for i in range(n_users):
                    if queues[i] > 0:
                        mask |= 1 << i
            if mask != 0 and u_sampling[t] < sampling_table[mask]:
                if counted:
                    samples += 1
                if state == _FREE:
                    if max_age_sched == 1:
                        j = -1
                        best = np.int64(-1)
                        for i in range(n_users):
                            if (mask >> i) & 1 and ages[i] > best:
                                best = ages[i]
                                j = i
                    else:
                        j = -1
                        r = u_schedule[t]
                        for i in range(n_users):
                            if (mask >> i) & 1:
                                j = i
                                if r < cum_schedule[mask, i]:
                                    break
                    if not saturated and queues[j] <= 0:
                        raise RuntimeError("scheduled a user with an empty queue")
                    state = j + 1
                    know = j + 1
                else:
                    know = _BUSY

        # --- per-slot records (state as seen this slot) --------------------
        if counted:
            for i in range(n_users):
                age_sum[i] += ages[i]
                queue_sum[i] += queues[i]
        if t % trace_stride == 0:
            total = np.int64(0)
            for i in range(n_users):
                total += queues[i]
            trace_total_queue[t // trace_stride] = total

        # --- service / idle transition -------------------------------------
        finished = -1
        if state >= 1:
            j = state - 1
            if u_service[t, j] < service_rates[j]:
                finished = j
                if counted:
                    completions[j] += 1
                if not saturated:
                    queues[j] -= 1
                state = _BUSY if u_post[t] < post_busy_prob else _FREE
                know = _AMBIGUOUS
        else:
            if u_flip[t] < flip_prob:
                state = _BUSY if state == _FREE else _FREE

        # --- arrivals -------------------------------------------------------
        if not saturated:
            for i in range(n_users):
                if u_arrival[t, i] < arrival_rates[i]:
                    queues[i] += 1
                    if counted:
                        arrivals[i] += 1

        # --- age bookkeeping --------------------------------------------------
        for i in range(n_users):
            ages[i] += 1
        if finished >= 0:
            ages[finished] = 1

    return samples, state, know
