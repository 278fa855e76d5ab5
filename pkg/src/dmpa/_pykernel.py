"""Pure-Python simulation kernel.

Mirrors ``_ckernel.pyx`` statement for statement: both consume the same stream
of uniforms in the same order, so for a given seed the two backends produce
identical graphs. Keep the two files in lockstep.
"""

DONE = 0
NEED_MORE = 1
DEGENERATE = 2

# counter slots
NODES, EDGES, RED, DIN_RED, DOUT_RED, EV1, EV2, EV3, REJ, RESAMPLE = range(10)
N_COUNTERS = 10
# last-event slots
L_EVENT, L_NEW, L_SRC, L_DST, L_REJ, L_STEP_REJ, L_STEP_RESAMPLE, L_ATTEMPTS = range(8)
N_LAST = 8


def pick(u, ends, m, n, delta):
    """Node drawn with weight ``degree + delta`` from one uniform.

    With probability ``m / (m + n*delta)`` take the endpoint of a uniform edge
    (``ends`` holds edge targets for in-degree, sources for out-degree), else a
    uniform node.
    """
    x = u * (m + n * delta)
    if x < m:
        j = int(x)
        if j >= m:
            j = m - 1
        return ends[j]
    j = int((x - m) / delta)
    if j >= n:
        j = n - 1
    return j


def sample_batch(u, ends, m, n, delta, out):
    for i in range(len(u)):
        out[i] = pick(u[i], ends, m, n, delta)


def run_steps(n_steps, u, pos, color, din, dout, esrc, edst, ctr, params, acc, max_rej, last):
    """Advance up to ``n_steps`` steps; returns ``(status, steps_done, pos)``.

    State is only mutated when a step completes, so ``NEED_MORE`` (uniforms
    exhausted) and ``DEGENERATE`` leave the graph exactly as it was at the
    start of the offending step with ``pos`` rewound to that step.
    """
    L = len(u)
    r, p, q, d_in, d_out = params[0], params[1], params[2], params[3], params[4]
    pq = p + q
    n, m = ctr[NODES], ctr[EDGES]
    n_red, din_red, dout_red = ctr[RED], ctr[DIN_RED], ctr[DOUT_RED]
    ev_count = [0, ctr[EV1], ctr[EV2], ctr[EV3]]
    rej_total, resample_total = ctr[REJ], ctr[RESAMPLE]
    done = 0
    status = DONE

    while done < n_steps:
        start = pos
        fails = 0
        step_rej = 0
        accepted = False
        ev = c = src = dst = new = 0
        attempts = 0
        while True:
            if pos >= L:
                status = NEED_MORE
                break
            ue = u[pos]
            pos += 1
            ev = 1 if ue < p else (2 if ue < pq else 3)
            c = 0
            if ev != 3:
                if pos >= L:
                    status = NEED_MORE
                    break
                c = 1 if u[pos] < r else 0
                pos += 1

            w_in_r = din_red + n_red * d_in
            w_in_b = (m - din_red) + (n - n_red) * d_in
            w_out_r = dout_red + n_red * d_out
            w_out_b = (m - dout_red) + (n - n_red) * d_out
            if ev == 1:
                mass = acc[2 + c] * w_in_r + acc[c] * w_in_b
            elif ev == 2:
                mass = acc[4 + c * 2 + 1] * w_out_r + acc[4 + c * 2] * w_out_b
            else:
                mass = (acc[8 + 3] * w_in_r * w_out_r + acc[8 + 2] * w_in_r * w_out_b
                        + acc[8 + 1] * w_in_b * w_out_r + acc[8] * w_in_b * w_out_b)

            attempts = 0
            if mass > 0.0:
                while attempts < max_rej:
                    if ev == 3:
                        if pos + 3 > L:
                            status = NEED_MORE
                            break
                        src = pick(u[pos], esrc, m, n, d_out)
                        dst = pick(u[pos + 1], edst, m, n, d_in)
                        a = acc[8 + color[dst] * 2 + color[src]]
                        ua = u[pos + 2]
                        pos += 3
                    else:
                        if pos + 2 > L:
                            status = NEED_MORE
                            break
                        if ev == 1:
                            dst = pick(u[pos], edst, m, n, d_in)
                            a = acc[color[dst] * 2 + c]
                        else:
                            src = pick(u[pos], esrc, m, n, d_out)
                            a = acc[4 + c * 2 + color[src]]
                        ua = u[pos + 1]
                        pos += 2
                    if ua < a:
                        accepted = True
                        break
                    attempts += 1
                if status != DONE:
                    break
                step_rej += attempts
            if accepted:
                break
            fails += 1
            if fails >= max_rej:
                status = DEGENERATE
                break

        if status != DONE:
            pos = start
            last[L_EVENT] = ev
            last[L_ATTEMPTS] = attempts
            break

        new = -1
        if ev != 3:
            new = n
            color[n] = c
            din[n] = 0
            dout[n] = 0
            n += 1
            n_red += c
            if ev == 1:
                src = new
            else:
                dst = new
        esrc[m] = src
        edst[m] = dst
        m += 1
        dout[src] += 1
        din[dst] += 1
        if color[src]:
            dout_red += 1
        if color[dst]:
            din_red += 1
        ev_count[ev] += 1
        rej_total += step_rej
        resample_total += fails
        last[L_EVENT] = ev
        last[L_NEW] = new
        last[L_SRC] = src
        last[L_DST] = dst
        last[L_REJ] = attempts
        last[L_STEP_REJ] = step_rej
        last[L_STEP_RESAMPLE] = fails
        last[L_ATTEMPTS] = attempts
        done += 1

    ctr[NODES], ctr[EDGES] = n, m
    ctr[RED], ctr[DIN_RED], ctr[DOUT_RED] = n_red, din_red, dout_red
    ctr[EV1], ctr[EV2], ctr[EV3] = ev_count[1], ev_count[2], ev_count[3]
    ctr[REJ], ctr[RESAMPLE] = rej_total, resample_total
    return status, done, pos
