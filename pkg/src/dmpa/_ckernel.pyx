# Compiled simulation kernel. Statement-for-statement twin of _pykernel.py;
# the two must consume uniforms identically so seeds reproduce across backends.
cimport cython
from libc.stdint cimport int64_t

cdef enum:
    DONE = 0
    NEED_MORE = 1
    DEGENERATE = 2

cdef enum:
    NODES = 0
    EDGES = 1
    RED = 2
    DIN_RED = 3
    DOUT_RED = 4
    EV1 = 5
    EV2 = 6
    EV3 = 7
    REJ = 8
    RESAMPLE = 9

cdef enum:
    L_EVENT = 0
    L_NEW = 1
    L_SRC = 2
    L_DST = 3
    L_REJ = 4
    L_STEP_REJ = 5
    L_STEP_RESAMPLE = 6
    L_ATTEMPTS = 7


@cython.boundscheck(False)
@cython.wraparound(False)
cdef inline int64_t _pick(double u, const int64_t[::1] ends, int64_t m, int64_t n,
                          double delta) noexcept nogil:
    cdef double x = u * (m + n * delta)
    cdef int64_t j
    if x < m:
        j = <int64_t>x
        if j >= m:
            j = m - 1
        return ends[j]
    j = <int64_t>((x - m) / delta)
    if j >= n:
        j = n - 1
    return j


def pick(double u, const int64_t[::1] ends, int64_t m, int64_t n, double delta):
    return _pick(u, ends, m, n, delta)


@cython.boundscheck(False)
@cython.wraparound(False)
def sample_batch(const double[::1] u, const int64_t[::1] ends, int64_t m, int64_t n,
                 double delta, int64_t[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(u.shape[0]):
            out[i] = _pick(u[i], ends, m, n, delta)


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def run_steps(int64_t n_steps, const double[::1] u, int64_t pos,
              signed char[::1] color, int64_t[::1] din, int64_t[::1] dout,
              int64_t[::1] esrc, int64_t[::1] edst, int64_t[::1] ctr,
              const double[::1] params, const double[::1] acc,
              int64_t max_rej, int64_t[::1] last):
    cdef int64_t L = u.shape[0]
    cdef double r = params[0], p = params[1], q = params[2]
    cdef double d_in = params[3], d_out = params[4]
    cdef double pq = p + q
    cdef int64_t n = ctr[NODES], m = ctr[EDGES]
    cdef int64_t n_red = ctr[RED], din_red = ctr[DIN_RED], dout_red = ctr[DOUT_RED]
    cdef int64_t ev1 = ctr[EV1], ev2 = ctr[EV2], ev3 = ctr[EV3]
    cdef int64_t rej_total = ctr[REJ], resample_total = ctr[RESAMPLE]
    cdef int64_t done = 0, start, fails, step_rej, attempts = 0
    cdef int64_t ev = 0, c = 0, src = 0, dst = 0, new
    cdef int status = DONE
    cdef bint accepted
    cdef double ue, ua, a, mass, w_in_r, w_in_b, w_out_r, w_out_b

    with nogil:
        while done < n_steps:
            start = pos
            fails = 0
            step_rej = 0
            accepted = False
            while True:
                if pos >= L:
                    status = NEED_MORE
                    break
                ue = u[pos]
                pos += 1
                if ue < p:
                    ev = 1
                elif ue < pq:
                    ev = 2
                else:
                    ev = 3
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
                            src = _pick(u[pos], esrc, m, n, d_out)
                            dst = _pick(u[pos + 1], edst, m, n, d_in)
                            a = acc[8 + color[dst] * 2 + color[src]]
                            ua = u[pos + 2]
                            pos += 3
                        else:
                            if pos + 2 > L:
                                status = NEED_MORE
                                break
                            if ev == 1:
                                dst = _pick(u[pos], edst, m, n, d_in)
                                a = acc[color[dst] * 2 + c]
                            else:
                                src = _pick(u[pos], esrc, m, n, d_out)
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
                color[n] = <signed char>c
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
            if ev == 1:
                ev1 += 1
            elif ev == 2:
                ev2 += 1
            else:
                ev3 += 1
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

    ctr[NODES] = n
    ctr[EDGES] = m
    ctr[RED] = n_red
    ctr[DIN_RED] = din_red
    ctr[DOUT_RED] = dout_red
    ctr[EV1] = ev1
    ctr[EV2] = ev2
    ctr[EV3] = ev3
    ctr[REJ] = rej_total
    ctr[RESAMPLE] = resample_total
    return status, done, pos
