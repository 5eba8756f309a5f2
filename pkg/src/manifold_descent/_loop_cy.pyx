# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-step integration loop for built-in quadratic objectives.

Mirrors _loop_py.run_loop: identical step arithmetic, recording, kick and
termination logic.  Build with -ffp-contract=off so that the elementwise
floating-point results match numpy's (no FMA contraction); trajectories are
then value-identical to the pure path for identity/diagonal Hessians.

Family modes:
    0  gd_flow    dx1 = -g
    1  linear2    dx2 = -c0*x2 - c1*H@x2 - c2*g   (heavy_ball/hbf/triple_momentum)
    2  pni        dx2 = -c1*Hv - c0*(x2 + c1*g)
    3  proposed   dx2 = pni + (-c0*x2 - g)
Schemes: 0 euler, 1 rk4.  Termination: 0 t_max, 1 grad_tol, 2 divergence.
"""

from libc.math cimport isfinite, sqrt


cdef inline void _grad(double[::1] out, double[::1] x,
                       bint use_dense, double[::1] d, double[:, ::1] dense,
                       bint has_b, double[::1] b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    if use_dense:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += dense[i, j] * x[j]
            out[i] = acc
    else:
        for i in range(n):
            out[i] = d[i] * x[i]
    if has_b:
        for i in range(n):
            out[i] = out[i] + b[i]


cdef inline void _hvp(double[::1] out, double[::1] v,
                      bint use_dense, double[::1] d, double[:, ::1] dense,
                      Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    if use_dense:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += dense[i, j] * v[j]
            out[i] = acc
    else:
        for i in range(n):
            out[i] = d[i] * v[i]


cdef inline void _rhs(int mode, double c0, double c1, double c2,
                      double[::1] x1, double[::1] x2,
                      double[::1] dx1, double[::1] dx2,
                      double[::1] g, double[::1] hv,
                      bint use_dense, double[::1] d, double[:, ::1] dense,
                      bint has_b, double[::1] b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double t1, t2
    _grad(g, x1, use_dense, d, dense, has_b, b, n)
    if mode == 0:
        for i in range(n):
            dx1[i] = -g[i]
        return
    for i in range(n):
        dx1[i] = x2[i]
    if mode == 1:
        if c1 != 0.0:
            _hvp(hv, x2, use_dense, d, dense, n)
            for i in range(n):
                dx2[i] = -c0 * x2[i] - c1 * hv[i] - c2 * g[i]
        else:
            for i in range(n):
                dx2[i] = -c0 * x2[i] - c2 * g[i]
    elif mode == 2:
        _hvp(hv, x2, use_dense, d, dense, n)
        for i in range(n):
            dx2[i] = -c1 * hv[i] - c0 * (x2[i] + c1 * g[i])
    else:
        _hvp(hv, x2, use_dense, d, dense, n)
        for i in range(n):
            t1 = -c1 * hv[i] - c0 * (x2[i] + c1 * g[i])
            t2 = -c0 * x2[i] - g[i]
            dx2[i] = t1 + t2


cdef inline void _axpy(double[::1] out, double[::1] x, double c, double[::1] k,
                       Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = x[i] + c * k[i]


cdef inline double _grad_norm(double[::1] g, double[::1] x,
                              bint use_dense, double[::1] d, double[:, ::1] dense,
                              bint has_b, double[::1] b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    _grad(g, x, use_dense, d, dense, has_b, b, n)
    for i in range(n):
        acc += g[i] * g[i]
    return sqrt(acc)


def run_loop(int mode, double c0, double c1, double c2,
             double[::1] d, double[:, ::1] dense, double[::1] b,
             double[::1] x1_0, double[::1] x2_0,
             int scheme, double h, long n_steps, double grad_tol, long record_every,
             double[:, ::1] kick1, double[:, ::1] kick2,
             double limit_sq,
             double[:, ::1] scratch,
             long[::1] rec_idx, double[:, ::1] rec_x1, double[:, ::1] rec_x2):
    """Fill rec_* with the recorded trajectory; return (n_rec, term, steps)."""
    cdef Py_ssize_t n = x1_0.shape[0]
    cdef bint use_dense = dense is not None
    cdef bint has_b = b is not None
    cdef bint second = mode != 0
    cdef bint has_k1 = kick1 is not None
    cdef bint has_k2 = kick2 is not None
    cdef bint rk4 = scheme == 1

    cdef double[::1] g = scratch[0]
    cdef double[::1] hv = scratch[1]
    cdef double[::1] x1 = scratch[2]
    cdef double[::1] x2 = scratch[3]
    cdef double[::1] k1a = scratch[4]
    cdef double[::1] k1b = scratch[5]
    cdef double[::1] k2a = scratch[6]
    cdef double[::1] k2b = scratch[7]
    cdef double[::1] k3a = scratch[8]
    cdef double[::1] k3b = scratch[9]
    cdef double[::1] k4a = scratch[10]
    cdef double[::1] k4b = scratch[11]
    cdef double[::1] ya = scratch[12]
    cdef double[::1] yb = scratch[13]
    cdef double[::1] na = scratch[14]
    cdef double[::1] nb = scratch[15]

    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    cdef Py_ssize_t i
    cdef long k, steps = 0, n_rec = 0
    cdef int term = 0
    cdef double ssq, comb

    for i in range(n):
        x1[i] = x1_0[i]
    if second:
        for i in range(n):
            x2[i] = x2_0[i]

    rec_idx[0] = 0
    for i in range(n):
        rec_x1[0, i] = x1[i]
        if second:
            rec_x2[0, i] = x2[i]
    n_rec = 1

    if _grad_norm(g, x1, use_dense, d, dense, has_b, b, n) <= grad_tol:
        return 1, 1, 0

    with nogil:
        for k in range(n_steps):
            _rhs(mode, c0, c1, c2, x1, x2, k1a, k1b, g, hv,
                 use_dense, d, dense, has_b, b, n)
            if rk4:
                _axpy(ya, x1, h2, k1a, n)
                if second:
                    _axpy(yb, x2, h2, k1b, n)
                _rhs(mode, c0, c1, c2, ya, yb, k2a, k2b, g, hv,
                     use_dense, d, dense, has_b, b, n)
                _axpy(ya, x1, h2, k2a, n)
                if second:
                    _axpy(yb, x2, h2, k2b, n)
                _rhs(mode, c0, c1, c2, ya, yb, k3a, k3b, g, hv,
                     use_dense, d, dense, has_b, b, n)
                _axpy(ya, x1, h, k3a, n)
                if second:
                    _axpy(yb, x2, h, k3b, n)
                _rhs(mode, c0, c1, c2, ya, yb, k4a, k4b, g, hv,
                     use_dense, d, dense, has_b, b, n)
                for i in range(n):
                    comb = k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i]
                    na[i] = x1[i] + h6 * comb
                if second:
                    for i in range(n):
                        comb = k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i]
                        nb[i] = x2[i] + h6 * comb
            else:
                _axpy(na, x1, h, k1a, n)
                if second:
                    _axpy(nb, x2, h, k1b, n)

            if has_k1:
                for i in range(n):
                    na[i] = na[i] + kick1[k, i]
            if has_k2:
                for i in range(n):
                    nb[i] = nb[i] + kick2[k, i]

            ssq = 0.0
            for i in range(n):
                ssq += na[i] * na[i]
            if second:
                for i in range(n):
                    ssq += nb[i] * nb[i]
            if not isfinite(ssq) or ssq > limit_sq:
                term = 2
                break

            for i in range(n):
                x1[i] = na[i]
            if second:
                for i in range(n):
                    x2[i] = nb[i]
            steps = k + 1

            if steps % record_every == 0:
                rec_idx[n_rec] = steps
                for i in range(n):
                    rec_x1[n_rec, i] = x1[i]
                    if second:
                        rec_x2[n_rec, i] = x2[i]
                n_rec += 1

            if _grad_norm(g, x1, use_dense, d, dense, has_b, b, n) <= grad_tol:
                term = 1
                break

    if rec_idx[n_rec - 1] != steps:
        rec_idx[n_rec] = steps
        for i in range(n):
            rec_x1[n_rec, i] = x1[i]
            if second:
                rec_x2[n_rec, i] = x2[i]
        n_rec += 1
    return n_rec, term, steps
