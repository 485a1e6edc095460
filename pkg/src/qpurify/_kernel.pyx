# cython: language_level=3
"""Compiled trajectory kernel.

Mirrors :mod:`qpurify._kernel_py` operation for operation; see that module
for the update rule.
"""

from libc.math cimport exp, log, sqrt, fabs

import numpy as np


cdef inline double _abs_u(double z, double a) noexcept nogil:
    # |artanh z| from z and the gap a = 1 - z**2, accurate near the poles
    cdef double az = fabs(z)
    return 0.5 * log((1.0 + az) * (1.0 + az) / a)


def advance(double[::1] x, double[::1] z, double[::1] a, double[::1] w,
            const double[:, ::1] normals, const double[:, ::1] uniforms,
            double dt, bint feedback, double w_target,
            double bridge_u, double a_near,
            long long[::1] steps_out, double[::1] frac_out):
    cdef Py_ssize_t m = normals.shape[0]
    cdef Py_ssize_t n_steps = normals.shape[1]
    cdef Py_ssize_t i, k
    cdef double sqrt_dt = sqrt(dt)
    cdef double xi, zi, ai, wi, y, e, ei, c, s, nrm, inv2
    cdef double xn, zn, an, wn, d0, d1, p
    cdef bint use_bridge = bridge_u > 0.0 and not feedback and uniforms is not None

    if x.shape[0] != m or z.shape[0] != m or a.shape[0] != m or w.shape[0] != m:
        raise ValueError("state arrays must match the noise block rows")

    with nogil:
        for i in range(m):
            xi = x[i]
            zi = z[i]
            ai = a[i]
            wi = w[i]
            steps_out[i] = n_steps
            frac_out[i] = -1.0
            for k in range(n_steps):
                y = sqrt_dt * normals[i, k] + 2.0 * zi * dt
                e = exp(2.0 * y)
                ei = 1.0 / e
                c = 0.5 * (e + ei)
                s = 0.5 * (e - ei)
                nrm = c + zi * s
                inv2 = 1.0 / (nrm * nrm)
                xn = xi / nrm
                zn = (zi * c + s) / nrm
                an = ai * inv2
                wn = wi * inv2
                if feedback:
                    xn = sqrt(1.0 - wn)
                    zn = 0.0
                    an = 1.0
                if wn <= w_target:
                    steps_out[i] = k + 1
                    frac_out[i] = (wi - w_target) / (wi - wn)
                    xi = xn
                    zi = zn
                    ai = an
                    wi = wn
                    break
                if use_bridge and an <= a_near and ai <= a_near and zi * zn > 0.0:
                    d0 = bridge_u - _abs_u(zi, ai)
                    d1 = bridge_u - _abs_u(zn, an)
                    if d0 > 0.0 and d1 > 0.0:
                        p = exp(-d0 * d1 / (2.0 * dt))
                        if uniforms[i, k] < p:
                            steps_out[i] = k + 1
                            frac_out[i] = 0.5
                            xi = xn
                            zi = zn
                            ai = an
                            wi = wn
                            break
                xi = xn
                zi = zn
                ai = an
                wi = wn
            x[i] = xi
            z[i] = zi
            a[i] = ai
            w[i] = wi
