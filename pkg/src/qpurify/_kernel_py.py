"""Pure-numpy trajectory kernel (fallback for the compiled ``_kernel``).

Each step applies the exact measurement map for a record increment
``Y = dW + 2 z dt``. With ``C = cosh 2Y``, ``S = sinh 2Y`` and
``N = C + z S`` the Bloch coordinates and the two gaps update as::

    x <- x / N
    z <- (z C + S) / N
    a <- a / N**2        a = 1 - z**2
    w <- w / N**2        w = 1 - x**2 - z**2  (twice the linear entropy)

The gaps are carried explicitly so that states within 1e-16 of a pole keep
full relative precision. Under feedback the vector is then rotated onto +x.

First passage is detected when ``w`` drops to ``w_target``; the crossing
time inside the step is found by linear interpolation of the purity.
With ``bridge_u > 0`` (no-feedback runs starting on the z axis) a
Brownian-bridge test in ``u = artanh z`` also catches crossings that happen
between grid points.
"""

import numpy as np


def _abs_u(z, a):
    az = np.abs(z)
    return 0.5 * np.log((1.0 + az) * (1.0 + az) / a)


def advance(x, z, a, w, normals, uniforms, dt, feedback, w_target,
            bridge_u, a_near, steps_out, frac_out):
    m, n_steps = normals.shape
    if not (len(x) == len(z) == len(a) == len(w) == m):
        raise ValueError("state arrays must match the noise block rows")
    sqrt_dt = np.sqrt(dt)
    use_bridge = bridge_u > 0.0 and not feedback and uniforms is not None

    steps_out[:] = n_steps
    frac_out[:] = -1.0
    live = np.arange(m)
    xs, zs, as_, ws = x.copy(), z.copy(), a.copy(), w.copy()

    for k in range(n_steps):
        if live.size == 0:
            break
        xi, zi, ai, wi = xs[live], zs[live], as_[live], ws[live]
        y = sqrt_dt * normals[live, k] + 2.0 * zi * dt
        e = np.exp(2.0 * y)
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
            xn = np.sqrt(1.0 - wn)
            zn = np.zeros_like(zn)
            an = np.ones_like(an)

        hit = wn <= w_target
        frac = np.where(hit, 0.0, -1.0)
        if hit.any():
            frac[hit] = (wi[hit] - w_target) / (wi[hit] - wn[hit])

        if use_bridge:
            cand = (~hit) & (an <= a_near) & (ai <= a_near) & (zi * zn > 0.0)
            if cand.any():
                idx = np.nonzero(cand)[0]
                d0 = bridge_u - _abs_u(zi[idx], ai[idx])
                d1 = bridge_u - _abs_u(zn[idx], an[idx])
                ok = (d0 > 0.0) & (d1 > 0.0)
                p = np.exp(-d0 * d1 / (2.0 * dt))
                crossed = ok & (uniforms[live[idx], k] < p)
                if crossed.any():
                    hit[idx[crossed]] = True
                    frac[idx[crossed]] = 0.5

        xs[live], zs[live], as_[live], ws[live] = xn, zn, an, wn
        if hit.any():
            done = live[hit]
            steps_out[done] = k + 1
            frac_out[done] = frac[hit]
            live = live[~hit]

    x[:], z[:], a[:], w[:] = xs, zs, as_, ws
