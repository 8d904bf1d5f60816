"""Compiled RK4 stepping for the coupled cavity + mode-pair equations."""

import numpy as np
from numba import jit


@jit(nopython=True, cache=True)
def derivatives(x, p, U, V, drive, coupled, ck, sk, j0, bx, g, kappa, dc, n, dU, dV):
    """Fill ``dU, dV`` and return ``(dx, dp)``.

    ``drive`` is the cavity drive eps when ``coupled`` and the transverse
    field itself otherwise (the cavity is then frozen).
    """
    m = U.size
    if coupled:
        b = bx - g * x
    else:
        b = drive
    occ = 0.0
    for i in range(m):
        occ += V[i].real * V[i].real + V[i].imag * V[i].imag
    if coupled:
        big_x = n - 4.0 * occ
        dx = -dc * p - 0.5 * kappa * x
        dp = dc * x - 0.5 * kappa * p + 2.0 * (drive - g * big_x)
    else:
        dx = 0.0
        dp = 0.0
    for i in range(m):
        a = 2.0 * (b - j0 * ck[i])
        c = 2.0 * j0 * sk[i]
        u = U[i]
        v = V[i]
        # i d/dt (U, V) = [[-a, -c], [-c, a]] (U, V)
        dU[i] = 1j * (a * u + c * v)
        dV[i] = 1j * (c * u - a * v)
    return dx, dp


@jit(nopython=True, cache=True)
def _rotate(cs, sn, nx, nz, U, V, outU, outV):
    """out = exp(i phi (nx sx + nz sz)) (U, V) given cos(phi), sin(phi)."""
    for i in range(U.size):
        u = U[i]
        v = V[i]
        outU[i] = complex(cs[i], sn[i] * nz[i]) * u + complex(0.0, sn[i] * nx[i]) * v
        outV[i] = complex(0.0, sn[i] * nx[i]) * u + complex(cs[i], -sn[i] * nz[i]) * v


@jit(nopython=True, cache=True)
def _residual(x, p, U, V, drive, coupled, b_ref, j0, bx, g, kappa, dc, n, dU, dV):
    """Cavity derivative and the spin generator minus its frozen part at ``b_ref``."""
    m = U.size
    if coupled:
        b = bx - g * x
        occ = 0.0
        for i in range(m):
            occ += V[i].real * V[i].real + V[i].imag * V[i].imag
        big_x = n - 4.0 * occ
        dx = -dc * p - 0.5 * kappa * x
        dp = dc * x - 0.5 * kappa * p + 2.0 * (drive - g * big_x)
    else:
        b = drive
        dx = 0.0
        dp = 0.0
    w = 2.0 * (b - b_ref)
    for i in range(m):
        dU[i] = 1j * w * U[i]
        dV[i] = -1j * w * V[i]
    return dx, dp


@jit(nopython=True, cache=True)
def advance(x, p, U, V, t0, dt, steps_per_sample, knot_t, knot_v, coupled, lawson,
            ck, sk, j0, bx, g, kappa, dc, n):
    """Integrate in place, recording one sample after each block of steps.

    With ``lawson`` the spins are stepped by RK4 in the interaction picture
    of the generator frozen at the start of each step (integrating-factor
    RK4); the frozen part is applied as an exact 2x2 rotation. Otherwise
    plain RK4 is used on the full equations.

    Returns ``(x, p, steps_done, t, drive, xs, ps, Us, Vs)``.
    """
    m = U.size
    ns = steps_per_sample.size
    out_t = np.empty(ns)
    out_d = np.empty(ns)
    out_x = np.empty(ns)
    out_p = np.empty(ns)
    out_U = np.empty((ns, m), dtype=np.complex128)
    out_V = np.empty((ns, m), dtype=np.complex128)
    k1U = np.empty(m, dtype=np.complex128)
    k2U = np.empty_like(k1U)
    k3U = np.empty_like(k1U)
    k4U = np.empty_like(k1U)
    k1V = np.empty_like(k1U)
    k2V = np.empty_like(k1U)
    k3V = np.empty_like(k1U)
    k4V = np.empty_like(k1U)
    tU = np.empty_like(k1U)
    tV = np.empty_like(k1U)
    aU = np.empty_like(k1U)
    aV = np.empty_like(k1U)
    cs = np.empty(m)
    sn = np.empty(m)
    nx = np.empty(m)
    nz = np.empty(m)
    step = 0
    half = 0.5 * dt
    sixth = dt / 6.0
    for s in range(ns):
        for _ in range(steps_per_sample[s]):
            t = t0 + step * dt
            d0 = np.interp(t, knot_t, knot_v)
            dh = np.interp(t + half, knot_t, knot_v)
            d1 = np.interp(t + dt, knot_t, knot_v)
            if not lawson:
                k1x, k1p = derivatives(x, p, U, V, d0, coupled, ck, sk, j0, bx, g, kappa, dc, n, k1U, k1V)
                for i in range(m):
                    tU[i] = U[i] + half * k1U[i]
                    tV[i] = V[i] + half * k1V[i]
                k2x, k2p = derivatives(x + half * k1x, p + half * k1p, tU, tV, dh, coupled,
                                       ck, sk, j0, bx, g, kappa, dc, n, k2U, k2V)
                for i in range(m):
                    tU[i] = U[i] + half * k2U[i]
                    tV[i] = V[i] + half * k2V[i]
                k3x, k3p = derivatives(x + half * k2x, p + half * k2p, tU, tV, dh, coupled,
                                       ck, sk, j0, bx, g, kappa, dc, n, k3U, k3V)
                for i in range(m):
                    tU[i] = U[i] + dt * k3U[i]
                    tV[i] = V[i] + dt * k3V[i]
                k4x, k4p = derivatives(x + dt * k3x, p + dt * k3p, tU, tV, d1, coupled,
                                       ck, sk, j0, bx, g, kappa, dc, n, k4U, k4V)
                for i in range(m):
                    U[i] += sixth * (k1U[i] + 2.0 * k2U[i] + 2.0 * k3U[i] + k4U[i])
                    V[i] += sixth * (k1V[i] + 2.0 * k2V[i] + 2.0 * k3V[i] + k4V[i])
            else:
                b_ref = bx - g * x if coupled else d0
                # frozen generator i (a sz + c sx) = i eps (nz sz + nx sx); half-step rotation
                for i in range(m):
                    a = 2.0 * (b_ref - j0 * ck[i])
                    c = 2.0 * j0 * sk[i]
                    w = np.sqrt(a * a + c * c)
                    cs[i] = np.cos(w * half)
                    sn[i] = np.sin(w * half)
                    nx[i] = c / w
                    nz[i] = a / w
                k1x, k1p = _residual(x, p, U, V, d0, coupled, b_ref, j0, bx, g, kappa, dc, n, k1U, k1V)
                _rotate(cs, sn, nx, nz, U, V, aU, aV)
                for i in range(m):
                    tU[i] = U[i] + half * k1U[i]
                    tV[i] = V[i] + half * k1V[i]
                _rotate(cs, sn, nx, nz, tU, tV, tU, tV)
                k2x, k2p = _residual(x + half * k1x, p + half * k1p, tU, tV, dh, coupled, b_ref,
                                     j0, bx, g, kappa, dc, n, k2U, k2V)
                for i in range(m):
                    tU[i] = aU[i] + half * k2U[i]
                    tV[i] = aV[i] + half * k2V[i]
                k3x, k3p = _residual(x + half * k2x, p + half * k2p, tU, tV, dh, coupled, b_ref,
                                     j0, bx, g, kappa, dc, n, k3U, k3V)
                for i in range(m):
                    tU[i] = aU[i] + dt * k3U[i]
                    tV[i] = aV[i] + dt * k3V[i]
                _rotate(cs, sn, nx, nz, tU, tV, tU, tV)
                k4x, k4p = _residual(x + dt * k3x, p + dt * k3p, tU, tV, d1, coupled, b_ref,
                                     j0, bx, g, kappa, dc, n, k4U, k4V)
                # y1 = R (R (y + h/6 k1) + h/3 (k2 + k3)) + h/6 k4, R the half-step rotation
                for i in range(m):
                    tU[i] = U[i] + sixth * k1U[i]
                    tV[i] = V[i] + sixth * k1V[i]
                _rotate(cs, sn, nx, nz, tU, tV, tU, tV)
                for i in range(m):
                    tU[i] += 2.0 * sixth * (k2U[i] + k3U[i])
                    tV[i] += 2.0 * sixth * (k2V[i] + k3V[i])
                _rotate(cs, sn, nx, nz, tU, tV, U, V)
                for i in range(m):
                    U[i] += sixth * k4U[i]
                    V[i] += sixth * k4V[i]
            x += sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            p += sixth * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            step += 1
        t = t0 + step * dt
        out_t[s] = t
        out_d[s] = np.interp(t, knot_t, knot_v)
        out_x[s] = x
        out_p[s] = p
        for i in range(m):
            out_U[s, i] = U[i]
            out_V[s, i] = V[i]
    return x, p, step, out_t, out_d, out_x, out_p, out_U, out_V


@jit(nopython=True, cache=True)
def advance_bare_magnus(U, V, t0, dt, steps_per_sample, knot_t, knot_b, ck, sk, j0):
    """Field-only evolution by the two-point Gauss fourth-order Magnus step.

    Each step applies the exact exponential exp(-i w . sigma) of the
    truncated Magnus generator, so per-pair norms are kept to round-off.
    Returns ``(steps_done, t, b, Us, Vs)``.
    """
    m = U.size
    ns = steps_per_sample.size
    out_t = np.empty(ns)
    out_b = np.empty(ns)
    out_U = np.empty((ns, m), dtype=np.complex128)
    out_V = np.empty((ns, m), dtype=np.complex128)
    g1 = 0.5 - np.sqrt(3.0) / 6.0
    g2 = 0.5 + np.sqrt(3.0) / 6.0
    comm = np.sqrt(3.0) / 6.0 * dt * dt
    step = 0
    for s in range(ns):
        for _ in range(steps_per_sample[s]):
            t = t0 + step * dt
            b1 = np.interp(t + g1 * dt, knot_t, knot_b)
            b2 = np.interp(t + g2 * dt, knot_t, knot_b)
            for i in range(m):
                a1 = 2.0 * (b1 - j0 * ck[i])
                a2 = 2.0 * (b2 - j0 * ck[i])
                c = 2.0 * j0 * sk[i]
                # H = -a sz - c sx; w = h/2 (h1 + h2) + sqrt(3)/6 h^2 (h2 x h1)
                wx = -dt * c
                wy = comm * c * (a2 - a1)
                wz = -0.5 * dt * (a1 + a2)
                norm = np.sqrt(wx * wx + wy * wy + wz * wz)
                cs = np.cos(norm)
                if norm > 0.0:
                    f = np.sin(norm) / norm
                else:
                    f = 1.0
                u = U[i]
                v = V[i]
                U[i] = complex(cs, -f * wz) * u + complex(-f * wy, -f * wx) * v
                V[i] = complex(f * wy, -f * wx) * u + complex(cs, f * wz) * v
            step += 1
        t = t0 + step * dt
        out_t[s] = t
        out_b[s] = np.interp(t, knot_t, knot_b)
        for i in range(m):
            out_U[s, i] = U[i]
            out_V[s, i] = V[i]
    return step, out_t, out_b, out_U, out_V
