"""Numba-compiled inner loops: pair forces and the Langevin splitting step.

Everything here works on raw float64 arrays in dimensionless units; the
object-level API lives in model.py / dynamics.py.  Trap parameters arrive
packed by TrapModel.reduced():

    [wy2, wz2, ax, ay, bx, by, cxy, drive_amp, wd]

The integrator is a symmetric drift-kick splitting with an exact
Ornstein-Uhlenbeck velocity update in the middle (BAOAB ordering):

    B: v += dt/2 * F(q, t)
    A: q += dt/2 * v
    O: v  = c1 * v + c2 * xi          (per-axis c1 = exp(-gamma dt), FDT-exact)
    A: q += dt/2 * v
    B: v += dt/2 * F(q, t + dt)

With gamma = 0 and T = 0 the O step is the identity and the scheme reduces
to velocity Verlet.  The drive amplitude is ramped linearly over ramp_time
starting at t = 0 (negative times, used for thermalization, see no drive).
"""

import numpy as np
from numba import njit

BLOWUP_BOUND = 1e6  # coordinates/velocities beyond this abort the trajectory


@njit(cache=True)
def pair_forces(pos, out):
    """Coulomb forces (already negated gradient); returns min pair distance."""
    n = pos.shape[0]
    dmin = 1e300
    for i in range(n):
        for k in range(3):
            out[i, k] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            d = np.sqrt(d2)
            if d < dmin:
                dmin = d
            inv3 = 1.0 / (d2 * d)
            fx = dx * inv3
            fy = dy * inv3
            fz = dz * inv3
            out[i, 0] += fx
            out[i, 1] += fy
            out[i, 2] += fz
            out[j, 0] -= fx
            out[j, 1] -= fy
            out[j, 2] -= fz
    return dmin


@njit(cache=True)
def total_forces(pos, params, t, ramp_time, out):
    """Trap + anharmonic + drive + Coulomb forces; returns min pair distance."""
    wy2, wz2, ax, ay, bx, by, cxy, amp, wd = (
        params[0], params[1], params[2], params[3], params[4],
        params[5], params[6], params[7], params[8],
    )
    dmin = pair_forces(pos, out)
    a_t = 0.0
    if amp != 0.0 and t >= 0.0:
        scale = 1.0
        if ramp_time > 0.0 and t < ramp_time:
            scale = t / ramp_time
        a_t = amp * scale * np.sin(wd * t)
    n = pos.shape[0]
    for i in range(n):
        x = pos[i, 0]
        y = pos[i, 1]
        z = pos[i, 2]
        out[i, 0] -= x + 3.0 * ax * x * x + 4.0 * bx * x * x * x + 2.0 * cxy * x * y
        out[i, 1] -= wy2 * y + 3.0 * ay * y * y + 4.0 * by * y * y * y + cxy * x * x + a_t * y
        out[i, 2] -= wz2 * z - a_t * z
    return dmin


@njit(cache=True)
def potential_value(pos, params, t, ramp_time):
    """Total potential energy, same drive convention as total_forces."""
    wy2, wz2, ax, ay, bx, by, cxy, amp, wd = (
        params[0], params[1], params[2], params[3], params[4],
        params[5], params[6], params[7], params[8],
    )
    a_t = 0.0
    if amp != 0.0 and t >= 0.0:
        scale = 1.0
        if ramp_time > 0.0 and t < ramp_time:
            scale = t / ramp_time
        a_t = amp * scale * np.sin(wd * t)
    n = pos.shape[0]
    e = 0.0
    for i in range(n):
        x = pos[i, 0]
        y = pos[i, 1]
        z = pos[i, 2]
        e += 0.5 * (x * x + wy2 * y * y + wz2 * z * z)
        e += ax * x**3 + ay * y**3 + bx * x**4 + by * y**4 + cxy * x * x * y
        e += 0.5 * a_t * (y * y - z * z)
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            e += 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
    return e


@njit(cache=True)
def baoab_chunk(pos, vel, t0, dt, params, ramp_time, c1, c2, noise, force_buf, guard):
    """Advance nsteps = noise.shape[0] BAOAB steps in place.

    noise has shape (nsteps, n, 3); c1/c2 are the per-axis OU coefficients
    (length 3).  Returns (status, t_end): status 0 ok, 1 Coulomb guard hit,
    2 numerical blowup.  The force at the end of a step is reused at the
    start of the next one.
    """
    nsteps = noise.shape[0]
    n = pos.shape[0]
    t = t0
    dmin = total_forces(pos, params, t, ramp_time, force_buf)
    if dmin <= guard:
        return 1, t
    for s in range(nsteps):
        half = 0.5 * dt
        for i in range(n):
            for k in range(3):
                vel[i, k] += half * force_buf[i, k]
                pos[i, k] += half * vel[i, k]
        for i in range(n):
            for k in range(3):
                vel[i, k] = c1[k] * vel[i, k] + c2[k] * noise[s, i, k]
        for i in range(n):
            for k in range(3):
                pos[i, k] += half * vel[i, k]
        t = t0 + (s + 1) * dt
        dmin = total_forces(pos, params, t, ramp_time, force_buf)
        if dmin <= guard:
            return 1, t
        for i in range(n):
            for k in range(3):
                vel[i, k] += half * force_buf[i, k]
        bad = False
        for i in range(n):
            for k in range(3):
                if (
                    not np.isfinite(pos[i, k])
                    or not np.isfinite(vel[i, k])
                    or abs(pos[i, k]) > BLOWUP_BOUND
                    or abs(vel[i, k]) > BLOWUP_BOUND
                ):
                    bad = True
        if bad:
            return 2, t
    return 0, t


@njit(cache=True)
def band_energies_gradients(band, params, e_out, g_out):
    """Static (t < 0, drive off) energies/gradients for a whole band of images."""
    m = band.shape[0]
    for im in range(m):
        e_out[im] = potential_value(band[im], params, -1.0, 0.0)
        total_forces(band[im], params, -1.0, 0.0, g_out[im])
        for i in range(band.shape[1]):
            for k in range(3):
                g_out[im, i, k] = -g_out[im, i, k]


@njit(cache=True)
def flow_descend(pos, params, eta, cap, nsteps):
    """Clipped gradient flow on the static potential, in place.

    Returns (energy, grad_inf_norm) at the final configuration.
    """
    n = pos.shape[0]
    force = np.empty((n, 3))
    for _ in range(nsteps):
        total_forces(pos, params, -1.0, 0.0, force)
        for i in range(n):
            for k in range(3):
                s = eta * force[i, k]
                if s > cap:
                    s = cap
                elif s < -cap:
                    s = -cap
                pos[i, k] += s
    total_forces(pos, params, -1.0, 0.0, force)
    gmax = 0.0
    for i in range(n):
        for k in range(3):
            a = abs(force[i, k])
            if a > gmax:
                gmax = a
    return potential_value(pos, params, -1.0, 0.0), gmax
