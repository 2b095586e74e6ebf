"""Pure-Python physics kernel.

Scalar mirror of ``_kernel.pyx``. The arithmetic is written in the same order
as the compiled version so that both backends agree to the last bit on the
same platform. Everything is expressed in the local (e_theta, e_phi, e_r)
basis, where the frame vectors are the canonical unit vectors.
"""
from math import asin, cos, floor, sin, sqrt, tan

OK = 0
ALIGNMENT = 1
POLAR = 2
GROUND = 3
ALTITUDE = 4
TETHER = 5

TRACTION = 0
RETRACTION = 1
LOCKED = 2

WIND_CONSTANT = 0
WIND_GRIDDED = 1
WIND_SHEAR = 2

EPS_W = 1e-6
EPS_THETA = 1e-6

BACKEND = "python"


class _Stop(Exception):
    def __init__(self, code):
        self.code = code


def _sample_gridded(wi, wf, wg, x, y, z, t):
    nx, ny, nz, nt, frozen, snap = wi[0], wi[1], wi[2], wi[3], wi[4], wi[5]
    Lx, Ly, Lz, dt_snap = wf[0], wf[1], wf[2], wf[3]
    if z < 0.0:
        raise _Stop(GROUND)
    if z > Lz:
        raise _Stop(ALTITUDE)
    if wi[6]:
        sx = x / (Lx / nx)
        i0 = floor(sx)
        fx = sx - i0
        i0 = int(i0) % nx
        i1 = (i0 + 1) % nx
        sy = y / (Ly / ny)
        j0 = floor(sy)
        fy = sy - j0
        j0 = int(j0) % ny
        j1 = (j0 + 1) % ny
    else:
        sx = min(max(x, 0.0), Lx) / (Lx / (nx - 1))
        i0 = floor(sx)
        if i0 > nx - 2:
            i0 = nx - 2
        fx = sx - i0
        i0 = int(i0)
        i1 = i0 + 1
        sy = min(max(y, 0.0), Ly) / (Ly / (ny - 1))
        j0 = floor(sy)
        if j0 > ny - 2:
            j0 = ny - 2
        fy = sy - j0
        j0 = int(j0)
        j1 = j0 + 1
    sz = z / (Lz / (nz - 1))
    k0 = floor(sz)
    if k0 > nz - 2:
        k0 = nz - 2
    fz = sz - k0
    k0 = int(k0)
    k1 = k0 + 1
    if frozen:
        n0 = snap
        n1 = snap
        ft = 0.0
    else:
        st = t / dt_snap
        n0 = floor(st)
        ft = st - n0
        n0 = int(n0) % nt
        n1 = (n0 + 1) % nt
    gx = 1.0 - fx
    gy = 1.0 - fy
    gz = 1.0 - fz
    gt = 1.0 - ft
    out = [0.0, 0.0, 0.0]
    for c in range(3):
        vals = [0.0, 0.0]
        for s, n in enumerate((n0, n1)):
            base0 = (n * nz + k0) * ny
            base1 = (n * nz + k1) * ny
            c00 = float(wg[((base0 + j0) * nx + i0) * 3 + c]) * gx + float(wg[((base0 + j0) * nx + i1) * 3 + c]) * fx
            c10 = float(wg[((base0 + j1) * nx + i0) * 3 + c]) * gx + float(wg[((base0 + j1) * nx + i1) * 3 + c]) * fx
            c01 = float(wg[((base1 + j0) * nx + i0) * 3 + c]) * gx + float(wg[((base1 + j0) * nx + i1) * 3 + c]) * fx
            c11 = float(wg[((base1 + j1) * nx + i0) * 3 + c]) * gx + float(wg[((base1 + j1) * nx + i1) * 3 + c]) * fx
            c0 = c00 * gy + c10 * fy
            c1 = c01 * gy + c11 * fy
            vals[s] = c0 * gz + c1 * fz
        out[c] = vals[0] * gt + vals[1] * ft
    return out[0], out[1], out[2]


def _sample_shear(wf, x, y, z, t):
    top, height = wf[0], wf[1]
    n_modes = int(wf[2])
    if z < 0.0:
        raise _Stop(GROUND)
    if z > height:
        raise _Stop(ALTITUDE)
    u = top * z / height
    v = 0.0
    w = 0.0
    for q in range(n_modes):
        o = 3 + 8 * q
        arg = wf[o] * x + wf[o + 1] * y + wf[o + 2] * z - wf[o + 7] * t + wf[o + 6]
        c = cos(arg)
        u += wf[o + 3] * c
        v += wf[o + 4] * c
        w += wf[o + 5] * c
    return u, v, w


def _sample(wkind, wi, wf, wg, x, y, z, t):
    if wkind == WIND_CONSTANT:
        return wf[0], 0.0, 0.0
    if wkind == WIND_GRIDDED:
        return _sample_gridded(wi, wf, wg, x, y, z, t)
    return _sample_shear(wf, x, y, z, t)


def _forces(th, ph, r, thd, phd, rd, t, cl, cd, psi, mode, fm, p, wkind, wi, wf, wg):
    """Accelerations, tension, power and local relative wind at one state."""
    m, A, rho, M, R, k, g = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    st = sin(th)
    ct = cos(th)
    if st <= EPS_THETA:
        raise _Stop(POLAR)
    sp = sin(ph)
    cp = cos(ph)
    wx, wy, wz = _sample(wkind, wi, wf, wg, r * st * cp, r * st * sp, r * ct, t)

    # wind projected on the local frame, minus kite velocity
    wr_t = (ct * cp * wx + ct * sp * wy - st * wz) - thd * r
    wr_p = (-sp * wx + cp * wy) - phd * r * st
    wr_r = (st * cp * wx + st * sp * wy + ct * wz) - rd

    a = sqrt(wr_t * wr_t + wr_p * wr_p)
    if a < EPS_W:
        raise _Stop(ALIGNMENT)
    arg = wr_r / a * tan(psi)
    if arg > 1.0 or arg < -1.0:
        raise _Stop(ALIGNMENT)
    eta = asin(arg)
    ew_t = wr_t / a
    ew_p = wr_p / a
    cps = cos(psi)
    sps = sin(psi)
    c1 = -cps * sin(eta)
    c2 = cps * cos(eta)
    # y_w = e_w*c1 + (e_r x e_w)*c2 + e_r*sin(psi), with e_r x e_w = (-ew_p, ew_t, 0)
    yw_t = ew_t * c1 - ew_p * c2
    yw_p = ew_p * c1 + ew_t * c2
    yw_r = sps
    wn = sqrt(a * a + wr_r * wr_r)
    xw_t = -wr_t / wn
    xw_p = -wr_p / wn
    xw_r = -wr_r / wn
    zw_t = xw_p * yw_r - xw_r * yw_p
    zw_p = xw_r * yw_t - xw_t * yw_r
    zw_r = xw_t * yw_p - xw_p * yw_t
    q = 0.5 * A * rho * wn * wn
    qd = q * cd
    ql = q * cl

    f_t = m * g * st + m * (phd * phd * r * st * ct - 2.0 * rd * thd) - qd * xw_t - ql * zw_t
    f_p = m * (-2.0 * rd * phd * st - 2.0 * phd * thd * r * ct) - qd * xw_p - ql * zw_p
    f_r = -m * g * ct + m * (r * thd * thd + r * phd * phd * st * st) - qd * xw_r - ql * zw_r

    if mode == LOCKED:
        ten = f_r
    else:
        num = M * f_r * R + 2.0 * m * (rd / R) * k
        if mode == RETRACTION:
            num += 2.0 * m * (fm * R)
        ten = num / (2.0 * m * R + M * R)
    slack = ten < 0.0
    if slack:
        ten = 0.0
    if mode == RETRACTION:
        power = fm * rd
    else:
        power = ten * rd
    thdd = f_t / (m * r)
    phdd = f_p / (m * r * st)
    rdd = (f_r - ten) / m
    return thdd, phdd, rdd, ten, power, slack, wr_t, wr_p, wr_r


def integrate(state, cl, cd, psi, mode, fm, p, wkind, wi, wf, wg, t0, dt, n_sub, z_ceiling, r_max,
              z_floor=0.0):
    """Advance ``state`` by up to ``n_sub`` RK4 substeps.

    Returns ``(state, energy, n_done, code, min_z, slack)``. Integration stops
    at the first substep that ends outside the admissible region (or whose
    stages cannot be evaluated); ``n_done`` counts completed substeps and the
    returned state is the last admissible one, except for terminal codes
    GROUND/ALTITUDE/TETHER where it is the offending substep end.
    """
    th, ph, r, thd, phd, rd = state[0], state[1], state[2], state[3], state[4], state[5]
    energy = 0.0
    min_z = r * cos(th)
    slack_any = False
    h2 = 0.5 * dt
    h6 = dt / 6.0
    n_done = 0
    code = OK
    args = (cl, cd, psi, mode, fm, p, wkind, wi, wf, wg)
    for i in range(n_sub):
        t = t0 + i * dt
        try:
            a1, b1, c1, _, e1, s1, _, _, _ = _forces(th, ph, r, thd, phd, rd, t, *args)
            a2, b2, c2, _, e2, s2, _, _, _ = _forces(
                th + h2 * thd, ph + h2 * phd, r + h2 * rd,
                thd + h2 * a1, phd + h2 * b1, rd + h2 * c1, t + h2, *args)
            a3, b3, c3, _, e3, s3, _, _, _ = _forces(
                th + h2 * (thd + h2 * a1), ph + h2 * (phd + h2 * b1), r + h2 * (rd + h2 * c1),
                thd + h2 * a2, phd + h2 * b2, rd + h2 * c2, t + h2, *args)
            a4, b4, c4, _, e4, s4, _, _, _ = _forces(
                th + dt * (thd + h2 * a2), ph + dt * (phd + h2 * b2), r + dt * (rd + h2 * c2),
                thd + dt * a3, phd + dt * b3, rd + dt * c3, t + dt, *args)
        except _Stop as stop:
            code = stop.code
            break
        slack_any = slack_any or s1 or s2 or s3 or s4
        # stage positions use the stage velocities: k_pos2 = v + h/2*k_vel1, etc.
        th_n = th + h6 * (thd + 2.0 * (thd + h2 * a1) + 2.0 * (thd + h2 * a2) + (thd + dt * a3))
        ph_n = ph + h6 * (phd + 2.0 * (phd + h2 * b1) + 2.0 * (phd + h2 * b2) + (phd + dt * b3))
        r_n = r + h6 * (rd + 2.0 * (rd + h2 * c1) + 2.0 * (rd + h2 * c2) + (rd + dt * c3))
        thd = thd + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        phd = phd + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        rd = rd + h6 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        th, ph, r = th_n, ph_n, r_n
        energy += h6 * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
        n_done = i + 1
        z = r * cos(th)
        if z < min_z:
            min_z = z
        if z <= z_floor:
            code = GROUND
            break
        if z > z_ceiling:
            code = ALTITUDE
            break
        if r > r_max:
            code = TETHER
            break
    return (th, ph, r, thd, phd, rd), energy, n_done, code, min_z, slack_any


def evaluate(state, cl, cd, psi, mode, fm, p, wkind, wi, wf, wg, t):
    """Tension, power and local relative wind at ``state``.

    Returns ``(code, tension, power, wr_theta, wr_phi, wr_r)``; on a nonzero
    code the remaining entries are zero.
    """
    try:
        out = _forces(state[0], state[1], state[2], state[3], state[4], state[5], t,
                      cl, cd, psi, mode, fm, p, wkind, wi, wf, wg)
    except _Stop as stop:
        return stop.code, 0.0, 0.0, 0.0, 0.0, 0.0
    return OK, out[3], out[4], out[6], out[7], out[8]


def sample_wind(wkind, wi, wf, wg, x, y, z, t):
    """Wind at a point as ``(code, (u, v, w))``; nonzero code outside a bounded field."""
    try:
        return OK, _sample(wkind, wi, wf, wg, x, y, z, t)
    except _Stop as stop:
        return stop.code, (0.0, 0.0, 0.0)
