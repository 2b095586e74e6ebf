# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled physics kernel.

Same contract and arithmetic order as ``_kernel_py``; see that module for the
meaning of the arguments and return values.
"""
from libc.math cimport asin, cos, floor, fmax, fmin, sin, sqrt, tan

cdef enum:
    OK = 0
    ALIGNMENT = 1
    POLAR = 2
    GROUND = 3
    ALTITUDE = 4
    TETHER = 5

cdef enum:
    TRACTION = 0
    RETRACTION = 1
    LOCKED = 2

cdef enum:
    WIND_CONSTANT = 0
    WIND_GRIDDED = 1
    WIND_SHEAR = 2

cdef double EPS_W = 1e-6
cdef double EPS_THETA = 1e-6

BACKEND = "cython"


cdef struct Wind:
    int kind
    const long long* wi
    const double* wf
    const float* wg


cdef struct Out:
    double thdd
    double phdd
    double rdd
    double ten
    double power
    int slack
    double wr_t
    double wr_p
    double wr_r


cdef inline long long _mod(long long a, long long n) nogil:
    cdef long long b = a % n
    if b < 0:
        b += n
    return b


cdef int _sample_gridded(const Wind* w, double x, double y, double z, double t, double* out) nogil:
    cdef long long nx = w.wi[0], ny = w.wi[1], nz = w.wi[2], nt = w.wi[3]
    cdef long long frozen = w.wi[4], snap = w.wi[5]
    cdef double Lx = w.wf[0], Ly = w.wf[1], Lz = w.wf[2], dt_snap = w.wf[3]
    cdef double sx, sy, sz, st, fx, fy, fz, ft, gx, gy, gz, gt, kf
    cdef long long i0, i1, j0, j1, k0, k1, n0, n1, base0, base1
    cdef double c00, c10, c01, c11, c0, c1, v0, v1
    cdef int c
    cdef const float* g = w.wg
    if z < 0.0:
        return GROUND
    if z > Lz:
        return ALTITUDE
    if w.wi[6]:
        sx = x / (Lx / nx)
        kf = floor(sx)
        fx = sx - kf
        i0 = _mod(<long long>kf, nx)
        i1 = (i0 + 1) % nx
        sy = y / (Ly / ny)
        kf = floor(sy)
        fy = sy - kf
        j0 = _mod(<long long>kf, ny)
        j1 = (j0 + 1) % ny
    else:
        sx = fmin(fmax(x, 0.0), Lx) / (Lx / (nx - 1))
        kf = floor(sx)
        if kf > nx - 2:
            kf = nx - 2
        fx = sx - kf
        i0 = <long long>kf
        i1 = i0 + 1
        sy = fmin(fmax(y, 0.0), Ly) / (Ly / (ny - 1))
        kf = floor(sy)
        if kf > ny - 2:
            kf = ny - 2
        fy = sy - kf
        j0 = <long long>kf
        j1 = j0 + 1
    sz = z / (Lz / (nz - 1))
    kf = floor(sz)
    if kf > nz - 2:
        kf = nz - 2
    fz = sz - kf
    k0 = <long long>kf
    k1 = k0 + 1
    if frozen:
        n0 = snap
        n1 = snap
        ft = 0.0
    else:
        st = t / dt_snap
        kf = floor(st)
        ft = st - kf
        n0 = _mod(<long long>kf, nt)
        n1 = (n0 + 1) % nt
    gx = 1.0 - fx
    gy = 1.0 - fy
    gz = 1.0 - fz
    gt = 1.0 - ft
    for c in range(3):
        base0 = (n0 * nz + k0) * ny
        base1 = (n0 * nz + k1) * ny
        c00 = <double>g[((base0 + j0) * nx + i0) * 3 + c] * gx + <double>g[((base0 + j0) * nx + i1) * 3 + c] * fx
        c10 = <double>g[((base0 + j1) * nx + i0) * 3 + c] * gx + <double>g[((base0 + j1) * nx + i1) * 3 + c] * fx
        c01 = <double>g[((base1 + j0) * nx + i0) * 3 + c] * gx + <double>g[((base1 + j0) * nx + i1) * 3 + c] * fx
        c11 = <double>g[((base1 + j1) * nx + i0) * 3 + c] * gx + <double>g[((base1 + j1) * nx + i1) * 3 + c] * fx
        c0 = c00 * gy + c10 * fy
        c1 = c01 * gy + c11 * fy
        v0 = c0 * gz + c1 * fz
        base0 = (n1 * nz + k0) * ny
        base1 = (n1 * nz + k1) * ny
        c00 = <double>g[((base0 + j0) * nx + i0) * 3 + c] * gx + <double>g[((base0 + j0) * nx + i1) * 3 + c] * fx
        c10 = <double>g[((base0 + j1) * nx + i0) * 3 + c] * gx + <double>g[((base0 + j1) * nx + i1) * 3 + c] * fx
        c01 = <double>g[((base1 + j0) * nx + i0) * 3 + c] * gx + <double>g[((base1 + j0) * nx + i1) * 3 + c] * fx
        c11 = <double>g[((base1 + j1) * nx + i0) * 3 + c] * gx + <double>g[((base1 + j1) * nx + i1) * 3 + c] * fx
        c0 = c00 * gy + c10 * fy
        c1 = c01 * gy + c11 * fy
        v1 = c0 * gz + c1 * fz
        out[c] = v0 * gt + v1 * ft
    return OK


cdef int _sample_shear(const Wind* w, double x, double y, double z, double t, double* out) nogil:
    cdef double top = w.wf[0], height = w.wf[1]
    cdef int n_modes = <int>w.wf[2]
    cdef int q, o
    cdef double u, v, ww, arg, c
    if z < 0.0:
        return GROUND
    if z > height:
        return ALTITUDE
    u = top * z / height
    v = 0.0
    ww = 0.0
    for q in range(n_modes):
        o = 3 + 8 * q
        arg = w.wf[o] * x + w.wf[o + 1] * y + w.wf[o + 2] * z - w.wf[o + 7] * t + w.wf[o + 6]
        c = cos(arg)
        u += w.wf[o + 3] * c
        v += w.wf[o + 4] * c
        ww += w.wf[o + 5] * c
    out[0] = u
    out[1] = v
    out[2] = ww
    return OK


cdef inline int _sample(const Wind* w, double x, double y, double z, double t, double* out) nogil:
    if w.kind == WIND_CONSTANT:
        out[0] = w.wf[0]
        out[1] = 0.0
        out[2] = 0.0
        return OK
    if w.kind == WIND_GRIDDED:
        return _sample_gridded(w, x, y, z, t, out)
    return _sample_shear(w, x, y, z, t, out)


cdef int _forces(double th, double ph, double r, double thd, double phd, double rd, double t,
                 double cl, double cd, double psi, int mode, double fm, const double* p,
                 const Wind* w, Out* o) nogil:
    cdef double m = p[0], A = p[1], rho = p[2], M = p[3], R = p[4], k = p[5], g = p[6]
    cdef double st, ct, sp, cp, wx, wy, wz, wr_t, wr_p, wr_r, a, arg, eta
    cdef double ew_t, ew_p, cps, sps, c1, c2, yw_t, yw_p, yw_r, wn
    cdef double xw_t, xw_p, xw_r, zw_t, zw_p, zw_r, q, qd, ql, f_t, f_p, f_r, num, ten
    cdef double wv[3]
    cdef int code
    st = sin(th)
    ct = cos(th)
    if st <= EPS_THETA:
        return POLAR
    sp = sin(ph)
    cp = cos(ph)
    code = _sample(w, r * st * cp, r * st * sp, r * ct, t, wv)
    if code != OK:
        return code
    wx = wv[0]
    wy = wv[1]
    wz = wv[2]

    wr_t = (ct * cp * wx + ct * sp * wy - st * wz) - thd * r
    wr_p = (-sp * wx + cp * wy) - phd * r * st
    wr_r = (st * cp * wx + st * sp * wy + ct * wz) - rd

    a = sqrt(wr_t * wr_t + wr_p * wr_p)
    if a < EPS_W:
        return ALIGNMENT
    arg = wr_r / a * tan(psi)
    if arg > 1.0 or arg < -1.0:
        return ALIGNMENT
    eta = asin(arg)
    ew_t = wr_t / a
    ew_p = wr_p / a
    cps = cos(psi)
    sps = sin(psi)
    c1 = -cps * sin(eta)
    c2 = cps * cos(eta)
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
    o.slack = ten < 0.0
    if o.slack:
        ten = 0.0
    if mode == RETRACTION:
        o.power = fm * rd
    else:
        o.power = ten * rd
    o.ten = ten
    o.thdd = f_t / (m * r)
    o.phdd = f_p / (m * r * st)
    o.rdd = (f_r - ten) / m
    o.wr_t = wr_t
    o.wr_p = wr_p
    o.wr_r = wr_r
    return OK


def integrate(state, double cl, double cd, double psi, int mode, double fm, p,
              int wkind, wi, wf, wg, double t0, double dt, int n_sub,
              double z_ceiling, double r_max, double z_floor=0.0):
    cdef const double[::1] pv = p
    cdef const long long[::1] wi_v
    cdef const double[::1] wf_v = wf
    cdef const float[::1] wg_v
    cdef Wind w
    cdef Out o1, o2, o3, o4
    cdef double th = state[0], ph = state[1], r = state[2]
    cdef double thd = state[3], phd = state[4], rd = state[5]
    cdef double energy = 0.0, min_z, z, t
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    cdef double th_n, ph_n, r_n
    cdef int slack_any = 0, n_done = 0, code = OK, i
    w.kind = wkind
    w.wf = &wf_v[0]
    w.wi = NULL
    w.wg = NULL
    if wkind == WIND_GRIDDED:
        wi_v = wi
        wg_v = wg
        w.wi = &wi_v[0]
        w.wg = &wg_v[0]
    min_z = r * cos(th)
    with nogil:
        for i in range(n_sub):
            t = t0 + i * dt
            code = _forces(th, ph, r, thd, phd, rd, t, cl, cd, psi, mode, fm, &pv[0], &w, &o1)
            if code != OK:
                break
            code = _forces(th + h2 * thd, ph + h2 * phd, r + h2 * rd,
                           thd + h2 * o1.thdd, phd + h2 * o1.phdd, rd + h2 * o1.rdd, t + h2,
                           cl, cd, psi, mode, fm, &pv[0], &w, &o2)
            if code != OK:
                break
            code = _forces(th + h2 * (thd + h2 * o1.thdd), ph + h2 * (phd + h2 * o1.phdd),
                           r + h2 * (rd + h2 * o1.rdd),
                           thd + h2 * o2.thdd, phd + h2 * o2.phdd, rd + h2 * o2.rdd, t + h2,
                           cl, cd, psi, mode, fm, &pv[0], &w, &o3)
            if code != OK:
                break
            code = _forces(th + dt * (thd + h2 * o2.thdd), ph + dt * (phd + h2 * o2.phdd),
                           r + dt * (rd + h2 * o2.rdd),
                           thd + dt * o3.thdd, phd + dt * o3.phdd, rd + dt * o3.rdd, t + dt,
                           cl, cd, psi, mode, fm, &pv[0], &w, &o4)
            if code != OK:
                break
            if o1.slack or o2.slack or o3.slack or o4.slack:
                slack_any = 1
            th_n = th + h6 * (thd + 2.0 * (thd + h2 * o1.thdd) + 2.0 * (thd + h2 * o2.thdd) + (thd + dt * o3.thdd))
            ph_n = ph + h6 * (phd + 2.0 * (phd + h2 * o1.phdd) + 2.0 * (phd + h2 * o2.phdd) + (phd + dt * o3.phdd))
            r_n = r + h6 * (rd + 2.0 * (rd + h2 * o1.rdd) + 2.0 * (rd + h2 * o2.rdd) + (rd + dt * o3.rdd))
            thd = thd + h6 * (o1.thdd + 2.0 * o2.thdd + 2.0 * o3.thdd + o4.thdd)
            phd = phd + h6 * (o1.phdd + 2.0 * o2.phdd + 2.0 * o3.phdd + o4.phdd)
            rd = rd + h6 * (o1.rdd + 2.0 * o2.rdd + 2.0 * o3.rdd + o4.rdd)
            th = th_n
            ph = ph_n
            r = r_n
            energy += h6 * (o1.power + 2.0 * o2.power + 2.0 * o3.power + o4.power)
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
    return (th, ph, r, thd, phd, rd), energy, n_done, code, min_z, bool(slack_any)


def evaluate(state, double cl, double cd, double psi, int mode, double fm, p,
             int wkind, wi, wf, wg, double t):
    cdef const double[::1] pv = p
    cdef const long long[::1] wi_v
    cdef const double[::1] wf_v = wf
    cdef const float[::1] wg_v
    cdef Wind w
    cdef Out o
    cdef int code
    w.kind = wkind
    w.wf = &wf_v[0]
    w.wi = NULL
    w.wg = NULL
    if wkind == WIND_GRIDDED:
        wi_v = wi
        wg_v = wg
        w.wi = &wi_v[0]
        w.wg = &wg_v[0]
    code = _forces(state[0], state[1], state[2], state[3], state[4], state[5], t,
                   cl, cd, psi, mode, fm, &pv[0], &w, &o)
    if code != OK:
        return code, 0.0, 0.0, 0.0, 0.0, 0.0
    return OK, o.ten, o.power, o.wr_t, o.wr_p, o.wr_r


def sample_wind(int wkind, wi, wf, wg, double x, double y, double z, double t):
    """Wind at a point, or ``None`` outside a bounded field (code in second slot)."""
    cdef const long long[::1] wi_v
    cdef const double[::1] wf_v = wf
    cdef const float[::1] wg_v
    cdef Wind w
    cdef double out[3]
    cdef int code
    w.kind = wkind
    w.wf = &wf_v[0]
    w.wi = NULL
    w.wg = NULL
    if wkind == WIND_GRIDDED:
        wi_v = wi
        wg_v = wg
        w.wi = &wi_v[0]
        w.wg = &wg_v[0]
    code = _sample(&w, x, y, z, t, out)
    return code, (out[0], out[1], out[2])
