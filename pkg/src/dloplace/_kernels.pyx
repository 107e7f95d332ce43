# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, asin, sqrt, fabs, ldexp, rint, M_PI

cnp.import_array()

DEF MAX_LEVELS = 32
DEF LADDER_TOL = 2.220446049250313e-16


cdef int _ladder(double k, double* a, double* c, double* e_over_k) noexcept nogil:
    cdef double b = sqrt((1.0 - k) * (1.0 + k))
    cdef double an, cn, total
    cdef int n = 0, i
    a[0] = 1.0
    c[0] = k
    while fabs(c[n]) > LADDER_TOL * a[n] and n < MAX_LEVELS - 1:
        an = 0.5 * (a[n] + b)
        cn = 0.5 * (a[n] - b)
        b = sqrt(a[n] * b)
        n += 1
        a[n] = an
        c[n] = cn
    total = 0.0
    for i in range(n + 1):
        total += ldexp(1.0, i - 1) * c[i] * c[i]
    e_over_k[0] = 1.0 - total
    return n


cdef inline void _am_zeta1(double u, int n, const double* a, const double* c,
                           double* am, double* zeta) noexcept nogil:
    cdef double phi = ldexp(a[n] * u, n)
    cdef double z = 0.0, sphi
    cdef int level
    for level in range(n, 0, -1):
        sphi = sin(phi)
        z += c[level] * sphi
        phi = 0.5 * (phi + asin(c[level] / a[level] * sphi))
    am[0] = phi
    zeta[0] = z


def agm_ladder(double k):
    cdef double a[MAX_LEVELS]
    cdef double c[MAX_LEVELS]
    cdef double eok
    cdef int n = _ladder(k, a, c, &eok)
    return (np.array([a[i] for i in range(n + 1)]),
            np.array([c[i] for i in range(n + 1)]), eok)


def am_zeta(u, double k):
    cdef double a[MAX_LEVELS]
    cdef double c[MAX_LEVELS]
    cdef double eok
    cdef int n = _ladder(k, a, c, &eok)
    arr = np.asarray(u, dtype=np.float64)
    flat = np.ascontiguousarray(arr.ravel())
    cdef const double[::1] uv = flat
    cdef Py_ssize_t m = uv.shape[0], i
    out_am = np.empty(m)
    out_z = np.empty(m)
    cdef double[::1] av = out_am
    cdef double[::1] zv = out_z
    with nogil:
        for i in range(m):
            _am_zeta1(uv[i], n, a, c, &av[i], &zv[i])
    return out_am.reshape(arr.shape), out_z.reshape(arr.shape)


cdef double _rf(double x, double y, double z) noexcept nogil:
    cdef double mu, sx, sy, sz, lam, X, Y, Z, e2, e3, dev
    cdef int it
    for it in range(60):
        mu = (x + y + z) / 3.0
        dev = fabs(mu - x)
        if fabs(mu - y) > dev:
            dev = fabs(mu - y)
        if fabs(mu - z) > dev:
            dev = fabs(mu - z)
        if dev / mu < 0.0025:
            break
        sx = sqrt(x)
        sy = sqrt(y)
        sz = sqrt(z)
        lam = sx * (sy + sz) + sy * sz
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
    mu = (x + y + z) / 3.0
    X = 1.0 - x / mu
    Y = 1.0 - y / mu
    Z = -(X + Y)
    e2 = X * Y - Z * Z
    e3 = X * Y * Z
    return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / sqrt(mu)


cdef double _rd(double x, double y, double z) noexcept nogil:
    cdef double mu, sx, sy, sz, lam, X, Y, Z, ea, eb, ec, ed, ee, s, dev
    cdef double total = 0.0, fac = 1.0
    cdef int it
    for it in range(60):
        mu = (x + y + 3.0 * z) / 5.0
        dev = fabs(mu - x)
        if fabs(mu - y) > dev:
            dev = fabs(mu - y)
        if fabs(mu - z) > dev:
            dev = fabs(mu - z)
        if dev / mu < 0.0015:
            break
        sx = sqrt(x)
        sy = sqrt(y)
        sz = sqrt(z)
        lam = sx * (sy + sz) + sy * sz
        total += fac / (sz * (z + lam))
        fac *= 0.25
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
    mu = (x + y + 3.0 * z) / 5.0
    X = (mu - x) / mu
    Y = (mu - y) / mu
    Z = (mu - z) / mu
    ea = X * Y
    eb = Z * Z
    ec = ea - eb
    ed = ea - 6.0 * eb
    ee = ed + ec + ec
    s = ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * Z * ee)
    s += Z * (ee / 6.0 + Z * (-9.0 / 22.0 * ec + 1.5 / 26.0 * Z * ea))
    return 3.0 * total + fac * (1.0 + s) / (mu * sqrt(mu))


def ellipe_inc(phi, double k, double e_complete):
    arr = np.asarray(phi, dtype=np.float64)
    flat = np.ascontiguousarray(arr.ravel())
    cdef const double[::1] pv = flat
    cdef Py_ssize_t m = pv.shape[0], i
    out = np.empty(m)
    cdef double[::1] ov = out
    cdef double j, r, s, c2, d2, val
    with nogil:
        for i in range(m):
            j = rint(pv[i] / M_PI)
            r = pv[i] - j * M_PI
            s = sin(r)
            c2 = cos(r)
            c2 = c2 * c2
            d2 = 1.0 - k * k * s * s
            val = s * _rf(c2, d2, 1.0)
            if k != 0.0:
                val -= (k * k / 3.0) * s * s * s * _rd(c2, d2, 1.0)
            ov[i] = val + 2.0 * j * e_complete
    return out.reshape(arr.shape)


def elastica_states(s, double k, double s0, double ltilde, double x0, double y0, double phi_base):
    cdef double a[MAX_LEVELS]
    cdef double c[MAX_LEVELS]
    cdef double eok
    cdef int n = _ladder(k, a, c, &eok)
    cdef double w = 2.0 * M_PI / (a[n] * ltilde)
    arr = np.ascontiguousarray(np.asarray(s, dtype=np.float64).ravel())
    cdef const double[::1] sv = arr
    cdef Py_ssize_t m = sv.shape[0], i
    xo = np.empty(m)
    yo = np.empty(m)
    po = np.empty(m)
    ko = np.empty(m)
    cdef double[::1] xv = xo
    cdef double[::1] yv = yo
    cdef double[::1] pv = po
    cdef double[::1] kv = ko
    cdef double u0 = w * s0, am0, z0, am, z, u, sn, cn, xi, eta
    cdef double phi_axis, ca, sa, cn0
    with nogil:
        _am_zeta1(u0, n, a, c, &am0, &z0)
        cn0 = cos(am0)
        phi_axis = phi_base + 2.0 * asin(k * sin(am0))
        ca = cos(phi_axis)
        sa = sin(phi_axis)
        for i in range(m):
            u = w * (sv[i] + s0)
            _am_zeta1(u, n, a, c, &am, &z)
            sn = sin(am)
            cn = cos(am)
            pv[i] = phi_axis - 2.0 * asin(k * sn)
            kv[i] = -2.0 * k * w * cn
            xi = ((2.0 * eok - 1.0) * (u - u0) + 2.0 * (z - z0)) / w
            eta = (2.0 * k / w) * (cn - cn0)
            xv[i] = x0 + ca * xi - sa * eta
            yv[i] = y0 + sa * xi + ca * eta
    return xo, yo, po, ko


cdef inline double _kap(double s, double s0, double w, double k, int n,
                        const double* a, const double* c) noexcept nogil:
    cdef double am, z
    _am_zeta1(w * (s + s0), n, a, c, &am, &z)
    return -2.0 * k * w * cos(am)


def rk4_states(s, double k, double s0, double ltilde, double x0, double y0,
               double phi_base, int substeps):
    cdef double a[MAX_LEVELS]
    cdef double c[MAX_LEVELS]
    cdef double eok
    cdef int n = _ladder(k, a, c, &eok)
    cdef double w = 2.0 * M_PI / (a[n] * ltilde)
    arr = np.ascontiguousarray(np.asarray(s, dtype=np.float64).ravel())
    cdef const double[::1] sv = arr
    cdef Py_ssize_t m = sv.shape[0], i
    cdef int j
    xo = np.empty(m)
    yo = np.empty(m)
    po = np.empty(m)
    cdef double[::1] xv = xo
    cdef double[::1] yv = yo
    cdef double[::1] pv = po
    cdef double cx = x0, cy = y0, cp = phi_base, h, t, k1, km, k2, p2, p3, p4
    with nogil:
        xv[0] = cx
        yv[0] = cy
        pv[0] = cp
        for i in range(m - 1):
            h = (sv[i + 1] - sv[i]) / substeps
            k2 = _kap(sv[i], s0, w, k, n, a, c)
            for j in range(substeps):
                t = sv[i] + j * h
                k1 = k2
                km = _kap(t + 0.5 * h, s0, w, k, n, a, c)
                k2 = _kap(t + h, s0, w, k, n, a, c)
                p2 = cp + 0.5 * h * k1
                p3 = cp + 0.5 * h * km
                p4 = cp + h * km
                cx += h / 6.0 * (cos(cp) + 2.0 * cos(p2) + 2.0 * cos(p3) + cos(p4))
                cy += h / 6.0 * (sin(cp) + 2.0 * sin(p2) + 2.0 * sin(p3) + sin(p4))
                cp += h / 6.0 * (k1 + 4.0 * km + k2)
            xv[i + 1] = cx
            yv[i + 1] = cy
            pv[i + 1] = cp
    return xo, yo, po


def adjoint_rk4(s, double k, double s0, double ltilde, double phi_base,
                double lam_x, double lam_y, double lam_phi0, int substeps):
    cdef double a[MAX_LEVELS]
    cdef double c[MAX_LEVELS]
    cdef double eok
    cdef int n = _ladder(k, a, c, &eok)
    cdef double w = 2.0 * M_PI / (a[n] * ltilde)
    arr = np.ascontiguousarray(np.asarray(s, dtype=np.float64).ravel())
    cdef const double[::1] sv = arr
    cdef Py_ssize_t m = sv.shape[0], i
    cdef int j
    out = np.empty(m)
    cdef double[::1] ov = out
    cdef double cp = phi_base, cl = lam_phi0, h, t, k1, km, k2, p2, p3, p4
    with nogil:
        ov[0] = cl
        for i in range(m - 1):
            h = (sv[i + 1] - sv[i]) / substeps
            k2 = _kap(sv[i], s0, w, k, n, a, c)
            for j in range(substeps):
                t = sv[i] + j * h
                k1 = k2
                km = _kap(t + 0.5 * h, s0, w, k, n, a, c)
                k2 = _kap(t + h, s0, w, k, n, a, c)
                p2 = cp + 0.5 * h * k1
                p3 = cp + 0.5 * h * km
                p4 = cp + h * km
                cl += h / 6.0 * ((lam_x * sin(cp) - lam_y * cos(cp))
                                 + 2.0 * (lam_x * sin(p2) - lam_y * cos(p2))
                                 + 2.0 * (lam_x * sin(p3) - lam_y * cos(p3))
                                 + (lam_x * sin(p4) - lam_y * cos(p4)))
                cp += h / 6.0 * (k1 + 4.0 * km + k2)
            ov[i + 1] = cl
    return out


cdef inline double _orient(double ox, double oy, double ex, double ey,
                           double qx, double qy) noexcept nogil:
    return (ex - ox) * (qy - oy) - (ey - oy) * (qx - ox)


cdef inline bint _within(double ox, double oy, double ex, double ey,
                         double qx, double qy) noexcept nogil:
    return (min(ox, ex) <= qx <= max(ox, ex)) and (min(oy, ey) <= qy <= max(oy, ey))


def first_crossing(x, y):
    xa = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    ya = np.ascontiguousarray(np.asarray(y, dtype=np.float64))
    cdef const double[::1] xv = xa
    cdef const double[::1] yv = ya
    cdef Py_ssize_t n = xv.shape[0] - 1, i, j
    cdef double ax, ay, bx, by, cx, cy, dx, dy, o1, o2, o3, o4
    cdef double lo_x, hi_x, lo_y, hi_y
    if n < 3:
        return -1, -1
    with nogil:
        for i in range(n - 2):
            ax = xv[i]
            ay = yv[i]
            bx = xv[i + 1]
            by = yv[i + 1]
            lo_x = min(ax, bx)
            hi_x = max(ax, bx)
            lo_y = min(ay, by)
            hi_y = max(ay, by)
            for j in range(i + 2, n):
                cx = xv[j]
                cy = yv[j]
                dx = xv[j + 1]
                dy = yv[j + 1]
                if max(cx, dx) < lo_x or min(cx, dx) > hi_x:
                    continue
                if max(cy, dy) < lo_y or min(cy, dy) > hi_y:
                    continue
                o1 = _orient(ax, ay, bx, by, cx, cy)
                o2 = _orient(ax, ay, bx, by, dx, dy)
                o3 = _orient(cx, cy, dx, dy, ax, ay)
                o4 = _orient(cx, cy, dx, dy, bx, by)
                if (o1 * o2 < 0 and o3 * o4 < 0) \
                        or (o1 == 0 and _within(ax, ay, bx, by, cx, cy)) \
                        or (o2 == 0 and _within(ax, ay, bx, by, dx, dy)) \
                        or (o3 == 0 and _within(cx, cy, dx, dy, ax, ay)) \
                        or (o4 == 0 and _within(cx, cy, dx, dy, bx, by)):
                    with gil:
                        return int(i), int(j)
    return -1, -1
