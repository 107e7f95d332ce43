"""Pure numpy implementation of the numeric kernels.

Mirrors the compiled ``_kernels`` module function for function. Used when the
extension is not built, or when ``DLOPLACE_PURE_PYTHON=1`` is set.
"""

import numpy as np

_MAX_LEVELS = 32
# c_N stalls near rounding level; stop once it is below machine epsilon
_LADDER_TOL = 2.220446049250313e-16


def agm_ladder(k):
    """Descending Landen/AGM ladder for modulus ``k``.

    Returns ``(a, c, e_over_k)`` where ``a`` and ``c`` hold the ladder terms
    a_0..a_N and c_0..c_N, and ``e_over_k`` is E(k)/K(k).
    """
    kp = np.sqrt((1.0 - k) * (1.0 + k))
    a = [1.0]
    b = kp
    c = [k]
    while abs(c[-1]) > _LADDER_TOL * a[-1] and len(a) < _MAX_LEVELS:
        an = 0.5 * (a[-1] + b)
        cn = 0.5 * (a[-1] - b)
        b = np.sqrt(a[-1] * b)
        a.append(an)
        c.append(cn)
    a = np.asarray(a)
    c = np.asarray(c)
    weights = np.ldexp(1.0, np.arange(len(c)) - 1)
    e_over_k = 1.0 - float(np.sum(weights * c * c))
    return a, c, e_over_k


def am_zeta(u, k):
    """Jacobi amplitude and Jacobi zeta function at arguments ``u``."""
    u = np.asarray(u, dtype=float)
    a, c, _ = agm_ladder(k)
    n = len(a) - 1
    phi = np.ldexp(a[n] * u, n)
    zeta = np.zeros_like(u)
    for level in range(n, 0, -1):
        sphi = np.sin(phi)
        zeta += c[level] * sphi
        phi = 0.5 * (phi + np.arcsin(c[level] / a[level] * sphi))
    return phi, zeta


def _rf(x, y, z):
    # Carlson R_F by duplication; arrays of equal shape.
    x = x.copy()
    y = y.copy()
    z = z.copy()
    for _ in range(60):
        mu = (x + y + z) / 3.0
        dev = np.max(np.abs(np.stack([mu - x, mu - y, mu - z])) / mu)
        if dev < 0.0025:
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
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
    return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / np.sqrt(mu)


def _rd(x, y, z):
    # Carlson R_D by duplication.
    x = x.copy()
    y = y.copy()
    z = z.copy()
    total = np.zeros_like(x)
    fac = 1.0
    for _ in range(60):
        mu = (x + y + 3.0 * z) / 5.0
        dev = np.max(np.abs(np.stack([mu - x, mu - y, mu - z])) / mu)
        if dev < 0.0015:
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
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
    return 3.0 * total + fac * (1.0 + s) / (mu * np.sqrt(mu))


def ellipe_inc(phi, k, e_complete):
    """Incomplete elliptic integral of the second kind E(phi, k)."""
    phi = np.asarray(phi, dtype=float)
    j = np.rint(phi / np.pi)
    r = phi - j * np.pi
    s = np.sin(r)
    c2 = np.cos(r) ** 2
    d2 = 1.0 - k * k * s * s
    ones = np.ones_like(s)
    val = s * _rf(c2, d2, ones)
    if k != 0.0:
        val -= (k * k / 3.0) * s ** 3 * _rd(c2, d2, ones)
    return val + 2.0 * j * e_complete


def elastica_states(s, k, s0, ltilde, x0, y0, phi_base):
    """Closed-form inflectional elastica states at arclengths ``s``.

    Curvature is -2 k w cn(w (s + s0)) with w = 4 K / ltilde; the tangent
    satisfies phi = phi_axis - 2 asin(k sn(.)). Returns (x, y, phi, kappa).
    """
    s = np.asarray(s, dtype=float)
    a, c, e_over_k = agm_ladder(k)
    quarter = np.pi / (2.0 * a[-1])
    w = 4.0 * quarter / ltilde
    u = w * (s + s0)
    u0 = w * s0
    am, zeta = am_zeta(np.append(u, u0), k)
    am0, z0 = am[-1], zeta[-1]
    am, zeta = am[:-1], zeta[:-1]
    sn, cn = np.sin(am), np.cos(am)
    sn0, cn0 = np.sin(am0), np.cos(am0)
    phi_axis = phi_base + 2.0 * np.arcsin(k * sn0)
    phi = phi_axis - 2.0 * np.arcsin(k * sn)
    kappa = -2.0 * k * w * cn
    xi = ((2.0 * e_over_k - 1.0) * (u - u0) + 2.0 * (zeta - z0)) / w
    eta = (2.0 * k / w) * (cn - cn0)
    ca, sa = np.cos(phi_axis), np.sin(phi_axis)
    x = x0 + ca * xi - sa * eta
    y = y0 + sa * xi + ca * eta
    return x, y, phi, kappa


def rk4_states(s, k, s0, ltilde, x0, y0, phi_base, substeps):
    """Integrate d(x, y, phi)/ds = (cos phi, sin phi, kappa(s)) by classic RK4.

    ``substeps`` RK4 steps are taken between consecutive entries of ``s``;
    curvature is the closed form, evaluated at every stage abscissa.
    """
    s = np.asarray(s, dtype=float)
    n = len(s)
    m = int(substeps)
    a, _, _ = agm_ladder(k)
    w = 2.0 * np.pi / (a[-1] * ltilde)
    # stage abscissae: every half step of the fine grid
    fine = [s[0:1]]
    for i in range(n - 1):
        fine.append(np.linspace(s[i], s[i + 1], 2 * m + 1)[1:])
    fine = np.concatenate(fine)
    am, _ = am_zeta(w * (fine + s0), k)
    kap = -2.0 * k * w * np.cos(am)
    x = np.empty(n)
    y = np.empty(n)
    phi = np.empty(n)
    cx, cy, cp = float(x0), float(y0), float(phi_base)
    x[0], y[0], phi[0] = cx, cy, cp
    idx = 0
    for i in range(n - 1):
        h = (s[i + 1] - s[i]) / m
        for _ in range(m):
            k1, km, k2 = kap[idx], kap[idx + 1], kap[idx + 2]
            p2 = cp + 0.5 * h * k1
            p3 = cp + 0.5 * h * km
            p4 = cp + h * km
            cx += h / 6.0 * (np.cos(cp) + 2.0 * np.cos(p2) + 2.0 * np.cos(p3) + np.cos(p4))
            cy += h / 6.0 * (np.sin(cp) + 2.0 * np.sin(p2) + 2.0 * np.sin(p3) + np.sin(p4))
            cp += h / 6.0 * (k1 + 4.0 * km + k2)
            idx += 2
        x[i + 1], y[i + 1], phi[i + 1] = cx, cy, cp
    return x, y, phi


def adjoint_rk4(s, k, s0, ltilde, phi_base, lam_x, lam_y, lam_phi0, substeps):
    """Integrate (phi, lambda_phi) with phi' = kappa, lambda_phi' = lx sin phi - ly cos phi."""
    s = np.asarray(s, dtype=float)
    n = len(s)
    m = int(substeps)
    a, _, _ = agm_ladder(k)
    w = 2.0 * np.pi / (a[-1] * ltilde)
    fine = [s[0:1]]
    for i in range(n - 1):
        fine.append(np.linspace(s[i], s[i + 1], 2 * m + 1)[1:])
    fine = np.concatenate(fine)
    am, _ = am_zeta(w * (fine + s0), k)
    kap = -2.0 * k * w * np.cos(am)
    out = np.empty(n)
    cp, cl = float(phi_base), float(lam_phi0)
    out[0] = cl
    idx = 0

    def rhs(p):
        return lam_x * np.sin(p) - lam_y * np.cos(p)

    for i in range(n - 1):
        h = (s[i + 1] - s[i]) / m
        for _ in range(m):
            k1, km, k2 = kap[idx], kap[idx + 1], kap[idx + 2]
            p2 = cp + 0.5 * h * k1
            p3 = cp + 0.5 * h * km
            p4 = cp + h * km
            cl += h / 6.0 * (rhs(cp) + 2.0 * rhs(p2) + 2.0 * rhs(p3) + rhs(p4))
            cp += h / 6.0 * (k1 + 4.0 * km + k2)
            idx += 2
        out[i + 1] = cl
    return out


def _orient(o, dv, q):
    return dv[..., 0] * (q[..., 1] - o[..., 1]) - dv[..., 1] * (q[..., 0] - o[..., 0])


def _on_seg(o, e, q):
    return (
        (np.minimum(o[..., 0], e[..., 0]) <= q[..., 0])
        & (q[..., 0] <= np.maximum(o[..., 0], e[..., 0]))
        & (np.minimum(o[..., 1], e[..., 1]) <= q[..., 1])
        & (q[..., 1] <= np.maximum(o[..., 1], e[..., 1]))
    )


def first_crossing(x, y, chunk=256):
    """Index pair of the first crossing between non-adjacent polyline segments.

    Returns ``(i, j)`` with ``j >= i + 2`` or ``(-1, -1)`` when the polyline is simple.
    """
    p = np.column_stack([x, y]).astype(float)
    n = len(p) - 1
    if n < 3:
        return -1, -1
    a = p[:-1]
    b = p[1:]
    d = b - a
    C = a[None, :, :]
    E = b[None, :, :]
    F = d[None, :, :]
    cols = np.arange(n)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        A = a[lo:hi, None, :]
        B = b[lo:hi, None, :]
        D = d[lo:hi, None, :]
        o1 = _orient(A, D, C)
        o2 = _orient(A, D, E)
        o3 = _orient(C, F, A)
        o4 = _orient(C, F, B)
        hit = (o1 * o2 < 0) & (o3 * o4 < 0)
        hit |= (o1 == 0) & _on_seg(A, B, C)
        hit |= (o2 == 0) & _on_seg(A, B, E)
        hit |= (o3 == 0) & _on_seg(C, E, A)
        hit |= (o4 == 0) & _on_seg(C, E, B)
        hit &= cols[None, :] >= np.arange(lo, hi)[:, None] + 2
        if hit.any():
            flat = np.flatnonzero(hit.ravel())[0]
            return int(lo + flat // n), int(flat % n)
    return -1, -1
