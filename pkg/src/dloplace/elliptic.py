"""Elliptic integrals and Jacobi elliptic functions.

All functions take the modulus ``k`` (not the parameter m = k**2).
Supported range is 0 <= k <= 1 - 1e-9.
"""

import numpy as np

from . import kernels

K_MAX = 1.0 - 1e-9


class DomainError(ValueError):
    """Modulus outside the supported range."""


def check_modulus(k):
    k = float(k)
    if not np.isfinite(k) or k < 0.0 or k > K_MAX:
        raise DomainError(f"modulus k={k!r} outside [0, 1 - 1e-9]")
    return k


def _out(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


def complete_K(k):
    """Complete elliptic integral of the first kind (quarter period)."""
    k = check_modulus(k)
    a, _, _ = kernels.agm_ladder(k)
    return np.pi / (2.0 * a[-1])


def complete_E(k):
    """Complete elliptic integral of the second kind."""
    k = check_modulus(k)
    a, _, e_over_k = kernels.agm_ladder(k)
    return e_over_k * np.pi / (2.0 * a[-1])


def jacobi_am(u, k):
    """Jacobi amplitude am(u, k); continuous and increasing in ``u``."""
    k = check_modulus(k)
    am, _ = kernels.am_zeta(np.asarray(u, dtype=float), k)
    return _out(am, u)


def jacobi_sncndn(u, k):
    """Return ``(sn, cn, dn)`` at ``u``."""
    k = check_modulus(k)
    am, _ = kernels.am_zeta(np.asarray(u, dtype=float), k)
    sn = np.sin(am)
    cn = np.cos(am)
    dn = np.sqrt(1.0 - k * k * sn * sn)
    return _out(sn, u), _out(cn, u), _out(dn, u)


def jacobi_zeta(u, k):
    """Jacobi zeta function Z(u, k) = E(am u) - u E(k)/K(k)."""
    k = check_modulus(k)
    _, z = kernels.am_zeta(np.asarray(u, dtype=float), k)
    return _out(z, u)


def jacobi_epsilon(u, k):
    """E(am(u, k), k), the incomplete second-kind integral along the amplitude."""
    k = check_modulus(k)
    _, _, e_over_k = kernels.agm_ladder(k)
    u_arr = np.asarray(u, dtype=float)
    _, z = kernels.am_zeta(u_arr, k)
    return _out(u_arr * e_over_k + z, u)


def incomplete_E(phi, k):
    """Incomplete elliptic integral of the second kind E(phi, k), any real phi."""
    k = check_modulus(k)
    return _out(kernels.ellipe_inc(np.asarray(phi, dtype=float), k, complete_E(k)), phi)
