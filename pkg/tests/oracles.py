"""Independent reference computations used only by the tests."""

import numpy as np
from scipy.signal import resample


def volterra_trapezoid(q_fine, r_fine, x0, h, lam, column=1, backward=False):
    """Trapezoid discretization of the Volterra equation for one Jost column.

    With the kernel exponential evaluated exactly at the nodes, the discrete
    solution has an error expansion in even powers of h, so Romberg
    extrapolation across step sizes is valid.
    """
    lam = complex(lam)
    q = np.asarray(q_fine)
    r = np.asarray(r_fine)
    if backward:
        q, r, h = q[::-1], r[::-1], -h
    n = len(q)
    l2 = lam * lam
    # propagation factors over one step for the two components
    if column == 1:
        e = np.array([1.0, np.exp(2j * l2 * h)])
        psi = np.array([1.0 + 0j, 0j])
    else:
        e = np.array([np.exp(-2j * l2 * h), 1.0])
        psi = np.array([0j, 1.0 + 0j])
    out = np.empty((n, 2), dtype=complex)
    out[0] = psi

    def umat(k):
        d = 0.25j * q[k] * r[k]
        return np.array([[d, lam * q[k]], [-lam * r[k], -d]])

    prev = umat(0) @ psi
    eye = np.eye(2)
    for k in range(1, n):
        uk = umat(k)
        rhs = e * (psi + 0.5 * h * prev)
        psi = np.linalg.solve(eye - 0.5 * h * uk, rhs)
        prev = uk @ psi
        out[k] = psi
    return out[::-1] if backward else out


def romberg_jost(q, L, lam, column=1, backward=False, levels=(2, 4, 8, 16), q_func=None):
    """Romberg-extrapolated Jost column at the coarse grid points x_0..x_n.

    The coarse grid has spacing 2L/len(q); level m refines it by a factor m
    using band-limited interpolation of the samples (or ``q_func`` if given).
    """
    n = len(q)
    h = 2 * L / n
    tables = []
    for m in levels:
        if q_func is not None:
            xf = -L + h / m * np.arange(n * m + 1)
            qf = q_func(xf)
        else:
            qf = resample(q, n * m)
            qf = np.append(qf, qf[0])
        sol = volterra_trapezoid(qf, np.conj(qf), -L, h / m, lam, column, backward)
        tables.append(sol[::m])
    # Richardson in powers of h^2 for successive halvings
    for order in range(1, len(tables)):
        f = 4.0 ** order
        tables = [(f * tables[i + 1] - tables[i]) / (f - 1) for i in range(len(tables) - 1)]
    return tables[0]
