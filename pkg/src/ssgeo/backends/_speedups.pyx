# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: initializedcheck=False
# cython: cdivision=True
"""Compiled backend: the monomial-pack evaluator and RK4 loop in C.

Function-for-function mirror of :mod:`ssgeo.backends.pure`; see that module
for the shape contracts.  The pack is unpacked into flat typed buffers once
per call and the integration loop then runs without touching Python
objects.  Overflow to inf and nan propagation behave like the NumPy path
(no trapping), so blow-up policing stays with the callers.
"""
import numpy as np


def _buffers(pack):
    """Pack fields as contiguous buffers with the dtypes the C core uses."""
    coeffs = np.ascontiguousarray(pack.coeffs, dtype=np.float64)
    powers = np.ascontiguousarray(pack.powers, dtype=np.uint8)
    starts = np.ascontiguousarray(pack.starts, dtype=np.int64)
    g_index = np.ascontiguousarray(pack.g_index, dtype=np.int64).ravel()
    dg_index = np.ascontiguousarray(pack.dg_index, dtype=np.int64).ravel()
    return coeffs, powers, starts, g_index, dg_index


cdef void _eval_point(
    const double[::1] coeffs,
    const unsigned char[:, ::1] powers,
    const long long[::1] starts,
    const double[::1] x,
    double[::1] vals,
    Py_ssize_t n,
    Py_ssize_t npolys,
) noexcept nogil:
    # Polynomial p owns terms starts[p]:starts[p+1]; exponents are tiny, so
    # repeated multiplication beats pow() and keeps the arithmetic exact on
    # integer powers.
    cdef Py_ssize_t p, t, d
    cdef int e
    cdef double acc, term
    for p in range(npolys):
        acc = 0.0
        for t in range(starts[p], starts[p + 1]):
            term = coeffs[t]
            for d in range(n):
                e = powers[t, d]
                while e > 0:
                    term = term * x[d]
                    e = e - 1
            acc = acc + term
        vals[p] = acc


cdef void _rhs_point(
    const double[::1] coeffs,
    const unsigned char[:, ::1] powers,
    const long long[::1] starts,
    const long long[::1] g_index,
    const long long[::1] dg_index,
    const double[::1] x,
    const double[::1] xi,
    double[::1] vals,
    double[::1] xdot,
    double[::1] xidot,
    Py_ssize_t n,
    Py_ssize_t npolys,
) noexcept nogil:
    # xdot^j = g^{jk} xi_k, xidot_p = -1/2 (d_p g^{jk}) xi_j xi_k.
    cdef Py_ssize_t p, j, k
    cdef double s
    _eval_point(coeffs, powers, starts, x, vals, n, npolys)
    for j in range(n):
        s = 0.0
        for k in range(n):
            s = s + vals[g_index[j * n + k]] * xi[k]
        xdot[j] = s
    for p in range(n):
        s = 0.0
        for j in range(n):
            for k in range(n):
                s = s + vals[dg_index[(p * n + j) * n + k]] * xi[j] * xi[k]
        xidot[p] = -0.5 * s


def eval_polys(pack, points):
    """Evaluate every distinct polynomial at each point: ``(B, P)``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    coeffs, powers, starts, _, _ = _buffers(pack)
    cdef const double[:, ::1] pts = points
    cdef const double[::1] c = coeffs
    cdef const unsigned char[:, ::1] pw = powers
    cdef const long long[::1] st = starts
    cdef Py_ssize_t batch = pts.shape[0]
    cdef Py_ssize_t n = pts.shape[1]
    cdef Py_ssize_t npolys = st.shape[0] - 1
    out = np.empty((batch, npolys))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t b
    with nogil:
        for b in range(batch):
            _eval_point(c, pw, st, pts[b], o[b], n, npolys)
    return out


def cometric(pack, points):
    """Cometric matrices g(x): ``(B, n, n)``."""
    return eval_polys(pack, points)[:, pack.g_index]


def cometric_gradient(pack, points):
    """First derivatives d_p g^{jk}: ``(B, n, n, n)`` indexed ``[p, j, k]``."""
    return eval_polys(pack, points)[:, pack.dg_index]


def cometric_hessian(pack, points):
    """Second derivatives: ``(B, n, n, n, n)`` indexed ``[p, q, j, k]``."""
    return eval_polys(pack, points)[:, pack.d2g_index]


def hamiltonian_rhs(pack, points, covectors):
    """Right-hand side of the Hamiltonian system for a batch of states."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    covectors = np.ascontiguousarray(covectors, dtype=np.float64)
    coeffs, powers, starts, g_index, dg_index = _buffers(pack)
    cdef const double[:, ::1] pts = points
    cdef const double[:, ::1] cov = covectors
    cdef const double[::1] c = coeffs
    cdef const unsigned char[:, ::1] pw = powers
    cdef const long long[::1] st = starts
    cdef const long long[::1] gi = g_index
    cdef const long long[::1] dgi = dg_index
    cdef Py_ssize_t batch = pts.shape[0]
    cdef Py_ssize_t n = pts.shape[1]
    cdef Py_ssize_t npolys = st.shape[0] - 1
    xdot = np.empty((batch, n))
    xidot = np.empty((batch, n))
    vals = np.empty(npolys)
    cdef double[:, ::1] xd = xdot
    cdef double[:, ::1] xid = xidot
    cdef double[::1] v = vals
    cdef Py_ssize_t b
    with nogil:
        for b in range(batch):
            _rhs_point(c, pw, st, gi, dgi, pts[b], cov[b], v, xd[b], xid[b], n, npolys)
    return xdot, xidot


def rk4_flow(pack, x0, xi0, t_end, nsteps):
    """Integrate the Hamiltonian system with fixed-step classical RK4.

    Returns histories ``(B, nsteps+1, n)`` for points and covectors with
    samples at ``t_i = i * t_end / nsteps``.  No blow-up policing happens
    here; non-finite values simply propagate and callers truncate.
    """
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    xi0 = np.ascontiguousarray(xi0, dtype=np.float64)
    coeffs, powers, starts, g_index, dg_index = _buffers(pack)
    cdef Py_ssize_t batch = x0.shape[0]
    cdef Py_ssize_t n = x0.shape[1]
    cdef Py_ssize_t npolys = starts.shape[0] - 1
    cdef Py_ssize_t steps = nsteps
    xs = np.empty((batch, nsteps + 1, n))
    xis = np.empty((batch, nsteps + 1, n))
    xs[:, 0] = x0
    xis[:, 0] = xi0
    scratch = np.empty((12, n))
    vals = np.empty(npolys)
    cdef const double[::1] c = coeffs
    cdef const unsigned char[:, ::1] pw = powers
    cdef const long long[::1] st = starts
    cdef const long long[::1] gi = g_index
    cdef const long long[::1] dgi = dg_index
    cdef double[:, :, ::1] hx = xs
    cdef double[:, :, ::1] hxi = xis
    cdef double[:, ::1] w = scratch
    cdef double[::1] v = vals
    cdef double h = t_end / nsteps
    cdef double half_h = 0.5 * h
    cdef double sixth_h = h / 6.0
    cdef Py_ssize_t b, i, d
    cdef double[::1] x, xi, xt, xit, k1x, k1xi, k2x, k2xi, k3x, k3xi, k4x, k4xi
    x = w[0]; xi = w[1]; xt = w[2]; xit = w[3]
    k1x = w[4]; k1xi = w[5]
    k2x = w[6]; k2xi = w[7]
    k3x = w[8]; k3xi = w[9]
    k4x = w[10]; k4xi = w[11]
    with nogil:
        for b in range(batch):
            for d in range(n):
                x[d] = hx[b, 0, d]
                xi[d] = hxi[b, 0, d]
            for i in range(steps):
                _rhs_point(c, pw, st, gi, dgi, x, xi, v, k1x, k1xi, n, npolys)
                for d in range(n):
                    xt[d] = x[d] + half_h * k1x[d]
                    xit[d] = xi[d] + half_h * k1xi[d]
                _rhs_point(c, pw, st, gi, dgi, xt, xit, v, k2x, k2xi, n, npolys)
                for d in range(n):
                    xt[d] = x[d] + half_h * k2x[d]
                    xit[d] = xi[d] + half_h * k2xi[d]
                _rhs_point(c, pw, st, gi, dgi, xt, xit, v, k3x, k3xi, n, npolys)
                for d in range(n):
                    xt[d] = x[d] + h * k3x[d]
                    xit[d] = xi[d] + h * k3xi[d]
                _rhs_point(c, pw, st, gi, dgi, xt, xit, v, k4x, k4xi, n, npolys)
                for d in range(n):
                    x[d] = x[d] + sixth_h * (
                        k1x[d] + 2.0 * k2x[d] + 2.0 * k3x[d] + k4x[d]
                    )
                    xi[d] = xi[d] + sixth_h * (
                        k1xi[d] + 2.0 * k2xi[d] + 2.0 * k3xi[d] + k4xi[d]
                    )
                    hx[b, i + 1, d] = x[d]
                    hxi[b, i + 1, d] = xi[d]
    return xs, xis
