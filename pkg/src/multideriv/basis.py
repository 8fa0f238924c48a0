"""Reference-element bases and quadrature.

Interval reference element is [-1, 1]; the reference triangle has vertices
(0, 0), (1, 0), (0, 1).  Both bases are orthonormal on their reference
element, so mass matrices are multiples of the identity.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi, gammaln, roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n,) on the interval, (n, 2) on the triangle
    weights: np.ndarray
    degree: int  # polynomials up to this total degree are integrated exactly

    def __len__(self):
        return len(self.weights)

    def integrate(self, f):
        """Integrate a vectorized callable over the reference domain."""
        if self.nodes.ndim == 1:
            vals = f(self.nodes)
        else:
            vals = f(self.nodes[:, 0], self.nodes[:, 1])
        return np.tensordot(self.weights, vals, axes=(0, 0))


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """n-point Gauss-Legendre rule on [-1, 1], exact for degree 2n - 1."""
    if n < 1:
        raise ValueError(f"need at least one quadrature point, got n={n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(x, w, 2 * n - 1)


def gauss_legendre_degree(degree):
    return gauss_legendre(max(1, (degree + 2) // 2))


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Collapsed-coordinate (Duffy) rule on the reference triangle.

    Gauss-Legendre in the collapsed direction and Gauss-Jacobi(1, 0) in the
    other, so n points per direction integrate total degree 2n - 1 exactly.
    """
    n = max(1, (degree + 2) // 2)
    xu, wu = np.polynomial.legendre.leggauss(n)
    xv, wv = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(0.5 * wu, 0.25 * wv)
    xi = U * (1.0 - V)
    eta = V
    nodes = np.column_stack([xi.ravel(), eta.ravel()])
    return QuadratureRule(nodes, W.ravel(), 2 * n - 1)


class Basis1D:
    """Orthonormal Legendre basis sqrt((2i+1)/2) P_i on [-1, 1]."""

    def __init__(self, p):
        if p < 0:
            raise ValueError("polynomial degree must be nonnegative")
        self.p = p
        self.n = p + 1
        self._scale = np.sqrt((2 * np.arange(self.n) + 1) / 2.0)

    @property
    def dim(self):
        return self.n

    def values(self, x):
        """Basis values, shape (len(x), p+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.polynomial.legendre.legvander(x, self.p) * self._scale

    def derivatives(self, x):
        """d/dx of each basis function, shape (len(x), p+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.n))
        for i in range(self.n):
            c = np.zeros(self.n)
            c[i] = self._scale[i]
            out[:, i] = np.polynomial.legendre.legval(x, np.polynomial.legendre.legder(c))
        return out


def _jacobi_normalized(n, a, b, x):
    log_gamma = (
        (a + b + 1) * np.log(2.0)
        - np.log(2 * n + a + b + 1)
        + gammaln(n + a + 1)
        + gammaln(n + b + 1)
        - gammaln(n + a + b + 1)
        - gammaln(n + 1)
    )
    return eval_jacobi(n, a, b, x) / np.exp(0.5 * log_gamma)


def _jacobi_normalized_deriv(n, a, b, x):
    if n == 0:
        return np.zeros_like(x)
    return np.sqrt(n * (n + a + b + 1)) * _jacobi_normalized(n - 1, a + 1, b + 1, x)


class BasisTri:
    """Orthonormal Dubiner basis on the reference triangle (0,0), (1,0), (0,1).

    Modes are ordered by total degree, so the first (q+1)(q+2)/2 functions
    span the polynomials of degree q.
    """

    def __init__(self, p):
        if p < 0:
            raise ValueError("polynomial degree must be nonnegative")
        self.p = p
        self.modes = [(i, d - i) for d in range(p + 1) for i in range(d, -1, -1)]
        self.n = len(self.modes)

    @property
    def dim(self):
        return self.n

    @staticmethod
    def _collapse(xi, eta):
        r = 2.0 * np.asarray(xi, dtype=float) - 1.0
        s = 2.0 * np.asarray(eta, dtype=float) - 1.0
        denom = 1.0 - s
        safe = np.abs(denom) > 1e-14
        a = np.where(safe, 2.0 * (1.0 + r) / np.where(safe, denom, 1.0) - 1.0, -1.0)
        return a, s

    def values(self, xi, eta):
        xi = np.atleast_1d(xi)
        eta = np.atleast_1d(eta)
        a, b = self._collapse(xi, eta)
        out = np.empty((a.size, self.n))
        for k, (i, j) in enumerate(self.modes):
            h1 = _jacobi_normalized(i, 0, 0, a)
            h2 = _jacobi_normalized(j, 2 * i + 1, 0, b)
            # factor 2 rescales from the area-2 triangle to the area-1/2 one
            out[:, k] = 2.0 * np.sqrt(2.0) * h1 * h2 * (1.0 - b) ** i
        return out

    def gradients(self, xi, eta):
        """Reference gradients, shape (npts, n, 2) ordered (d/dxi, d/deta)."""
        xi = np.atleast_1d(xi)
        eta = np.atleast_1d(eta)
        a, b = self._collapse(xi, eta)
        out = np.empty((a.size, self.n, 2))
        for k, (i, j) in enumerate(self.modes):
            fa = _jacobi_normalized(i, 0, 0, a)
            dfa = _jacobi_normalized_deriv(i, 0, 0, a)
            gb = _jacobi_normalized(j, 2 * i + 1, 0, b)
            dgb = _jacobi_normalized_deriv(j, 2 * i + 1, 0, b)
            half = 0.5 * (1.0 - b)
            ddr = dfa * gb
            dds = dfa * gb * 0.5 * (1.0 + a)
            if i > 0:
                ddr = ddr * half ** (i - 1)
                dds = dds * half ** (i - 1)
            tmp = dgb * half**i
            if i > 0:
                tmp = tmp - 0.5 * i * gb * half ** (i - 1)
            dds = dds + fa * tmp
            norm = 2.0 ** (i + 0.5)
            # d/dxi = 2 d/dr, plus the same factor 2 as in values()
            out[:, k, 0] = 4.0 * norm * ddr
            out[:, k, 1] = 4.0 * norm * dds
        return out


def project_l2(f, basis, quad, breakpoints=()):
    """Coefficients of the L2 projection of f onto an orthonormal 1D basis.

    ``f`` is evaluated at reference coordinates in [-1, 1].  Discontinuities of
    f listed in ``breakpoints`` (reference coordinates) split the element so
    each piece is integrated with the full rule.
    """
    cuts = [-1.0] + sorted(b for b in breakpoints if -1.0 < b < 1.0) + [1.0]
    coeffs = np.zeros(basis.dim)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        x = 0.5 * (hi - lo) * quad.nodes + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * quad.weights
        coeffs += (w * np.asarray(f(x), dtype=float)) @ basis.values(x)
    return coeffs


def project_l2_tri(f, basis, quad):
    """L2 projection onto the orthonormal triangle basis (reference coords)."""
    xi, eta = quad.nodes[:, 0], quad.nodes[:, 1]
    return (quad.weights * np.asarray(f(xi, eta), dtype=float)) @ basis.values(xi, eta)


def evaluate(coeffs, basis, x):
    return basis.values(x) @ np.asarray(coeffs)


def evaluate_deriv(coeffs, basis, x):
    return basis.derivatives(x) @ np.asarray(coeffs)


def gram_matrix(basis, quad):
    if quad.nodes.ndim == 1:
        V = basis.values(quad.nodes)
    else:
        V = basis.values(quad.nodes[:, 0], quad.nodes[:, 1])
    return V.T @ (quad.weights[:, None] * V)
