"""Test problems: fluxes, initial data and exact solutions."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .basis import gauss_legendre
from .exceptions import NonPhysicalState
from .ldg import BurgersFlux, Flux1D, LinearFlux, NoFlux

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Problem1D:
    name: str
    flux: Flux1D
    eps: float
    T: float
    w0: Callable
    exact: Callable  # exact(x, t)
    derivatives: Optional[tuple] = None  # (w0, w0', w0'', w0''') when smooth
    breakpoints: tuple = ()
    domain: tuple = (0.0, 1.0)


def _sine_derivatives(shift=0.0):
    k = TWO_PI
    return (
        lambda x: np.sin(k * (x - shift)),
        lambda x: k * np.cos(k * (x - shift)),
        lambda x: -(k**2) * np.sin(k * (x - shift)),
        lambda x: -(k**3) * np.cos(k * (x - shift)),
    )


def heat_problem(eps=0.1, T=0.5):
    def exact(x, t):
        return np.exp(-(TWO_PI**2) * eps * t) * np.sin(TWO_PI * np.asarray(x))

    d = _sine_derivatives()
    return Problem1D("heat", NoFlux(), eps, T, d[0], exact, d)


def convection_problem(c=1.0, T=0.5):
    def exact(x, t):
        return np.sin(TWO_PI * (np.asarray(x) - c * t))

    d = _sine_derivatives()
    return Problem1D("convection", LinearFlux(c), 0.0, T, d[0], exact, d)


def step_profile(x):
    """H(sin(2 pi (x - 0.3))) exp(sin(2 pi x)); nonzero on (0.3, 0.8) mod 1."""
    x = np.asarray(x, dtype=float)
    on = np.sin(TWO_PI * (x - 0.3)) > 0.0
    return np.where(on, np.exp(np.sin(TWO_PI * x)), 0.0)


class FourierOracle:
    """Exact solution of w_t + c w_x = eps w_xx for the step profile.

    Mode k of the initial data is damped by exp(-4 pi^2 k^2 eps t) and
    translated with speed c; the series is cut once a term drops below tol.
    """

    def __init__(self, c, eps, lo=0.3, hi=0.8, max_modes=4096, tol=1e-14):
        self.c, self.eps, self.tol = c, eps, tol
        self.lo, self.hi = lo, hi
        panels = 256
        q = gauss_legendre(24)
        edges = np.linspace(lo, hi, panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        x = (0.5 * (b - a) * q.nodes + 0.5 * (a + b)).ravel()
        w = (0.5 * (b - a) * q.weights).ravel()
        k = np.arange(max_modes + 1)
        g = w * np.exp(np.sin(TWO_PI * x))
        self.coeffs = np.exp(-1j * TWO_PI * np.outer(k, x)) @ g
        self.k = k

    def n_modes(self, t):
        damp = np.exp(-(TWO_PI**2) * self.k**2 * self.eps * t)
        size = np.abs(self.coeffs) * damp
        # the coefficients decay like 1/k, so the damped tail is monotone
        # once the damping dominates
        small = np.nonzero((size < self.tol) & (damp < 1e-3))[0]
        if len(small) == 0:
            raise ValueError(f"Fourier series not converged at t={t} with {len(self.k)} modes")
        return int(small[0])

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        if t == 0.0:
            return step_profile(x)
        K = self.n_modes(t)
        k = self.k[:K]
        amp = self.coeffs[:K] * np.exp(-(TWO_PI**2) * k**2 * self.eps * t)
        phase = np.exp(1j * TWO_PI * np.multiply.outer(x - self.c * t, k))
        terms = phase @ (amp * np.where(k == 0, 1.0, 2.0))
        return terms.real


def convection_diffusion_problem(smooth=True, c=1.0, eps=0.1, T=0.5):
    if smooth:
        def exact(x, t):
            return np.exp(-(TWO_PI**2) * eps * t) * np.sin(TWO_PI * (np.asarray(x) - c * t))

        d = _sine_derivatives()
        return Problem1D("convdiff", LinearFlux(c), eps, T, d[0], exact, d)
    oracle = FourierOracle(c, eps)
    return Problem1D("convdiff-step", LinearFlux(c), eps, T, step_profile, oracle, None, (0.3, 0.8))


class ColeHopfOracle:
    """Viscous Burgers solution from w0 = sin(2 pi x) via w = -2 eps phi_x / phi.

    phi solves the heat equation with phi0 = exp(-(1 - cos 2 pi x) / (4 pi eps)),
    an even function whose cosine coefficients are computed by FFT.
    """

    def __init__(self, eps, n_samples=1024):
        self.eps = eps
        x = np.arange(n_samples) / n_samples
        phi0 = np.exp(-(1.0 - np.cos(TWO_PI * x)) / (4.0 * np.pi * eps))
        a = np.fft.rfft(phi0).real / n_samples
        half = n_samples // 2
        if abs(a[half - 1]) > 1e-13 * abs(a[0]):
            raise ValueError("Cole-Hopf series has not converged; trailing mode too large")
        self.a = a[:half]
        self.k = np.arange(half)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        k, eps = self.k, self.eps
        amp = self.a * np.exp(-(TWO_PI**2) * k**2 * eps * t) * np.where(k == 0, 1.0, 2.0)
        arg = TWO_PI * np.multiply.outer(x, k)
        phi = np.cos(arg) @ amp
        phi_x = -np.sin(arg) @ (amp * TWO_PI * k)
        return -2.0 * eps * phi_x / phi


def burgers_problem(eps=0.1, T=0.5):
    d = _sine_derivatives()
    return Problem1D("burgers", BurgersFlux(), eps, T, d[0], ColeHopfOracle(eps), d)


PROBLEMS_1D = {
    "heat": heat_problem,
    "convection": convection_problem,
    "convdiff": lambda: convection_diffusion_problem(True),
    "convdiff-step": lambda: convection_diffusion_problem(False),
    "burgers": burgers_problem,
}


# --------------------------------------------------------------------------
# 2D systems


class Flux2D:
    """Flux pair (f_1, f_2) of an m-component system.

    Shapes: flux -> (..., 2, m); jacobian -> (..., 2, m, m);
    jacobian_derivative -> (..., 2, m, m, m) with the last axis the
    differentiation variable.
    """

    m = 1

    def flux(self, w):
        raise NotImplementedError

    def jacobian(self, w):
        raise NotImplementedError

    def jacobian_derivative(self, w):
        """d A_d / d w_k by complex step of the analytic Jacobian."""
        w = np.asarray(w, dtype=float)
        h = 1e-30
        out = np.empty(w.shape[:-1] + (2, self.m, self.m, self.m))
        for k in range(self.m):
            wc = w.astype(complex)
            wc[..., k] += 1j * h
            out[..., k] = self.jacobian(wc).imag / h
        return out

    def max_speed(self, w, normals):
        """Spectral radius of n . f'(w), broadcast over points and normals."""
        A = self.jacobian(w)
        An = normals[..., 0, None, None] * A[..., 0, :, :] + normals[..., 1, None, None] * A[..., 1, :, :]
        return np.abs(np.linalg.eigvals(An)).max(axis=-1)


class LinearFlux2D(Flux2D):
    linear = True

    def __init__(self, A1, A2):
        self.A = np.stack([np.asarray(A1, dtype=float), np.asarray(A2, dtype=float)])
        self.m = self.A.shape[-1]

    def flux(self, w):
        return np.einsum("dij,...j->...di", self.A, w)

    def jacobian(self, w):
        w = np.asarray(w)
        return np.broadcast_to(self.A.astype(w.dtype), w.shape[:-1] + self.A.shape).copy()

    def jacobian_derivative(self, w):
        w = np.asarray(w)
        return np.zeros(w.shape[:-1] + (2, self.m, self.m, self.m))


class EulerFlux(Flux2D):
    linear = False
    m = 4

    def __init__(self, gamma=1.4):
        self.gamma = gamma

    def primitives(self, w):
        rho, mx, my, E = (w[..., i] for i in range(4))
        u, v = mx / rho, my / rho
        P = (self.gamma - 1.0) * (E - 0.5 * rho * (u * u + v * v))
        if np.any(np.real(rho) <= 0) or np.any(np.real(P) <= 0):
            raise NonPhysicalState("non-positive density or pressure")
        return rho, u, v, P

    def flux(self, w):
        rho, u, v, P = self.primitives(w)
        E = w[..., 3]
        f1 = np.stack([rho * u, rho * u * u + P, rho * u * v, u * (E + P)], axis=-1)
        f2 = np.stack([rho * v, rho * u * v, rho * v * v + P, v * (E + P)], axis=-1)
        return np.stack([f1, f2], axis=-2)

    def jacobian(self, w):
        rho, u, v, P = self.primitives(w)
        g = self.gamma
        gt = g - 1.0
        q2 = u * u + v * v
        H = (w[..., 3] + P) / rho
        z, o = np.zeros_like(u), np.ones_like(u)
        A1 = [
            [z, o, z, z],
            [0.5 * gt * q2 - u * u, (3.0 - g) * u, -gt * v, gt * o],
            [-u * v, v, u, z],
            [u * (0.5 * gt * q2 - H), H - gt * u * u, -gt * u * v, g * u],
        ]
        A2 = [
            [z, z, o, z],
            [-u * v, v, u, z],
            [0.5 * gt * q2 - v * v, -gt * u, (3.0 - g) * v, gt * o],
            [v * (0.5 * gt * q2 - H), -gt * u * v, H - gt * v * v, g * v],
        ]
        A = np.array([A1, A2])  # (2, m, m, ...)
        return np.moveaxis(A, (0, 1, 2), (-3, -2, -1))

    def max_speed(self, w, normals):
        rho, u, v, P = self.primitives(w)
        c = np.sqrt(self.gamma * P / rho)
        return np.abs(u * normals[..., 0] + v * normals[..., 1]) + c


@dataclass(frozen=True)
class Problem2D:
    name: str
    flux: Flux2D
    L: float
    T: float
    w0: Callable  # w0(x, y) -> (..., m)
    exact: Callable  # exact(x, y, t) -> (..., m)
    components: tuple = field(default=())

    @property
    def m(self):
        return self.flux.m


LINEAR_A1 = np.array([[1.0, 8.0], [16.0, -7.0]]) / 3.0
LINEAR_A2 = np.array([[-7.0, -5.0], [-10.0, -2.0]]) / 3.0


def linear_system_2d(T=0.1):
    def exact(x, y, t):
        s = np.sin(np.pi * (np.asarray(x) + y + t))
        return np.stack([s, s], axis=-1)

    return Problem2D(
        "linear2d",
        LinearFlux2D(LINEAR_A1, LINEAR_A2),
        2.0,
        T,
        lambda x, y: exact(x, y, 0.0),
        exact,
        ("w1", "w2"),
    )


def euler_problem(T=0.5, gamma=1.4, u=0.7, v=0.3, P=1.0):
    def exact(x, y, t):
        rho = 1.0 + 0.2 * np.sin(np.pi * (np.asarray(x) + y - (u + v) * t))
        E = P / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)
        return np.stack([rho, rho * u, rho * v, E], axis=-1)

    return Problem2D(
        "euler",
        EulerFlux(gamma),
        2.0,
        T,
        lambda x, y: exact(x, y, 0.0),
        exact,
        ("rho", "rhou", "rhov", "E"),
    )


def constant_state_problem(state, flux, T=0.1, L=2.0):
    state = np.asarray(state, dtype=float)

    def exact(x, y, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(state, x.shape + state.shape).copy()

    return Problem2D("constant", flux, L, T, lambda x, y: exact(x, y, 0.0), exact)


PROBLEMS_2D = {"linear2d": linear_system_2d, "euler": euler_problem}
