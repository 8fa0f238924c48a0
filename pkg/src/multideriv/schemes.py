"""Two-point two-derivative time integrators.

A scheme advances y' = g(y) by

    y1 = y0 + dt (a1 g(y0) + a2 g(y1)) + dt^2 (b1 g'(y0) + b2 g'(y1))

with g' = dg/dt.  Coefficients come from Hermite-Birkhoff collocation with
the generating polynomial P(t) = t^k (t-1)^l / (k+l)!.
"""
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

SUPPORTED = {(1, 1), (1, 2), (2, 1), (2, 2)}


@dataclass(frozen=True)
class SchemeCoeffs:
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    order: int
    k: int
    l: int
    exact: tuple = ()  # (a1, a2, b1, b2) as Fractions

    @property
    def name(self):
        return {(1, 2): "third", (2, 2): "fourth"}.get((self.k, self.l), f"k{self.k}l{self.l}")


def _poly_coeffs(k, l):
    """Increasing-power coefficients of t^k (t-1)^l / (k+l)!, exact."""
    m = k + l
    c = [Fraction(0)] * (m + 1)
    for i in range(l + 1):
        c[k + i] = Fraction(comb(l, i) * (-1) ** (l - i), factorial(m))
    return c


def _deriv_at(c, order, t):
    total = Fraction(0)
    for n, cn in enumerate(c):
        if n >= order and cn:
            total += cn * Fraction(factorial(n), factorial(n - order)) * Fraction(t) ** (n - order)
    return total


def generate_scheme(k, l):
    if (k, l) not in SUPPORTED:
        raise ValueError(f"(k, l) = ({k}, {l}) is not a supported two-derivative two-point scheme")
    m = k + l
    P = _poly_coeffs(k, l)
    lead = _deriv_at(P, m, 0)  # = 1, kept for clarity of the normalization
    a1 = _deriv_at(P, m - 1, 1) / lead
    a2 = -_deriv_at(P, m - 1, 0) / lead
    b1 = _deriv_at(P, m - 2, 1) / lead
    b2 = -_deriv_at(P, m - 2, 0) / lead
    return SchemeCoeffs(float(a1), float(a2), float(b1), float(b2), m, k, l, (a1, a2, b1, b2))


def third_order():
    return generate_scheme(1, 2)


def fourth_order():
    return generate_scheme(2, 2)


def scheme_by_name(name):
    """Resolve 'third', 'fourth', '7', '8' or 'k,l' to a scheme."""
    key = str(name).strip().lower()
    if key in ("third", "3", "7"):
        return third_order()
    if key in ("fourth", "4", "8"):
        return fourth_order()
    parts = key.replace("(", "").replace(")", "").split(",")
    if len(parts) == 2:
        return generate_scheme(int(parts[0]), int(parts[1]))
    raise ValueError(f"unknown scheme {name!r}")


@dataclass(frozen=True)
class StabilityFunction:
    numerator: np.ndarray  # increasing powers of mu
    denominator: np.ndarray
    order: int = 0

    def __call__(self, mu):
        mu = np.asarray(mu, dtype=complex)
        num = np.polynomial.polynomial.polyval(mu, self.numerator)
        den = np.polynomial.polynomial.polyval(mu, self.denominator)
        return num / den

    def poles(self):
        den = np.trim_zeros(np.asarray(self.denominator, dtype=float), "b")
        if len(den) <= 1:
            return np.array([], dtype=complex)
        return np.polynomial.polynomial.polyroots(den)


def stability_function(scheme):
    num = np.array([1.0, scheme.alpha1, scheme.beta1])
    den = np.array([1.0, -scheme.alpha2, -scheme.beta2])
    return StabilityFunction(num, den, scheme.order)


@dataclass(frozen=True)
class AStability:
    stable: bool
    max_modulus: float
    pole_in_left_half_plane: bool


def check_a_stability(R, samples=None):
    if samples is None:
        y = np.logspace(-6, 6, 2001)
        samples = np.concatenate([[0.0], y, -y])
    poles = R.poles()
    bad_pole = bool(np.any(poles.real <= 0.0))
    mod = np.abs(R(1j * np.asarray(samples, dtype=float)))
    max_mod = float(mod.max())
    return AStability(not bad_pole and max_mod <= 1.0 + 1e-12, max_mod, bad_pole)


def _degree(c):
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    return len(c) - 1


def check_l_stability(R):
    return _degree(R.numerator) < _degree(R.denominator) and check_a_stability(R).stable


def pade_exp(p, q):
    """Numerator/denominator coefficients of the (p, q) Pade approximant of exp."""
    num = [factorial(p + q - j) * factorial(p) / (factorial(p + q) * factorial(j) * factorial(p - j)) for j in range(p + 1)]
    den = [(-1) ** j * factorial(p + q - j) * factorial(q) / (factorial(p + q) * factorial(j) * factorial(q - j)) for j in range(q + 1)]
    return np.array(num), np.array(den)


def pade_check(R, p, q):
    num, den = pade_exp(p, q)

    def gap(a, b):
        n = max(len(a), len(b))
        a = np.pad(np.asarray(a, dtype=float), (0, n - len(a)))
        b = np.pad(np.asarray(b, dtype=float), (0, n - len(b)))
        return np.abs(a - b).max()

    return float(max(gap(R.numerator, num), gap(R.denominator, den)))


def step_linear_ode(y, lam, dt, scheme):
    """One step of the scheme on y' = lam * y (so g' = lam^2 y)."""
    mu = lam * dt
    rhs = y * (1.0 + scheme.alpha1 * mu + scheme.beta1 * mu * mu)
    return rhs / (1.0 - scheme.alpha2 * mu - scheme.beta2 * mu * mu)
