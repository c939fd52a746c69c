"""Self-contained special functions for the Riemann-Hilbert machinery.

Provides the Airy function on the whole complex plane (Maclaurin series for
small argument, asymptotic expansion plus the rotation connection formula for
large argument), the rotated Airy triple y_1, y_2, y_3 used by the local
parametrix (including overflow-safe scaled evaluation), a Jacobi-type theta
series in the exponential convention, and Gauss-Legendre quadrature rules on
parametrized complex arcs.
"""

import math
from dataclasses import dataclass

import numpy as np

SQRT_PI = math.sqrt(math.pi)

# Ai(0) = 3^{-2/3}/Gamma(2/3), Ai'(0) = -3^{-1/3}/Gamma(1/3)
_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)

_RHO = np.exp(2j * np.pi / 3.0)
VARSIGMA = np.exp(-3j * np.pi / 4.0)

# series/asymptotic switchover radius for Ai
_SERIES_RADIUS = 6.0

# annulus where neither representation reaches full double precision in the
# recessive direction; callers that need 12 digits there should check
# in_precision_gap
GAP_ANNULUS = (3.0, 9.0)


def _uv_coeffs(n=40):
    u = [1.0]
    for k in range(n - 1):
        u.append(u[-1] * (6 * k + 1) * (6 * k + 3) * (6 * k + 5)
                 / (216.0 * (k + 1) * (2 * k + 1)))
    v = [u[k] * (6 * k + 1) / (1.0 - 6 * k) if k > 0 else 1.0 for k in range(n)]
    return np.array(u), np.array(v)


_UK, _VK = _uv_coeffs()


def _asym_sum(coeffs, x):
    # sum coeffs[k] * x^k, truncated at the smallest term
    s = coeffs[0] + 0j
    term = 1.0 + 0j
    prev = np.inf
    for k in range(1, len(coeffs)):
        term = term * x
        t = coeffs[k] * term
        at = abs(t)
        if at > prev:
            break
        s += t
        prev = at
        if at < 1e-17 * abs(s):
            break
    return s


def _ai_series(z):
    """Maclaurin series for (Ai(z), Ai'(z))."""
    z = complex(z)
    z3 = z * z * z
    tf = 1.0 + 0j
    tg = z
    tfp = 0.5 * z * z
    tgp = 1.0 + 0j
    f, g, fp, gp = tf, tg, tfp, tgp
    for k in range(0, 200):
        tf = tf * z3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * z3 / ((3 * k + 3) * (3 * k + 4))
        tfp = tfp * z3 / ((3 * k + 3) * (3 * k + 5))
        tgp = tgp * z3 / ((3 * k + 1) * (3 * k + 3))
        f += tf
        g += tg
        fp += tfp
        gp += tgp
        if (abs(tf) + abs(tg) + abs(tfp) + abs(tgp)
                < 1e-18 * (abs(f) + abs(g) + abs(fp) + abs(gp) + 1.0)):
            break
    return _AI0 * f + _AIP0 * g, _AI0 * fp + _AIP0 * gp


def _ai_asym(z):
    """Asymptotic expansion for (Ai(z), Ai'(z)), |arg z| <= 2*pi/3."""
    z = complex(z)
    zeta = (2.0 / 3.0) * z ** 1.5
    x = -1.0 / zeta
    s = _asym_sum(_UK, x)
    sp = _asym_sum(_VK, x)
    e = np.exp(-zeta)
    q = z ** 0.25
    return e * s / (2.0 * SQRT_PI * q), -e * q * sp / (2.0 * SQRT_PI)


def _ai_both(z):
    z = complex(z)
    if abs(z) < _SERIES_RADIUS:
        return _ai_series(z)
    if abs(np.angle(z)) <= 2.0 * np.pi / 3.0:
        return _ai_asym(z)
    # connection formula: Ai(z) = -rho Ai(rho z) - rho^2 Ai(rho^2 z);
    # both rotated arguments land in the valid sector of the expansion
    a1, a1p = _ai_asym(_RHO * z)
    a2, a2p = _ai_asym(_RHO * _RHO * z)
    ai = -_RHO * a1 - _RHO * _RHO * a2
    aip = -_RHO * _RHO * a1p - _RHO * a2p
    return ai, aip


def airy_ai(z):
    """Airy function Ai at complex z."""
    return _ai_both(z)[0]


def airy_ai_deriv(z):
    """Derivative Ai' at complex z."""
    return _ai_both(z)[1]


def in_precision_gap(z):
    """True when |z| falls in the annulus where the recessive Airy solution
    cannot be delivered to full double precision by either representation."""
    r = abs(complex(z))
    return GAP_ANNULUS[0] <= r <= GAP_ANNULUS[1]


def _theta_arg(w):
    """Argument of w with the branch cut on the positive imaginary axis,
    values in (-3*pi/2, pi/2]."""
    th = np.angle(complex(w))
    if th > np.pi / 2.0 + 1e-300:
        th -= 2.0 * np.pi
    return th


def _w_pow(w, p):
    """w^p with the branch cut on the positive imaginary axis."""
    th = _theta_arg(w)
    return abs(complex(w)) ** p * np.exp(1j * p * th)


# value and derivative prefactors of the large-w behaviour of y_i:
# y_i ~ pref * w^{-1/4} exp(eps*i*varsigma*w^{3/2}),
# y_i' ~ -(3 i varsigma/2) * dpref * w^{1/4} exp(eps*i*varsigma*w^{3/2})
_ASYM_PREF = {
    (1, +1): (1.0, -1.0),
    (2, +1): (-1.0, 1.0),
    (2, -1): (1j, 1j),
    (3, +1): (-1.0, 1.0),
    (3, -1): (-1j, -1j),
}


class AiryBundle:
    """The three rotated Airy solutions y_1, y_2, y_3 of y'' = -w y (up to the
    scaling built into their definition) and their derivatives.

    y_1(w) = 2 sqrt(pi) e^{i pi/8} (3/2)^{1/6} Ai(i w (3/2)^{2/3}),
    y_2(w) = rho y_1(rho w), y_3(w) = rho^2 y_1(rho^2 w), rho = e^{2 pi i/3}.

    The scaled accessors factor out the exponential exp(eps*i*varsigma*w^{3/2})
    so that products with exponentially large conjugators can be formed without
    overflow.
    """

    varsigma = VARSIGMA
    rho = _RHO

    _C1 = 2.0 * SQRT_PI * np.exp(1j * np.pi / 8.0) * 1.5 ** (1.0 / 6.0)
    _ZFAC = 1j * 1.5 ** (2.0 / 3.0)

    def _y1_pair(self, w):
        a, ap = _ai_both(self._ZFAC * w)
        return self._C1 * a, self._C1 * self._ZFAC * ap

    def y(self, i, w):
        """Value of y_i at w, i in {1, 2, 3}."""
        return self.y_pair(i, w)[0]

    def y_deriv(self, i, w):
        """Derivative of y_i at w."""
        return self.y_pair(i, w)[1]

    def y_pair(self, i, w):
        """(y_i(w), y_i'(w))."""
        w = complex(w)
        if i == 1:
            return self._y1_pair(w)
        if i == 2:
            v, d = self._y1_pair(self.rho * w)
            return self.rho * v, self.rho * self.rho * d
        if i == 3:
            v, d = self._y1_pair(self.rho * self.rho * w)
            return self.rho * self.rho * v, self.rho * d
        raise ValueError("index must be 1, 2 or 3")

    def sector_eps(self, i, w):
        """Sign eps of the exponential behaviour exp(eps*i*varsigma*w^{3/2})
        of y_i at w (sectors of the asymptotic expansion)."""
        th = _theta_arg(w)
        if i == 1:
            return +1
        if i == 2:
            return +1 if th > -np.pi / 6.0 else -1
        if i == 3:
            return +1 if th < -5.0 * np.pi / 6.0 else -1
        raise ValueError("index must be 1, 2 or 3")

    def y_scaled(self, i, w):
        """(yhat, yphat, eps) with y_i = yhat * exp(eps*i*varsigma*w^{3/2})
        and y_i' = yphat * exp(eps*i*varsigma*w^{3/2}); stable for large |w|."""
        w = complex(w)
        eps = self.sector_eps(i, w)
        w32 = _w_pow(w, 1.5)
        if abs(w) < _SERIES_RADIUS:
            # exponent is at most ~15 in magnitude here: direct rescale
            e = np.exp(-eps * 1j * self.varsigma * w32)
            v, d = self.y_pair(i, w)
            return v * e, d * e, eps
        pref, dpref = _ASYM_PREF[(i, eps)]
        zeta = -1j * self.varsigma * w32
        x = -eps / zeta
        s = _asym_sum(_UK, x)
        sp = _asym_sum(_VK, x)
        w14 = _w_pow(w, 0.25)
        yhat = pref * s / w14
        yphat = -(1.5j * self.varsigma) * dpref * w14 * sp
        return yhat, yphat, eps


@dataclass(frozen=True)
class ThetaParams:
    """Lattice parameter and truncation order for the theta series
    theta(v | tau) = sum_m exp(m^2 tau / 2 + m v), tau < 0."""
    tau: float
    M: int

    def __post_init__(self):
        if not (self.tau < 0):
            raise ValueError("tau must be a negative real number")
        if self.M < 1:
            raise ValueError("truncation order M must be >= 1")


def theta_params(tau):
    """ThetaParams with truncation chosen so the dropped tail is below 1e-16
    relative for arguments with |Re v| <= |tau| after reduction."""
    if not (tau < 0):
        raise ValueError("tau must be a negative real number")
    M = int(math.ceil(1.0 + math.sqrt(1.0 + 84.0 / abs(tau)))) + 2
    return ThetaParams(tau=float(tau), M=M)


def theta(v, params):
    """Theta series theta(v | tau) = sum_{m in Z} exp(m^2 tau/2 + m v).

    Periods are 2*pi*i (exact) and tau (quasi-period). Arguments with large
    real part are reduced via theta(v + N tau) = exp(-N^2 tau/2 - N v_red)
    theta(v_red) before summation.
    """
    tau = params.tau
    v = np.asarray(v, dtype=complex)
    N = np.round(np.real(v) / tau)
    vr = v - N * tau
    vr = vr - 2j * np.pi * np.round(np.imag(vr) / (2.0 * np.pi))
    m = np.arange(-params.M, params.M + 1)
    expo = 0.5 * tau * m * m + np.multiply.outer(vr, m)
    s = np.exp(expo).sum(axis=-1)
    out = np.exp(-0.5 * tau * N * N - N * vr) * s
    if out.shape == ():
        return complex(out)
    return out


def gauss_legendre(arc, n):
    """Gauss-Legendre nodes and weights along a parametrized arc.

    Parameters
    ----------
    arc : tuple (za, zb) for a straight segment, or an object with
        vector-callable methods point(s) and tangent(s) on s in [0, 1].
    n : int
        Node count, n >= 2.

    Returns
    -------
    nodes, weights : complex arrays such that sum(f(nodes)*weights)
        approximates the contour integral of f along the arc.
    """
    if n < 2:
        raise ValueError("need at least 2 quadrature nodes")
    x, wts = np.polynomial.legendre.leggauss(int(n))
    s = 0.5 * (x + 1.0)
    if isinstance(arc, (tuple, list)) and len(arc) == 2 \
            and not hasattr(arc[0], "point"):
        za, zb = complex(arc[0]), complex(arc[1])
        if zb == za:
            raise ValueError("degenerate (zero-length) arc")
        return za + s * (zb - za), 0.5 * (zb - za) * wts
    pts = np.asarray(arc.point(s), dtype=complex)
    tan = np.asarray(arc.tangent(s), dtype=complex)
    if np.max(np.abs(tan)) == 0.0:
        raise ValueError("degenerate (zero-length) arc")
    return pts, 0.5 * wts * tan
