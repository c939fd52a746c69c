"""Scattering data for steplike potentials.

Supplies the reflection coefficient R(k) and the continued product function
chi(k) that feed the jump matrices: closed forms for the pure step
q(x) = -c^2 * [x < 0], and a numerical Jost-solution oracle (ODE integration
of the stationary Schroedinger equation) for sampled potentials.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp


def k1_branch(k, c, side=+1):
    """sqrt(k^2 + c^2), holomorphic off [-ic, ic], asymptotic to k at infinity.

    On the cut the limit from Re k > 0 is +sqrt(c^2 - y^2) at k = iy; pass
    side=-1 for the limit from the left half-plane.
    """
    k = complex(k)
    if k == 0:
        return side * complex(c)
    if k.real == 0.0 and abs(k.imag) < c:
        return side * np.sqrt(c * c - k.imag * k.imag) + 0j
    return k * np.sqrt(1.0 + (c / k) ** 2)


@dataclass
class ScatteringData:
    """Evaluators for the scattering quantities of a steplike potential.

    R, chi, T, T1 are callables of a complex k (side-aware on the cut via the
    optional second argument); log_abs_chi_band(y) returns log|chi(iy)| for
    y in (0, c), the only chi information the conjugation integrals need.
    """
    c: float
    R: object
    chi: object
    T: object
    T1: object
    log_abs_chi_band: object
    kappas: list = field(default_factory=list)
    C0: float = 0.0


def step_scattering(c):
    """Closed-form scattering data of the pure step q(x) = -c^2 for x < 0."""
    if not c > 0:
        raise ValueError("step height c must be positive")

    def R(k, side=+1):
        k1 = k1_branch(k, c, side)
        return (k - k1) / (k + k1)

    def chi(k, side=+1):
        # defined by the Wronskian closed form in the upper strip and
        # extended to the lower half plane by oddness
        k = complex(k)
        if k.imag < 0:
            return -chi(-k, side)
        return 4.0 * k * k1_branch(k, c, side) / c ** 2

    def T(k, side=+1):
        k1 = k1_branch(k, c, side)
        return 2.0 * k / (k + k1)

    def T1(k, side=+1):
        k1 = k1_branch(k, c, side)
        return 2.0 * k1 / (k + k1)

    def log_abs_chi_band(y):
        y = np.asarray(y, dtype=float)
        return np.log(4.0 * y * np.sqrt(c * c - y * y) / c ** 2)

    return ScatteringData(c=float(c), R=R, chi=chi, T=T, T1=T1,
                          log_abs_chi_band=log_abs_chi_band, C0=2.0 * float(c))


@dataclass
class SampledPotential:
    """Real potential sampled on an increasing grid, with tails 0 at plus
    infinity and -c^2 at minus infinity."""
    x: np.ndarray
    q: np.ndarray
    c: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.q.shape:
            raise ValueError("x and q must be one-dimensional arrays of equal length")
        if not np.all(np.diff(self.x) > 0):
            raise ValueError("non-monotone grid")
        if abs(self.q[-1]) > 1e-10:
            raise ValueError(
                "right tail must settle to 0, measured %.3e" % self.q[-1])
        if abs(self.q[0] + self.c ** 2) > 1e-10:
            raise ValueError(
                "left tail must settle to -c^2 = %.6g, measured %.6g"
                % (-self.c ** 2, self.q[0]))

    def __call__(self, x):
        return np.interp(x, self.x, self.q, left=-self.c ** 2, right=0.0)


def pure_step_potential(c, half_width=None, n_side=120, h_min=4e-6):
    """Sampled pure step on a geometrically graded grid (fine near the
    discontinuity so linear interpolation stays faithful)."""
    if half_width is None:
        half_width = 40.0 / c
    g = np.geomspace(h_min / c, half_width, n_side)
    x = np.concatenate([-g[::-1], g])
    q = np.where(x < 0, -c ** 2, 0.0)
    return SampledPotential(x=x, q=q, c=float(c))


def smoothed_step_potential(c, half_width=None, n=2000):
    """Logistic profile q(x) = -c^2 / (1 + exp(10 c x))."""
    if half_width is None:
        half_width = 40.0 / c
    x = np.linspace(-half_width, half_width, n)
    q = -c ** 2 / (1.0 + np.exp(np.clip(10.0 * c * x, -500, 500)))
    return SampledPotential(x=x, q=q, c=float(c))


def _integrate(pot, k2, x0, x1, y0, rtol=1e-10, atol=1e-12):
    if x0 == x1:
        return np.asarray(y0, dtype=complex)

    def rhs(x, y):
        return [y[1], (pot(x) - k2) * y[0]]

    sol = solve_ivp(rhs, (x0, x1), np.asarray(y0, dtype=complex),
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise ValueError("Jost integration failed: %s" % sol.message)
    return sol.y[:, -1]


def _wronskian(f, g):
    return f[0] * g[1] - f[1] * g[0]


def _jost_all(pot, k, side=+1):
    """Scaled Jost solutions and all scattering quantities at one k.

    Returns (T, R, chi, T1). The exponential boundary factors are kept
    symbolic: only the combinations appearing in T, R, chi are formed.
    """
    k = complex(k)
    c = pot.c
    k1 = k1_branch(k, c, side)
    # start the integrations where the potential has settled to its tails;
    # a larger span only amplifies the admixture of the second solution
    dev_r = np.abs(pot.q) > 1e-12
    dev_l = np.abs(pot.q + c * c) > 1e-12
    if not dev_r.any():
        xR = 0.0
    else:
        xR = pot.x[-1] if dev_r[-1] else pot.x[np.nonzero(dev_r)[0][-1] + 1]
    if not dev_l.any():
        xL = 0.0
    else:
        xL = pot.x[0] if dev_l[0] else pot.x[np.nonzero(dev_l)[0][0] - 1]
    k2 = k * k
    # right Jost solution phi ~ e^{ikx}, scaled by e^{-ik xR}
    phi = _integrate(pot, k2, xR, 0.0, [1.0, 1j * k])
    # second solution at +infinity ~ e^{-ikx}, scaled by e^{+ik xR}
    phib = _integrate(pot, k2, xR, 0.0, [1.0, -1j * k])
    # left Jost solution phi1 ~ e^{-i k1 x}, scaled by e^{+i k1 xL}
    phi1 = _integrate(pot, k2, xL, 0.0, [1.0, -1j * k1])
    # continued solution ~ e^{+i k1 x} at -infinity, scaled by e^{-i k1 xL}
    phi1t = _integrate(pot, k2, xL, 0.0, [1.0, 1j * k1])

    w = _wronskian(phi1, phi)          # scale e^{ik xR - i k1 xL}
    if abs(w) < 1e-13 * (abs(k) + abs(k1)):
        raise ValueError("ill-conditioned Wronskian at k = %s" % k)
    sc_w = np.exp(1j * k * xR - 1j * k1 * xL)
    T = 2j * k / (w * sc_w)
    T1 = 2j * k1 / (w * sc_w)
    wb = _wronskian(phi1, phib)        # scale e^{-ik xR - i k1 xL}
    R = -np.exp(-2j * k * xR) * wb / w
    wt = _wronskian(phi1t, phi)        # scale e^{ik xR + i k1 xL}
    # product of the two Wronskians carries the scale e^{2 i k xR}
    chi = 4.0 * k1 * k / (wt * w * np.exp(2j * k * xR))
    return T, R, chi, T1


def jost_oracle(pot, k, side=+1):
    """(T, R, chi) at complex k by direct integration of the Jost solutions."""
    T, R, chi, _ = _jost_all(pot, k, side)
    return T, R, chi


def oracle_scattering(pot, n_band=40, C0=None):
    """ScatteringData whose evaluators run the Jost oracle.

    log|chi(i y)| on the band is precomputed at Chebyshev nodes after removal
    of the y and sqrt(c^2-y^2) endpoint factors, and interpolated; everything
    else calls the ODE oracle per point.
    """
    from scipy.interpolate import BarycentricInterpolator

    c = pot.c
    # Chebyshev nodes in (0, c), avoiding the exact endpoints
    j = np.arange(n_band)
    y = 0.5 * c * (1.0 - np.cos(np.pi * (j + 0.5) / n_band))
    smooth = []
    for yi in y:
        _, _, chi = jost_oracle(pot, 1j * yi, side=+1)
        smooth.append(np.log(abs(chi)) - np.log(yi)
                      - 0.5 * np.log(c * c - yi * yi))
    interp = BarycentricInterpolator(y, np.asarray(smooth))

    def log_abs_chi_band(yy):
        yy = np.asarray(yy, dtype=float)
        return interp(yy) + np.log(yy) + 0.5 * np.log(c * c - yy * yy)

    def R(k, side=+1):
        return _jost_all(pot, k, side)[1]

    def chi(k, side=+1):
        # the Wronskian formula is the definition only for Im k >= 0; the
        # lower half plane carries the odd extension
        k = complex(k)
        if k.imag < 0:
            return -chi(-k, side)
        return _jost_all(pot, k, side)[2]

    def T(k, side=+1):
        return _jost_all(pot, k, side)[0]

    def T1(k, side=+1):
        return _jost_all(pot, k, side)[3]

    if C0 is None:
        C0 = 2.0 * c
    return ScatteringData(c=float(c), R=R, chi=chi, T=T, T1=T1,
                          log_abs_chi_band=log_abs_chi_band, C0=float(C0))


def load_potential(path):
    """Load a two-column x,q CSV file into a SampledPotential.

    A header row is allowed. The step height is inferred from the left tail.
    """
    xs, qs = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and not _is_number(row[0])):
                continue
            if len(row) < 2 or not (_is_number(row[0]) and _is_number(row[1])):
                raise ValueError("parse error at line %d: %r" % (lineno, row))
            xs.append(float(row[0]))
            qs.append(float(row[1]))
    if len(xs) < 2:
        raise ValueError("potential file needs at least two samples")
    x = np.asarray(xs)
    q = np.asarray(qs)
    if not np.all(np.diff(x) > 0):
        raise ValueError("non-monotone grid")
    c2 = -q[0]
    if c2 <= 0:
        raise ValueError("left tail %.6g does not define a positive step height" % q[0])
    return SampledPotential(x=x, q=q, c=float(np.sqrt(c2)))


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False
