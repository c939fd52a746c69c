"""Concrete jump matrices, the theta model solution, and the Airy parametrix.

Conventions (validated by the jump residual tests):

* theta model: theta(v|tau) = sum exp(m^2 tau/2 + m v) with periods 2 pi i
  and tau < 0; the Abel map is normalized so A(ic) = 0, A(inf) = i pi/2.
* the plus side of every cut arc is Re k > 0; lower-half arcs carry the
  point-mirrored jump sigma_1 v(-k) sigma_1.
* the local parametrix is assembled column-wise with the exponential
  factors exp(+-i varsigma w^{3/2}) cancelled analytically against
  exp(+-itg), so no overflow occurs at large t.
* both 2x2 parametrix solutions are normalized to determinant one (the
  verbatim Airy assembly has determinant 2 and its model partner 1/2; the
  product of the correction factors is 1, so their matching is unchanged).
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import cauchy as ca
from .phase import (abel_map, big_F, fourth_root, g_eval, local_w, p_eval)
from .specfun import VARSIGMA, AiryBundle, _w_pow, theta, theta_params

SIGMA1 = ca.SIGMA1
_AIRY = AiryBundle()

_JUMP_KINDS = ("V0", "V2", "V3", "VI", "VII", "VS")


# ----------------------------------------------------------------------
# theta model solution


def _theta_factors(k, pd, t, side, zero_tol):
    tp = theta_params(pd.tau)
    A = abel_map(k, pd, side)
    s0 = -0.5j * t * pd.Bhat(t)
    half = 0.5j * math.pi
    c0 = theta(half, tp)
    d3 = theta(half - s0, tp)
    d4 = theta(half + s0, tp)
    out = []
    for sgn in (+1.0, -1.0):
        As = sgn * A
        d1 = theta(As - 1j * math.pi, tp)
        d2 = theta(As, tp)
        if min(abs(d1), abs(d2), abs(d3), abs(d4)) < zero_tol * abs(c0):
            raise ValueError(
                "theta denominator vanishes at k = %s (possible singular "
                "configuration t*B + Delta = n pi)" % k)
        out.append(theta(As - 1j * math.pi + s0, tp) * theta(As + s0, tp)
                   * c0 * c0 / (d1 * d2 * d3 * d4))
    return out


def model_m(k, pd, t, side=+1, zero_tol=1e-12):
    """Theta-ratio model solution (m_1, m_2) as a row 2-vector.

    Holomorphic off [-ic, ic]; side-tagged on the cuts (side = +1 is the
    limit from Re k > 0). Jumps: (0 i; i 0) across the upper band,
    diag(e^{-it Bhat}, e^{it Bhat}) across the middle segment, and the
    sigma_1-mirrored band jump below; m(-k) = m(k) sigma_1 and
    m -> (1 1) at infinity.
    """
    k = complex(k)
    r1, r2 = _theta_factors(k, pd, t, side, zero_tol)
    f4 = fourth_root(k, pd.a, pd.c, side)
    return np.array([f4 * r1, f4 * r2])


# ----------------------------------------------------------------------
# Airy parametrix pair


def sector_of(k, pd, side=+1):
    """Parametrix sector (1..4) of k near ia.

    Sector boundaries are the two cuts and the straight rays from ia at 60
    and 120 degrees (where the loop contour crosses the disc); on the cuts
    the side tag decides.
    """
    k = complex(k)
    z = k - 1j * pd.a
    if z == 0:
        raise ValueError("sector undefined at the band edge ia")
    phi = cmath.phase(z)
    if z.real == 0.0:
        # on a cut: nudge toward the requested side
        nudge = 1e-12 if side > 0 else -1e-12
        phi = (0.5 * math.pi - nudge) if z.imag > 0 \
            else (-0.5 * math.pi + nudge)
    if phi < -0.5 * math.pi:
        return 4
    if phi < math.pi / 3.0:
        return 1
    if phi < 0.5 * math.pi:
        return 2
    if phi < 2.0 * math.pi / 3.0:
        return 3
    return 4


# per sector: two columns (airy index, coefficient); the column vector is
# (coef * y_i', -coef * y_i)
_SECTOR_COLUMNS = {
    1: ((3, 1.0), (1, -1.0)),
    2: ((3, 1.0), (2, 1.0)),
    3: ((2, -1j), (3, -1j)),
    4: ((2, -1j), (1, 1j)),
}


def _re_sign(k, side):
    if k.real > 0:
        return 1.0
    if k.real < 0:
        return -1.0
    return float(side)


def parametrix_A(k, pd, sd, t, side=+1):
    """Local parametrix matrix at k in the upper disc (det = 1).

    Sector-resolved Airy assembly conjugated by p(k)^{-sigma_3} and
    e^{itg sigma_3}; the lower disc value is sigma_1-conjugation of the
    value at -k. The column exponentials are cancelled analytically so the
    assembly stays finite for large t.
    """
    k = complex(k)
    if not t > 0:
        raise ValueError("t must be positive")
    if k.real == 0.0 and k.imag > pd.a and side < 0:
        # on the upper cut the local coordinate sits on the w-plane branch
        # cut; the minus boundary value follows exactly from the plus one
        # through the (exact) local band jump (0 i; i 0)
        Ap = parametrix_A(k, pd, sd, t, side=+1)
        return Ap @ np.array([[0.0, -1j], [-1j, 0.0]])
    w = local_w(k, pd, t)
    sec = sector_of(k, pd, side)
    sgn = _re_sign(k, side)
    p = p_eval(k, pd, sd, side)
    w32 = _w_pow(w, 1.5)
    cols = []
    for j, (idx, coef) in enumerate(_SECTOR_COLUMNS[sec]):
        csgn = 1.0 if j == 0 else -1.0        # e^{+itg} vs e^{-itg}
        yh, yph, eps = _AIRY.y_scaled(idx, w)
        expo = (eps + csgn) * (1j * VARSIGMA * w32) \
            - csgn * sgn * 0.5j * t * pd.B
        f = np.exp(expo) * p ** (-csgn)
        cols.append(np.array([coef * yph, -coef * yh]) * f)
    M = np.column_stack(cols)
    pref = np.exp(0.25j * math.pi) / math.sqrt(2.0)
    row_scale = np.array([t ** (-1.0 / 6.0) * 2j / (3.0 * VARSIGMA),
                          t ** (1.0 / 6.0)])
    return pref * row_scale[:, None] * M


def model_N(k, pd, sd, t, side=+1):
    """Model partner of the parametrix on the disc (det = 1), with
    A^{-1}(k) = N(k) + O(1/t) on the disc boundary."""
    k = complex(k)
    if not t > 0:
        raise ValueError("t must be positive")
    w = local_w(k, pd, t)
    sgn = _re_sign(k, side)
    p = p_eval(k, pd, sd, side)
    w14 = _w_pow(w, 0.25)
    E = np.exp(sgn * 1j * (0.5 * t * pd.B + 0.25 * math.pi))
    core = np.array([[1.0 / w14, -w14], [1.0 / w14, w14]])
    left = np.array([E * p, 1.0 / (E * p)])
    right = np.array([t ** (1.0 / 6.0), t ** (-1.0 / 6.0)])
    return (0.5 * math.sqrt(2.0)) * left[:, None] * core * right[None, :]


def parametrix_mismatch(pd, sd, t, n_samples=24):
    """max |A^{-1}(k) - N(k)| over disc-boundary samples (O(1/t))."""
    r = pd.r
    errs = []
    for j in range(n_samples):
        ang = 2.0 * math.pi * (j + 0.5) / n_samples
        # sample the inscribed circle of the square boundary
        k = 1j * pd.a + 0.95 * r * cmath.exp(1j * ang)
        Ainv = np.linalg.inv(parametrix_A(k, pd, sd, t))
        errs.append(np.max(np.abs(Ainv - model_N(k, pd, sd, t))))
    return max(errs)


# ----------------------------------------------------------------------
# jump builders


@dataclass(frozen=True)
class JumpSpec:
    """Which jump family to build: V0 (undeformed problem), V2 (deformed
    with exponential correction), V3 (model), VI/VII (the two disc-patched
    problems), VS (model at a singular time, parity n)."""
    kind: str
    pd: object
    sd: object = None
    t: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.kind not in _JUMP_KINDS:
            raise ValueError("unknown jump kind %r" % (self.kind,))
        if not self.t > 0:
            raise ValueError("t must be positive")


def phi_exponent(k, pd):
    """Phase Phi(k) = 8ik^3 + 24 i xi k (x/t = 12 xi)."""
    k = complex(k)
    return 8j * k ** 3 + 24j * pd.xi * k


def jump_v0(k, pd, sd, t):
    """Jump of the undeformed problem: on the real axis and on the cut
    (0, ic] / [-ic, 0); not part of the deformed contour system."""
    k = complex(k)
    tphi = t * phi_exponent(k, pd)
    if k.imag == 0.0 and k.real != 0.0:
        R = complex(sd.R(k))
        return np.array([[1.0 - abs(R) ** 2,
                          -np.conj(R) * np.exp(-tphi)],
                         [R * np.exp(tphi), 1.0]])
    if k.real == 0.0 and 0.0 < k.imag <= pd.c:
        chi = complex(sd.chi(k))
        return np.array([[1.0, 0.0], [chi * np.exp(tphi), 1.0]])
    if k.real == 0.0 and -pd.c <= k.imag < 0.0:
        chi = complex(sd.chi(-k))    # odd continuation below the axis
        return np.array([[1.0, -chi * np.exp(-tphi)], [0.0, 1.0]])
    raise ValueError("the undeformed jump lives on R union [-ic, ic]; "
                     "got k = %s" % k)


def _master_jump(spec, kind_of_arc, k):
    """Jump matrix at a node k of a master (upper-half) arc."""
    pd, sd, t = spec.pd, spec.sd, spec.t
    eye = np.eye(2, dtype=complex)
    if kind_of_arc == "band":
        return np.array([[0.0, 1j], [1j, 0.0]])
    if kind_of_arc == "middle":
        if spec.kind == "VS":
            return eye if spec.n % 2 == 0 else -eye
        bh = t * pd.Bhat(t)
        return np.array([[np.exp(-1j * bh), 0.0], [0.0, np.exp(1j * bh)]])
    if kind_of_arc == "lens":
        if spec.kind in ("V2", "VII"):
            side = +1 if k.real > 0 else -1
            val = complex(sd.R(k, side)) * np.exp(2j * t * g_eval(k, pd))
            return np.array([[1.0, 0.0], [val, 1.0]])
        return eye
    if kind_of_arc == "loop":
        if spec.kind in ("V2", "VII"):
            side = +1 if k.real > 0 else -1
            F = big_F(k, pd, sd)
            chi = complex(sd.chi(k, side))
            val = -(F * F / chi) * np.exp(-2j * t * g_eval(k, pd))
            return np.array([[1.0, val], [0.0, 1.0]])
        return eye
    if kind_of_arc == "disc":
        if spec.kind == "VI":
            return model_N(k, pd, sd, t)
        if spec.kind == "VII":
            return np.linalg.inv(parametrix_A(k, pd, sd, t))
        return eye
    raise ValueError("unknown arc kind %r" % (kind_of_arc,))


def jump_matrices(spec, grid):
    """Node-sampled jump matrices v on the collocation grid.

    Master (upper-half) arcs are evaluated directly; mirrored arcs inherit
    v(k) = sigma_1 v(-k) sigma_1 node by node, which enforces the point
    symmetry exactly.
    """
    if spec.kind == "V0":
        raise ValueError("V0 lives on the undeformed contour; evaluate it "
                         "pointwise with jump_v0")
    if spec.kind in ("V2", "VI", "VII") and spec.sd is None:
        raise ValueError("scattering data required for %s" % spec.kind)
    n = grid.n_nodes
    v = np.empty((n, 2, 2), dtype=complex)
    done = np.zeros(n, dtype=bool)
    for i, arc in enumerate(grid.contour.arcs):
        if not arc.is_master:
            continue
        sl = grid.arc_slice(i)
        for j in range(sl.start, sl.stop):
            try:
                v[j] = _master_jump(spec, arc.kind, complex(grid.nodes[j]))
            except ValueError as exc:
                raise ValueError("jump evaluation failed at node k = %s "
                                 "(%s): %s"
                                 % (grid.nodes[j], arc.label, exc))
            done[j] = True
    p = grid.mirror_perm
    for j in range(n):
        if not done[j]:
            v[j] = SIGMA1 @ v[p[j]] @ SIGMA1
    return v


def build_jump(spec, grid):
    """JumpData (main-text factorization u+ = v - I) for the given family."""
    v = jump_matrices(spec, grid)
    u = v - np.eye(2)[None]
    return ca.JumpData(u_plus=lambda g, u=u: u)


# ----------------------------------------------------------------------
# solves, recovery, q-extraction


@dataclass(frozen=True)
class RHSolution:
    """Solved singular integral equation with its jump data and grid."""
    spec: JumpSpec
    grid: object
    jump: object          # cauchy.JumpData
    density: object       # cauchy.Density
    diagnostics: dict

    def m(self, k_off, guard=1e-10):
        """Off-contour solution by the recovery formula."""
        return ca.recover_solution(self.density, self.jump, self.grid,
                                   k_off, guard=guard)

    def moment(self, i):
        """M_i = (1/2 pi i) int (phi + (1 1)) u s^{i-1} ds."""
        up, um = self.jump.node_values(self.grid)
        f = np.einsum("ja,jab->jb",
                      self.density.values + np.array([1.0, 1.0])[None, :],
                      up + um)
        s = self.grid.nodes ** (i - 1)
        return (self.grid.weights * s) @ f / (2j * np.pi)


def solve_rhp(spec, grid, mode="symmetric", cminus=None):
    """Build the jump family on the grid and solve the restricted SIE."""
    jump = build_jump(spec, grid)
    density, diag = ca.solve_sie(grid, jump, mode=mode, cminus=cminus)
    return RHSolution(spec=spec, grid=grid, jump=jump, density=density,
                      diagnostics=diag)


def boundary_residual(sol, cminus=None):
    """max |m_hat_+ - m_hat_- v| at the nodes, with the boundary values
    recovered through the discrete Cauchy operators."""
    grid = sol.grid
    if cminus is None:
        cminus = ca.boundary_minus_matrix(grid)
    up, um = sol.jump.node_values(grid)
    v = sol.jump.v(grid)
    m_inf = np.array([1.0, 1.0])
    f = np.einsum("ja,jab->jb", sol.density.values + m_inf[None, :],
                  up + um)
    m_minus = m_inf[None, :] + cminus.apply(f)
    m_plus = m_minus + f
    mv = np.einsum("ja,jab->jb", m_minus, v)
    return float(np.max(np.abs(m_plus - mv)))


def extract_q(sol, rel_tol=1e-5, check=True):
    """q = 2(M1_1 M1_2 - M2_1 - M2_2) from the first two moments.

    The odd-term cancellation M1_1 + M1_2 = 0 is measured, not assumed, and
    the independent Richardson evaluation of 2k^2(m_1 m_2 - 1) at
    k = i{10, 20, 40}c cross-checks the value.
    """
    M1 = sol.moment(1)
    M2 = sol.moment(2)
    q = complex(2.0 * (M1[0] * M1[1] - M2[0] - M2[1]))
    scale = max(1.0, abs(q))
    odd_defect = abs(M1[0] + M1[1])
    c = sol.spec.pd.c
    P = []
    for K in (10.0, 20.0, 40.0):
        k = 1j * K * c
        m = sol.m(k)
        P.append(complex(2.0 * k * k * (m[0] * m[1] - 1.0)))
    # eliminate the 1/k^2 and 1/k^4 tails
    r1 = (4.0 * P[1] - P[0]) / 3.0
    r2 = (4.0 * P[2] - P[1]) / 3.0
    q_rich = (16.0 * r2 - r1) / 15.0
    mismatch = abs(q - q_rich) / scale
    if check and mismatch > rel_tol:
        raise ValueError("moment and Richardson q-extractions disagree: "
                         "%s vs %s (rel %g)" % (q, q_rich, mismatch))
    return {"q": q.real, "q_imag": q.imag, "q_richardson": q_rich.real,
            "odd_moment_defect": odd_defect, "cross_check_rel": mismatch}


# ----------------------------------------------------------------------
# singular times


def singular_times(pd, n):
    """The time t* with t* Bhat(t*) = n pi, i.e. t* = (n pi - Delta)/B."""
    t = (n * math.pi - pd.Delta) / pd.B
    if not t > 0:
        raise ValueError("n = %d gives a nonpositive singular time" % n)
    return t


def singular_audit(pd, n, n_samples=20, k_small=1e-4):
    """Audit the extra symmetry of the model solution at a singular time.

    Checks m^s(k) = m^s(k) sigma_1 (components equal) on an off-cut sample
    ring, and for odd n the smallness of the components near the origin
    relative to a generic nearby time.
    """
    t = singular_times(pd, n)
    errs = []
    for j in range(n_samples):
        ang = 2.0 * math.pi * (j + 0.5) / n_samples
        k = 1.7 * pd.c * cmath.exp(1j * ang)
        m = model_m(k, pd, t)
        errs.append(abs(m[0] - m[1]) / max(1.0, abs(m[0])))
    report = {"t_star": t, "n": n,
              "sigma1_symmetry_defect": float(max(errs))}
    if n % 2 == 1:
        k0 = 1j * k_small * pd.c
        m_sing = model_m(k0, pd, t)
        t_gen = t + 0.5 * math.pi / pd.B   # quarter period away
        m_gen = model_m(k0, pd, t_gen)
        report["origin_value"] = float(np.max(np.abs(m_sing)))
        report["origin_value_generic"] = float(np.max(np.abs(m_gen)))
    return report


def integral_formula(pd, t_star, kappas=()):
    """Leading value of int_x^inf q dy at a singular time:
    2 t* z(xi) + 2 y(xi) - sum_j 4 kappa_j."""
    return 2.0 * t_star * pd.zxi + 2.0 * pd.yxi \
        - 4.0 * float(sum(kappas))
