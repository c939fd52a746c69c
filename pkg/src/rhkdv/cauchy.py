"""Discrete Cauchy transforms and the singular integral equation solver.

All arcs of the contour are straight segments carrying identical normalized
Gauss-Legendre nodes, so the boundary values of the Cauchy transform of the
per-arc polynomial interpolant are available in closed form through Legendre
functions of the second kind: if the density on an arc has the expansion
sum_m a_m P_m(s) in the normalized coordinate, then

    C(f)(z) = -(1/(pi i)) sum_m a_m Q_m(z),
    C_-(f) at a node x: same sum with the real on-cut Q_m(x), minus f(x)/2.

Cross-arc and off-contour contributions use the same closed form when the
target is inside a Bernstein ellipse of the source arc (where plain node
quadrature loses accuracy) and plain quadrature otherwise. Off the cut the
Q_m are the recessive solution of the Legendre recurrence and are generated
by backward recurrence normalized with Q_0(z) = log((z+1)/(z-1))/2.

The symmetry operator H phi(k) = phi(-k) sigma_1 is a pure node permutation
composed with a column swap, because mirrored arcs carry exactly mirrored
node sets.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])


# ----------------------------------------------------------------------
# Legendre machinery on the reference interval [-1, 1]

_TABLE_CACHE = {}


def _ref_tables(n):
    """Reference nodes t, interpolation-to-coefficients matrix alpha with
    alpha[m, j] = (2m+1)/2 * w_j * P_m(t_j), and the on-cut values Q_m(t_i).
    """
    if n in _TABLE_CACHE:
        return _TABLE_CACHE[n]
    t, w = np.polynomial.legendre.leggauss(int(n))
    P = np.polynomial.legendre.legvander(t, n - 1)      # P[i, m] = P_m(t_i)
    alpha = (np.arange(n) + 0.5)[:, None] * (w[None, :] * P.T)
    # Q_m on the cut by forward recurrence (stable there: P and Q comparable)
    Q = np.empty((n, n))
    Q[:, 0] = 0.5 * np.log((1.0 + t) / (1.0 - t))
    if n > 1:
        Q[:, 1] = t * Q[:, 0] - 1.0
    for m in range(1, n - 1):
        Q[:, m + 1] = ((2 * m + 1) * t * Q[:, m] - m * Q[:, m - 1]) / (m + 1)
    _TABLE_CACHE[n] = (t, w, alpha, Q)
    return _TABLE_CACHE[n]


def _bernstein_radius(x):
    """Bernstein ellipse parameter rho(x) >= 1 of a point relative to [-1, 1]."""
    r = np.abs(x + np.sqrt(x - 1.0 + 0j) * np.sqrt(x + 1.0 + 0j))
    return np.maximum(r, 1.0 / r)


def _q_offcut(z, n, rho):
    """Q_0(z), ..., Q_{n-1}(z) for z off [-1, 1] by backward recurrence.

    Q_m decays like rho^{-m} while P_m grows like rho^{m}, so the backward
    (Miller) recurrence with a Q_0 normalization is stable; the start depth
    makes the dominant-solution contamination < 1e-16.
    """
    depth = n + int(37.0 / math.log(rho)) + 20
    if depth > 200000:
        raise ValueError("evaluation point too close to an arc for the "
                         "closed-form Cauchy transform")
    q = np.empty(n, dtype=complex)
    qp1, qm = 0.0 + 0j, 1.0 + 0j           # values at depth+1, depth
    for m in range(depth, 0, -1):
        qm1 = ((2 * m + 1) * z * qm - (m + 1) * qp1) / m
        qp1, qm = qm, qm1
        if m - 1 < n:
            q[m - 1] = qm1
        if abs(qm) > 1e250:
            qp1 *= 1e-250
            qm *= 1e-250
            q[max(m - 1, 0):] *= 1e-250
    q0 = 0.5 * np.log((z + 1.0) / (z - 1.0))
    return q * (q0 / q[0])


def _near_rho(n):
    # plain Gauss quadrature of a Cauchy kernel has error ~ rho^{-2n};
    # switch to the closed form whenever that would exceed ~1e-12
    return max(1.4, 10.0 ** (6.0 / n))


def _row_for_point(z, grid, arc_indices=None):
    """Row vector r such that r @ values approximates C(f)(z) for z off the
    contour (or off the arcs in arc_indices)."""
    n = grid.n_per_arc
    t, w, alpha, _ = _ref_tables(n)
    rho_near = _near_rho(n)
    row = np.zeros(grid.n_nodes, dtype=complex)
    idx = range(len(grid.contour.arcs)) if arc_indices is None else arc_indices
    for i in idx:
        arc = grid.contour.arcs[i]
        sl = grid.arc_slice(i)
        mid = 0.5 * (arc.za + arc.zb)
        half = 0.5 * (arc.zb - arc.za)
        x = (z - mid) / half
        rho = float(_bernstein_radius(np.asarray(x)))
        if rho > rho_near:
            row[sl] = grid.weights[sl] / (2j * np.pi * (grid.nodes[sl] - z))
        else:
            q = _q_offcut(complex(x), n, rho)
            row[sl] = (q @ alpha) * (-1.0 / (1j * np.pi))
    return row


def _dist_to_segment(z, za, zb):
    u = zb - za
    s = ((z - za) * np.conj(u)).real / abs(u) ** 2
    s = min(max(s, 0.0), 1.0)
    return abs(z - (za + s * u))


def contour_distance(z, grid, arc_indices=None):
    """Distance from z to the (selected arcs of the) contour."""
    arcs = grid.contour.arcs
    idx = range(len(arcs)) if arc_indices is None else arc_indices
    return min(_dist_to_segment(z, arcs[i].za, arcs[i].zb) for i in idx)


def cauchy_off(values, grid, k_off, arc_indices=None, guard=1e-10):
    """Cauchy transform C(f)(k_off) of node values off the contour.

    Parameters
    ----------
    values : array (n_nodes,) or (n_nodes, m)
        Density samples at the grid nodes (row-vector densities as rows).
    grid : CollocationGrid
    k_off : complex
        Evaluation point; must stay at distance > guard * scale from the
        contour (the boundary values live in the matrix operators instead).
    arc_indices : sequence of int, optional
        Restrict the integration to a subset of arcs (e.g. a closed loop).

    Returns
    -------
    Row vector (or scalar) C(f)(k_off).
    """
    scale = grid.contour.geometry["c"]
    if contour_distance(complex(k_off), grid, arc_indices) <= guard * scale:
        raise ValueError("evaluation point violates the contour guard "
                         "distance")
    row = _row_for_point(complex(k_off), grid, arc_indices)
    return row @ np.asarray(values)


# ----------------------------------------------------------------------
# boundary operators


@dataclass(frozen=True)
class DiscreteCauchyOp:
    """Dense discrete operator acting on stacked node values.

    block = 1: scalar matrix (n, n) applied to each component of a row
    2-vector density independently; block = 2: full (2n, 2n) matrix acting
    on node-major flattened (n, 2) arrays.
    """
    mat: np.ndarray
    grid: object
    block: int = 1

    @property
    def n_nodes(self):
        return self.grid.n_nodes

    def apply(self, values):
        values = np.asarray(values)
        if self.block == 1:
            return self.mat @ values
        return (self.mat @ values.reshape(-1)).reshape(values.shape)

    def norm2(self):
        """Operator norm with respect to the arc-length weighted L2 norm."""
        return weighted_operator_norm(self.mat, self.grid, self.block)


def _weight_scalings(grid, block):
    w = np.abs(grid.weights)
    if block == 2:
        w = np.repeat(w, 2)
    s = np.sqrt(w)
    return s, 1.0 / s


def weighted_operator_norm(mat, grid, block=None):
    if block is None:
        block = 1 if mat.shape[0] == grid.n_nodes else 2
    s, sinv = _weight_scalings(grid, block)
    return np.linalg.norm(s[:, None] * mat * sinv[None, :], 2)


def l2_norm(values, grid):
    """Discrete L2 norm with arc-length weights; extra axes are summed."""
    values = np.asarray(values)
    mags = np.abs(values.reshape(grid.n_nodes, -1)) ** 2
    return math.sqrt(float(np.abs(grid.weights) @ mags.sum(axis=1)))


def boundary_minus_matrix(grid):
    """Discrete C_- as a scalar DiscreteCauchyOp.

    Same-arc blocks come from the closed-form Cauchy transform of the local
    Legendre interpolant; cross-arc entries use the off-cut closed form
    inside the Bernstein ellipse where plain quadrature degrades, and plain
    node quadrature outside it.
    """
    n = grid.n_per_arc
    t, w, alpha, Qon = _ref_tables(n)
    N = grid.n_nodes
    arcs = grid.contour.arcs
    rho_near = _near_rho(n)
    C = np.zeros((N, N), dtype=complex)
    diag_block = (Qon @ alpha) * (-1.0 / (1j * np.pi)) - 0.5 * np.eye(n)
    for i, arc in enumerate(arcs):
        sl = grid.arc_slice(i)
        C[sl, sl] = diag_block
        mid = 0.5 * (arc.za + arc.zb)
        half = 0.5 * (arc.zb - arc.za)
        targets = np.concatenate([np.arange(0, sl.start),
                                  np.arange(sl.stop, N)])
        x = (grid.nodes[targets] - mid) / half
        rho = _bernstein_radius(x)
        far = rho > rho_near
        tf = targets[far]
        C[np.ix_(tf, np.arange(sl.start, sl.stop))] = \
            grid.weights[sl][None, :] / (2j * np.pi
                                         * (grid.nodes[sl][None, :]
                                            - grid.nodes[tf][:, None]))
        for j, r in zip(targets[~far], rho[~far]):
            q = _q_offcut(complex((grid.nodes[j] - mid) / half), n, float(r))
            C[j, sl] = (q @ alpha) * (-1.0 / (1j * np.pi))
    return DiscreteCauchyOp(mat=C, grid=grid, block=1)


def boundary_plus_matrix(grid, cminus=None):
    """Discrete C_+ = C_- + I."""
    if cminus is None:
        cminus = boundary_minus_matrix(grid)
    return DiscreteCauchyOp(mat=cminus.mat + np.eye(grid.n_nodes),
                            grid=grid, block=1)


# ----------------------------------------------------------------------
# jump data and the singular operator


@dataclass(frozen=True)
class JumpData:
    """Factorization data (u_plus, u_minus) of a jump matrix v.

    u_plus and u_minus evaluate the 2x2 factor matrices at the grid nodes:
    each is a callable grid -> array (n_nodes, 2, 2), or None for the zero
    factor. The jump is v = (I - u_minus)^{-1} (I + u_plus); the main-text
    mode uses u_minus = None and u_plus = v - I.
    """
    u_plus: object
    u_minus: object = None
    m_inf: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))

    def node_values(self, grid):
        zero = np.zeros((grid.n_nodes, 2, 2), dtype=complex)
        up = zero if self.u_plus is None else np.asarray(self.u_plus(grid),
                                                         dtype=complex)
        um = zero if self.u_minus is None else np.asarray(self.u_minus(grid),
                                                          dtype=complex)
        return up, um

    def v(self, grid):
        """The jump matrix (I - u_minus)^{-1} (I + u_plus) at the nodes."""
        up, um = self.node_values(grid)
        eye = np.eye(2)
        return np.linalg.solve(eye[None] - um, eye[None] + up)

    def validate(self, grid, v_ref=None, tol=1e-12):
        """Check the factorization against a reference jump and the
        sigma_1 point symmetry at mirrored nodes."""
        up, um = self.node_values(grid)
        report = {}
        if v_ref is not None:
            report["factorization_residual"] = float(
                np.max(np.abs(self.v(grid) - v_ref)))
        p = grid.mirror_perm
        sym = 0.0
        for u in (up, um):
            sym = max(sym, float(np.max(np.abs(
                u[p] - SIGMA1[None] @ u @ SIGMA1[None]))))
        report["symmetry_residual"] = sym
        if v_ref is not None and report["factorization_residual"] > tol:
            raise ValueError("jump factorization residual %g exceeds %g"
                             % (report["factorization_residual"], tol))
        return report


def _block_from_scalar(Cscalar, U):
    """(2N, 2N) matrix of phi -> C(phi U) with per-node right factors U.

    (phi_j U_j)_a = sum_b phi_{jb} U_j[b, a], so the block entry is
    M[(i,a),(j,b)] = C[i,j] * U_j[b,a].
    """
    N = U.shape[0]
    M = np.einsum("ij,jba->iajb", Cscalar, U)
    return M.reshape(2 * N, 2 * N)


def build_Cu(grid, jump, cminus=None):
    """Dense operator phi -> C_+(phi u_minus) + C_-(phi u_plus)."""
    if cminus is None:
        cminus = boundary_minus_matrix(grid)
    up, um = jump.node_values(grid)
    mat = _block_from_scalar(cminus.mat, up)
    if np.any(um):
        cp = cminus.mat + np.eye(grid.n_nodes)
        mat = mat + _block_from_scalar(cp, um)
    return DiscreteCauchyOp(mat=mat, grid=grid, block=2)


# ----------------------------------------------------------------------
# symmetry operator and projectors


def apply_H(values, grid):
    """H phi(k) = phi(-k) sigma_1 on node values of shape (n_nodes, 2)."""
    return np.asarray(values)[grid.mirror_perm][:, ::-1]


def h_matrix(grid):
    """H as a (2N, 2N) matrix: node permutation plus column swap."""
    N = grid.n_nodes
    H = np.zeros((2 * N, 2 * N))
    rows = np.arange(N)
    H[2 * rows, 2 * grid.mirror_perm + 1] = 1.0
    H[2 * rows + 1, 2 * grid.mirror_perm] = 1.0
    return H


def symmetric_projector(grid):
    """P_s = (I + H)/2; the antisymmetric projector is I - P_s."""
    return 0.5 * (np.eye(2 * grid.n_nodes) + h_matrix(grid))


def _symmetry_expansion(grid):
    """Columns: symmetric densities parametrized by their master-node
    values; rows at slave nodes filled in through phi(-k) = phi(k) sigma_1.
    Returns (E, master_rows) with E of shape (2N, 2M)."""
    mask = grid.master_mask()
    masters = np.flatnonzero(mask)
    E = np.zeros((2 * grid.n_nodes, 2 * masters.size))
    for m, j in enumerate(masters):
        E[2 * j, 2 * m] = 1.0
        E[2 * j + 1, 2 * m + 1] = 1.0
        s = grid.mirror_perm[j]
        E[2 * s, 2 * m + 1] = 1.0          # phi_s = phi_j sigma_1
        E[2 * s + 1, 2 * m] = 1.0
    master_rows = np.empty(2 * masters.size, dtype=int)
    master_rows[0::2] = 2 * masters
    master_rows[1::2] = 2 * masters + 1
    return E, master_rows


@dataclass(frozen=True)
class Density:
    """Row 2-vector density at the grid nodes."""
    values: np.ndarray          # (n_nodes, 2) complex
    grid: object
    symmetric: bool = False

    def norm(self):
        return l2_norm(self.values, self.grid)


def solve_sie(grid, jump, mode="symmetric", cminus=None,
              sv_threshold=1e-8):
    """Solve the discretized singular integral equation
    (I - C_u) phi = C_u(m_inf).

    In symmetric mode the unknowns are the master-node values of a density
    in the symmetric subspace (phi(-k) = phi(k) sigma_1) and the equation is
    collocated at the master nodes only; full mode solves the unrestricted
    system. Returns (Density, diagnostics). A smallest singular value below
    sv_threshold times the largest raises a ValueError carrying the
    conditioning diagnostics (the discrete stand-in for loss of
    invertibility).
    """
    if mode not in ("symmetric", "full"):
        raise ValueError("mode must be 'symmetric' or 'full'")
    if cminus is None:
        cminus = boundary_minus_matrix(grid)
    N = grid.n_nodes
    Cu = build_Cu(grid, jump, cminus)
    const = np.tile(np.asarray(jump.m_inf, dtype=complex), (N, 1))
    rhs = Cu.apply(const).reshape(-1)
    A = np.eye(2 * N) - Cu.mat
    if mode == "symmetric":
        E, master_rows = _symmetry_expansion(grid)
        Asys = (A @ E)[master_rows]
        bsys = rhs[master_rows]
    else:
        Asys, bsys = A, rhs
    sv = np.linalg.svd(Asys, compute_uv=False)
    smax, smin = float(sv[0]), float(sv[-1])
    diagnostics = {
        "mode": mode,
        "n_nodes": int(N),
        "n_unknowns": int(Asys.shape[0]),
        "sigma_max": smax,
        "sigma_min": smin,
        "condition_number": smax / smin if smin > 0 else math.inf,
    }
    if smin <= sv_threshold * smax:
        raise ValueError("singular discrete system: sigma_min/sigma_max = "
                         "%.3e (threshold %.0e); diagnostics: %s"
                         % (smin / smax, sv_threshold,
                            json.dumps(diagnostics)))
    x = np.linalg.solve(Asys, bsys)
    if mode == "symmetric":
        phi = (E @ x).reshape(N, 2)
    else:
        phi = x.reshape(N, 2)
    diagnostics["residual"] = float(
        np.linalg.norm(A @ phi.reshape(-1) - rhs)
        / max(np.linalg.norm(rhs), 1e-300))
    diagnostics["phi_norm"] = l2_norm(phi, grid)
    return Density(values=phi, grid=grid,
                   symmetric=(mode == "symmetric")), diagnostics


def recover_solution(density, jump, grid, k_off, guard=1e-10):
    """m(k) = m_inf + C((phi + m_inf)(u_plus + u_minus)) off the contour."""
    up, um = jump.node_values(grid)
    m_inf = np.asarray(jump.m_inf, dtype=complex)
    f = np.einsum("ja,jab->jb", density.values + m_inf[None, :], up + um)
    return m_inf + cauchy_off(f, grid, k_off, guard=guard)


# ----------------------------------------------------------------------
# perturbation-theorem diagnostics


def _linf_norm(u_nodes):
    return float(np.max(np.linalg.norm(u_nodes, 2, axis=(1, 2))))


def _weighted_p_norm(u_nodes, grid, p):
    mags = np.linalg.norm(u_nodes, "fro", axis=(1, 2))
    w = np.abs(grid.weights)
    if p == 1:
        return float(w @ mags)
    return math.sqrt(float(w @ mags ** 2))


def appendixB_diagnostics(grid, jump1, jump2, n_moments=2, mode="symmetric",
                          cminus=None):
    """Measured quantities versus the two-jump perturbation bounds.

    Solves both systems, measures the C_- bound C_hat, the resolvent norm
    rho_hat of the first system, the difference norms epsilon (L2) and
    delta (L-infinity) of the factorization data, the moment difference
    norms rho_i (L2) and sigma_i (L1), and compares every measured quantity
    against its perturbation bound. When C_hat * rho_hat * delta >= 1 the
    bounds are vacuous and the report flags the perturbation regime as
    exceeded instead of failing.
    """
    if cminus is None:
        cminus = boundary_minus_matrix(grid)
    N = grid.n_nodes
    Chat = cminus.norm2()
    up1, um1 = jump1.node_values(grid)
    up2, um2 = jump2.node_values(grid)
    m_inf = np.asarray(jump1.m_inf, dtype=complex)
    m_inf_norm = float(np.max(np.abs(m_inf)))

    Cu1 = build_Cu(grid, jump1, cminus)
    Cu2 = build_Cu(grid, jump2, cminus)
    A1 = np.eye(2 * N) - Cu1.mat
    A2 = np.eye(2 * N) - Cu2.mat
    rho_hat = weighted_operator_norm(np.linalg.inv(A1), grid, 2)
    rho2_measured = weighted_operator_norm(np.linalg.inv(A2), grid, 2)

    eps = max(_weighted_p_norm(up1 - up2, grid, 2),
              _weighted_p_norm(um1 - um2, grid, 2))
    delta = max(_linf_norm(up1 - up2), _linf_norm(um1 - um2))
    u1_l2 = (_weighted_p_norm(up1, grid, 2)
             + _weighted_p_norm(um1, grid, 2))

    phi1, diag1 = solve_sie(grid, jump1, mode=mode, cminus=cminus)
    phi2, diag2 = solve_sie(grid, jump2, mode=mode, cminus=cminus)
    phi_diff = l2_norm(phi1.values - phi2.values, grid)

    regime = Chat * rho_hat * delta
    report = {
        "C_hat": Chat,
        "rho_hat": rho_hat,
        "epsilon": eps,
        "delta": delta,
        "u1_l2": u1_l2,
        "regime_product": regime,
        "regime_ok": bool(regime < 1.0),
        "solve1": diag1,
        "solve2": diag2,
        "measured": {"resolvent2": rho2_measured, "phi_diff": phi_diff},
        "bounds": {},
        "violations": [],
    }
    if regime >= 1.0:
        report["note"] = "perturbation regime exceeded"
        return report

    denom = 1.0 - regime
    bound_res = rho_hat / denom
    bound_phi = (2.0 * Chat * rho_hat * eps * m_inf_norm / denom
                 + 2.0 * Chat ** 2 * rho_hat ** 2 * delta * m_inf_norm
                 * u1_l2 / denom)
    report["bounds"]["resolvent2"] = bound_res
    report["bounds"]["phi_diff"] = bound_phi
    if rho2_measured > bound_res * (1.0 + 1e-10):
        report["violations"].append("resolvent2")
    if phi_diff > bound_phi * (1.0 + 1e-10):
        report["violations"].append("phi_diff")

    # moment coefficients of m_1 - m_2 and their bounds
    s = grid.nodes
    f1 = np.einsum("ja,jab->jb", phi1.values + m_inf[None, :], up1 + um1)
    f2 = np.einsum("ja,jab->jb", phi2.values + m_inf[None, :], up2 + um2)
    phi2_l2 = l2_norm(phi2.values, grid)
    moments = []
    for i in range(1, n_moments + 1):
        ci = (grid.weights * s ** (i - 1)) @ (f1 - f2) / (2j * np.pi)
        rho_i = max(_weighted_p_norm((up1 - up2) * (s ** (i - 1))[:, None,
                                                                  None],
                                     grid, 2),
                    _weighted_p_norm((um1 - um2) * (s ** (i - 1))[:, None,
                                                                  None],
                                     grid, 2))
        sigma_i = max(_weighted_p_norm((up1 - up2) * (s ** (i - 1))[:, None,
                                                                    None],
                                       grid, 1),
                      _weighted_p_norm((um1 - um2) * (s ** (i - 1))[:, None,
                                                                    None],
                                       grid, 1))
        u1_mom = _weighted_p_norm((up1 + um1) * (s ** (i - 1))[:, None,
                                                               None],
                                  grid, 2)
        bound_ci = (phi_diff * u1_mom + 2.0 * phi2_l2 * rho_i
                    + 2.0 * m_inf_norm * sigma_i)
        measured_ci = float(np.max(np.abs(ci)))
        moments.append({"i": i, "measured": measured_ci, "bound": bound_ci,
                        "rho_i": rho_i, "sigma_i": sigma_i})
        if measured_ci > bound_ci * (1.0 + 1e-10):
            report["violations"].append("moment_%d" % i)
    report["moments"] = moments
    return report
