import json

import numpy as np
import pytest
from scipy.integrate import quad

from rhkdv import cauchy as ca
from rhkdv import contours as ct
from rhkdv import phase as ph
from rhkdv.scattering import step_scattering


@pytest.fixture(scope="module")
def pd():
    return ph.solve_phase(1.0, 0.0, step_scattering(1.0))


@pytest.fixture(scope="module")
def cont(pd):
    return ct.build_sigma_tilde(pd)


@pytest.fixture(scope="module")
def grid(cont):
    return ct.collocate(cont, 16)


@pytest.fixture(scope="module")
def cminus(grid):
    return ca.boundary_minus_matrix(grid)


@pytest.fixture(scope="module")
def loop(cont):
    # the eight sub-arcs of the upper disc boundary form a closed
    # counterclockwise loop
    return [i for i, a in enumerate(cont.arcs) if a.label.startswith("disc.U")]


def _loop_index(grid, loop):
    return np.concatenate([np.arange(grid.arc_slice(i).start,
                                     grid.arc_slice(i).stop) for i in loop])


def _symmetric_u(grid, amp=0.1):
    # entries built to satisfy u(-k) = sigma_1 u(k) sigma_1 exactly
    k = grid.nodes
    base = amp * np.exp(-np.abs(k) ** 2)
    u = np.zeros((grid.n_nodes, 2, 2), dtype=complex)
    u[:, 0, 0] = base * np.exp(1j * k)
    u[:, 1, 1] = base * np.exp(-1j * k)
    u[:, 0, 1] = base * k ** 2
    u[:, 1, 0] = base * k ** 2
    return u


class TestCauchyOff:
    def test_cauchy_integral_formula(self, pd, grid, loop):
        ones = np.ones(grid.n_nodes)
        ia = 1j * pd.a
        inside = ca.cauchy_off(ones, grid, ia + 0.001 + 0.002j,
                               arc_indices=loop)
        outside = ca.cauchy_off(ones, grid, ia + 0.5, arc_indices=loop)
        assert abs(inside - 1.0) < 1e-12
        assert abs(outside) < 1e-12

    def test_linear_density(self, pd, grid, loop):
        z0 = 1j * pd.a + 0.01 - 0.003j
        vals = np.stack([grid.nodes, grid.nodes], axis=1)
        out = ca.cauchy_off(vals, grid, z0, arc_indices=loop)
        assert np.max(np.abs(out - z0)) < 1e-12

    def test_linearity(self, grid, loop):
        rng = np.random.default_rng(7)
        f = rng.standard_normal(grid.n_nodes) + 1j * rng.standard_normal(
            grid.n_nodes)
        g = rng.standard_normal(grid.n_nodes)
        z = 5.0 + 5.0j
        lhs = ca.cauchy_off(0.7j * f + g, grid, z)
        rhs = 0.7j * ca.cauchy_off(f, grid, z) + ca.cauchy_off(g, grid, z)
        assert abs(lhs - rhs) < 1e-12

    def test_guard(self, grid):
        k_on = grid.nodes[3]
        with pytest.raises(ValueError, match="guard"):
            ca.cauchy_off(np.ones(grid.n_nodes), grid, k_on)

    def test_near_and_far_paths_agree(self, grid, loop, pd):
        # a point just outside the Bernstein switchover of the top edge
        z = 1j * (pd.a + 2.5 * pd.r)
        f = np.exp(grid.nodes)
        v1 = ca.cauchy_off(f, grid, z, arc_indices=loop)
        # same value from the closed loop must equal 0 or f depending on
        # position; z is outside the loop and exp is entire, so 0
        assert abs(v1) < 1e-10


class TestBoundaryMatrices:
    def test_plemelj_identity(self, grid, cminus):
        cplus = ca.boundary_plus_matrix(grid, cminus)
        diff = cplus.mat - cminus.mat
        assert np.array_equal(diff, np.eye(grid.n_nodes))
        rng = np.random.default_rng(0)
        for _ in range(20):
            f = rng.standard_normal((grid.n_nodes, 2)) \
                + 1j * rng.standard_normal((grid.n_nodes, 2))
            assert np.max(np.abs(cplus.apply(f) - cminus.apply(f) - f)) < 1e-8

    def test_minus_annihilates_interior_analytic(self, grid, loop, pd):
        # density extending analytically to the plus side (loop interior)
        ix = _loop_index(grid, loop)
        f = (grid.nodes[ix] - 1j * pd.a) ** 3
        block = ca.boundary_minus_matrix(grid).mat[np.ix_(ix, ix)]
        assert np.max(np.abs(block @ f)) < 1e-12

    def test_minus_reproduces_exterior_analytic(self, cont, loop, pd):
        # f analytic outside the loop and decaying: C_- f = -f
        g32 = ct.collocate(cont, 32)
        cm32 = ca.boundary_minus_matrix(g32)
        ix = _loop_index(g32, loop)
        f = 1.0 / (g32.nodes[ix] - 1j * pd.a)
        block = cm32.mat[np.ix_(ix, ix)]
        assert np.max(np.abs(block @ f + f)) < 1e-8

    def test_same_arc_block_against_pv_quadrature(self, grid, cont, cminus):
        # principal value oracle on the band arc, f = exp
        arc = cont.arcs[0]
        sl = grid.arc_slice(0)
        f = np.exp(grid.nodes)
        row_vals = cminus.mat[sl, :] @ f
        others = [i for i in range(len(cont.arcs)) if i != 0]
        u = arc.zb - arc.za
        for idx in range(sl.start + 2, sl.start + 5):
            k = grid.nodes[idx]

            def integ(s):
                z = arc.za + s * u
                return (np.exp(z) - np.exp(k)) / (z - k) * u

            re = quad(lambda s: integ(s).real, 0, 1, limit=200)[0]
            im = quad(lambda s: integ(s).imag, 0, 1, limit=200)[0]
            pv = re + 1j * im + np.exp(k) * np.log(
                abs(arc.zb - k) / abs(arc.za - k))
            ref = pv / (2j * np.pi) - np.exp(k) / 2.0
            cross = ca._row_for_point(k, grid, others) @ f
            assert abs(row_vals[idx - sl.start] - (ref + cross)) < 1e-10

    def test_norm_stable_under_doubling(self, cont):
        norms = [ca.boundary_minus_matrix(ct.collocate(cont, n)).norm2()
                 for n in (8, 16, 32)]
        assert all(np.isfinite(norms))
        assert abs(norms[2] - norms[1]) < 0.05 * norms[1]
        assert abs(norms[1] - norms[0]) < 0.05 * norms[0]

    def test_zero_density(self, grid, cminus):
        assert np.all(cminus.apply(np.zeros((grid.n_nodes, 2))) == 0.0)


class TestH:
    def test_involution_exact(self, grid):
        H = ca.h_matrix(grid)
        assert np.array_equal(H @ H, np.eye(2 * grid.n_nodes))

    def test_apply_matches_matrix(self, grid):
        rng = np.random.default_rng(1)
        phi = rng.standard_normal((grid.n_nodes, 2)) \
            + 1j * rng.standard_normal((grid.n_nodes, 2))
        H = ca.h_matrix(grid)
        direct = (H @ phi.reshape(-1)).reshape(-1, 2)
        assert np.max(np.abs(direct - ca.apply_H(phi, grid))) == 0.0

    def test_projectors(self, grid):
        H = ca.h_matrix(grid)
        Ps = ca.symmetric_projector(grid)
        Pa = np.eye(2 * grid.n_nodes) - Ps
        assert np.array_equal(Ps + Pa, np.eye(2 * grid.n_nodes))
        rng = np.random.default_rng(2)
        phi = rng.standard_normal((grid.n_nodes, 2))
        psis = (Ps @ phi.reshape(-1)).reshape(-1, 2)
        # symmetric part satisfies phi(-k) = phi(k) sigma_1 node by node
        assert np.max(np.abs(ca.apply_H(psis, grid) - psis)) < 1e-14
        psia = (Pa @ phi.reshape(-1)).reshape(-1, 2)
        assert np.max(np.abs(ca.apply_H(psia, grid) + psia)) < 1e-14


class TestJumpData:
    def test_two_sided_factorization(self, grid):
        u = _symmetric_u(grid)
        v = np.eye(2)[None] + u
        um = 0.3 * _symmetric_u(grid, amp=0.05)
        up = np.einsum("jab,jbc->jac", np.eye(2)[None] - um, v) \
            - np.eye(2)[None]
        jd = ca.JumpData(u_plus=lambda g: up, u_minus=lambda g: um)
        rep = jd.validate(grid, v_ref=v)
        assert rep["factorization_residual"] < 1e-12
        assert rep["symmetry_residual"] < 1e-12

    def test_validate_rejects_wrong_jump(self, grid):
        u = _symmetric_u(grid)
        jd = ca.JumpData(u_plus=lambda g: u)
        with pytest.raises(ValueError, match="factorization"):
            jd.validate(grid, v_ref=np.eye(2)[None] + 1.01 * u)


class TestBuildCu:
    def test_zero_operator(self, grid, cminus):
        jd = ca.JumpData(u_plus=None, u_minus=None)
        op = ca.build_Cu(grid, jd, cminus)
        assert np.all(op.mat == 0.0)

    def test_norm_bound(self, grid, cminus):
        chat = cminus.norm2()
        rng = np.random.default_rng(11)
        for _ in range(5):
            u = 0.2 * (rng.standard_normal((grid.n_nodes, 2, 2))
                       + 1j * rng.standard_normal((grid.n_nodes, 2, 2)))
            jd = ca.JumpData(u_plus=lambda g, u=u: u)
            op = ca.build_Cu(grid, jd, cminus)
            uinf = np.max(np.linalg.norm(u, 2, axis=(1, 2)))
            assert op.norm2() <= chat * uinf * (1.0 + 1e-12)

    def test_commutes_with_H(self, grid, cminus):
        u = _symmetric_u(grid)
        op = ca.build_Cu(grid, ca.JumpData(u_plus=lambda g: u), cminus)
        H = ca.h_matrix(grid)
        comm = op.mat @ H - H @ op.mat
        assert ca.weighted_operator_norm(comm, grid, 2) < 1e-8

    def test_symmetric_blocks_decouple(self, grid, cminus):
        u = _symmetric_u(grid)
        op = ca.build_Cu(grid, ca.JumpData(u_plus=lambda g: u), cminus)
        Ps = ca.symmetric_projector(grid)
        Pa = np.eye(2 * grid.n_nodes) - Ps
        cross1 = ca.weighted_operator_norm(Pa @ op.mat @ Ps, grid, 2)
        cross2 = ca.weighted_operator_norm(Ps @ op.mat @ Pa, grid, 2)
        assert cross1 < 1e-8 and cross2 < 1e-8


class TestSolve:
    def test_zero_jump_gives_zero(self, grid, cminus):
        jd = ca.JumpData(u_plus=None)
        dens, diag = ca.solve_sie(grid, jd, cminus=cminus)
        assert np.max(np.abs(dens.values)) == 0.0
        assert diag["condition_number"] == pytest.approx(1.0)

    def test_solution_is_symmetric(self, grid, cminus):
        jd = ca.JumpData(u_plus=lambda g: _symmetric_u(g))
        dens, _ = ca.solve_sie(grid, jd, mode="symmetric", cminus=cminus)
        defect = ca.l2_norm(ca.apply_H(dens.values, grid) - dens.values,
                            grid)
        assert defect < 1e-8

    def test_full_matches_symmetric(self, grid, cminus):
        jd = ca.JumpData(u_plus=lambda g: _symmetric_u(g))
        d1, _ = ca.solve_sie(grid, jd, mode="symmetric", cminus=cminus)
        d2, _ = ca.solve_sie(grid, jd, mode="full", cminus=cminus)
        assert np.max(np.abs(d1.values - d2.values)) < 1e-10

    def test_factorizations_recover_same_solution(self, grid, cminus, pd):
        # phi depends on the factorization but the recovered m(k) does not
        u = _symmetric_u(grid)
        v = np.eye(2)[None] + u
        um = 0.3 * _symmetric_u(grid, amp=0.05)
        up = np.einsum("jab,jbc->jac", np.eye(2)[None] - um, v) \
            - np.eye(2)[None]
        j_main = ca.JumpData(u_plus=lambda g: u)
        j_two = ca.JumpData(u_plus=lambda g: up, u_minus=lambda g: um)
        d1, _ = ca.solve_sie(grid, j_main, cminus=cminus)
        d2, _ = ca.solve_sie(grid, j_two, cminus=cminus)
        for k in (3.0 + 2.0j, -1.0 - 2.5j, 0.3 + 4.0j):
            m1 = ca.recover_solution(d1, j_main, grid, k)
            m2 = ca.recover_solution(d2, j_two, grid, k)
            assert np.max(np.abs(m1 - m2)) < 1e-8

    def test_grid_doubling_stability(self, cont, pd):
        probes = (2.0 + 1.5j, -0.7 - 3.0j)
        out = []
        for n in (12, 24):
            g = ct.collocate(cont, n)
            jd = ca.JumpData(u_plus=lambda gg: _symmetric_u(gg))
            dens, _ = ca.solve_sie(g, jd)
            out.append([ca.recover_solution(dens, jd, g, k) for k in probes])
        for m1, m2 in zip(*out):
            assert np.max(np.abs(m1 - m2)) < 1e-6

    def test_singular_system_raises(self, cont):
        g = ct.collocate(cont, 6)
        cm = ca.boundary_minus_matrix(g)
        u = _symmetric_u(g)
        op = ca.build_Cu(g, ca.JumpData(u_plus=lambda gg: u), cm)
        lam = np.linalg.eigvals(op.mat)
        lam0 = lam[np.argmax(np.abs(lam))]
        u_bad = u / lam0
        jd = ca.JumpData(u_plus=lambda gg: u_bad)
        with pytest.raises(ValueError, match="singular discrete system"):
            ca.solve_sie(g, jd, mode="full", cminus=cm)

    def test_bad_mode(self, grid):
        with pytest.raises(ValueError, match="mode"):
            ca.solve_sie(grid, ca.JumpData(u_plus=None), mode="fast")


@pytest.fixture(scope="module")
def pair(grid):
    u1 = _symmetric_u(grid)
    du = np.zeros_like(u1)
    base = 0.01 * np.exp(-np.abs(grid.nodes) ** 2)
    du[:, 0, 1] = base * np.cos(grid.nodes.real)
    du[:, 1, 0] = base * np.cos(grid.nodes.real)
    return (ca.JumpData(u_plus=lambda g: u1),
            ca.JumpData(u_plus=lambda g: u1 + du))


class TestPerturbationDiagnostics:
    def test_identical_jumps(self, grid, pair, cminus):
        rep = ca.appendixB_diagnostics(grid, pair[0], pair[0],
                                       cminus=cminus)
        assert rep["epsilon"] == 0.0
        assert rep["delta"] == 0.0
        assert rep["measured"]["phi_diff"] == 0.0
        assert rep["violations"] == []

    def test_bounds_dominate(self, grid, pair, cminus):
        rep = ca.appendixB_diagnostics(grid, pair[0], pair[1],
                                       cminus=cminus)
        assert rep["regime_ok"]
        assert rep["violations"] == []
        assert rep["measured"]["resolvent2"] <= rep["bounds"]["resolvent2"]
        assert rep["measured"]["phi_diff"] <= rep["bounds"]["phi_diff"]
        for mom in rep["moments"]:
            assert mom["measured"] <= mom["bound"]

    def test_report_is_json(self, grid, pair, cminus):
        rep = ca.appendixB_diagnostics(grid, pair[0], pair[1],
                                       cminus=cminus)
        json.dumps(rep)

    def test_regime_exceeded_flagged(self, cont):
        g = ct.collocate(cont, 6)
        cm = ca.boundary_minus_matrix(g)
        u1 = _symmetric_u(g, amp=0.05)
        u2 = _symmetric_u(g, amp=3.0)
        rep = ca.appendixB_diagnostics(g, ca.JumpData(u_plus=lambda x: u1),
                                       ca.JumpData(u_plus=lambda x: u2),
                                       cminus=cm)
        assert not rep["regime_ok"]
        assert rep["note"] == "perturbation regime exceeded"
        assert rep["bounds"] == {}

    def test_second_resolvent_formula(self, grid, pair, cminus):
        j1, j2 = pair
        Cu1 = ca.build_Cu(grid, j1, cminus)
        Cu2 = ca.build_Cu(grid, j2, cminus)
        eye = np.eye(2 * grid.n_nodes)
        R1 = np.linalg.inv(eye - Cu1.mat)
        R2 = np.linalg.inv(eye - Cu2.mat)
        u1 = j1.u_plus(grid)
        u2 = j2.u_plus(grid)
        Cd = ca.build_Cu(grid,
                         ca.JumpData(u_plus=lambda g: u1 - u2), cminus)
        rng = np.random.default_rng(3)
        x = rng.standard_normal(2 * grid.n_nodes) \
            + 1j * rng.standard_normal(2 * grid.n_nodes)
        lhs = (R1 - R2) @ x
        rhs = R1 @ (Cd.mat @ (R2 @ x))
        assert np.max(np.abs(lhs - rhs)) < 1e-8
