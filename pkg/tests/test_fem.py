import numpy as np
import pytest
import scipy.sparse as sp

from elastomono.fem import (
    LameField,
    assemble,
    assemble_form,
    element_stiffness,
    load_matrix,
    patch_load,
    solve_loadcases,
)
from elastomono.geometry import Patch, build_mesh, build_patches

from oracles import dense_element_matrix, dense_face_load, dense_solve, dense_stiffness

LAM0, MU0 = 2.8910e9, 1.1808e9


def _hetero(n_el, seed=0):
    rng = np.random.default_rng(seed)
    return LAM0 * rng.uniform(0.5, 2, n_el), MU0 * rng.uniform(0.5, 2, n_el)


class TestElementStiffness:
    @pytest.mark.parametrize("lam, mu, h", [(1.0, 1.0, 1.0), (LAM0, MU0, 0.2), (0.3, 7.0, 0.05)])
    def test_symmetric_psd_six_rigid_modes(self, lam, mu, h):
        K = element_stiffness(lam, mu, h)
        np.testing.assert_allclose(K, K.T, rtol=0, atol=1e-14 * np.abs(K).max())
        w = np.linalg.eigvalsh(K)
        assert np.all(w > -1e-12 * w[-1])
        assert np.sum(w < 1e-10 * w[-1]) == 6

    def test_linear_in_parameters(self):
        np.testing.assert_allclose(element_stiffness(3 * LAM0, 3 * MU0, 0.5),
                                   3 * element_stiffness(LAM0, MU0, 0.5), rtol=1e-14)

    def test_matches_index_form_oracle(self):
        h = 0.25
        xyz = np.array([[a, b, c] for c in (0, h) for b in (0, h) for a in (0, h)])
        # oracle uses x-fastest corner order; the package uses the counter-clockwise order
        order = [0, 1, 3, 2, 4, 5, 7, 6]
        dofs = np.array([3 * a + c for a in order for c in range(3)])
        K_oracle = dense_element_matrix(xyz, LAM0, MU0)[np.ix_(dofs, dofs)]
        K = element_stiffness(LAM0, MU0, h)
        assert np.abs(K - K_oracle).max() <= 1e-12 * np.abs(K_oracle).max()

    @pytest.mark.parametrize("seed", range(5))
    def test_constant_strain_energy(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(3, 3))
        lam, mu, h = rng.uniform(0.5, 2, 3)
        corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]) * h
        u = (corners @ A.T).ravel()
        sym = 0.5 * (A + A.T)
        closed = h**3 * (2 * mu * np.sum(sym * sym) + lam * np.trace(A) ** 2)
        assert u @ element_stiffness(lam, mu, h) @ u == pytest.approx(closed, rel=1e-12)

    @pytest.mark.parametrize("lam, mu", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_rejects_nonpositive(self, lam, mu):
        with pytest.raises(ValueError):
            element_stiffness(lam, mu, 1.0)


class TestLameField:
    def test_lambda_zero_admitted(self):
        LameField(np.zeros(3), np.ones(3))

    @pytest.mark.parametrize("lam, mu", [([-1.0], [1.0]), ([1.0], [0.0]), ([1.0, 2.0], [1.0])])
    def test_rejects(self, lam, mu):
        with pytest.raises(ValueError):
            LameField(np.array(lam), np.array(mu))

    def test_read_only(self):
        f = LameField.constant(4, 1.0, 2.0)
        with pytest.raises(ValueError):
            f.lam[0] = 5.0


class TestAssemble:
    def test_positive_definite(self):
        mesh = build_mesh(2)
        system = assemble(mesh, LameField.constant(8, LAM0, MU0))
        assert np.linalg.eigvalsh(system.matrix.toarray())[0] > 0

    def test_doubling_field_doubles_operator(self):
        mesh = build_mesh(2)
        lam, mu = _hetero(8)
        a = assemble(mesh, LameField(lam, mu)).matrix
        b = assemble(mesh, LameField(2 * lam, 2 * mu)).matrix
        assert abs(b - 2 * a).max() <= 1e-14 * abs(a).max()

    @pytest.mark.parametrize("hetero", [False, True])
    def test_matches_dense_oracle(self, hetero):
        mesh = build_mesh(2)
        lam, mu = _hetero(8) if hetero else (np.full(8, LAM0), np.full(8, MU0))
        K, free, _ = dense_stiffness(2, lam, mu)
        full = assemble_form(mesh, lam, mu).toarray()
        assert np.abs(full - K).max() <= 1e-12 * np.abs(K).max()
        reduced = assemble(mesh, LameField(lam, mu)).matrix.toarray()
        Kff = K[np.ix_(free, free)]
        assert np.abs(reduced - Kff).max() <= 1e-12 * np.abs(Kff).max()

    def test_signed_coefficients(self):
        mesh = build_mesh(2)
        lam, mu = _hetero(8)
        diff = assemble_form(mesh, lam, mu) - assemble_form(mesh, 0.5 * lam, 0.5 * mu)
        assert abs(assemble_form(mesh, 0.5 * lam, 0.5 * mu) - diff).max() <= 1e-14 * abs(diff).max()
        assert sp.issparse(assemble_form(mesh, -lam, mu))

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            assemble(build_mesh(2), LameField.constant(7, 1.0, 1.0))


class TestLoads:
    def test_total_force(self):
        mesh = build_mesh(4)
        layout = build_patches(mesh, 2, traction_magnitude=3.0)
        for patch in layout.patches:
            total = patch_load(mesh, patch).reshape(-1, 3).sum(axis=0)
            np.testing.assert_allclose(total, layout.area(patch) * patch.traction, atol=1e-15)
            assert np.linalg.norm(patch.traction) == 3.0

    def test_disjoint_support_except_shared_edges(self):
        mesh = build_mesh(4)
        layout = build_patches(mesh, 2)
        F = load_matrix(layout)
        support = [set(np.flatnonzero(F[:, k]) // 3) for k in range(layout.M)]
        for a in range(layout.M):
            for b in range(a + 1, layout.M):
                shared = support[a] & support[b]
                qa = set(layout.patches[a].quads.ravel())
                qb = set(layout.patches[b].quads.ravel())
                assert shared == qa & qb

    def test_zero_traction(self):
        mesh = build_mesh(2)
        p = build_patches(mesh, 1).patches[0]
        zero = Patch(p.face, p.facet_range, p.quads, np.zeros(3))
        assert not patch_load(mesh, zero).any()

    def test_matches_oracle_face_load(self):
        mesh = build_mesh(2)
        layout = build_patches(mesh, 1)
        _, _, nodes = dense_stiffness(2, LAM0, MU0)
        oracle = dense_face_load(nodes, 2, 0, 0, np.array([1.0, 0, 0]))
        np.testing.assert_allclose(patch_load(mesh, layout.patches[0]), oracle, atol=1e-15)


class TestSolve:
    def test_dense_lu_oracle(self):
        mesh = build_mesh(2)
        layout = build_patches(mesh, 1)
        K, free, nodes = dense_stiffness(2, LAM0, MU0)
        sols = solve_loadcases(assemble(mesh, LameField.constant(8, LAM0, MU0)), layout)
        oracle = dense_solve(K, free, dense_face_load(nodes, 2, 2, 1, np.array([0, 0, -1.0])))
        u = sols[4].displacement
        assert np.linalg.norm(u - oracle) <= 1e-9 * np.linalg.norm(oracle)

    def test_residual_and_energy_identity(self, small):
        model, _ = small
        system = assemble(model.mesh, LameField(*_hetero(64, 3)))
        sols = solve_loadcases(system, model.layout)
        F = load_matrix(model.layout)
        for s in sols:
            assert s.residual <= 1e-10
            u = system.restrict(s.displacement)
            work = F[:, s.load_case] @ s.displacement
            assert u @ (system.matrix @ u) == pytest.approx(work, rel=1e-9)

    def test_zero_load(self):
        system = assemble(build_mesh(2), LameField.constant(8, LAM0, MU0))
        x, res = system.solve(np.zeros(system.n_free))
        assert not x.any() and not res.any()

    def test_linear_in_traction(self):
        mesh = build_mesh(2)
        system = assemble(mesh, LameField.constant(8, LAM0, MU0))
        u1 = solve_loadcases(system, build_patches(mesh, 1, 1.0))
        u7 = solve_loadcases(system, build_patches(mesh, 1, 7.0))
        for a, b in zip(u1, u7):
            diff = np.linalg.norm(b.displacement - 7 * a.displacement)
            assert diff <= 1e-12 * np.linalg.norm(b.displacement)

    def test_repeated_solves_bit_identical(self):
        mesh = build_mesh(3)
        layout = build_patches(mesh, 1)
        field = LameField(*_hetero(27, 5))
        a = solve_loadcases(assemble(mesh, field), layout)
        b = solve_loadcases(assemble(mesh, field), layout)
        assert all(np.array_equal(x.displacement, y.displacement) for x, y in zip(a, b))

    @pytest.mark.parametrize("seed", range(10))
    def test_energy_monotone_in_parameters(self, seed):
        mesh = build_mesh(3)
        layout = build_patches(mesh, 1)
        rng = np.random.default_rng(seed)
        lam, mu = _hetero(27, seed)
        lam2, mu2 = lam + LAM0 * rng.uniform(0, 1, 27), mu + MU0 * rng.uniform(0, 1, 27)
        F = load_matrix(layout)
        w1 = [F[:, s.load_case] @ s.displacement for s in solve_loadcases(assemble(mesh, LameField(lam, mu)), layout)]
        w2 = [F[:, s.load_case] @ s.displacement for s in solve_loadcases(assemble(mesh, LameField(lam2, mu2)), layout)]
        assert np.all(np.array(w2) <= np.array(w1))
