import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastomono.fem import LameField, assemble, solve_loadcases
from elastomono.geometry import build_mesh, build_partition, build_patches
from elastomono.ntd import (
    ForwardModel,
    NtdMatrix,
    SymmetryError,
    add_noise,
    assemble_derivative_increment,
    assemble_ntd,
    read_matrix_csv,
)

from oracles import dense_face_ntd

LAM0, MU0 = 2.8910e9, 1.1808e9


def _hetero(n_el, seed):
    rng = np.random.default_rng(seed)
    return LAM0 * rng.uniform(0.5, 2, n_el), MU0 * rng.uniform(0.5, 2, n_el)


@pytest.mark.parametrize("seed", [None, 0, 1])
def test_matches_dense_oracle(tiny, seed):
    model, _ = tiny
    lam, mu = (np.full(8, LAM0), np.full(8, MU0)) if seed is None else _hetero(8, seed)
    oracle = dense_face_ntd(2, lam, mu)
    ntd = model.ntd(LameField(lam, mu)).values
    assert np.abs(ntd - oracle).max() <= 1e-8 * np.abs(oracle).max()


def test_homogeneous_diagonal_positive(desk):
    model, _ = desk
    ntd = model.ntd(model.constant_field(LAM0, MU0))
    assert np.all(np.diag(ntd.values) > 0)
    assert ntd.symmetry_defect <= 1e-8
    assert np.array_equal(ntd.values, ntd.values.T)


def test_traction_scaling_quadratic():
    mesh = build_mesh(3)
    field = LameField(*_hetero(27, 4))
    a = ForwardModel(build_patches(mesh, 1, 1.0)).ntd(field).values
    b = ForwardModel(build_patches(mesh, 1, 5.0)).ntd(field).values
    assert np.abs(b - 25 * a).max() <= 1e-12 * np.abs(b).max()


def test_loewner_doubling(small):
    model, _ = small
    L1 = model.ntd(model.constant_field(LAM0, MU0))
    L2 = model.ntd(model.constant_field(2 * LAM0, 2 * MU0))
    assert np.linalg.eigvalsh((L1 - L2).values)[0] >= -1e-10 * L1.fro


def test_symmetry_defect_rejected(tiny):
    model, _ = tiny
    sols = model.solve(model.constant_field(LAM0, MU0)).solutions
    broken = [type(s)(s.displacement * (1 + 0.1 * k), s.load_case, s.residual) for k, s in enumerate(sols)]
    with pytest.raises(SymmetryError):
        assemble_ntd(broken, model.layout)


def test_solution_count_checked(tiny):
    model, _ = tiny
    sols = model.solve(model.constant_field(LAM0, MU0)).solutions
    with pytest.raises(ValueError):
        assemble_ntd(sols[:-1], model.layout)


class TestDerivative:
    def test_zero_direction(self, small):
        model, part = small
        U = model.solve(model.constant_field(LAM0, MU0)).displacements
        assert not assemble_derivative_increment(U, part, [0, 3], 0.0, 0.0).values.any()

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.lists(st.integers(0, 7), min_size=1, max_size=8, unique=True))
    def test_nonnegative_direction_is_nsd(self, small, a, b, region):
        model, part = small
        U = model.solve(model.constant_field(LAM0, MU0)).displacements
        inc = assemble_derivative_increment(U, part, region, a * LAM0, b * MU0)
        w = np.linalg.eigvalsh(inc.values)
        assert w[-1] <= 1e-12 * max(1e-300, np.abs(w).max())

    def test_region_out_of_range(self, small):
        model, part = small
        U = model.solve(model.constant_field(LAM0, MU0)).displacements
        with pytest.raises(ValueError):
            assemble_derivative_increment(U, part, [8], LAM0, MU0)

    def test_accepts_solution_list(self, small):
        model, part = small
        ss = model.solve(model.constant_field(LAM0, MU0))
        a = assemble_derivative_increment(ss.solutions, part, [2], LAM0, MU0).values
        b = assemble_derivative_increment(ss.displacements, part, [2], LAM0, MU0).values
        assert np.array_equal(a, b)

    def test_finite_difference_first_order(self, small):
        model, part = small
        base = model.ntd(model.constant_field(LAM0, MU0)).values
        U = model.solve(model.constant_field(LAM0, MU0)).displacements
        rng = np.random.default_rng(11)
        for s in rng.choice(part.n_pixels, 3, replace=False):
            inc = assemble_derivative_increment(U, part, [s], LAM0, MU0).values
            chi = part.indicator([s])
            errors = []
            for t in (1e-2, 1e-3, 1e-4):
                L = model.ntd(LameField(LAM0 * (1 + t * chi), MU0 * (1 + t * chi))).values
                errors.append(np.linalg.norm((L - base) / t - inc) / np.linalg.norm(inc))
            ratios = [errors[0] / errors[1], errors[1] / errors[2]]
            assert all(5 <= r <= 20 for r in ratios), (s, errors)


@pytest.fixture(scope="module")
def ntd(tiny):
    model, _ = tiny
    return model.ntd(model.constant_field(LAM0, MU0))


class TestNoise:
    def test_zero_noise_exact(self, ntd):
        assert np.array_equal(add_noise(ntd, 0.0, 3).noisy.values, ntd.values)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-6, 0.5), st.integers(0, 2**31 - 1))
    def test_perturbation_norm_and_symmetry(self, ntd, eta, seed):
        r = add_noise(ntd, eta, seed)
        diff = r.noisy.values - ntd.values
        assert np.linalg.norm(diff) == pytest.approx(r.delta, rel=1e-12)
        assert r.delta == pytest.approx(eta * ntd.fro, rel=1e-15)
        assert np.array_equal(r.perturbation, r.perturbation.T)

    def test_same_seed_bit_identical(self, ntd):
        assert np.array_equal(add_noise(ntd, 0.01, 42).noisy.values, add_noise(ntd, 0.01, 42).noisy.values)
        assert not np.array_equal(add_noise(ntd, 0.01, 42).noisy.values, add_noise(ntd, 0.01, 43).noisy.values)

    def test_reference_norm(self, ntd):
        assert add_noise(ntd, 0.1, 0, reference_norm=2.0).delta == pytest.approx(0.2)

    def test_negative_eta(self, ntd):
        with pytest.raises(ValueError):
            add_noise(ntd, -0.1, 0)


def test_csv_roundtrip(tmp_path, tiny):
    model, _ = tiny
    ntd = model.ntd(model.constant_field(LAM0, MU0))
    path = tmp_path / "ntd.csv"
    ntd.to_csv(path, header="config_sha256=abc\nseeds=[1]")
    text = path.read_text()
    assert text.startswith("# config_sha256=abc\n# seeds=[1]\n")
    assert np.array_equal(read_matrix_csv(path), ntd.values)


def test_cache_reuses_solves(tiny):
    model, _ = tiny
    f = model.constant_field(LAM0, MU0)
    assert model.solve(f) is model.solve(LameField(f.lam.copy(), f.mu.copy()))


def test_matrix_arithmetic():
    a = NtdMatrix(np.eye(2))
    assert np.array_equal((a + a - np.eye(2)).values, np.eye(2))
    assert a.M == 2 and a.fro == pytest.approx(np.sqrt(2))


def test_matches_direct_pipeline(tiny):
    model, _ = tiny
    field = LameField(*_hetero(8, 9))
    sols = solve_loadcases(assemble(model.mesh, field), model.layout)
    np.testing.assert_array_equal(assemble_ntd(sols, model.layout).values, model.ntd(field).values)
    assert build_partition(model.mesh, 2).n_pixels == 8
