import numpy as np
import pytest
from scipy import sparse

from cylgap import assemble, coeff, eig, grid
from cylgap.errors import FactorizationFailed

from conftest import MU1


def separable_mixed_spectrum(ell, kmax=6, mmax=6):
    """Analytic eigenvalues of the identity-field mixed problem on
    (-ell, ell) x (-1, 1): Dirichlet modes in x2, Neumann modes in x1."""
    vals = []
    for k in range(1, kmax + 1):
        for m in range(0, mmax + 1):
            vals.append((k * np.pi / 2.0) ** 2 + (m * np.pi / (2 * ell)) ** 2)
    return sorted(vals)


@pytest.fixture(scope="module")
def pencil_1d():
    mesh = grid.build_mesh("cross-section", omega=(-1, 1), resolution=64)
    K, M = assemble.assemble_cross_section(mesh, coeff.identity_field())
    return K, M


class TestSmallestEigenpairs:
    def test_1d_identity_spectrum(self, pencil_1d):
        pairs = eig.smallest_eigenpairs(*pencil_1d, count=2)
        assert pairs[0].value == pytest.approx(MU1, abs=3e-4)
        assert pairs[1].value == pytest.approx(np.pi**2, abs=1e-2)
        assert pairs[0].value < pairs[1].value

    def test_identity_pencil(self):
        mesh = grid.build_mesh("cross-section", omega=(-1, 1), resolution=16)
        _, M = assemble.assemble_cross_section(mesh, coeff.identity_field())
        pairs = eig.smallest_eigenpairs(M, M, count=3)
        for p in pairs:
            assert p.value == pytest.approx(1.0, abs=1e-12)
        # any M-orthonormal set is valid
        V = np.stack([p.vector for p in pairs], axis=1)
        G = V.T @ (M.full() @ V)
        np.testing.assert_allclose(G, np.eye(3), atol=1e-8)

    def test_model_strictly_inside_bounds(self, model06):
        mesh = grid.build_mesh("full-cylinder", ell=1, omega=(-1, 1),
                               resolution=32)
        K, M = assemble.assemble_cylinder(mesh, model06)
        lam = eig.smallest_eigenpairs(K, M)[0].value
        margin = 1e-2  # a-priori discretization allowance
        assert 0.64 * MU1 + margin < lam < MU1 - margin

    def test_normalization_and_residual(self, model06):
        mesh = grid.build_mesh("full-cylinder", ell=2, omega=(-1, 1),
                               resolution=16)
        K, M = assemble.assemble_cylinder(mesh, model06)
        pairs = eig.smallest_eigenpairs(K, M, count=3, tol=1e-9)
        Mf = M.full()
        for p in pairs:
            assert p.vector @ (Mf @ p.vector) == pytest.approx(1.0, abs=1e-10)
            assert p.residual <= 1e-9
        # pairwise M-orthogonal
        V = np.stack([p.vector for p in pairs], axis=1)
        G = V.T @ (Mf @ V)
        assert np.abs(G - np.eye(3)).max() <= 1e-8

    def test_first_vector_constant_sign(self, model06):
        mesh = grid.build_mesh("full-cylinder", ell=4, omega=(-1, 1),
                               resolution=8)
        K, M = assemble.assemble_cylinder(mesh, model06)
        u = eig.smallest_eigenpairs(K, M)[0].vector
        assert u.min() >= -1e-8 * u.max()

    def test_rayleigh_matches_value(self, model06):
        mesh = grid.build_mesh("full-cylinder", ell=2, omega=(-1, 1),
                               resolution=16)
        K, M = assemble.assemble_cylinder(mesh, model06)
        p = eig.smallest_eigenpairs(K, M, tol=1e-9)[0]
        assert eig.rayleigh_quotient(K, M, p.vector) == pytest.approx(
            p.value, rel=1e-8)

    def test_pencil_scaling(self, pencil_1d):
        K, M = pencil_1d
        base = eig.smallest_eigenpairs(K, M, count=2)
        both = eig.smallest_eigenpairs(K.scale(7.5), M.scale(7.5), count=2)
        only_k = eig.smallest_eigenpairs(K.scale(7.5), M, count=2)
        for b, s, k in zip(base, both, only_k):
            assert s.value == pytest.approx(b.value, rel=1e-10)
            assert k.value == pytest.approx(7.5 * b.value, rel=1e-10)

    def test_degenerate_marking(self):
        K = sparse.diags([1.0, 1.0 + 1e-12, 2.0]).tocsr()
        M = sparse.identity(3, format="csr")
        pairs = eig.smallest_eigenpairs(K, M, count=2)
        assert pairs[0].degenerate and pairs[1].degenerate

    def test_indefinite_pencil_rejected(self):
        K = sparse.diags([-1.0, 1.0, 2.0]).tocsr()
        M = sparse.identity(3, format="csr")
        with pytest.raises(FactorizationFailed):
            eig.smallest_eigenpairs(K, M)

    def test_parameter_validation(self, pencil_1d):
        K, M = pencil_1d
        with pytest.raises(ValueError):
            eig.smallest_eigenpairs(K, M, count=7)
        with pytest.raises(ValueError):
            eig.smallest_eigenpairs(K, M, tol=1e-13)

    def test_arpack_path_matches_dense(self, model06):
        # > DENSE_CUTOFF free nodes forces the shift-invert path
        mesh = grid.build_mesh("full-cylinder", ell=2, omega=(-1, 1),
                               resolution=16)
        K, M = assemble.assemble_cylinder(mesh, model06)
        assert K.dim > eig.DENSE_CUTOFF
        pairs = eig.smallest_eigenpairs(K, M, count=2, tol=1e-9)
        import scipy.linalg
        dense = scipy.linalg.eigh(K.full().toarray(), M.full().toarray(),
                                  subset_by_index=[0, 1])[0]
        assert pairs[0].value == pytest.approx(dense[0], rel=1e-10)
        assert pairs[1].value == pytest.approx(dense[1], rel=1e-10)


class TestSecondConstrained:
    def test_matches_unconstrained_second(self, model06):
        mesh = grid.build_mesh("full-cylinder", ell=2, omega=(-1, 1),
                               resolution=16)
        K, M = assemble.assemble_cylinder(mesh, model06)
        pairs = eig.smallest_eigenpairs(K, M, count=2, tol=1e-9)
        second = eig.second_eigenpair_constrained(K, M, pairs[0], tol=1e-9)
        assert second.value == pytest.approx(pairs[1].value, abs=1e-8)
        Mf = M.full()
        assert abs(pairs[0].vector @ (Mf @ second.vector)) <= 1e-8

    def test_identity_pencil_orthogonal(self):
        mesh = grid.build_mesh("cross-section", omega=(-1, 1), resolution=16)
        _, M = assemble.assemble_cross_section(mesh, coeff.identity_field())
        u1 = eig.smallest_eigenpairs(M, M)[0]
        second = eig.second_eigenpair_constrained(M, M, u1, tol=1e-9)
        assert second.value == pytest.approx(1.0, abs=1e-9)
        assert abs(u1.vector @ (M.full() @ second.vector)) <= 1e-8

    def test_separable_second_eigenvalue(self):
        field = coeff.identity_field()
        mesh = grid.build_mesh("full-cylinder", ell=1, omega=(-1, 1),
                               resolution=32)
        K, M = assemble.assemble_cylinder(mesh, field)
        pairs = eig.smallest_eigenpairs(K, M, count=2, tol=1e-9)
        exact = separable_mixed_spectrum(1.0)
        assert pairs[0].value == pytest.approx(exact[0], rel=3e-3)
        assert pairs[1].value == pytest.approx(exact[1], rel=3e-3)

    def test_requires_converged_first(self, pencil_1d):
        K, M = pencil_1d
        u1 = eig.smallest_eigenpairs(K, M)[0]
        u1_bad = eig.EigenPair(u1.value, u1.vector, residual=1.0)
        with pytest.raises(ValueError):
            eig.second_eigenpair_constrained(K, M, u1_bad)


class TestTrialSpaceMonotonicity:
    def test_mixed_below_dirichlet(self, model06):
        mesh = grid.build_mesh("full-cylinder", ell=4, omega=(-1, 1),
                               resolution=8)
        K, M = assemble.assemble_cylinder(mesh, model06)
        Kd, Md = assemble.assemble_dirichlet_cylinder(mesh, model06)
        lam = eig.smallest_eigenpairs(K, M)[0].value
        sig = eig.smallest_eigenpairs(Kd, Md)[0].value
        assert lam <= sig + 1e-8

    def test_half_cylinder_upper_bounds_half_length(self, model06):
        # lambda_{L/2} <= tilde-lambda_L^+ via exact extension by zero
        L = 8
        half = grid.build_mesh("half-plus", ell=L, omega=(-1, 1),
                               resolution=(8, 16))
        cyl = grid.build_mesh("full-cylinder", ell=L / 2, omega=(-1, 1),
                              resolution=(8, 16))
        Kh, Mh = assemble.assemble_cylinder(half, model06)
        Kc, Mc = assemble.assemble_cylinder(cyl, model06)
        ph = eig.smallest_eigenpairs(Kh, Mh, tol=1e-9)[0]
        pc = eig.smallest_eigenpairs(Kc, Mc, tol=1e-9)[0]
        assert pc.value <= ph.value + 1e-8
        # matrix-level check: the extension preserves both energies
        ext = grid.extend_by_zero(half, cyl, ph.vector, shift=-L / 2)
        assert Kc.energy(ext) == pytest.approx(Kh.energy(ph.vector),
                                               rel=1e-12)
        assert Mc.energy(ext) == pytest.approx(Mh.energy(ph.vector),
                                               rel=1e-12)

    def test_half_monotone_in_length(self, model06):
        vals = []
        for L in (4, 8):
            mesh = grid.build_mesh("half-plus", ell=L, omega=(-1, 1),
                                   resolution=(8, 16))
            K, M = assemble.assemble_cylinder(mesh, model06)
            vals.append(eig.smallest_eigenpairs(K, M, tol=1e-9)[0].value)
        assert vals[1] <= vals[0] + 1e-9
