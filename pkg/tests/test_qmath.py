import math

import numpy as np
import pytest

from parallel_lives.qmath import (
    Basis,
    DensityMatrix,
    Ket,
    QMathError,
    Unitary,
    angle_basis,
    apply,
    basis_ket,
    computational_basis,
    hadamard_matrix,
    indicator_basis,
    inner,
    ket2,
    measurement_coupling,
    partial_trace,
    project,
    projection_weight,
    tensor,
)

RT2 = math.sqrt(2.0)


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_ket(rng, space):
    n = int(np.prod([d for _, d in space]))
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    return Ket(space, z / np.linalg.norm(z))


def eq_state():
    return Ket((("q1", 2), ("q2", 2)), [0.8, 0.0, 0.0, 0.6])


class TestTensor:
    def test_basis_product(self):
        k = tensor([basis_ket(0, "a", 2), basis_ket(1, "b", 2)])
        assert np.allclose(k.amplitudes, [0, 1, 0, 0])

    def test_linearity(self):
        k = tensor([ket2(0.8, 0.6, "q"), basis_ket(0, "R", 3)])
        assert k.amplitudes[0] == pytest.approx(0.8)
        assert k.amplitudes[3] == pytest.approx(0.6)

    def test_norm_multiplicative(self):
        rng = np.random.default_rng(7)
        ks = [random_ket(rng, ((lab, 2),)) for lab in "abc"]
        assert tensor(ks).norm() == pytest.approx(1.0, abs=1e-12)

    def test_duplicate_label_rejected(self):
        with pytest.raises(QMathError):
            tensor([basis_ket(0, "a", 2), basis_ket(0, "a", 2)])


class TestApply:
    def test_von_neumann_coupling(self):
        basis = computational_basis("q", 2)
        u = measurement_coupling(basis, "A", 3)
        start = tensor([ket2(0.8, 0.6, "q"), basis_ket(2, "A", 3)])
        out = apply(u, start)
        expected = 0.8 * tensor([basis_ket(0, "q", 2), basis_ket(0, "A", 3)]).amplitudes \
            + 0.6 * tensor([basis_ket(1, "q", 2), basis_ket(1, "A", 3)]).amplitudes
        assert np.allclose(out.amplitudes, expected, atol=1e-12)

    def test_identity(self):
        rng = np.random.default_rng(3)
        k = random_ket(rng, (("x", 2), ("y", 3)))
        u = Unitary((("y", 3),), np.eye(3))
        assert np.allclose(apply(u, k).amplitudes, k.amplitudes)

    def test_hadamard(self):
        u = Unitary((("q", 2),), hadamard_matrix())
        out = apply(u, basis_ket(0, "q", 2))
        assert np.allclose(out.amplitudes, [1 / RT2, 1 / RT2])

    def test_embeds_with_identity_on_rest(self):
        rng = np.random.default_rng(11)
        k = random_ket(rng, (("a", 2), ("b", 2), ("c", 2)))
        u = Unitary((("b", 2),), hadamard_matrix())
        out = apply(u, k)
        # applying on the permuted ket agrees
        kp = k.permuted(["b", "c", "a"])
        out2 = apply(u, kp).permuted(["a", "b", "c"])
        assert np.allclose(out.amplitudes, out2.amplitudes, atol=1e-12)

    def test_dimension_mismatch(self):
        u = Unitary((("q", 3),), np.eye(3))
        with pytest.raises(QMathError):
            apply(u, basis_ket(0, "q", 2))


class TestInner:
    def test_eq_state_component(self):
        psi = eq_state()
        probe = tensor([basis_ket(0, "q1", 2), basis_ket(0, "q2", 2)])
        assert inner(probe, psi) == pytest.approx(0.8)

    def test_plus_x_component(self):
        # <+ (x)|psi> = 4/5*(1/sqrt2)*(3/5) + 3/5*(1/sqrt2)*(4/5) = 24/(25*sqrt2)
        psi = eq_state()
        probe = tensor([ket2(1 / RT2, 1 / RT2, "q1"), ket2(0.6, 0.8, "q2")])
        assert inner(probe, psi) == pytest.approx(24 / (25 * RT2), abs=1e-12)

    def test_self_inner_is_one(self):
        rng = np.random.default_rng(5)
        k = random_ket(rng, (("a", 3), ("b", 2)))
        assert inner(k, k) == pytest.approx(1.0, abs=1e-12)

    def test_space_mismatch(self):
        with pytest.raises(QMathError):
            inner(basis_ket(0, "a", 2), basis_ket(0, "b", 2))


class TestPartialTrace:
    def test_eq_state_reduction(self):
        rho = partial_trace(eq_state(), {"q1"})
        assert np.allclose(rho.matrix, np.diag([16 / 25, 9 / 25]), atol=1e-12)

    def test_product_state_pure(self):
        rng = np.random.default_rng(9)
        k = tensor([random_ket(rng, (("a", 2),)), random_ket(rng, (("b", 3),))])
        rho = partial_trace(k, {"a"})
        assert rho.purity() == pytest.approx(1.0, abs=1e-10)

    def test_singlet_maximally_mixed(self):
        singlet = Ket((("q1", 2), ("q2", 2)), [0, 1 / RT2, -1 / RT2, 0])
        for keep in ("q1", "q2"):
            rho = partial_trace(singlet, {keep})
            assert np.allclose(rho.matrix, np.eye(2) / 2, atol=1e-12)

    def test_two_step_equals_one_step(self):
        rng = np.random.default_rng(13)
        k = random_ket(rng, (("a", 2), ("b", 2), ("c", 3)))
        one = partial_trace(k, {"a"})
        two = partial_trace(partial_trace(k, {"a", "b"}), {"a"})
        assert np.allclose(one.matrix, two.matrix, atol=1e-10)

    def test_density_input(self):
        rng = np.random.default_rng(14)
        k = random_ket(rng, (("a", 2), ("b", 2)))
        full = partial_trace(k, {"a", "b"})
        assert np.allclose(partial_trace(full, {"a"}).matrix,
                           partial_trace(k, {"a"}).matrix, atol=1e-10)

    def test_empty_keep_rejected(self):
        with pytest.raises(QMathError):
            partial_trace(eq_state(), set())


class TestMeasurementCoupling:
    def test_branching(self):
        basis = computational_basis("q", 2)
        u = measurement_coupling(basis, "A", 3)
        out = apply(u, tensor([ket2(0.6, 0.8, "q"), basis_ket(2, "A", 3)]))
        want = 0.6 * tensor([basis_ket(0, "q", 2), basis_ket(0, "A", 3)]).amplitudes \
            + 0.8 * tensor([basis_ket(1, "q", 2), basis_ket(1, "A", 3)]).amplitudes
        assert np.allclose(out.amplitudes, want, atol=1e-12)

    def test_second_apparatus_preserves_branches(self):
        basis = computational_basis("q", 2)
        u1 = measurement_coupling(basis, "A", 3)
        u2 = measurement_coupling(basis, "B", 3)
        start = tensor([ket2(0.8, 0.6, "q"), basis_ket(2, "A", 3),
                        basis_ket(2, "B", 3)])
        out = apply(u2, apply(u1, start))
        want = np.zeros(18, dtype=complex)
        want_ket = 0.8 * tensor([basis_ket(0, "q", 2), basis_ket(0, "A", 3),
                                 basis_ket(0, "B", 3)]).amplitudes \
            + 0.6 * tensor([basis_ket(1, "q", 2), basis_ket(1, "A", 3),
                            basis_ket(1, "B", 3)]).amplitudes
        assert np.allclose(out.amplitudes, want_ket, atol=1e-12)

    def test_ready_sector_isometry(self):
        rng = np.random.default_rng(21)
        basis = angle_basis(0.73, "q")
        u = measurement_coupling(basis, "A", 3)
        k = tensor([random_ket(rng, (("q", 2),)), basis_ket(2, "A", 3)])
        assert apply(u, k).norm() == pytest.approx(1.0, abs=1e-12)

    def test_small_apparatus_rejected(self):
        with pytest.raises(QMathError):
            measurement_coupling(computational_basis("q", 2), "A", 2)

    def test_incomplete_basis_rejected(self):
        partial = Basis("q", 3, [np.eye(3)[0], np.eye(3)[1]], ("0", "1"))
        with pytest.raises(QMathError):
            measurement_coupling(partial, "A", 4)

    def test_indicator_basis_labels(self):
        basis = computational_basis("q", 2, ("u", "d"))
        ind = indicator_basis(basis, "A", 3)
        assert ind.labels == ("u", "d")
        assert len(ind) == 2 and not ind.complete


class TestAngleBasis:
    def test_zero_is_computational(self):
        b = angle_basis(0.0, "q")
        assert np.allclose(b.vectors[0], [1, 0])
        assert np.allclose(b.vectors[1], [0, -1])

    def test_formula(self):
        theta = 2 * math.pi / 3
        b = angle_basis(theta, "q")
        assert np.allclose(b.vectors[0],
                           [math.cos(theta / 2), math.sin(theta / 2)], atol=1e-12)
        assert np.allclose(b.vectors[1],
                           [math.sin(theta / 2), -math.cos(theta / 2)], atol=1e-12)

    @pytest.mark.parametrize("theta", [0.1, 1.0, 2.5, 5.9])
    def test_orthonormal(self, theta):
        b = angle_basis(theta, "q")  # construction validates orthonormality
        assert abs(np.vdot(b.vectors[0], b.vectors[1])) < 1e-12


class TestInvariants:
    def test_unitarity_preserves_norm(self):
        rng = np.random.default_rng(42)
        for dims in ((2,), (2, 2), (4, 2, 2), (16,)):
            space = tuple((f"s{i}", d) for i, d in enumerate(dims))
            k = random_ket(rng, space)
            n = int(np.prod(dims))
            u = Unitary(space, random_unitary(rng, n))
            assert apply(u, k).norm() == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_couplings_commute(self):
        rng = np.random.default_rng(43)
        space = (("a", 2), ("b", 2), ("c", 2), ("d", 2))
        k = random_ket(rng, space)
        ua = Unitary((("a", 2), ("b", 2)), random_unitary(rng, 4))
        ub = Unitary((("c", 2), ("d", 2)), random_unitary(rng, 4))
        lhs = apply(ub, apply(ua, k))
        rhs = apply(ua, apply(ub, k))
        assert np.max(np.abs(lhs.amplitudes - rhs.amplitudes)) < 1e-10

    def test_basis_expectations_sum_to_one(self):
        rng = np.random.default_rng(44)
        k = random_ket(rng, (("a", 3), ("b", 2)))
        rho = partial_trace(k, {"a"})
        q = random_unitary(rng, 3)
        total = sum(rho.expectation(q[:, i]) for i in range(3))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_partial_trace_unit_trace(self):
        rng = np.random.default_rng(45)
        k = random_ket(rng, (("a", 2), ("b", 3), ("c", 2)))
        rho = partial_trace(k, {"b"})
        assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-10)


class TestValidation:
    def test_unnormalized_rejected(self):
        with pytest.raises(QMathError):
            Ket((("q", 2),), [1.0, 1.0])

    def test_unnormalized_intermediate_flagged(self):
        k = Ket((("q", 2),), [1.0, 1.0], require_normalized=False)
        assert k.norm() == pytest.approx(RT2)

    def test_non_unitary_rejected(self):
        with pytest.raises(QMathError):
            Unitary((("q", 2),), [[1, 0], [1, 1]])

    def test_non_finite_values_rejected(self):
        with pytest.raises(QMathError):
            Ket((("q", 2),), [float("nan"), 0.0])
        with pytest.raises(QMathError):
            Unitary((("q", 2),), [[float("nan"), 0], [0, 1]])
        with pytest.raises(QMathError):
            Basis("q", 2, [np.array([float("inf"), 0.0]), np.eye(2)[1]],
                  ("0", "1"))
        with pytest.raises(QMathError):
            DensityMatrix((("q", 2),), [[float("nan"), 0], [0, 0.5]])

    def test_density_matrix_validation(self):
        with pytest.raises(QMathError):
            DensityMatrix((("q", 2),), [[0.5, 0], [0, 0.6]])
        with pytest.raises(QMathError):
            DensityMatrix((("q", 2),), [[1.5, 0], [0, -0.5]])

    def test_basis_duplicate_labels(self):
        with pytest.raises(QMathError):
            Basis("q", 2, [np.eye(2)[0], np.eye(2)[1]], ("x", "x"))

    def test_projection_weight(self):
        psi = eq_state()
        w = projection_weight(psi, {"q1": np.array([1.0, 0.0])})
        assert w == pytest.approx(16 / 25, abs=1e-12)
        rem = project(psi, {"q1": np.array([1.0, 0.0])})
        assert rem.labels == ("q2",)
