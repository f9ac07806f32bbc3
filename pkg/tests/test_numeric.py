import numpy as np
import pytest

from qcls import numeric as nc
from qcls.errors import LayoutError, NumericError, PreconditionError


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestSvd:
    def test_diagonal(self):
        data = nc.svd(np.diag([2.0, 1.0]))
        assert np.allclose(data.singular_values, [2.0, 1.0])
        assert np.allclose(np.abs(data.left), np.eye(2))
        assert np.allclose(np.abs(data.right), np.eye(2))

    def test_zero_matrix(self):
        data = nc.svd(np.zeros((2, 3)))
        assert np.allclose(data.singular_values, 0.0)

    def test_seeded_reconstruction(self):
        rng = np.random.default_rng(7)
        m = rand_complex(rng, 4, 3)
        data = nc.svd(m)
        # independent check: rebuild by direct multiplication
        rebuilt = (data.left * data.singular_values) @ data.right.conj().T
        assert np.linalg.norm(m - rebuilt, 2) <= 1e-9 * np.linalg.norm(m, 2)

    def test_roundtrip_200_seeds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            rows = int(rng.integers(1, 9))
            cols = int(rng.integers(1, 9))
            m = rand_complex(rng, rows, cols)
            data = nc.svd(m)
            assert data.reconstruction_residual(m) <= 1e-9 * max(1.0, np.linalg.norm(m, 2))
            assert np.all(np.diff(data.singular_values) <= 1e-12)

    def test_hermitian_gets_eigendecomposition(self):
        rng = np.random.default_rng(1)
        m = rand_complex(rng, 4, 4)
        m = m + m.conj().T
        data = nc.svd(m)
        assert data.eigenvalues is not None
        assert np.allclose(data.eigenvectors @ np.diag(data.eigenvalues)
                           @ data.eigenvectors.conj().T, m, atol=1e-10)


class TestHermitianDilation:
    def test_scalar(self):
        d = nc.hermitian_dilation([[3.0]])
        assert np.allclose(d, [[0, 3], [3, 0]])
        assert np.allclose(sorted(np.linalg.eigvalsh(d)), [-3, 3])

    def test_diag(self):
        d = nc.hermitian_dilation(np.diag([1.0, 2.0]))
        vals = np.sort(np.linalg.eigvalsh(d))
        assert np.allclose(vals, [-2, -1, 1, 2], atol=1e-12)

    def test_column(self):
        d = nc.hermitian_dilation(np.array([[1.0], [1.0]]))
        vals = np.sort(np.linalg.eigvalsh(d))
        assert np.allclose(vals, [-np.sqrt(2), 0, np.sqrt(2)], atol=1e-12)

    def test_eigs_match_svd(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            m = rand_complex(rng, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
            d = nc.hermitian_dilation(m)
            s = np.linalg.svd(m, compute_uv=False)
            expected = np.sort(np.concatenate([s, -s, np.zeros(abs(m.shape[0] - m.shape[1]))]))
            assert np.allclose(np.sort(np.linalg.eigvalsh(d)), expected, atol=1e-9)


class TestUnitaryCompletion:
    def test_zero_block(self):
        u = nc.unitary_completion(np.zeros((2, 2)), 1.0)
        assert nc.is_unitary(u)
        assert np.allclose(u[:2, :2], 0)

    def test_half_identity(self):
        u = nc.unitary_completion(np.eye(2) / 2, 1.0)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-10
        assert np.allclose(u[:2, :2], np.eye(2) / 2)

    def test_scaled_block_readback(self):
        u = nc.unitary_completion(np.diag([1.0, 0.5]), 2.0)
        assert np.allclose(u[:2, :2], np.diag([0.5, 0.25]))
        assert nc.is_unitary(u)

    def test_hermitian_input_gives_hermitian_unitary(self):
        c = np.array([[0.3, 0.1], [0.1, -0.2]])
        u = nc.unitary_completion(c, 1.0)
        assert nc.is_hermitian(u)
        assert nc.is_unitary(u)

    def test_scale_below_norm_rejected(self):
        with pytest.raises(PreconditionError):
            nc.unitary_completion(np.eye(2), 0.5)


class TestLayoutAndState:
    def test_duplicate_names_rejected(self):
        with pytest.raises(LayoutError):
            nc.RegisterLayout((("a", 1), ("a", 2)))

    def test_index_convention_first_register_most_significant(self):
        lay = nc.RegisterLayout((("a", 1), ("b", 2)))
        assert lay.index({"a": 1}) == 4
        assert lay.index({"b": 3}) == 3

    def test_basis_state(self):
        lay = nc.RegisterLayout((("a", 1), ("b", 1)))
        s = nc.StateVector.from_registers(lay, {"a": 1})
        assert s.amps[lay.index({"a": 1})] == 1.0

    def test_norm_checked(self):
        lay = nc.RegisterLayout((("a", 1),))
        with pytest.raises(LayoutError):
            nc.StateVector(lay, np.array([1.0, 1.0]))
        nc.StateVector(lay, np.array([1.0, 1.0]), unnormalized=True)


class TestApplyOperator:
    def setup_method(self):
        self.lay = nc.RegisterLayout((("c", 1), ("t", 1)))

    def test_identity_leaves_state(self):
        s = nc.StateVector.from_registers(self.lay, {"t": 1})
        out = nc.apply_operator(s, np.eye(2), ["t"])
        assert np.allclose(out.amps, s.amps)

    def test_bit_flip(self):
        s = nc.StateVector.from_registers(self.lay)
        out = nc.apply_operator(s, nc.X, ["t"])
        assert np.allclose(out.amps[self.lay.index({"t": 1})], 1.0)

    def test_unsatisfied_control_is_noop(self):
        s = nc.StateVector.from_registers(self.lay, {"c": 1})
        out = nc.apply_operator(s, nc.X, ["t"], controls=[("c", 0)])
        assert np.allclose(out.amps, s.amps)

    def test_satisfied_control_acts(self):
        s = nc.StateVector.from_registers(self.lay, {"c": 1})
        out = nc.apply_operator(s, nc.X, ["t"], controls=[("c", 1)])
        assert np.allclose(out.amps[self.lay.index({"c": 1, "t": 1})], 1.0)

    def test_norm_preserved_random(self):
        rng = np.random.default_rng(5)
        lay = nc.RegisterLayout((("a", 2), ("b", 1), ("c", 2)))
        for _ in range(20):
            amps = rng.standard_normal(32) + 1j * rng.standard_normal(32)
            amps /= np.linalg.norm(amps)
            s = nc.StateVector(lay, amps)
            m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            q, _ = np.linalg.qr(m)
            out = nc.apply_operator(s, q, ["c"], controls=[("b", 1)])
            assert abs(out.norm() - 1.0) <= 1e-10

    def test_multi_register_operator_ordering(self):
        # CX with control register listed first: |c t> -> |c, t^c>
        lay = nc.RegisterLayout((("c", 1), ("t", 1)))
        cx = np.eye(4)[[0, 1, 3, 2]]
        s = nc.StateVector.from_registers(lay, {"c": 1, "t": 0})
        out = nc.apply_operator(s, cx, ["c", "t"])
        assert np.allclose(out.amps[lay.index({"c": 1, "t": 1})], 1.0)


class TestBranchResponse:
    def test_matches_assembled_operator(self):
        rng = np.random.default_rng(9)
        lay = nc.RegisterLayout((("p", 1), ("s", 2)))
        basis, _ = np.linalg.qr(rng.standard_normal((4, 4))
                                + 1j * rng.standard_normal((4, 4)))
        blocks = []
        for _ in range(4):
            m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            q, _ = np.linalg.qr(m)
            blocks.append(q)
        blocks = np.array(blocks)
        amps = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        amps /= np.linalg.norm(amps)
        s = nc.StateVector(lay, amps)
        fast = nc.apply_branch_response(s, "p", ["s"], basis, blocks)
        dense = nc.assemble_branch_operator(basis, blocks)
        ref = nc.apply_operator(s, dense, ["p", "s"])
        assert np.max(np.abs(fast.amps - ref.amps)) <= 1e-12
        assert abs(fast.norm() - 1.0) <= 1e-10


class TestAttachDetachProject:
    def test_attach_then_detach_roundtrip(self):
        lay = nc.RegisterLayout((("a", 1),))
        s = nc.StateVector.from_registers(lay, {"a": 1})
        s2 = nc.attach_register(s, "m", 1, nc.PLUS, position=0)
        assert s2.layout.names == ("m", "a")
        back, resid = nc.detach_register(s2, "m", nc.PLUS)
        assert resid <= 1e-12
        assert np.allclose(back.amps, s.amps)

    def test_detach_rejects_entangled(self):
        lay = nc.RegisterLayout((("a", 1), ("b", 1)))
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        s = nc.StateVector(lay, bell)
        with pytest.raises(NumericError):
            nc.detach_register(s, "a", 0)

    def test_projector_weight(self):
        lay = nc.RegisterLayout((("a", 1), ("b", 1)))
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        s = nc.StateVector(lay, bell)
        assert abs(nc.projector_weight(s, [("a", 0)]) - 0.5) <= 1e-12
        p = nc.project(s, [("a", 1)])
        assert abs(p.norm() - 1.0) <= 1e-12
        assert abs(p.amps[lay.index({"a": 1, "b": 1})] - 1.0) <= 1e-12
