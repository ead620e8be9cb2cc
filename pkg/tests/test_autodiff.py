import numpy as np
import pytest

from netkrige import autodiff as ad
from netkrige.errors import DimensionError, GraphCycleError, NonFiniteError

from conftest import central_diff, naive_matmul, rel_err


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(np.eye(2), [[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(out, [[1.0, 2.0], [3.0, 4.0]])

    def test_hand_product(self):
        assert np.array_equal(ad.matmul([[1.0, 2.0]], [[3.0], [4.0]]), [[11.0]])

    def test_matches_naive_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(-1, 1, (3, 4))
        b = rng.uniform(-1, 1, (4, 2))
        assert np.max(np.abs(ad.matmul(a, b) - naive_matmul(a, b))) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(-1, 1, (3, 4))
        b = rng.uniform(-1, 1, (4, 5))
        c = rng.uniform(-1, 1, (5, 2))
        left = ad.matmul(ad.matmul(a, b), c)
        right = ad.matmul(a, ad.matmul(b, c))
        assert np.max(np.abs(left - right)) <= 1e-10


class TestElementwise:
    def test_hadamard_mask(self):
        assert np.array_equal(ad.elementwise([[1.0, 2.0]], [[0.0, 1.0]], "hadamard"), [[0.0, 2.0]])

    def test_add_identity(self):
        a = np.arange(6.0).reshape(2, 3) + 1
        assert np.array_equal(ad.elementwise(a, np.zeros((2, 3)), "add"), a)

    def test_sub_self(self):
        a = np.arange(6.0).reshape(2, 3) + 1
        assert np.array_equal(ad.elementwise(a, a, "sub"), np.zeros((2, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.add(np.ones((2, 2)), np.ones((2, 3)))

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            ad.elementwise(np.ones((1, 1)), np.ones((1, 1)), "div")


class TestActivation:
    def test_relu(self):
        assert np.array_equal(ad.relu([[-1.0, 2.0]]), [[0.0, 2.0]])

    def test_sigmoid_at_zero(self):
        assert ad.sigmoid([[0.0]])[0, 0] == 0.5

    def test_tanh_at_zero(self):
        assert ad.tanh([[0.0]])[0, 0] == 0.0

    def test_sigmoid_extreme_values_stay_finite(self):
        out = ad.sigmoid([[-800.0, 800.0]])
        assert np.all(np.isfinite(out))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ad.activation(np.ones((1, 1)), "gelu")


class TestFrobenius:
    def test_hand_value(self):
        assert ad.frobenius_sq([[3.0, 4.0]])[0, 0] == 25.0

    def test_zeros(self):
        assert ad.frobenius_sq(np.zeros((3, 2)))[0, 0] == 0.0

    def test_gradient_is_2a(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(-1, 1, (3, 4))
        t = ad.Tensor(a)
        ad.backward(ad.frobenius_sq(t))
        fd = central_diff(lambda: float(np.sum(a * a)), a)
        assert rel_err(t.grad, fd) <= 1e-4
        assert np.allclose(t.grad, 2 * a)


class TestBackward:
    def test_frobenius_grad_hand(self):
        p = ad.Tensor([[1.0, 2.0]])
        ad.backward(ad.frobenius_sq(p))
        assert np.array_equal(p.grad, [[2.0, 4.0]])

    def test_matmul_chain_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(-1, 1, (3, 4))
        pv = rng.uniform(-1, 1, (4, 2))
        p = ad.Tensor(pv)
        ad.backward(ad.frobenius_sq(ad.matmul(a, p)))
        fd = central_diff(lambda: float(np.sum((a @ pv) ** 2)), pv)
        assert rel_err(p.grad, fd) <= 1e-4

    def test_disconnected_parameter_has_zero_gradient(self):
        p = ad.Tensor([[1.0, 2.0]])
        q = ad.Tensor([[5.0, 6.0]])
        ad.backward(ad.frobenius_sq(p))
        assert np.array_equal(q.grad, np.zeros((1, 2)))

    def test_grad_reads_zero_before_backward(self):
        t = ad.Tensor(np.ones((2, 2)))
        assert np.array_equal(t.grad, np.zeros((2, 2)))

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(DimensionError):
            ad.backward(ad.Tensor(np.ones((2, 2))))

    def test_repeated_operand_accumulates(self):
        av = np.array([[1.0, 2.0]])
        a = ad.Tensor(av)
        ad.backward(ad.frobenius_sq(ad.hadamard(a, a)))
        fd = central_diff(lambda: float(np.sum((av * av) ** 2)), av)
        assert rel_err(a.grad, fd) <= 1e-4

    def test_cycle_detected(self):
        t = ad.Tensor(np.ones((1, 1)))
        t._parents = (t,)
        with pytest.raises(GraphCycleError):
            ad.backward(t)


@pytest.mark.parametrize("seed", range(3))
def test_every_op_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    av = rng.uniform(-1, 1, (3, 4))
    bv = rng.uniform(-1, 1, (3, 4))
    mv = rng.uniform(-1, 1, (4, 2))
    cases = {
        "add": (lambda t: ad.frobenius_sq(ad.add(t, bv)), lambda: float(np.sum((av + bv) ** 2))),
        "sub": (lambda t: ad.frobenius_sq(ad.sub(t, bv)), lambda: float(np.sum((av - bv) ** 2))),
        "hadamard": (lambda t: ad.frobenius_sq(ad.hadamard(t, bv)), lambda: float(np.sum((av * bv) ** 2))),
        "matmul": (lambda t: ad.frobenius_sq(ad.matmul(t, mv)), lambda: float(np.sum((av @ mv) ** 2))),
        "relu": (lambda t: ad.frobenius_sq(ad.relu(t)), lambda: float(np.sum(np.maximum(av, 0) ** 2))),
        "sigmoid": (
            lambda t: ad.frobenius_sq(ad.sigmoid(t)),
            lambda: float(np.sum((1 / (1 + np.exp(-av))) ** 2)),
        ),
        "tanh": (lambda t: ad.frobenius_sq(ad.tanh(t)), lambda: float(np.sum(np.tanh(av) ** 2))),
    }
    for name, (build, value) in cases.items():
        t = ad.Tensor(av)
        ad.backward(build(t))
        fd = central_diff(value, av)
        assert rel_err(t.grad, fd) <= 1e-4, name


class TestNonFinite:
    def test_constructor_rejects_nan(self):
        with pytest.raises(NonFiniteError):
            ad.Tensor([[np.nan]])

    def test_overflowing_product_rejected(self):
        big = np.full((2, 2), 1e200)
        with pytest.raises(NonFiniteError):
            ad.matmul(big, big)

    def test_plain_path_checked_too(self):
        with pytest.raises(NonFiniteError):
            ad.hadamard(np.full((1, 1), 1e308), np.full((1, 1), 1e308))


def test_as_matrix_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        ad.as_matrix([1.0, 2.0])
    with pytest.raises(DimensionError):
        ad.as_matrix(np.zeros((0, 3)))
