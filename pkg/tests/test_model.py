import numpy as np
import pytest

from netkrige import autodiff as ad
from netkrige.errors import DimensionError, ParameterError
from netkrige.graph import TransitionPair, chebyshev, transitions
from netkrige.model import (
    ModelParams,
    dgcn_layer,
    forward,
    init_params,
    load_params,
    save_params,
    wrap_weights,
)
from netkrige.trainer import loss as loss_fn

from conftest import central_diff, rel_err


def identity_transitions(n):
    return TransitionPair(forward=np.eye(n), backward=np.eye(n))


def zeroed(params):
    for _, m in params.named_weights():
        m[:] = 0.0
    return params


class TestInit:
    def test_deterministic(self):
        a = init_params(2, 6, 4, seed=5)
        b = init_params(2, 6, 4, seed=5)
        for (na, ma), (nb, mb) in zip(a.named_weights(), b.named_weights()):
            assert na == nb
            assert np.array_equal(ma, mb)

    def test_layer_shapes(self):
        p = init_params(3, 6, 4, seed=0)
        shapes = [(6, 4), (4, 4), (4, 6)]
        for l, bank in enumerate(p.layers):
            assert len(bank.forward) == len(bank.backward) == 3
            for m in bank.forward + bank.backward:
                assert m.shape == shapes[l]

    def test_fan_bound(self):
        p = init_params(2, 8, 5, seed=1)
        for _, m in p.named_weights():
            limit = np.sqrt(6.0 / (m.shape[0] + m.shape[1]))
            assert np.max(np.abs(m)) <= limit

    def test_bad_dims(self):
        with pytest.raises(ParameterError):
            init_params(0, 4, 3)

    def test_bad_activation(self):
        with pytest.raises(ParameterError):
            init_params(1, 4, 3, activation="softmax")


class TestDgcnLayer:
    def test_identity_everything_doubles(self):
        h = np.random.default_rng(0).uniform(-1, 1, (3, 3))
        out = dgcn_layer(h, [np.eye(3)], [np.eye(3)], [np.eye(3)], [np.eye(3)])
        assert np.max(np.abs(out - 2 * h)) <= 1e-12

    def test_zero_weights_zero_output(self):
        h = np.ones((4, 5))
        z = [np.zeros((5, 5))] * 2
        cheb = chebyshev(np.full((4, 4), 0.25), 2)
        out = dgcn_layer(h, cheb, cheb, z, z)
        assert np.array_equal(out, np.zeros((4, 5)))

    def test_isolated_single_node_zero(self):
        tp = transitions(np.array([[0.0]]))
        out = dgcn_layer(np.ones((1, 4)), [tp.forward], [tp.backward], [np.eye(4)], [np.eye(4)])
        assert np.array_equal(out, np.zeros((1, 4)))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            dgcn_layer(np.ones((2, 2)), [np.eye(2)], [np.eye(2)], [np.eye(2)], [])


class TestForward:
    def test_output_shape_matches_input(self):
        p = init_params(2, 6, 5, seed=2)
        tp = transitions(np.full((4, 4), 0.3) + np.eye(4))
        x = np.random.default_rng(1).uniform(-1, 1, (4, 6))
        res = forward(p, x, tp)
        assert res.reconstruction.shape == (4, 6)
        assert res.hidden1.shape == (4, 5)
        assert res.hidden2.shape == (4, 5)

    def test_zero_params_zero_output(self):
        p = zeroed(init_params(2, 6, 5, seed=3))
        tp = transitions(np.full((4, 4), 0.3) + np.eye(4))
        res = forward(p, np.zeros((4, 6)), tp)
        assert np.array_equal(res.reconstruction, np.zeros((4, 6)))

    def test_window_mismatch(self):
        p = init_params(2, 6, 5, seed=4)
        tp = identity_transitions(4)
        with pytest.raises(DimensionError):
            forward(p, np.zeros((4, 7)), tp)

    def test_node_count_mismatch(self):
        p = init_params(2, 6, 5, seed=4)
        with pytest.raises(DimensionError):
            forward(p, np.zeros((4, 6)), identity_transitions(3))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        p = init_params(2, 5, 4, seed=6)
        w = rng.uniform(0.05, 1.0, (6, 6))
        np.fill_diagonal(w, 1.0)
        x = rng.uniform(-1, 1, (6, 5))
        base = forward(p, x, transitions(w)).reconstruction
        for _ in range(3):
            perm = rng.permutation(6)
            pm = np.eye(6)[perm]
            out = forward(p, pm @ x, transitions(pm @ w @ pm.T)).reconstruction
            assert np.max(np.abs(out - pm @ base)) <= 1e-9

    def test_output_linear_in_final_layer(self):
        rng = np.random.default_rng(7)
        p = init_params(2, 5, 4, seed=8)
        w = rng.uniform(0.05, 1.0, (5, 5))
        x = rng.uniform(-1, 1, (5, 5))
        tp = transitions(w)
        base = forward(p, x, tp).reconstruction
        c = 2.75
        scaled = p.copy()
        for m in scaled.layers[2].forward + scaled.layers[2].backward:
            m *= c
        out = forward(scaled, x, tp).reconstruction
        assert np.max(np.abs(out - c * base)) <= 1e-10

    def test_inductive_shape_freedom(self):
        p = init_params(2, 6, 5, seed=9)
        rng = np.random.default_rng(10)
        for n in (3, 7, 12):
            w = rng.uniform(0.1, 1.0, (n, n))
            out = forward(p, rng.uniform(-1, 1, (n, 6)), transitions(w)).reconstruction
            assert out.shape == (n, 6)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(11)
        p = init_params(1, 3, 2, seed=12)
        w = rng.uniform(0.1, 1.0, (4, 4))
        tp = transitions(w)
        x = rng.uniform(-1, 1, (4, 3))
        mask = np.ones((4, 3))
        mask[2:] = 0.0
        valid = np.ones((4, 3))
        banks, flat = wrap_weights(p)
        ad.backward(loss_fn(forward(p, x * mask, tp, weights=banks).reconstruction, x, valid))
        for t, (_, arr) in zip(flat, p.named_weights()):
            fd = central_diff(
                lambda: loss_fn(forward(p, x * mask, tp).reconstruction, x, valid), arr
            )
            assert rel_err(t.grad, fd) <= 1e-3


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        p = init_params(2, 6, 4, seed=13, activation="tanh")
        path = tmp_path / "weights.nkm"
        save_params(p, path)
        q = load_params(path)
        assert (q.order, q.window, q.hidden, q.activation) == (2, 6, 4, "tanh")
        for (na, ma), (nb, mb) in zip(p.named_weights(), q.named_weights()):
            assert na == nb
            assert np.array_equal(ma, mb)

    def test_save_load_save_byte_identical(self, tmp_path):
        p = init_params(2, 5, 3, seed=14)
        a, b = tmp_path / "a.nkm", tmp_path / "b.nkm"
        save_params(p, a)
        save_params(load_params(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_load_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.nkm"
        path.write_bytes(b"definitely not a container")
        with pytest.raises(Exception):
            load_params(path)


def test_params_validation():
    p = init_params(2, 4, 3, seed=15)
    with pytest.raises(ParameterError):
        ModelParams(2, 4, 3, "relu", p.layers[:2])
    bad = p.copy()
    bad.layers[0].forward[0] = np.zeros((3, 3))
    with pytest.raises(DimensionError):
        ModelParams(2, 4, 3, "relu", bad.layers)
