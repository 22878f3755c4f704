import numpy as np
import pytest

from chromagt import ParameterStore, ShapeError, Tensor, grad_check
from chromagt.autodiff import (
    apply_mask,
    concat,
    gather_rows,
    load_checkpoint,
    mean_pool,
    save_checkpoint,
    softmax,
)


def check_op(build, shapes, eps=1e-5, tol=1e-6, seed=0):
    """Gradient-check a composite scalar built from fresh parameters."""
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    params = [
        store.add(f"p{i}", rng.normal(size=shape) + 0.5)
        for i, shape in enumerate(shapes)
    ]
    report = grad_check(lambda: build(*params), store, eps=eps)
    assert report["ok"]
    assert report["max_rel_err"] < tol, report
    return report


class TestPrimitiveGradients:
    def test_add(self):
        check_op(lambda a, b: (a + b).sum(), [(3, 4), (3, 4)])

    def test_add_broadcast(self):
        check_op(lambda a, b: ((a + b) ** 2).sum(), [(3, 4), (4,)])

    def test_sub_mul(self):
        check_op(lambda a, b: ((a - b) * a).sum(), [(2, 5), (2, 5)])

    def test_div(self):
        check_op(lambda a, b: (a / (b * b + 1.0)).sum(), [(4,), (4,)])

    def test_exp_log(self):
        check_op(lambda a: ((a * a + 0.5).log().exp()).sum(), [(6,)])

    def test_relu(self):
        check_op(lambda a: (a.relu() * a).sum(), [(10,)], seed=3)

    def test_abs(self):
        check_op(lambda a: a.abs().sum(), [(9,)], seed=4)

    def test_pow(self):
        check_op(lambda a: ((a * a + 1.0) ** 1.5).sum(), [(5,)])

    def test_matmul(self):
        check_op(lambda a, b: (a @ b).sum(), [(3, 4), (4, 2)])

    def test_batched_matmul(self):
        check_op(lambda a, b: ((a @ b) ** 2).sum(), [(5, 3, 4), (4, 2)])

    def test_batched_matmul_both(self):
        check_op(lambda a, b: (a @ b).sum(), [(5, 3, 4), (5, 4, 2)])

    def test_sum_axis(self):
        check_op(lambda a: (a.sum(axis=1) ** 2).sum(), [(3, 4)])

    def test_sum_keepdims(self):
        check_op(lambda a: ((a / a.sum(axis=1, keepdims=True)) ** 2).sum(), [(3, 4)])

    def test_mean(self):
        check_op(lambda a: (a.mean(axis=0) ** 2).sum(), [(6, 3)])

    def test_reshape_transpose(self):
        check_op(
            lambda a: (a.reshape(2, 6).transpose((1, 0)) ** 2).sum(), [(3, 4)]
        )

    def test_concat(self):
        check_op(lambda a, b: (concat([a, b], axis=-1) ** 2).sum(), [(3, 2), (3, 4)])

    def test_gather(self):
        idx = np.array([[0, 1], [2, 1]])
        check_op(lambda t: (gather_rows(t, idx) ** 2).sum(), [(4, 3)])

    def test_softmax(self):
        check_op(lambda a: (softmax(a, axis=-1) * a).sum(), [(4, 5)])

    def test_mean_pool(self):
        check_op(lambda a: (mean_pool(a, axis=0) ** 2).sum(), [(7, 3)])

    def test_mask(self):
        mask = np.array([1.0, 0.0, 2.0, 1.0])
        check_op(lambda a: apply_mask(a, mask).sum(), [(4,)])


class TestOpSemantics:
    def test_softmax_of_zeros_uniform(self):
        out = softmax(Tensor(np.zeros(5)), axis=-1)
        assert np.allclose(out.data, 0.2)

    def test_gather_identity_is_onehot(self):
        table = Tensor(np.eye(4))
        out = gather_rows(table, np.array([2, 0]))
        assert out.data.tolist() == [[0, 0, 1, 0], [1, 0, 0, 0]]

    def test_grad_of_sum_exp_at_zero(self):
        store = ParameterStore()
        x = store.add("x", np.zeros(2))
        x.exp().sum().backward()
        assert np.allclose(x.grad, [1.0, 1.0])

    def test_accumulation_is_additive(self):
        store = ParameterStore()
        x = store.add("x", np.array([1.0, -2.0]))
        (x * x).sum().backward()
        first = x.grad.copy()
        (x * x).sum().backward()
        assert np.array_equal(x.grad, 2 * first)

    def test_forward_bit_deterministic(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(8, 8)))
        b = Tensor(rng.normal(size=(8, 8)))
        out1 = softmax(a @ b, axis=-1).data.copy()
        out2 = softmax(a @ b, axis=-1).data.copy()
        assert np.array_equal(out1, out2)

    def test_shape_mismatch_names_op(self):
        with pytest.raises(ShapeError, match="matmul"):
            Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((4, 2)))
        with pytest.raises(ShapeError, match="add"):
            Tensor(np.zeros(3)) + Tensor(np.zeros(4))

    def test_backward_needs_scalar(self):
        t = Tensor(np.zeros(3), requires_grad=True) * 2.0
        with pytest.raises(ShapeError, match="scalar"):
            t.backward()

    def test_diamond_graph_gradient(self):
        # the same tensor feeding two branches must receive both contributions
        store = ParameterStore()
        x = store.add("x", np.array([3.0]))
        y = x * x + x * 2.0
        y.reshape(()).backward()
        assert np.allclose(x.grad, [8.0])


class TestGradCheck:
    def test_quadratic_tight(self):
        store = ParameterStore()
        store.add("theta", np.array([1.0, 2.0]))
        report = grad_check(lambda: (store["theta"] ** 2).sum(), store, eps=1e-4)
        assert report["max_rel_err"] < 1e-8
        store.zero_grad()
        (store["theta"] ** 2).sum().backward()
        assert np.allclose(store["theta"].grad, [2.0, 4.0])

    def test_constant_function(self):
        store = ParameterStore()
        store.add("theta", np.ones(3))
        report = grad_check(lambda: Tensor(1.0) * 1.0, store, eps=1e-4)
        assert report["max_rel_err"] == 0.0

    def test_subsamples_large_parameters(self):
        store = ParameterStore()
        store.add("big", np.random.default_rng(0).normal(size=(20, 20)))
        report = grad_check(lambda: (store["big"] ** 2).sum(), store, eps=1e-5)
        assert report["params"]["big"]["checked"] == 32

    def test_nonfinite_reported(self):
        store = ParameterStore()
        store.add("theta", np.array([0.0]))
        report = grad_check(lambda: store["theta"].log().sum(), store, eps=1e-6)
        assert not report["ok"]


class TestParameterStore:
    def test_duplicate_name_rejected(self):
        from chromagt import ConfigError

        store = ParameterStore()
        store.add("w", np.zeros(2))
        with pytest.raises(ConfigError):
            store.add("w", np.zeros(2))

    def test_state_roundtrip(self):
        store = ParameterStore()
        store.add("a", np.array([1.5, -2.25]))
        store.add("b", np.eye(2))
        state = store.state()
        store["a"].data[:] = 0
        store.load_state(state)
        assert store["a"].data.tolist() == [1.5, -2.25]

    def test_checkpoint_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        store = ParameterStore()
        store.add("w1", rng.normal(size=(3, 4)) * 1e-7)
        store.add("w2", rng.normal(size=(5,)) * 1e3)
        buffers = {"bn.mean": rng.normal(size=4)}
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, store, buffers=buffers, config={"width": 4})
        payload = load_checkpoint(path)
        for name, t in store.items():
            assert np.array_equal(payload["params"][name], t.data)
        assert np.array_equal(payload["buffers"]["bn.mean"], buffers["bn.mean"])
        assert payload["config"] == {"width": 4}

    def test_checkpoint_version_refused(self, tmp_path):
        import json

        from chromagt import VersionError

        path = tmp_path / "ckpt.json"
        path.write_text(json.dumps({"format_version": 0, "params": {}}))
        with pytest.raises(VersionError):
            load_checkpoint(path)
