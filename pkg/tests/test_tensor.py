import numpy as np
import pytest

from crosskws import tensor as T


def naive_matmul(a, b):
    p, q = a.shape
    q2, r = b.shape
    out = np.zeros((p, r))
    for i in range(p):
        for j in range(r):
            for k in range(q):
                out[i, j] += a[i, k] * b[k, j]
    return out


class TestMatmul:
    def test_identity(self):
        a = T.Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = T.matmul(a, T.Tensor(np.eye(2)))
        assert np.array_equal(out.data, a.data)

    def test_small_product(self):
        out = T.matmul(T.Tensor([[1.0, 2.0]]), T.Tensor([[3.0], [4.0]]))
        assert out.data.tolist() == [[11.0]]

    def test_zero_row(self):
        out = T.matmul(T.Tensor([[0.0, 0.0]]), T.Tensor(np.ones((2, 3))))
        assert np.array_equal(out.data, np.zeros((1, 3)))

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a = rng.normal(size=(5, 5))
            b = rng.normal(size=(5, 5))
            got = T.matmul(T.Tensor(a), T.Tensor(b)).data
            want = naive_matmul(a, b)
            denom = np.maximum(1.0, np.abs(want))
            assert np.max(np.abs(got - want) / denom) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(T.ShapeError):
            T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((2, 3))))


class TestConv1d:
    def test_windowed_sum_oracle(self):
        # T=4 ones, k=5 ones, stride 2, zero "same" padding -> [3, 4]
        x = T.Tensor(np.ones((4, 1)))
        k = T.Tensor(np.ones((1, 1, 5)))
        out = T.conv1d(x, k, stride=2)
        assert out.data.ravel().tolist() == [3.0, 4.0]

    def test_zero_kernel(self):
        rng = np.random.default_rng(1)
        x = T.Tensor(rng.normal(size=(7, 3)))
        k = T.Tensor(np.zeros((4, 3, 5)))
        assert np.array_equal(T.conv1d(x, k, stride=1).data, np.zeros((7, 4)))

    def test_impulse_kernel_is_identity(self):
        rng = np.random.default_rng(2)
        x = T.Tensor(rng.normal(size=(6, 1)))
        k = np.zeros((1, 1, 5))
        k[0, 0, 2] = 1.0
        out = T.conv1d(x, T.Tensor(k), stride=1)
        assert np.allclose(out.data, x.data)

    def test_output_length_is_ceil(self):
        k = T.Tensor(np.ones((1, 1, 3)))
        for t in range(1, 20):
            x = T.Tensor(np.ones((t, 1)))
            for stride in (1, 2, 3):
                got = T.conv1d(x, k, stride=stride).data.shape[0]
                assert got == -(-t // stride)

    def test_empty_input(self):
        with pytest.raises(T.EmptyInputError):
            T.conv1d(T.Tensor(np.zeros((0, 1))), T.Tensor(np.ones((1, 1, 3))), 1)

    def test_against_direct_sum(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(9, 2))
        w = rng.normal(size=(3, 2, 5))
        out = T.conv1d(T.Tensor(x), T.Tensor(w), stride=2).data
        pad = 2
        xp = np.zeros((9 + 2 * pad, 2))
        xp[pad:pad + 9] = x
        for i in range(out.shape[0]):
            for o in range(3):
                want = sum(xp[i * 2 + j, c] * w[o, c, j]
                           for c in range(2) for j in range(5))
                assert out[i, o] == pytest.approx(want, abs=1e-12)


class TestGru:
    def test_zero_params_fixed_point(self):
        x = T.Tensor(np.random.default_rng(0).normal(size=(5, 3)))
        h = T.gru_forward(x, T.Tensor(np.zeros((3, 12))),
                          T.Tensor(np.zeros((4, 12))), T.Tensor(np.zeros(12)))
        assert np.array_equal(h.data, np.zeros((5, 4)))

    def test_output_shape(self):
        rng = np.random.default_rng(1)
        x = T.Tensor(rng.normal(size=(3, 2)))
        h = T.gru_forward(x, T.Tensor(rng.normal(size=(2, 12))),
                          T.Tensor(rng.normal(size=(4, 12))),
                          T.Tensor(rng.normal(size=12)))
        assert h.data.shape == (3, 4)

    def test_scalar_step_oracle(self):
        # H=1, C=1: hand-run the recurrence for one step from h0=0.
        wz, wr, wc = 0.3, -0.7, 1.1
        uz, ur, uc = 0.5, 0.2, -0.4
        bz, br, bc = 0.1, -0.2, 0.05
        x0 = 0.8

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        z = sig(x0 * wz + 0.0 * uz + bz)
        r = sig(x0 * wr + 0.0 * ur + br)
        c = np.tanh(x0 * wc + r * (0.0 * uc) + bc)
        want = (1 - z) * 0.0 + z * c

        h = T.gru_forward(T.Tensor([[x0]]),
                          T.Tensor([[wz, wr, wc]]),
                          T.Tensor([[uz, ur, uc]]),
                          T.Tensor([bz, br, bc]))
        assert h.data[0, 0] == pytest.approx(want, abs=1e-14)

    def test_two_step_scalar_oracle(self):
        wz, wr, wc = 0.3, -0.7, 1.1
        uz, ur, uc = 0.5, 0.2, -0.4
        bz, br, bc = 0.1, -0.2, 0.05
        xs = [0.8, -0.3]

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        hprev = 0.0
        states = []
        for x0 in xs:
            z = sig(x0 * wz + hprev * uz + bz)
            r = sig(x0 * wr + hprev * ur + br)
            c = np.tanh(x0 * wc + r * (hprev * uc) + bc)
            hprev = (1 - z) * hprev + z * c
            states.append(hprev)

        h = T.gru_forward(T.Tensor([[x] for x in xs]),
                          T.Tensor([[wz, wr, wc]]),
                          T.Tensor([[uz, ur, uc]]),
                          T.Tensor([bz, br, bc]))
        assert np.allclose(h.data.ravel(), states, atol=1e-14)

    def test_empty_input(self):
        with pytest.raises(T.EmptyInputError):
            T.gru_forward(T.Tensor(np.zeros((0, 2))), T.Tensor(np.zeros((2, 6))),
                          T.Tensor(np.zeros((2, 6))), T.Tensor(np.zeros(6)))


class TestSoftmaxRows:
    def test_uniform_on_zero_row(self):
        out = T.softmax_rows(T.Tensor(np.zeros((1, 3))))
        assert np.allclose(out.data, 1.0 / 3.0, atol=1e-15)

    def test_exp_ratio(self):
        out = T.softmax_rows(T.Tensor([[0.0, np.log(3.0)]]))
        assert out.data[0] == pytest.approx([0.25, 0.75], abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        row = rng.normal(size=(2, 5))
        a = T.softmax_rows(T.Tensor(row)).data
        b = T.softmax_rows(T.Tensor(row + 17.3)).data
        assert np.allclose(a, b, atol=1e-12)

    def test_rows_sum_to_one_extreme_logits(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = rng.uniform(-1e3, 1e3, size=(4, 6))
            out = T.softmax_rows(T.Tensor(m)).data
            assert np.all(out >= 0)
            assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-12


class TestBackward:
    def test_square_gradient(self):
        x = T.Tensor(3.0)
        with T.Tape() as tape:
            loss = T.mul(x, x)
        T.backward(loss, tape)
        assert x.grad == pytest.approx(6.0)

    def test_linear_sum(self):
        x = T.Tensor(np.arange(6.0).reshape(2, 3))
        with T.Tape() as tape:
            loss = T.sum_all(x)
        T.backward(loss, tape)
        assert np.array_equal(x.grad, np.ones((2, 3)))

    def test_unused_parameter_gets_no_gradient(self):
        x = T.Tensor(2.0)
        unused = T.Tensor(5.0)
        with T.Tape() as tape:
            loss = T.mul(x, x)
        T.backward(loss, tape)
        assert unused.grad is None

    def test_non_scalar_loss_rejected(self):
        x = T.Tensor(np.ones((2, 2)))
        with T.Tape() as tape:
            y = T.scale(x, 2.0)
        with pytest.raises(T.ShapeError):
            T.backward(y, tape)

    def test_deterministic_gradients(self):
        rng = np.random.default_rng(6)
        a = T.Tensor(rng.normal(size=(4, 4)))
        b = T.Tensor(rng.normal(size=(4, 4)))

        def run():
            a.zero_grad(); b.zero_grad()
            with T.Tape() as tape:
                loss = T.mean_all(T.softmax_rows(T.matmul(a, b)))
            T.backward(loss, tape)
            return a.grad.copy(), b.grad.copy()

        ga1, gb1 = run()
        ga2, gb2 = run()
        assert np.array_equal(ga1, ga2)
        assert np.array_equal(gb1, gb2)


class TestFiniteDiffCheck:
    def test_chain_passes(self):
        rng = np.random.default_rng(7)
        a = T.Tensor(rng.normal(size=(3, 4)))
        b = T.Tensor(rng.normal(size=(4, 2)))
        tgt = T.Tensor(rng.normal(size=(3, 2)))

        def f():
            return T.mse(T.softmax_rows(T.matmul(a, b)), tgt)

        assert T.finite_diff_check(f, [a, b]) <= 1e-4

    def test_detects_corrupted_gradient(self):
        # sum is linear, so pretending the function is 2*sum while the tape
        # records sum makes every analytic gradient wrong by 1.
        x = T.Tensor(np.ones(3))
        state = {"scale": 1.0}

        def f():
            return T.scale(T.sum_all(x), state["scale"])

        state["scale"] = 1.0
        with T.Tape() as tape:
            loss = f()
        T.backward(loss, tape)

        def corrupted():
            return T.scale(T.sum_all(x), 2.0)

        assert T.finite_diff_check(corrupted, [x]) <= 1e-4  # consistent fn is fine

        # now corrupt: analytic path sees scale 1, numeric path scale 2
        calls = {"n": 0}

        def inconsistent():
            calls["n"] += 1
            s = 1.0 if calls["n"] == 1 else 2.0
            return T.scale(T.sum_all(x), s)

        assert T.finite_diff_check(inconsistent, [x]) > 1e-2

    def test_constant_function(self):
        x = T.Tensor(np.ones(2))
        c = T.Tensor(4.0)

        def f():
            return T.mul(c, c)

        assert T.finite_diff_check(f, [x]) == 0.0

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            T.finite_diff_check(lambda: T.Tensor(0.0), [], eps=0.0)


class TestOpGradients:
    """Per-op finite-difference checks on small random tensors, 10 seeds."""

    @pytest.mark.parametrize("seed", range(10))
    def test_all_primitives(self, seed):
        rng = np.random.default_rng(100 + seed)
        dims = rng.integers(1, 7, size=3)
        p, q, r = int(dims[0]), int(dims[1]), int(dims[2])
        a = T.Tensor(rng.normal(size=(p, q)))
        b = T.Tensor(rng.normal(size=(q, r)))
        c = T.Tensor(rng.normal(size=(p, q)))
        v = T.Tensor(rng.normal(size=q))
        pos = T.Tensor(rng.uniform(0.1, 0.9))

        cases = {
            "matmul": (lambda: T.mean_all(T.matmul(a, b)), [a, b]),
            "transpose": (lambda: T.mean_all(T.transpose(a)), [a]),
            "add": (lambda: T.mean_all(T.add(a, c)), [a, c]),
            "sub": (lambda: T.mean_all(T.sub(a, c)), [a, c]),
            "mul": (lambda: T.mean_all(T.mul(a, c)), [a, c]),
            "add_rowvec": (lambda: T.mean_all(T.add_rowvec(a, v)), [a, v]),
            "scale": (lambda: T.mean_all(T.scale(a, -1.7)), [a]),
            "rsub_const": (lambda: T.mean_all(T.rsub_const(2.0, a)), [a]),
            "relu": (lambda: T.mean_all(T.relu(a)), [a]),
            "sigmoid": (lambda: T.mean_all(T.sigmoid(a)), [a]),
            "tanh": (lambda: T.mean_all(T.tanh(a)), [a]),
            "softmax": (lambda: T.mean_all(T.softmax_rows(a)), [a]),
            "take_row": (lambda: T.mean_all(T.take_row(a, -1)), [a]),
            "log": (lambda: T.log(pos), [pos]),
            "pow": (lambda: T.pow_const(pos, 2.5), [pos]),
        }
        for name, (f, params) in cases.items():
            err = T.finite_diff_check(f, params)
            assert err <= 1e-4, f"{name} gradient error {err}"

    @pytest.mark.parametrize("seed", range(10))
    def test_conv_and_gru(self, seed):
        rng = np.random.default_rng(200 + seed)
        t_len = int(rng.integers(1, 7))
        c_in = int(rng.integers(1, 4))
        c_out = int(rng.integers(1, 4))
        h = int(rng.integers(1, 4))
        x = T.Tensor(rng.normal(size=(t_len, c_in)))
        k = T.Tensor(rng.normal(size=(c_out, c_in, 3)))
        stride = int(rng.integers(1, 3))

        err = T.finite_diff_check(
            lambda: T.mean_all(T.conv1d(x, k, stride=stride)), [x, k])
        assert err <= 1e-4, f"conv1d gradient error {err}"

        w = T.Tensor(rng.normal(size=(c_in, 3 * h)) * 0.7)
        u = T.Tensor(rng.normal(size=(h, 3 * h)) * 0.7)
        bias = T.Tensor(rng.normal(size=3 * h) * 0.5)
        h0 = T.Tensor(rng.normal(size=h) * 0.5)

        err = T.finite_diff_check(
            lambda: T.mean_all(T.gru_forward(x, w, u, bias)), [x, w, u, bias])
        assert err <= 1e-4, f"gru gradient error {err}"

        err = T.finite_diff_check(
            lambda: T.mean_all(T.gru_forward(x, w, u, bias, h0)),
            [x, w, u, bias, h0])
        assert err <= 1e-4, f"gru h0 gradient error {err}"


class TestTensorInvariants:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            T.Tensor([np.nan])
        with pytest.raises(ValueError):
            T.Tensor([np.inf])

    def test_grad_matches_shape_after_backward(self):
        x = T.Tensor(np.ones((2, 3)))
        with T.Tape() as tape:
            loss = T.mean_all(T.mul(x, x))
        T.backward(loss, tape)
        assert x.grad.shape == x.data.shape

    def test_independent_tapes_do_not_interfere(self):
        x = T.Tensor(2.0)
        with T.Tape() as outer:
            _ = T.mul(x, x)
            with T.Tape() as inner:
                y = T.scale(x, 3.0)
        assert len(inner) == 1
        assert len(outer) == 1
        assert y.data == pytest.approx(6.0)
