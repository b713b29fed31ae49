import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aenet.numerics import (
    AentFormatError,
    SplitMix64,
    Tensor,
    backward,
    decode_aent,
    encode_aent,
    gradcheck,
    make_op,
    read_aent,
    write_aent,
)
from aenet.diagnostics import OP_CASES, op_gradcheck
from aenet.numerics import tensor as ops


def triple_loop(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


# ------------------------------------------------------------------- matmul


def test_matmul_identity():
    out = ops.matmul(Tensor(np.eye(2)), Tensor([[3.0, 4.0], [5.0, 6.0]]))
    np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])


def test_matmul_selector():
    out = ops.matmul(Tensor([[1.0, 0.0]]), Tensor([[0.0], [7.0]]))
    np.testing.assert_array_equal(out.data, [[0.0]])


def test_matmul_random_vs_triple_loop(nprng):
    a, b = nprng.normal(size=(3, 4)), nprng.normal(size=(4, 2))
    np.testing.assert_allclose(ops.matmul(Tensor(a), Tensor(b)).data, triple_loop(a, b), rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_matmul_matches_oracle_any_extent(m, k, n, seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(m, k)), r.normal(size=(k, n))
    np.testing.assert_allclose(ops.matmul(Tensor(a), Tensor(b)).data, triple_loop(a, b), rtol=0, atol=1e-12)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


# ------------------------------------------------------------------ softmax


def test_softmax_examples():
    np.testing.assert_allclose(ops.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(
        ops.softmax(Tensor([math.log(1), math.log(2), math.log(3)])).data, [1 / 6, 2 / 6, 3 / 6], atol=1e-15
    )
    np.testing.assert_allclose(ops.softmax(Tensor([1000.0, 1000.0])).data, [0.5, 0.5], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=8),
    st.floats(-100, 100),
)
def test_softmax_normalised_and_shift_invariant(values, c):
    v = np.array(values)
    y = ops.softmax(Tensor(v)).data
    assert np.all(y >= 0)
    assert abs(y.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(ops.softmax(Tensor(v + c)).data, y, atol=1e-12)


# ---------------------------------------------------------------------- gmp


def test_gmp_rows_examples():
    np.testing.assert_array_equal(ops.gmp_rows(Tensor([[1.0, 5.0], [3.0, 2.0]])).data, [[3.0, 5.0]])
    row = np.array([[0.3, -2.0, 4.0]])
    np.testing.assert_array_equal(ops.gmp_rows(Tensor(row)).data, row)


def test_gmp_rows_tie_routes_gradient_to_first_row():
    m = Tensor([[-1.0, -1.0], [-1.0, -1.0]], requires_grad=True)
    out = ops.gmp_rows(m)
    np.testing.assert_array_equal(out.data, [[-1.0, -1.0]])
    backward(ops.sum(out))
    np.testing.assert_array_equal(m.grad, [[1.0, 1.0], [0.0, 0.0]])


def test_gmp_rows_upper_bound_and_permutation_invariant(nprng):
    for _ in range(50):
        m = nprng.normal(size=(nprng.integers(1, 7), 4))
        out = ops.gmp_rows(Tensor(m)).data
        assert np.all(out >= m)
        perm = nprng.permutation(m.shape[0])
        np.testing.assert_array_equal(ops.gmp_rows(Tensor(m[perm])).data, out)


# ------------------------------------------------------------------- cosine


def test_cosine_examples(nprng):
    v = nprng.normal(size=5)
    assert ops.cosine(Tensor(v), Tensor(v)).item() == pytest.approx(1.0, abs=1e-15)
    assert ops.cosine(Tensor([1.0, 0.0]), Tensor([0.0, 1.0])).item() == 0.0
    assert ops.cosine(Tensor(v), Tensor(-v)).item() == pytest.approx(-1.0, abs=1e-15)


def test_cosine_zero_norm_error():
    with pytest.raises(ZeroDivisionError):
        ops.cosine(Tensor([0.0, 0.0]), Tensor([1.0, 2.0]))


def test_nonfinite_results_are_rejected():
    with pytest.raises(FloatingPointError):
        ops.exp(Tensor([1000.0]))
    with pytest.raises(FloatingPointError):
        Tensor([np.nan])


# ----------------------------------------------------------------- backward


def test_backward_linear_case():
    w = Tensor([1.0, -2.0, 3.0], requires_grad=True)
    backward(ops.sum(w))
    np.testing.assert_array_equal(w.grad, [1.0, 1.0, 1.0])


def test_backward_quadratic_case():
    w = Tensor([1.5, -2.0, 0.25], requires_grad=True)
    backward(ops.scale(ops.sum(ops.square(w)), 0.5))
    np.testing.assert_array_equal(w.grad, w.data)


def test_backward_rejects_non_scalar():
    w = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(ops.scale(w, 2.0))


def test_backward_accumulates_until_zeroed():
    w = Tensor([2.0], requires_grad=True)
    backward(ops.sum(ops.scale(w, 3.0)))
    backward(ops.sum(ops.scale(w, 3.0)))
    np.testing.assert_array_equal(w.grad, [6.0])
    w.zero_grad()
    np.testing.assert_array_equal(w.grad, [0.0])


def test_shared_node_accumulates_both_consumers(nprng):
    x = Tensor(nprng.normal(size=(3, 3)), requires_grad=True)

    def f():
        h = ops.gelu(x)  # feeds both branches below
        return ops.sum(ops.add(ops.matmul(h, h), ops.mul(h, ops.exp(h))))

    report = gradcheck(f, [x])
    assert report.max_error < 1e-4


def test_diamond_graph_visits_node_once():
    x = Tensor([0.5], requires_grad=True)
    calls = []

    def counted(t):
        def _bw(g):
            calls.append(1)
            return (g,)

        return make_op(t.data.copy(), (t,), _bw, "counted")

    h = counted(x)
    backward(ops.sum(ops.add(h, h)))
    assert len(calls) == 1
    np.testing.assert_array_equal(x.grad, [2.0])


# ---------------------------------------------------------------- gradcheck


def test_gradcheck_sum_of_squares(nprng):
    w = Tensor(nprng.normal(size=(4, 3)), requires_grad=True)
    report = gradcheck(lambda: ops.sum(ops.square(w)), [w])
    assert report.max_error < 1e-9
    assert report.passed


def test_gradcheck_flags_corrupted_backward(nprng):
    w = Tensor(nprng.normal(size=5), requires_grad=True)

    def bad_square(t):
        return make_op(t.data**2, (t,), lambda g: (3.0 * t.data * g,), "bad_square")

    report = gradcheck(lambda: ops.sum(bad_square(w)), [w], names=["w"])
    assert report.max_error > 1e-2
    assert report.flagged == ["w"]


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_op_gradients_match_finite_differences(name):
    worst = op_gradcheck(name, trials=100)
    assert worst < 1e-4, f"{name}: max relative error {worst:.3e}"


# ---------------------------------------------------------------------- rng


def test_splitmix64_reference_values():
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_rng_vectorised_matches_scalar():
    a, b = SplitMix64(99), SplitMix64(99)
    vec = a.next_u64_array(257)
    assert vec.tolist() == [b.next_u64() for _ in range(257)]
    assert a.state == b.state
    assert a.next_u64() == b.next_u64()


def test_rng_uniform_and_normal_are_deterministic():
    a, b = SplitMix64(5), SplitMix64(5)
    np.testing.assert_array_equal(a.uniform(100), b.uniform(100))
    np.testing.assert_array_equal(a.normal((10, 3)), b.normal((10, 3)))
    u = SplitMix64(8).uniform(20000)
    assert u.min() >= 0 and u.max() < 1
    z = SplitMix64(8).normal(20000)
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03


def test_rng_scalar_uniform_matches_array():
    a, b = SplitMix64(17), SplitMix64(17)
    assert [a.uniform() for _ in range(5)] == b.uniform(5).tolist()


def test_substreams_are_independent_and_stable():
    root = SplitMix64(42)
    s1, s2 = root.substream("data"), root.substream("init")
    assert s1.next_u64() != s2.next_u64()
    assert SplitMix64(42).substream("data").next_u64() == SplitMix64(42).substream("data").next_u64()


def test_permutation_is_a_permutation():
    p = SplitMix64(3).permutation(50)
    assert sorted(p) == list(range(50))
    assert p != list(range(50))


# --------------------------------------------------------------------- aent


def test_aent_round_trip_at_f32(tmp_path, nprng):
    x = nprng.normal(size=(3, 4, 2))
    write_aent(tmp_path / "x.aent", x)
    back = read_aent(tmp_path / "x.aent")
    assert back.shape == x.shape
    np.testing.assert_array_equal(back, x.astype(np.float32).astype(np.float64))


def test_aent_header_layout():
    blob = encode_aent(np.zeros((2, 3)))
    assert blob[:4] == b"AENT"
    assert int.from_bytes(blob[4:6], "little") == 1
    assert int.from_bytes(blob[6:8], "little") == 2
    assert int.from_bytes(blob[8:16], "little") == 2
    assert int.from_bytes(blob[16:24], "little") == 3
    assert len(blob) == 24 + 6 * 4


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda b: b"XENT" + b[4:], "magic"),
        (lambda b: b[:4] + (2).to_bytes(2, "little") + b[6:], "version"),
        (lambda b: b[:-4], "payload"),
        (lambda b: b + b"\0\0\0\0", "payload"),
    ],
)
def test_aent_reader_validates(mutate, message):
    blob = encode_aent(np.ones((2, 2)))
    with pytest.raises(AentFormatError, match=message):
        decode_aent(mutate(blob))
