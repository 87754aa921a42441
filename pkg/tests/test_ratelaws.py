import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mobnet import ratelaws
from mobnet._engine import _rate_at


def ev(text, a=(), b=(), constants=None, param_names=()):
    node = ratelaws.parse_expr(text, constants=constants, param_names=param_names)
    return ratelaws.eval_scalar(node, a, b)


class TestParse:
    def test_precedence(self):
        assert ev("1 + 2 * 3") == 7.0
        assert ev("(1 + 2) * 3") == 9.0
        assert ev("2 - 3 - 4") == -5.0
        assert ev("12 / max(1, 2) / max(1, 3)") == 2.0

    def test_unary_minus(self):
        assert ev("-3 + 5") == 2.0
        assert ev("2 * -3") == -6.0

    def test_literals(self):
        assert ev("1e2") == 100.0
        assert ev("2.5e-1") == 0.25
        assert ev(".5") == 0.5

    def test_variables(self):
        assert ev("a1 + a2", a=[1.5, 2.0]) == 3.5
        assert ev("b1 * a1", a=[3.0], b=[2.0]) == 6.0

    def test_constants_fold(self):
        node = ratelaws.parse_expr("c * a1", constants={"c": 2.857})
        assert node == ("*", ("num", 2.857), ("a", 0))

    def test_param_names(self):
        node = ratelaws.parse_expr("rate * a1", param_names=["rate"])
        assert node == ("*", ("b", 0), ("a", 0))

    def test_min_max_calls(self):
        assert ev("min(3, 2)") == 2.0
        assert ev("max(3, 2)") == 3.0
        assert ev("min(a1, 1) * 2", a=[0.25]) == 0.5

    @pytest.mark.parametrize("bad", [
        "", "   ", "a1 +", "(a1", "a1)", "min(a1)", "max(1, 2, 3)",
        "foo * 2", "1 @ 2", "a0", "b0", "2 3",
    ])
    def test_syntax_errors(self, bad):
        with pytest.raises(ratelaws.ExprError):
            ratelaws.parse_expr(bad)

    def test_non_string(self):
        with pytest.raises(ratelaws.ExprError):
            ratelaws.parse_expr(None)


class TestEval:
    def test_disconnect_rate_oracle(self):
        # c*min(a2, 1) at c=2.857, a2=0.75
        assert ev("c * min(a2, 1)", a=[0.0, 0.75],
                  constants={"c": 2.857}) == pytest.approx(2.14275, abs=1e-12)

    def test_guarded_division(self):
        assert ev("a1 / max(0.5, a2)", a=[3.0, 2.0]) == 1.5
        assert ev("a1 / max(0.5, a2)", a=[3.0, 0.0]) == 6.0

    def test_grid_matches_scalar(self):
        node = ratelaws.parse_expr("min(a1, 2) * b1 - a2 / max(1, a1)")
        a = [np.linspace(0, 4, 12).reshape(3, 4), np.full((3, 4), 1.5)]
        b = [np.full((3, 4), 0.5)]
        grid = ratelaws.eval_grid(node, a, b)
        for i in range(3):
            for j in range(4):
                want = ratelaws.eval_scalar(node, [a[0][i, j], a[1][i, j]],
                                            [b[0][i, j]])
                assert grid[i, j] == want


class TestValidation:
    def test_bounds(self):
        node = ratelaws.parse_expr("a3 + b2")
        errors = ratelaws.check_bounds(node, 2, 1)
        assert len(errors) == 2
        assert ratelaws.check_bounds(node, 3, 2) == []

    def test_division_guard(self):
        ok = ratelaws.parse_expr("a1 / max(1e-9, a2)")
        assert ratelaws.check_division_guard(ok) == []
        ok2 = ratelaws.parse_expr("a1 / max(a2, 0.5)")
        assert ratelaws.check_division_guard(ok2) == []
        for bad in ["a1 / a2", "a1 / max(0, a2)", "a1 / min(1, a2)",
                    "a1 / max(-1, a2)", "a1 / 2"]:
            node = ratelaws.parse_expr(bad)
            assert ratelaws.check_division_guard(node), bad

    def test_vanishes_when_zero(self):
        lam = {"lam": 0.25}
        good = ratelaws.parse_expr("lam * a1", constants=lam)
        assert ratelaws.vanishes_when_zero(good, 0, 2, [])
        # does not vanish in a2
        assert not ratelaws.vanishes_when_zero(good, 1, 2, [])
        both = ratelaws.parse_expr("min(a1, 2 * a2)")
        assert ratelaws.vanishes_when_zero(both, 0, 2, [])
        assert ratelaws.vanishes_when_zero(both, 1, 2, [])

    def test_vanishes_uses_param_probe(self):
        node = ratelaws.parse_expr("b1 * a2", param_names=["w"])
        assert ratelaws.vanishes_when_zero(node, 1, 2, [3.0])
        assert not ratelaws.vanishes_when_zero(node, 0, 2, [3.0])


class TestCompile:
    def test_program_shape(self):
        node = ratelaws.parse_expr("a1 * 2 + b1")
        ops, args, consts, depth = ratelaws.compile_program(node)
        assert ops.tolist() == [ratelaws.OP_A, ratelaws.OP_NUM, ratelaws.OP_MUL,
                                ratelaws.OP_B, ratelaws.OP_ADD]
        assert consts.tolist() == [2.0]
        assert depth == 2

    def test_interpreter_matches_tree(self):
        node = ratelaws.parse_expr("min(a1, 1) * 2.857 - a2 / max(0.5, b1)")
        ops, args, consts, depth = ratelaws.compile_program(node)
        dens = np.array([0.3, 1.7])
        bvals = np.array([0.25])
        stack = np.zeros(depth)
        got = _rate_at(ops, args, consts, 0, len(ops), dens, bvals, stack)
        want = ratelaws.eval_scalar(node, dens, bvals)
        assert got == want


def _exprs(n_states=3, n_params=2):
    nums = st.floats(-5, 5, allow_nan=False).map(lambda x: ("num", round(x, 3)))
    leaves = st.one_of(
        nums,
        st.integers(0, n_states - 1).map(lambda i: ("a", i)),
        st.integers(0, n_params - 1).map(lambda p: ("b", p)),
    )

    def extend(children):
        plain = st.tuples(st.sampled_from(["+", "-", "*", "min", "max"]),
                          children, children)
        div = st.builds(
            lambda l, eps, r: ("/", l, ("max", ("num", round(eps, 3)), r)),
            children, st.floats(0.5, 2.0, allow_nan=False), children)
        return st.one_of(plain, div)

    return st.recursive(leaves, extend, max_leaves=25)


_points = st.tuples(
    st.lists(st.floats(0, 10, allow_nan=False), min_size=3, max_size=3),
    st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=2),
)


@settings(max_examples=150, deadline=None)
@given(_exprs(), _points)
def test_compiled_program_bitwise_equals_tree(node, point):
    a, b = point
    ops, args, consts, depth = ratelaws.compile_program(node)
    stack = np.zeros(depth)
    got = _rate_at(ops, args, consts, 0, len(ops),
                   np.asarray(a), np.asarray(b), stack)
    want = ratelaws.eval_scalar(node, a, b)
    assert got == want or (np.isnan(got) and np.isnan(want))


@settings(max_examples=150, deadline=None)
@given(_exprs(), _points)
def test_format_round_trips_evaluation(node, point):
    a, b = point
    text = ratelaws.format_expr(node)
    reparsed = ratelaws.parse_expr(text)
    assert ratelaws.check_division_guard(reparsed) == []
    got = ratelaws.eval_scalar(reparsed, a, b)
    want = ratelaws.eval_scalar(node, a, b)
    assert got == want or (np.isnan(got) and np.isnan(want))
