import numpy as np
import pytest

from _util import random_theta
from symae.activations import HypAct, Identity, LeakyReLU
from symae.architecture import Skeleton, loss_on_batch
from symae.autodiff import (
    Var,
    apply_activation,
    backward,
    concat_cols,
    concat_rows,
    diag,
    grad_check,
    gradient,
    reciprocal,
    sqrt,
    square,
    sum_sq,
    value_of,
)
from symae.linalg import pi_orth


def loss_program(class_tag, act, theta):
    def program(leaves, batch):
        return loss_on_batch(class_tag, act, theta.with_leaves(leaves), batch)

    return program


class TestPrimitives:
    def test_sum_of_squares_gradient_is_2x(self):
        x = np.random.default_rng(0).standard_normal((4, 3))
        v = Var(x)
        out = v.sum_sq()
        backward(out)
        np.testing.assert_allclose(v.grad, 2 * x)

    def test_matmul_shape_mismatch_fails_at_construction(self):
        with pytest.raises(ValueError, match=r"matmul shape mismatch.*2, 3.*4, 5"):
            Var(np.ones((2, 3))) @ Var(np.ones((4, 5)))

    def test_broadcast_add_column_vector(self):
        H = np.random.default_rng(1).standard_normal((5, 7))
        b = np.random.default_rng(2).standard_normal((5, 1))
        vb = Var(b)
        out = sum_sq(Var(H) + vb)
        backward(out)
        np.testing.assert_allclose(vb.grad, 2 * np.sum(H + b, axis=1, keepdims=True))

    @pytest.mark.parametrize(
        "op",
        [
            lambda v: sum_sq(sqrt(v)),
            lambda v: sum_sq(square(v)),
            lambda v: sum_sq(reciprocal(v)),
            lambda v: sum_sq(diag(v[:, 0:1]) @ v),
            lambda v: sum_sq(concat_rows([v, 2.0 * v])),
            lambda v: sum_sq(concat_cols([v.T, v.T @ v])),
            lambda v: sum_sq(v[1:, 0:2]),
            lambda v: sum_sq(v / sqrt(sum_sq(v)) - np.linspace(0, 1, 9).reshape(3, 3)),
        ],
        ids=["sqrt", "square", "reciprocal", "diag", "rows", "cols", "slice", "normalize"],
    )
    def test_primitive_vjps_match_finite_differences(self, op):
        x = np.abs(np.random.default_rng(3).standard_normal((3, 3))) + 0.5

        def program(leaves):
            return op(leaves[0])

        assert grad_check(program, [x]) <= 1e-7

    def test_activation_ops_match_finite_differences(self):
        for act in (LeakyReLU(5 / 6, 5 / 4), HypAct.from_sharpness(0.5)):
            x = np.random.default_rng(4).standard_normal((4, 5)) + 0.05

            def fwd(leaves):
                return sum_sq(apply_activation(act, leaves[0]))

            def inv(leaves):
                return sum_sq(apply_activation(act, leaves[0], inverse=True))

            assert grad_check(fwd, [x]) <= 1e-6
            assert grad_check(inv, [x]) <= 1e-6


class TestBackwardSemantics:
    def test_fanout_accumulates(self):
        x = np.random.default_rng(5).standard_normal((3, 2))
        v = Var(x)
        out = sum_sq(v) + sum_sq(v)
        backward(out)
        np.testing.assert_allclose(v.grad, 4 * x)

    def test_adjoint_linearity(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((4, 4))
        a, b = 0.7, -1.3

        def f(v):
            return sum_sq(v @ v)

        def g(v):
            return sum_sq(v + v.T)

        vf = Var(x)
        backward(f(vf))
        vg = Var(x)
        backward(g(vg))
        vc = Var(x)
        backward(a * f(vc) + b * g(vc))
        np.testing.assert_allclose(vc.grad, a * vf.grad + b * vg.grad, atol=1e-10)

    def test_gradients_bitwise_deterministic(self):
        rng = np.random.default_rng(7)
        theta = random_theta("SBAE", Skeleton((8, 4, 2)), LeakyReLU(0.5, 2.0), rng)
        batch = rng.standard_normal((8, 5))
        program = loss_program("SBAE", theta.act, theta)
        loss1, grads1 = gradient(program, theta.leaves(), batch)
        loss2, grads2 = gradient(program, theta.leaves(), batch)
        assert loss1 == loss2
        for g1, g2 in zip(grads1, grads2):
            assert np.array_equal(g1, g2)

    def test_non_scalar_root_rejected(self):
        with pytest.raises(ValueError, match="scalar root"):
            backward(Var(np.ones((2, 2))))


class TestTapedLossMatchesPlainEvaluation:
    def test_no_layers_identity_program(self):
        u = np.random.default_rng(8).standard_normal((6, 3))
        loss = loss_on_batch("SAE", Identity(), [], u)
        assert loss == 0.0

    def test_single_layer_coordinate_projector(self):
        # Orthogonal layer keeping the first 2 of 5 coordinates, identity act:
        # the loss is the mean squared norm of the dropped coordinates.
        u = np.random.default_rng(9).standard_normal((5, 4))
        theta_layers = [{"A": np.eye(5, 2), "b": np.zeros((5, 1))}]
        loss = loss_on_batch("SOAE", Identity(), theta_layers, u)
        np.testing.assert_allclose(loss, np.sum(u[2:] ** 2) / 4, rtol=1e-12)

    @pytest.mark.parametrize("class_tag", ["SAE", "SBAE", "SOAE", "PlainAE"])
    def test_taped_equals_untaped(self, class_tag):
        rng = np.random.default_rng(10)
        theta = random_theta(class_tag, Skeleton((8, 4, 2)), LeakyReLU(5 / 6, 5 / 4), rng)
        batch = rng.standard_normal((8, 6))
        program = loss_program(class_tag, theta.act, theta)
        taped, _ = gradient(program, theta.leaves(), batch)
        plain = float(value_of(program(theta.leaves(), batch)))
        np.testing.assert_allclose(taped, plain, rtol=1e-12)


class TestGradCheck:
    def test_quadratic_is_exact_to_roundoff(self):
        x = np.random.default_rng(11).standard_normal((5, 1))

        def program(leaves):
            return sum_sq(leaves[0])

        assert grad_check(program, [x]) <= 1e-9

    def test_through_orthonormalization(self):
        rng = np.random.default_rng(12)
        A = rng.standard_normal((6, 3))
        T = rng.standard_normal((6, 3))

        def program(leaves):
            return sum_sq(pi_orth(leaves[0]) - T)

        assert grad_check(program, [A]) <= 1e-5

    def test_full_biorthogonal_network(self):
        # Well-conditioned parameters and a small batch keep the loss O(1):
        # square orthonormalized factors carry exactly-null directions, and
        # the check's 1e-8 denominator floor only tolerates the tape's
        # roundoff there when the loss scale stays near 1.
        rng = np.random.default_rng(13)
        theta = random_theta(
            "SBAE", Skeleton((10, 5, 3)), LeakyReLU(5 / 6, 5 / 4), rng,
            well_conditioned=True,
        )
        batch = 0.1 * rng.standard_normal((10, 4))
        program = loss_program("SBAE", theta.act, theta)
        assert grad_check(program, theta.leaves(), batch) <= 1e-5

    def test_unconstrained_network_with_two_slope_activation(self):
        rng = np.random.default_rng(14)
        theta = random_theta("SAE", Skeleton((20, 8, 4, 2)), LeakyReLU(5 / 6, 5 / 4), rng)
        batch = 0.2 * rng.standard_normal((20, 5))
        program = loss_program("SAE", theta.act, theta)
        assert grad_check(program, theta.leaves(), batch) <= 1e-5

    def test_orthogonal_network_with_hyperbolic_activation(self):
        rng = np.random.default_rng(15)
        theta = random_theta("SOAE", Skeleton((20, 8, 4, 2)), HypAct.from_sharpness(0.5), rng)
        batch = 0.2 * rng.standard_normal((20, 5))
        program = loss_program("SOAE", theta.act, theta)
        assert grad_check(program, theta.leaves(), batch) <= 1e-5
