"""Compiled vs pure integration loops: same semantics, same floats."""

import numpy as np
import pytest

from manifold_descent import (
    HAVE_COMPILED,
    IntegratorConfig,
    MethodSpec,
    PerturbationSpec,
    PhaseState,
    simulate,
    spd_quadratic,
    standing_start,
    unit_quadratic,
)

needs_ext = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel not built")

ALL_METHODS = [
    MethodSpec("gd_flow"),
    MethodSpec("heavy_ball"),
    MethodSpec("hbf", lam=2.0),
    MethodSpec("pni", alpha=1.0, beta=0.9),
    MethodSpec("proposed", alpha=1.0, beta=0.9),
    MethodSpec("nag_sc", mu=1.0, s=0.81),
    MethodSpec("triple_momentum", mu=1.0, s=0.81),
]


def x0_for(method, obj):
    ones = np.ones(obj.dim)
    return PhaseState(ones) if not method.second_order else standing_start(ones)


def both(method, obj, cfg, pert=None):
    pure = simulate(method, obj, x0_for(method, obj), cfg, pert, kernel="pure")
    fast = simulate(method, obj, x0_for(method, obj), cfg, pert, kernel="compiled")
    return pure, fast


@needs_ext
class TestValueIdentical:
    @pytest.mark.parametrize("method", ALL_METHODS, ids=lambda m: m.family)
    @pytest.mark.parametrize("scheme", ["euler", "rk4"])
    def test_diagonal_objectives(self, method, scheme):
        cfg = IntegratorConfig(h=1e-3, t_max=0.5, scheme=scheme)
        for obj in (unit_quadratic(2), spd_quadratic(np.diag([1.0, 4.0]))):
            pure, fast = both(method, obj, cfg)
            np.testing.assert_array_equal(pure.x1, fast.x1)
            if method.second_order:
                np.testing.assert_array_equal(pure.x2, fast.x2)
            assert pure.terminated_by == fast.terminated_by
            assert pure.steps_taken == fast.steps_taken
            np.testing.assert_array_equal(pure.times, fast.times)

    def test_perturbed(self, unit_obj, proposed):
        cfg = IntegratorConfig(h=1e-3, t_max=1.0)
        for dist in ("uniform_ball", "gaussian"):
            pert = PerturbationSpec(delta=1e-3, seed=11, distribution=dist)
            pure, fast = both(proposed, unit_obj, cfg, pert)
            np.testing.assert_array_equal(pure.x1, fast.x1)
            np.testing.assert_array_equal(pure.x2, fast.x2)

    def test_grad_tol_stop_parity(self, unit_obj):
        cfg = IntegratorConfig(h=1e-3, t_max=10.0, grad_tol=0.05)
        pure, fast = both(MethodSpec("gd_flow"), unit_obj, cfg)
        assert pure.steps_taken == fast.steps_taken
        assert pure.terminated_by == fast.terminated_by == "grad_tol"

    def test_divergence_parity(self, unit_obj):
        cfg = IntegratorConfig(h=3.0, t_max=200.0, scheme="euler")
        pure, fast = both(MethodSpec("gd_flow"), unit_obj, cfg)
        assert pure.steps_taken == fast.steps_taken
        assert pure.terminated_by == fast.terminated_by == "divergence"
        np.testing.assert_array_equal(pure.x1, fast.x1)

    def test_record_every_parity(self, unit_obj, proposed):
        cfg = IntegratorConfig(h=1e-3, t_max=1.0, record_every=7)
        pure, fast = both(proposed, unit_obj, cfg)
        np.testing.assert_array_equal(pure.times, fast.times)
        np.testing.assert_array_equal(pure.x1, fast.x1)


@needs_ext
class TestDenseObjectives:
    def test_close_but_not_necessarily_bitwise(self):
        # Dense matvecs go through BLAS on the pure path and naive loops in
        # the compiled one; summation order may differ, so only closeness is
        # guaranteed here (bitwise equality is for diagonal Hessians).
        obj = spd_quadratic(np.array([[2.0, 0.5], [0.5, 1.0]]))
        cfg = IntegratorConfig(h=1e-3, t_max=2.0)
        method = MethodSpec("proposed", alpha=1.0, beta=0.5)
        pure, fast = both(method, obj, cfg)
        np.testing.assert_allclose(pure.x1, fast.x1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(pure.x2, fast.x2, rtol=1e-12, atol=1e-14)


@needs_ext
class TestSelection:
    def test_compiled_rejects_foreign_objective(self, proposed, canonical_cfg):
        class Opaque:
            dim = 1
            minimizer = np.zeros(1)
            fstar = 0.0

            def gradient(self, x):
                return np.asarray(x)

            def value(self, x):
                return 0.5 * float(x[0] ** 2)

            def hessian_vec(self, x, v):
                return np.asarray(v)

        with pytest.raises(ValueError):
            simulate(proposed, Opaque(), standing_start([1.0]), canonical_cfg, kernel="compiled")

    def test_auto_falls_back_for_foreign_objective(self, proposed, canonical_cfg):
        class Opaque:
            dim = 1
            minimizer = np.zeros(1)
            fstar = 0.0

            def gradient(self, x):
                return np.asarray(x, dtype=float)

            def value(self, x):
                return 0.5 * float(x[0] ** 2)

            def hessian_vec(self, x, v):
                return np.asarray(v, dtype=float)

        traj = simulate(proposed, Opaque(), standing_start([1.0]), canonical_cfg)
        assert traj.terminated_by == "t_max"

    def test_unknown_kernel_name(self, unit_obj, proposed, canonical_cfg):
        with pytest.raises(ValueError):
            simulate(proposed, unit_obj, standing_start([1.0]), canonical_cfg, kernel="gpu")
