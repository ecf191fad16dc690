"""Surface tension estimators, convexity probes, flux split, and tables.

The Gaussian potential makes most of these estimators exact per sample
(the gradient observable is linear in the field), which pins values to
machine precision.  The cosine and bump potentials exercise the
statistical paths with fixed seeds so every assertion is reproducible.
"""

import numpy as np
import pytest

from heightlab import (
    estimate_vprime_mean,
    make_cosine_perturbed,
    make_gaussian,
    make_sampler,
    make_split_bump,
)
from heightlab.surface import (
    SurfaceTensionTable,
    build_table,
    convexity_probe,
    decompose_flux,
    grad_sigma,
    sigma,
)


class TestGradSigma:
    def test_gaussian_gradient_is_tilt(self):
        # E[V'(eta)] = E[eta] = u holds sample by sample, so zero variance
        g, ge = grad_sigma(make_gaussian(), 8, (0.7, -0.3), sweeps=300, seed=0)
        assert np.allclose(g, [0.7, -0.3], atol=1e-12)
        assert np.all(ge < 1e-12)

    def test_matches_vprime_estimator_on_shared_chain(self):
        pot = make_cosine_perturbed(0.5, 1.0)
        g, _ = grad_sigma(pot, 8, (0.4, 0.0), sweeps=400, seed=9)
        s = make_sampler(pot, 8, (0.4, 0.0), seed=9)
        rep = estimate_vprime_mean(s, axis=0, sweeps=400)
        assert abs(rep.value - g[0]) < 1e-12


class TestSigma:
    def test_gaussian_value_is_half_norm_squared(self):
        est = sigma(make_gaussian(), 8, (1.0, 0.0), nodes=6, sweeps=300, seed=3)
        assert abs(est.value - 0.5) < 1e-12
        assert est.stderr < 1e-12
        # integrand u . grad(s u) = s |u|^2 is linear in s
        assert np.allclose(est.node_values, est.nodes, atol=1e-12)

    def test_zero_tilt_short_circuits(self):
        est = sigma(make_gaussian(), 8, (0.0, 0.0), seed=0)
        assert est.value == 0.0 and est.stderr == 0.0
        assert not est.node_values.any()

    def test_error_budget_sums(self):
        est = sigma(make_cosine_perturbed(0.3, 1.0), 8, (0.5,), nodes=4,
                    sweeps=400, seed=1)
        assert est.stderr == est.mc_error + est.quad_error
        assert est.mc_error > 0

    def test_cosine_gradient_consistent_with_finite_difference(self):
        # independent chains; the 3 sigma band also absorbs the O(h^2)
        # truncation of the centered quotient
        pot = make_cosine_perturbed(0.5, 1.0)
        g, ge = grad_sigma(pot, 8, (0.4,), sweeps=4000, seed=5)
        sp = sigma(pot, 8, (0.5,), nodes=6, sweeps=3000, seed=6)
        sm = sigma(pot, 8, (0.3,), nodes=6, sweeps=3000, seed=7)
        fd = (sp.value - sm.value) / 0.2
        se = np.hypot(sp.stderr, sm.stderr) / 0.2
        assert abs(g[0] - fd) < 3 * np.hypot(ge[0], se)


class TestConvexityProbe:
    def test_gaussian_quotients_are_unity(self):
        pot = make_gaussian()

        def provider(u):
            return grad_sigma(pot, 8, u, sweeps=200, seed=4)

        pairs = [((1.0, 0.0), (0.0, 0.0)), ((1.0, 1.0), (-1.0, 0.5))]
        rep = convexity_probe(provider, pairs)
        assert np.allclose(rep.quotients, 1.0, atol=1e-9)
        assert abs(rep.c1_hat - 1.0) < 1e-9
        assert abs(rep.c2_hat - 1.0) < 1e-9
        assert not rep.any_nonpositive

    def test_each_distinct_tilt_queried_once(self):
        calls = []

        def provider(u):
            calls.append(tuple(u))
            return np.asarray(u, dtype=float), np.zeros(len(u))

        pairs = [((1.0,), (0.0,)), ((1.0,), (2.0,))]
        convexity_probe(provider, pairs)
        assert len(calls) == 3

    def test_identical_tilts_rejected(self):
        def provider(u):
            return np.asarray(u, dtype=float), np.zeros(len(u))

        with pytest.raises(ValueError):
            convexity_probe(provider, [((1.0,), (1.0,))])

    def test_flags_monotonicity_failure(self):
        def provider(u):
            return -np.asarray(u, dtype=float), np.zeros(len(u))

        rep = convexity_probe(provider, [((1.0,), (0.0,))])
        assert rep.any_nonpositive
        assert rep.c1_hat == -1.0


class TestFluxDecomposition:
    def test_gaussian_split_is_identity(self):
        fd = decompose_flux(make_gaussian(), 8, (0.6, -0.4), sweeps=400, seed=2)
        assert np.allclose(fd.A, 1.0, atol=1e-12)
        assert np.all(fd.A_err < 1e-12)
        assert np.allclose(fd.A_sample_min, 1.0) and np.allclose(fd.A_sample_max, 1.0)
        assert fd.samples_in_bounds
        assert np.all(np.abs(fd.a) < 3 * fd.a_err + 1e-12)
        val, err = fd.reconstruct()
        assert np.allclose(err, fd.a_err, atol=1e-15)

    def test_cosine_reconstructs_gradient_exactly_on_shared_chain(self):
        # quadratic convex part: the segment quadrature is exact, so the
        # reconstruction agrees with the gradient sample by sample
        pot = make_cosine_perturbed(0.5, 1.0)
        u = (0.4, -0.2)
        g, _ = grad_sigma(pot, 8, u, sweeps=800, seed=11)
        fd = decompose_flux(pot, 8, u, sweeps=800, seed=11, nodes=6)
        val, _ = fd.reconstruct()
        assert np.allclose(val, g, atol=1e-10)
        assert np.allclose(fd.A, 1.0, atol=1e-12)
        assert fd.c_minus == fd.c_plus == 1.0
        assert fd.samples_in_bounds

    def test_bump_samples_vary_within_certified_bounds(self):
        pot = make_split_bump()
        g, ge = grad_sigma(pot, 8, (0.5,), sweeps=1500, seed=12)
        fd = decompose_flux(pot, 8, (0.5,), sweeps=1500, seed=12, nodes=8)
        assert fd.samples_in_bounds
        assert fd.A_sample_min[0] < fd.A_sample_max[0]
        assert fd.c_minus - 1e-12 <= fd.A[0] <= fd.c_plus + 1e-12
        val, _ = fd.reconstruct()
        # same chain, so the residual is pure quadrature error at the
        # curvature kink and stays far below the Monte Carlo scale
        assert abs(val[0] - g[0]) < 1e-6


class TestSurfaceTensionTable:
    def gaussian_table(self):
        return build_table(make_gaussian(), 8, [np.linspace(-1, 1, 5)],
                           sweeps=200, seed=0)

    def test_gaussian_table_exact(self):
        tab = self.gaussian_table()
        assert np.allclose(tab.dsigma[..., 0], np.linspace(-1, 1, 5), atol=1e-12)
        assert np.allclose(tab.sigma, np.linspace(-1, 1, 5) ** 2 / 2, atol=1e-12)
        assert np.all(tab.dsigma_err < 1e-12)

    def test_interpolation_and_clamping(self):
        tab = self.gaussian_table()
        g, _ = tab.grad([0.5])
        assert abs(g[0] - 0.5) < 1e-12
        g, _ = tab.grad([0.25])          # linear data, so midpoints exact too
        assert abs(g[0] - 0.25) < 1e-12
        assert tab.sigma_at([0.0]) == 0.0
        assert tab.clamp_events == 0
        tab.grad([2.0])
        assert tab.clamp_events == 1
        many = tab.grad_many(np.array([[0.1], [-0.7], [0.3]]))
        singles = np.array([tab.grad([x])[0] for x in (0.1, -0.7, 0.3)])
        assert np.allclose(many, singles, atol=1e-15)

    def test_monotonicity_and_lipschitz_on_gaussian(self):
        tab = self.gaussian_table()
        lo, hi = tab.monotonicity_bounds()
        assert abs(lo - 1.0) < 1e-12 and abs(hi - 1.0) < 1e-12
        assert abs(tab.lipschitz_upper() - 1.0) < 1e-12

    def test_monotonicity_and_lipschitz_hand_built(self):
        axes = [np.array([-1.0, 0.0, 1.0])]
        dsig = np.array([[-2.0], [0.0], [1.0]])
        z = np.zeros(3)
        tab = SurfaceTensionTable(axes, dsig, np.zeros_like(dsig), z, z)
        assert tab.monotonicity_bounds() == (1.0, 2.0)
        assert tab.lipschitz_upper() == 2.0

    def test_csv_round_trip_bit_exact(self, tmp_path):
        tab = self.gaussian_table()
        tab.meta["note"] = "round-trip"
        path = tmp_path / "table.csv"
        tab.to_csv(path)
        back = SurfaceTensionTable.from_csv(path)
        assert all(np.array_equal(a, b) for a, b in zip(tab.axes, back.axes))
        assert np.array_equal(tab.dsigma, back.dsigma)
        assert np.array_equal(tab.dsigma_err, back.dsigma_err)
        assert np.array_equal(tab.sigma, back.sigma)
        assert np.array_equal(tab.sigma_err, back.sigma_err)
        assert back.meta["note"] == "round-trip"

    def test_from_csv_rejects_bad_files(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("# only=meta\n")
        with pytest.raises(ValueError):
            SurfaceTensionTable.from_csv(empty)
        tab = self.gaussian_table()
        path = tmp_path / "table.csv"
        tab.to_csv(path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines + [lines[-1]]) + "\n")   # duplicated node
        with pytest.raises(ValueError):
            SurfaceTensionTable.from_csv(path)

    def test_constructor_validates_shapes(self):
        axes = [np.array([-1.0, 0.0, 1.0])]
        with pytest.raises(ValueError):
            SurfaceTensionTable(axes, np.zeros((4, 1)), np.zeros((4, 1)),
                                np.zeros(3), np.zeros(3))

    def test_axes_must_contain_origin(self):
        with pytest.raises(ValueError):
            build_table(make_gaussian(), 8, [np.array([0.5, 1.0])], sweeps=50)

    def test_parallel_build_matches_serial(self):
        pot = make_cosine_perturbed(0.3, 1.0)
        axes = [np.array([-0.5, 0.0, 0.5])]
        serial = build_table(pot, 8, axes, sweeps=400, seed=5)
        forked = build_table(pot, 8, axes, sweeps=400, seed=5, workers=2)
        assert np.array_equal(serial.dsigma, forked.dsigma)
        assert np.array_equal(serial.sigma, forked.sigma)
        assert np.array_equal(serial.dsigma_err, forked.dsigma_err)
