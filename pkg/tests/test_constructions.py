"""Assembly, local model and conversions."""

import numpy as np
import pytest
import sympy as sp

from bsymp import expr as ex
from bsymp.bmaps import BMapModel
from bsymp.charts import BChart
from bsymp.config import DEFAULT
from bsymp.constructions import (CollarSpec, ConstructionError, CoverDatum,
                                 TamingSearchError, block_rotation_acs,
                                 find_taming_t, folded_to_log,
                                 lefschetz_local_eta, log_to_folded,
                                 thurston_assemble)
from bsymp.forms import BForm, b_d, forms_equal, pullback, wedge
from bsymp.geometry import (cosymplectic_extract, dual_bivector,
                            log_symplectic_check)

x1, x2, x3, x4 = [ex.coord(i) for i in range(1, 5)]


@pytest.fixture
def product_setup(torus4, torus2):
    f = BMapModel(torus4, torus2, u=sp.Integer(1), rest=[x2], name="proj")
    omega_Y = BForm(torus2, 2, {(1, 2): 1})
    xi = BForm(torus4, 2, {(3, 4): 1})
    J = block_rotation_acs(torus4, [(1, 2), (3, 4)])
    return f, omega_Y, xi, J


class TestFindTamingT:
    def test_global_taming_returns_cap(self, product_setup, torus4):
        f, omega_Y, xi, J = product_setup
        fstar = pullback(f, omega_Y)
        t, cert = find_taming_t(fstar, xi, J, torus4, base_points=256,
                                sphere_samples=8)
        assert t == DEFAULT.sampling.t_max
        assert cert.passed and cert.margins["taming_margin"] > 0

    def test_homogeneity(self, product_setup, torus4):
        f, omega_Y, xi, J = product_setup
        fstar = pullback(f, omega_Y)
        t1, c1 = find_taming_t(fstar, xi, J, torus4, base_points=128,
                               sphere_samples=8)
        t2, c2 = find_taming_t(3 * fstar, 3 * xi, J, torus4, base_points=128,
                               sphere_samples=8)
        assert t1 == t2
        assert c2.margins["taming_margin"] == pytest.approx(
            3 * c1.margins["taming_margin"], rel=1e-12)

    def test_negative_base_pairing_rejected(self, product_setup, torus4):
        f, omega_Y, xi, J = product_setup
        fstar = pullback(f, omega_Y)
        with pytest.raises(TamingSearchError):
            find_taming_t(-1 * fstar, xi, J, torus4, base_points=64,
                          sphere_samples=8)


class TestThurston:
    def test_product_scene(self, product_setup, torus4):
        f, omega_Y, xi, J = product_setup
        cover = [CoverDatum(0, ((-0.25, 0.75), (0.0, 1.0)), sp.Integer(1), xi)]
        omega_t, cert = thurston_assemble(f, omega_Y, cover, xi, J,
                                          base_points=256, sphere_samples=8)
        assert cert.passed
        assert cert.parameters["t"] > 0
        # two sides of the duality: the output is log-symplectic
        rep = log_symplectic_check(dual_bivector(omega_t), torus4)
        assert rep.verdict

    def test_degenerate_partition_reproduces_xi(self, product_setup, torus4):
        f, omega_Y, xi, J = product_setup
        cover = [CoverDatum(0, ((-0.25, 0.75), (0.0, 1.0)), sp.Integer(1), xi,
                            alpha=BForm.zero(torus4, 1))]
        omega_t, cert = thurston_assemble(f, omega_Y, cover, xi, J,
                                          base_points=128, sphere_samples=8)
        t = cert.parameters["t"]
        expected = pullback(f, omega_Y) + t * xi
        ok, method, _ = forms_equal(omega_t, expected)
        assert ok and method == "symbolic"

    def test_two_element_cover(self, product_setup, torus4, torus2):
        f, omega_Y, xi, J = product_setup
        eps = sp.Rational(1, 50)
        alpha2 = BForm(torus4, 1, {(4,): eps * sp.sin(2 * sp.pi * x3)})
        eta2 = xi + b_d(alpha2)
        w1 = (1 + sp.cos(2 * sp.pi * x2)) / 2
        w2 = (1 - sp.cos(2 * sp.pi * x2)) / 2
        box = ((-0.25, 0.75), (0.0, 1.0))
        cover = [CoverDatum(0, box, w1, xi, alpha=BForm.zero(torus4, 1)),
                 CoverDatum(1, box, w2, eta2, alpha=alpha2)]
        omega_t, cert = thurston_assemble(f, omega_Y, cover, xi, J,
                                          base_points=256, sphere_samples=8)
        assert cert.passed
        ok, method, _ = forms_equal(b_d(omega_t), BForm.zero(torus4, 3))
        assert ok and method == "symbolic"

    def test_classical_symplectic_base(self):
        src = BChart(4, ((0.0, 1.0),) * 4, (True,) * 4, has_Z=False)
        tgt = BChart(2, ((0.0, 1.0),) * 2, (True,) * 2, has_Z=False)
        f = BMapModel(src, tgt, rest=[x1, x2])
        omega_Y = BForm(tgt, 2, {(1, 2): 1}, basis="ordinary")
        xi = BForm(src, 2, {(3, 4): 1}, basis="ordinary")
        J = block_rotation_acs(src, [(1, 2), (3, 4)])
        cover = [CoverDatum(0, ((0.0, 1.0), (0.0, 1.0)), sp.Integer(1), xi)]
        omega_t, cert = thurston_assemble(f, omega_Y, cover, xi, J,
                                          base_points=256, sphere_samples=8)
        assert cert.passed
        # determinant-positivity oracle on an independent grid
        pts = src.grid(5)
        dets = np.linalg.det(omega_t.evaluate_matrices(pts))
        assert dets.min() > 0


class TestLefschetzLocal:
    def test_model_certificate(self):
        eta, cert = lefschetz_local_eta(0.15, 0.9, chart_size=1.5)
        assert cert.passed
        assert cert.margins["inner_equals_sigma"]
        assert cert.margins["min_fiber_pairing"] > 0

    def test_inner_region_exact(self):
        eta, cert = lefschetz_local_eta(0.15, 0.9, chart_size=1.5)
        sigma = np.zeros((4, 4))
        sigma[0, 1], sigma[1, 0] = 1, -1
        sigma[2, 3], sigma[3, 2] = 1, -1
        for pt in ([0.1, 0.05, -0.08, 0.02], [0.0, 0.2, 0.0, 0.1]):
            np.testing.assert_array_equal(eta.evaluate_matrices(
                np.array(pt)[None, :])[0], sigma)

    def test_outer_region_is_fiber_area_pullback(self):
        eta, _ = lefschetz_local_eta(0.15, 0.8, chart_size=1.6)
        # point on the plane {b = 0}: z = (a/2, -i a/2) with |a| big enough
        a = 1.6 * np.exp(0.7j)
        pt = np.array([a.real / 2, a.imag / 2, a.imag / 2, -a.real / 2])
        got = eta.evaluate_matrices(pt[None, :])[0]
        chart = eta.chart
        A1 = BForm.scalar(chart, x1 - x4, "ordinary")
        A2 = BForm.scalar(chart, x2 + x3, "ordinary")
        expect = (sp.Rational(1, 2) * wedge(b_d(A1), b_d(A2))) \
            .evaluate_matrices(pt[None, :])[0]
        np.testing.assert_allclose(got, expect, atol=1e-13)

    def test_primitive_independence(self):
        eta1, c1 = lefschetz_local_eta(0.15, 0.9)
        eta2, c2 = lefschetz_local_eta(0.15, 0.9, alternate_primitive=True)
        assert c1.passed and c2.passed
        pts = np.array([[0.05, 0.1, -0.1, 0.02],      # inner
                        [0.8, 0.75, 0.7, -0.72]])     # outer corner
        np.testing.assert_allclose(eta1.evaluate_matrices(pts),
                                   eta2.evaluate_matrices(pts), atol=1e-12)

    def test_radii_order_enforced(self):
        with pytest.raises(ConstructionError):
            lefschetz_local_eta(0.9, 0.3)


@pytest.fixture
def band2():
    return BChart(2, ((-0.25, 0.25), (0.0, 1.0)), (False, True), has_Z=True)


@pytest.fixture
def darb4():
    return BChart(4, ((-0.3, 0.3),) + ((0.0, 1.0),) * 3,
                  (False, True, True, True), has_Z=True)


class TestConversions:
    def test_dim2_darboux_fold_model(self, band2):
        omega = BForm(band2, 2, {(1, 2): 1})
        collar = cosymplectic_extract(omega)
        out, cert = log_to_folded(omega, collar, CollarSpec(0.2))
        assert cert.passed
        assert cert.margins["max_h_on_Z"] == 0.0
        # near Z the fold coefficient is (2 kappa^2) x1 (quadratic profile)
        slope = cert.parameters["fold_slope"]
        val = out.evaluate_matrices(np.array([[0.01, 0.3]]))[0][0, 1]
        assert val == pytest.approx(slope * 0.01, rel=1e-12)

    def test_dim4_darboux_roundtrip(self, darb4):
        omega = BForm(darb4, 2, {(1, 2): 1, (3, 4): 1})
        collar = cosymplectic_extract(omega)
        folded, cert1 = log_to_folded(omega, collar, CollarSpec(0.25))
        assert cert1.passed
        back, cert2 = folded_to_log(folded, collar.theta, CollarSpec(0.25))
        assert cert2.passed
        rep = cert2.margins["log_symplectic_check"]
        assert rep["verdict"]
        # outside the collar the roundtrip returns the original exactly
        pts = darb4.sample(60, np.random.default_rng(5))
        pts = pts[np.abs(pts[:, 0]) > 0.26]
        err = np.abs(back.evaluate_matrices(pts) - omega.evaluate_matrices(pts))
        assert err.max() <= 1e-9

    def test_sin_band_roundtrip(self, band2):
        pi_coef = sp.sin(2 * sp.pi * x1)
        omega = BForm(band2, 2, {(1, 2): x1 / pi_coef})
        collar = cosymplectic_extract(omega)
        assert collar.theta.coeffs[(2,)] == 1 / (2 * sp.pi)
        folded, cert1 = log_to_folded(omega, collar, CollarSpec(0.2))
        assert cert1.passed
        back, cert2 = folded_to_log(folded, collar.theta, CollarSpec(0.2))
        assert cert2.passed
        pts = band2.sample(80, np.random.default_rng(6))
        pts = pts[np.abs(pts[:, 0]) > 0.21]
        err = np.abs(back.evaluate_matrices(pts) - omega.evaluate_matrices(pts))
        assert err.max() <= 1e-9

    def test_folded_darboux_direct(self, darb4):
        folded = BForm(darb4, 2, {(1, 2): x1, (3, 4): 1}, basis="ordinary")
        theta = BForm(darb4, 1, {(2,): 1}, basis="ordinary")
        out, cert = folded_to_log(folded, theta, CollarSpec(0.25))
        assert cert.passed
        assert cert.margins["min_abs_pfaffian"] > 0

    def test_zero_theta_obstructed(self, darb4):
        folded = BForm(darb4, 2, {(1, 2): x1, (3, 4): 1}, basis="ordinary")
        theta = BForm.zero(darb4, 1, basis="ordinary")
        with pytest.raises(ConstructionError):
            folded_to_log(folded, theta, CollarSpec(0.25))

    def test_non_folded_input_rejected(self, darb4):
        not_folded = BForm(darb4, 2, {(1, 2): x1**2, (3, 4): 1},
                           basis="ordinary")
        theta = BForm(darb4, 1, {(2,): 1}, basis="ordinary")
        with pytest.raises(ConstructionError):
            folded_to_log(not_folded, theta, CollarSpec(0.25))
