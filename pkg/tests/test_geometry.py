"""Duality, transversality and collar extraction."""

import numpy as np
import pytest
import sympy as sp

from bsymp import expr as ex
from bsymp.bmaps import BMapModel
from bsymp.charts import BChart
from bsymp.config import DEFAULT
from bsymp.forms import BForm, BBivector, forms_equal
from bsymp.geometry import (CosymplecticError, DegenerateFormError,
                            PoissonError, SectionError, cosymplectic_extract,
                            dual_bivector, invert_bivector,
                            log_symplectic_check, section_splitting_check,
                            validate_bmap)

x1, x2, x3, x4 = [ex.coord(i) for i in range(1, 5)]


class TestDuality:
    def test_darboux_dual(self, torus4):
        w = BForm(torus4, 2, {(1, 2): 1, (3, 4): 1})
        pi = dual_bivector(w)
        assert pi.coeffs == {(1, 2): 1, (3, 4): 1}
        anchor = pi.anchor_matrix()
        assert anchor[0, 1] == x1 and anchor[2, 3] == 1

    def test_scalar_inverse(self, torus2):
        w = BForm(torus2, 2, {(1, 2): 2})
        pi = dual_bivector(w)
        assert pi.coeffs == {(1, 2): sp.Rational(1, 2)}

    def test_constant_dim4_matches_numeric_inverse(self, torus4, rng):
        # random nondegenerate constant coefficients; oracle: numpy inverse
        while True:
            A = np.triu(rng.integers(-3, 4, (4, 4)), 1).astype(float)
            M = A - A.T
            if abs(np.linalg.det(M)) > 0.5:
                break
        w = BForm(torus4, 2, {(i + 1, j + 1): sp.nsimplify(M[i, j])
                              for i in range(4) for j in range(i + 1, 4)})
        pi = dual_bivector(w)
        got = np.array(pi.matrix(), dtype=float)
        np.testing.assert_allclose(got, -np.linalg.inv(M), atol=1e-12)

    def test_roundtrip(self, torus4, rng):
        w = BForm(torus4, 2, {(1, 2): 2 + sp.sin(2 * sp.pi * x3) / 3,
                              (3, 4): 1, (1, 3): sp.Rational(1, 5) * x2})
        back = invert_bivector(dual_bivector(w))
        pts = torus4.sample(40, rng)
        worst = float(np.max(np.abs(back.evaluate_matrices(pts)
                                    - w.evaluate_matrices(pts))))
        assert worst <= 1e-9

    def test_degenerate_reports_location(self, torus2):
        w = BForm(torus2, 2, {(1, 2): x2 - sp.Rational(1, 2)})
        with pytest.raises(DegenerateFormError):
            dual_bivector(w)


class TestLogSymplecticCheck:
    def test_sin_torus_passes_and_reports_companion(self, torus2):
        P = sp.Matrix([[0, sp.sin(2 * sp.pi * x1)],
                       [-sp.sin(2 * sp.pi * x1), 0]])
        rep = log_symplectic_check(P, torus2)
        assert rep.verdict
        assert rep.max_h_on_Z == 0.0 and rep.methods["h_on_Z"] == "symbolic"
        # hand oracle: dh/dx1 at 0 is 2*pi
        assert rep.min_dh_on_Z == pytest.approx(2 * np.pi, rel=1e-12)
        assert 0.5 in rep.extra_zeros

    def test_tangential_zero_fails(self, torus2):
        P = sp.Matrix([[0, x1 ** 2], [-x1 ** 2, 0]])
        rep = log_symplectic_check(P, torus2)
        assert not rep.verdict
        assert rep.min_dh_on_Z < 1e-6

    def test_darboux_anchor(self, torus4):
        w = BForm(torus4, 2, {(1, 2): 1, (3, 4): 1})
        rep = log_symplectic_check(dual_bivector(w), torus4)
        assert rep.verdict
        # h = x1 up to sign: unit transversal slope
        assert rep.min_dh_on_Z == pytest.approx(1.0, rel=1e-12)

    def test_non_poisson_rejected(self, torus4):
        # pi = x1 d1^d2 + (1 + x2) d3^d4 fails the bracket in dim 4
        P = sp.zeros(4, 4)
        P[0, 1], P[1, 0] = x1, -x1
        P[2, 3], P[3, 2] = 1 + x2**2, -(1 + x2**2)
        with pytest.raises(PoissonError):
            log_symplectic_check(P, torus4)


class TestDualityConsistency:
    def test_dual_passes_log_symplectic_check(self, torus4, rng):
        w = BForm(torus4, 2, {(1, 2): 2 + sp.cos(2 * sp.pi * x2) / 2,
                              (3, 4): 1 + x3 / 5})
        # both sides of the duality: the anchor image must be log-symplectic
        rep = log_symplectic_check(dual_bivector(w), torus4)
        assert rep.verdict


class TestCosymplectic:
    def test_darboux_dim4(self, torus4):
        w = BForm(torus4, 2, {(1, 2): 1, (3, 4): 1})
        data = cosymplectic_extract(w)
        assert data.theta.coeffs == {(2,): 1}
        assert data.sigma.coeffs == {(3, 4): 1}
        assert data.margin == pytest.approx(1.0)

    def test_darboux_dim2(self, torus2):
        w = BForm(torus2, 2, {(1, 2): 1})
        data = cosymplectic_extract(w)
        assert data.theta.coeffs == {(2,): 1}
        assert data.sigma.coeffs == {}
        assert data.margin == pytest.approx(1.0)

    def test_nonclosed_theta_rejected(self, torus4):
        w = BForm(torus4, 2, {(1, 2): 1, (1, 4): x3, (3, 4): 1})
        with pytest.raises(CosymplecticError):
            cosymplectic_extract(w)

    def test_collar_model_roundtrips(self, torus4):
        # d log|x| ^ theta + sigma with closed theta, sigma on Z
        theta = {(2,): 1, (4,): sp.Rational(1, 3)}
        w = BForm(torus4, 2, {(1, 2): 1, (1, 4): sp.Rational(1, 3), (3, 4): 1})
        data = cosymplectic_extract(w)
        assert data.theta.coeffs == {(2,): 1, (4,): sp.Rational(1, 3)}
        assert data.sigma.coeffs == {(3, 4): 1}


class TestBMapValidation:
    def test_identity_passes(self, torus4):
        cert = validate_bmap(BMapModel.identity(torus4))
        assert cert.passed

    def test_projection_passes(self, torus4, torus2):
        p = BMapModel(torus4, torus2, u=sp.Integer(1), rest=[x2])
        assert validate_bmap(p).passed

    def test_vanishing_u_fails(self, torus2):
        f = BMapModel(torus2, torus2, u=x1, rest=[x2])  # f1 = x1^2
        cert = validate_bmap(f)
        assert not cert.passed


class TestSections:
    def test_constant_section_of_projection(self, torus4, torus2):
        f = BMapModel(torus4, torus2, u=sp.Integer(1), rest=[x2])
        s = BMapModel(torus2, torus4, u=sp.Integer(1),
                      rest=[x2, sp.Rational(1, 3), sp.Rational(1, 4)])
        assert section_splitting_check(f, s)

    def test_graph_section(self, torus4, torus2):
        f = BMapModel(torus4, torus2, u=sp.Integer(1), rest=[x2])
        s = BMapModel(torus2, torus4, u=sp.Integer(1),
                      rest=[x2, sp.sin(2 * sp.pi * x2) / 3,
                            sp.cos(2 * sp.pi * x1) / 5])
        assert section_splitting_check(f, s)

    def test_non_section_rejected(self, torus4, torus2):
        f = BMapModel(torus4, torus2, u=sp.Integer(1), rest=[x2])
        bad = BMapModel(torus2, torus4, u=sp.Integer(1),
                        rest=[x2 + sp.Rational(1, 7), 0, 0])
        with pytest.raises(SectionError):
            section_splitting_check(f, bad)
