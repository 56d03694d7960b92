"""Retraction, tameness, blending and the kernel-isomorphism verifier."""

import numpy as np
import pytest
import scipy.linalg

from bsymp.taming import (BlendError, LinOp, PairHypothesisError,
                          RealEigenvalueError, SkewForm, TamingReport,
                          blend_acs, has_real_eigenvalue, is_tame,
                          retract_to_acs, verify_pair_lemma)
from pair_utils import as_args, mutate, random_pair_instance

J_STD = np.array([[0.0, -1.0], [1.0, 0.0]])
OMEGA_STD = np.array([[0.0, 1.0], [-1.0, 0.0]])


def random_no_real_eigs(rng, dim):
    """Operator without real eigenvalues: conjugated rotation-like blocks."""
    blocks = []
    for _ in range(dim // 2):
        a = rng.normal() * 0.5
        b = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
        blocks.append(np.array([[a, -b], [b, a]]))
    A = scipy.linalg.block_diag(*blocks)
    while True:
        P = rng.normal(size=(dim, dim))
        if np.linalg.cond(P) < 50:
            break
    return P @ A @ np.linalg.inv(P)


def random_acs(rng, dim):
    J0 = scipy.linalg.block_diag(*[J_STD] * (dim // 2))
    while True:
        P = rng.normal(size=(dim, dim))
        if np.linalg.cond(P) < 20:
            break
    return P @ J0 @ np.linalg.inv(P)


class TestRealEigenvalues:
    def test_standard_complex_structure(self):
        assert not has_real_eigenvalue(J_STD)

    def test_identity(self):
        assert has_real_eigenvalue(np.eye(3))

    def test_pure_imaginary_pair(self):
        # characteristic polynomial x^2 + 4: eigenvalues +-2i
        assert not has_real_eigenvalue(np.array([[0.0, -4.0], [1.0, 0.0]]))


class TestRetraction:
    def test_fixes_complex_structure(self):
        A = np.array([[1.0, -2.0], [1.0, -1.0]])   # A^2 = -I
        J = retract_to_acs(A)
        np.testing.assert_allclose(J.matrix, A, atol=1e-13)

    def test_scaling_example(self):
        A = np.array([[0.0, -4.0], [1.0, 0.0]])
        J = retract_to_acs(A)
        # oracle: -A^2 = 4I is symmetric, eigendecomposition square root 2I
        w, V = np.linalg.eigh(-A @ A)
        S = V @ np.diag(np.sqrt(w)) @ V.T
        np.testing.assert_allclose(J.matrix, A @ np.linalg.inv(S), atol=1e-12)
        np.testing.assert_allclose(J.matrix,
                                   np.array([[0.0, -2.0], [0.5, 0.0]]),
                                   atol=1e-12)

    def test_blockwise(self, rng):
        A1 = random_no_real_eigs(rng, 2)
        A2 = random_no_real_eigs(rng, 4)
        J = retract_to_acs(scipy.linalg.block_diag(A1, A2))
        expected = scipy.linalg.block_diag(retract_to_acs(A1).matrix,
                                           retract_to_acs(A2).matrix)
        np.testing.assert_allclose(J.matrix, expected, atol=1e-10)

    def test_idempotent(self, rng):
        for dim in (2, 4, 6):
            A = random_no_real_eigs(rng, dim)
            J = retract_to_acs(A)
            J2 = retract_to_acs(J)
            assert np.linalg.norm(J2.matrix - J.matrix, "fro") <= 1e-10

    def test_equivariance(self, rng):
        # TA = BT with A = P C P^-1, B = Q C Q^-1, T = Q R P^-1 for R
        # commuting with C (here R diagonal-in-blocks works with C blockwise)
        for _ in range(10):
            C = scipy.linalg.block_diag(
                *[np.array([[rng.normal() * 0.3, -b], [b, rng.normal() * 0.3]])
                  for b in rng.uniform(0.5, 1.5, 2)])
            C = scipy.linalg.block_diag(C)  # dim 4
            P = rng.normal(size=(4, 4)) + 3 * np.eye(4)
            Q = rng.normal(size=(4, 4)) + 3 * np.eye(4)
            A = P @ C @ np.linalg.inv(P)
            B = Q @ C @ np.linalg.inv(Q)
            T = Q @ np.linalg.inv(P)
            assert np.linalg.norm(T @ A - B @ T) < 1e-8 * np.linalg.norm(T)
            jA, jB = retract_to_acs(A), retract_to_acs(B)
            err = np.linalg.norm(T @ jA.matrix - jB.matrix @ T, "fro")
            assert err <= 1e-9 * np.linalg.norm(T, "fro")

    def test_real_eigenvalue_rejected(self):
        with pytest.raises(RealEigenvalueError):
            retract_to_acs(np.diag([1.0, 2.0]))


class TestIsTame:
    def test_standard_plane(self):
        rep = is_tame(SkewForm(OMEGA_STD), np.eye(2), LinOp(J_STD))
        assert rep.tame and rep.margin == pytest.approx(1.0)
        assert rep.kernel_dim == 0

    def test_sign_flip(self):
        rep = is_tame(SkewForm(OMEGA_STD), np.eye(2), LinOp(-J_STD))
        assert not rep.tame and rep.margin == pytest.approx(-1.0)

    def test_projection_kernel_does_not_enter(self):
        T = np.hstack([np.eye(2), np.zeros((2, 2))])
        J = scipy.linalg.block_diag(J_STD, J_STD)
        rep = is_tame(SkewForm(OMEGA_STD), T, LinOp(J))
        assert rep.tame and rep.kernel_dim == 2
        J2 = scipy.linalg.block_diag(J_STD, -J_STD)
        rep2 = is_tame(SkewForm(OMEGA_STD), T, LinOp(J2))
        assert rep2.tame and rep2.margin == pytest.approx(rep.margin)

    def test_kernel_not_preserved_reported(self):
        T = np.hstack([np.eye(2), np.zeros((2, 2))])
        J = np.zeros((4, 4))
        J[0, 1], J[1, 0] = -1, 1
        J[2, 0], J[0, 2] = 1, -1      # mixes kernel into the base
        J[2, 3], J[3, 2] = -1, 1
        rep = is_tame(SkewForm(OMEGA_STD), T, LinOp(J))
        assert not rep.tame
        assert "kernel" in rep.reason

    def test_margin_matches_sphere_oracle(self, rng):
        # brute force: minimum of q over a dense sampled sphere in the
        # orthogonal complement of ker T
        T = np.hstack([np.eye(2), np.zeros((2, 2))])
        J = scipy.linalg.block_diag(J_STD @ np.diag([1.3, 1 / 1.3]), J_STD)
        rep = is_tame(SkewForm(OMEGA_STD), T, J)
        angles = np.linspace(0, 2 * np.pi, 4001)
        vs = np.stack([np.cos(angles), np.sin(angles),
                       np.zeros_like(angles), np.zeros_like(angles)])
        q = np.einsum("iN,ij,jN->N", T @ vs, OMEGA_STD, T @ (J @ vs))
        assert rep.margin == pytest.approx(float(q.min()), rel=0.05)


class TestBlend:
    def test_single(self):
        out = blend_acs([J_STD], [1.0], np.eye(2), SkewForm(OMEGA_STD))
        np.testing.assert_allclose(out.matrix, J_STD, atol=1e-12)

    def test_repeated(self):
        out = blend_acs([J_STD, J_STD], [0.3, 0.7], np.eye(2),
                        SkewForm(OMEGA_STD))
        np.testing.assert_allclose(out.matrix, J_STD, atol=1e-12)

    def test_two_distinct(self):
        P = np.array([[1.0, 0.4], [0.0, 1.0]])
        J2 = P @ J_STD @ np.linalg.inv(P)
        assert is_tame(SkewForm(OMEGA_STD), np.eye(2), LinOp(J2)).tame
        out = blend_acs([J_STD, J2], [0.5, 0.5], np.eye(2),
                        SkewForm(OMEGA_STD))
        assert out.is_complex_structure
        rep = is_tame(SkewForm(OMEGA_STD), np.eye(2), out)
        assert rep.tame and rep.margin > 0

    def test_untame_input_rejected(self):
        with pytest.raises(BlendError):
            blend_acs([-J_STD], [1.0], np.eye(2), SkewForm(OMEGA_STD))

    def test_convexity_property(self, rng):
        # tame + tame with kernel preserved => blend reports tame
        T = np.hstack([np.eye(2), np.zeros((2, 2))])
        for _ in range(5):
            P = scipy.linalg.block_diag(
                np.eye(2) + 0.2 * rng.normal(size=(2, 2)),
                np.eye(2) + 0.5 * rng.normal(size=(2, 2)))
            if np.linalg.cond(P) > 20:
                continue
            J1 = scipy.linalg.block_diag(J_STD, J_STD)
            J2 = P @ J1 @ np.linalg.inv(P)
            if not is_tame(SkewForm(OMEGA_STD), T, LinOp(J2)).tame:
                continue
            out = blend_acs([J1, J2], [0.4, 0.6], T, SkewForm(OMEGA_STD))
            assert out.taming_report.tame


class TestPairLemma:
    def test_identity_case(self):
        I2 = np.eye(2)
        assert verify_pair_lemma(I2, I2, I2, I2, I2, I2)

    def test_b_darboux_projection_model(self):
        # explicit matrices at a hypersurface point of the projection model:
        # the structure maps kill the first frame vector, the map is the
        # projection onto the first two coordinates
        F = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        bF = F.copy()
        rhoV = np.diag([0.0, 1.0, 1.0, 1.0])
        rhoW = np.diag([0.0, 1.0])
        V1 = np.eye(4)[:, 1:]
        W1 = np.eye(2)[:, 1:]
        assert verify_pair_lemma(F, bF, rhoV, rhoW, V1, W1)

    def test_broken_commutativity_flagged(self):
        F = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        bF = F.copy()
        rhoV = np.diag([0.0, 1.0, 1.0, 1.0])
        rhoW = np.diag([0.0, 1.0])
        V1 = np.eye(4)[:, 1:]
        W1 = np.eye(2)[:, 1:]
        Fbad = F + 0.1
        with pytest.raises(PairHypothesisError) as err:
            verify_pair_lemma(Fbad, bF, rhoV, rhoW, V1, W1)
        assert err.value.hypothesis == "commutativity"

    @pytest.mark.parametrize("which", ["commutativity", "image_rhoV",
                                       "image_rhoW", "quotient_iso",
                                       "kernel_iso"])
    def test_mutations_flag_their_hypothesis(self, which, rng):
        inst = random_pair_instance(rng, p=3, q=2, k=2)
        assert verify_pair_lemma(*as_args(inst))
        bad = mutate(inst, which, rng)
        with pytest.raises(PairHypothesisError) as err:
            verify_pair_lemma(*as_args(bad))
        assert err.value.hypothesis == which

    def test_random_instances(self, rng):
        for _ in range(10):
            p = int(rng.integers(1, 4))
            q = int(rng.integers(1, 3))
            k = int(rng.integers(1, 3))
            inst = random_pair_instance(rng, p=p, q=q, k=k)
            assert verify_pair_lemma(*as_args(inst))
