"""Pointwise linear algebra of tameness and complex-structure retraction.

The retraction onto complex structures is the primary matrix function
``J = A (-A^2)^{-1/2}``: it is defined whenever A has no real eigenvalues,
fixes complex structures, is idempotent, and intertwines with any T
satisfying TA = BT because primary matrix functions do.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .config import Config, DEFAULT


class TamingError(ValueError):
    pass


class RealEigenvalueError(TamingError):
    pass


class EigenSolverError(TamingError):
    pass


class RetractionError(TamingError):
    pass


class BlendError(TamingError):
    pass


# --------------------------------------------------------------------------
# basic carriers
# --------------------------------------------------------------------------

class SkewForm:
    """Skew bilinear form; antisymmetry is structural (upper triangle kept)."""

    def __init__(self, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise TamingError("skew form needs a square matrix")
        upper = np.triu(M, 1)
        self.matrix = upper - upper.T
        self.dim = M.shape[0]

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def nondegenerate(self) -> bool:
        return abs(self.determinant) > 1e-12

    def __call__(self, v, w) -> float:
        return float(np.asarray(v) @ self.matrix @ np.asarray(w))


class LinOp:
    """Square operator with a cached complex-structure flag."""

    def __init__(self, matrix, acs_flag_tol: float = DEFAULT.tol.acs_flag):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise TamingError("operator must be square")
        self.matrix = M
        self.acs_defect = float(np.linalg.norm(M @ M + np.eye(M.shape[0]), "fro"))
        self.is_complex_structure = self.acs_defect <= acs_flag_tol

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ (other.matrix if isinstance(other, LinOp) else other)


def _as_matrix(A) -> np.ndarray:
    return A.matrix if isinstance(A, LinOp) else np.asarray(A, dtype=float)


@dataclass
class TamingReport:
    tame: bool
    margin: float
    kernel_dim: int
    reason: str = ""
    thresholds: dict = field(default_factory=dict)

    def to_dict(self):
        return {"tame": bool(self.tame), "margin": float(self.margin),
                "kernel_dim": int(self.kernel_dim), "reason": self.reason,
                "thresholds": dict(self.thresholds)}


# --------------------------------------------------------------------------
# eigenvalue reality and the retraction
# --------------------------------------------------------------------------

def has_real_eigenvalue(A, cfg: Config = DEFAULT) -> bool:
    """True iff some eigenvalue is real up to the recorded relative threshold."""
    M = _as_matrix(A)
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as e:   # pragma: no cover - rare
        raise EigenSolverError(f"eigenvalue solver failed: {e}") from e
    thr = cfg.tol.eig_real_rel
    return bool(np.any(np.abs(eig.imag) <= thr * np.maximum(1.0, np.abs(eig.real))))


def retract_to_acs(A, cfg: Config = DEFAULT) -> LinOp:
    """Canonical retraction J = A (-A^2)^{-1/2} onto complex structures."""
    M = _as_matrix(A)
    if has_real_eigenvalue(M, cfg):
        raise RealEigenvalueError("operator has a (numerically) real eigenvalue")
    target = -M @ M
    S = scipy.linalg.sqrtm(target)
    if np.iscomplexobj(S):
        if np.max(np.abs(S.imag)) > 1e-10 * max(1.0, np.max(np.abs(S.real))):
            raise RetractionError("principal square root came out non-real")
        S = S.real
    # Newton refinement of the square root; determinism over fallbacks
    scale = max(1.0, float(np.linalg.norm(target, "fro")))
    for _ in range(3):
        residual = float(np.linalg.norm(S @ S - target, "fro"))
        if residual <= 1e-13 * scale:
            break
        S = 0.5 * (S + np.linalg.solve(S, target))
    residual = float(np.linalg.norm(S @ S - target, "fro"))
    if residual > 1e-9 * scale:
        raise RetractionError(f"square-root iteration did not converge "
                              f"(residual {residual:.2e})")
    J = np.linalg.solve(S.T, M.T).T     # A @ inv(S)
    out = LinOp(J)
    if out.acs_defect > cfg.tol.acs_result:
        raise RetractionError(f"retraction defect {out.acs_defect:.2e} "
                              f"above {cfg.tol.acs_result:.1e}")
    return out


# --------------------------------------------------------------------------
# tameness
# --------------------------------------------------------------------------

def _orthonormal_null(M: np.ndarray, tol: float) -> np.ndarray:
    u, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:].T


def _orthonormal_row_space(M: np.ndarray, tol: float) -> np.ndarray:
    u, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[:rank].T


def is_tame(omega: SkewForm, T, J, cfg: Config = DEFAULT) -> TamingReport:
    """Positivity of q(v) = omega(Tv, TJv) transverse to ker T.

    q descends to V/ker T because J must preserve ker T; the margin is the
    least eigenvalue of the symmetrised descended form on an orthonormal
    complement of the kernel, which makes it basis independent.
    """
    Tm = np.asarray(T, dtype=float)
    Jm = _as_matrix(J)
    thr = {"rank_tol": cfg.tol.rank_tol, "kernel_tol": 1e-9}
    K = _orthonormal_null(Tm, cfg.tol.rank_tol)
    kdim = K.shape[1]
    if kdim:
        defect = float(np.linalg.norm(Tm @ Jm @ K, "fro"))
        scale = max(1.0, float(np.linalg.norm(Tm, "fro"))
                    * float(np.linalg.norm(Jm, "fro")))
        if defect > 1e-9 * scale:
            return TamingReport(False, float("-inf"), kdim,
                                "not tame, kernel not J-complex", thr)
    C = _orthonormal_row_space(Tm, cfg.tol.rank_tol)
    if C.shape[1] == 0:
        return TamingReport(True, float("inf"), kdim,
                            "T = 0: condition is vacuous", thr)
    Aq = Tm.T @ omega.matrix @ Tm @ Jm
    S = 0.5 * (Aq + Aq.T)
    M = C.T @ S @ C
    margin = float(np.min(np.linalg.eigvalsh(M)))
    return TamingReport(margin > 0, margin, kdim, "", thr)


def blend_acs(J_list, weights, T, omega: SkewForm, cfg: Config = DEFAULT) -> LinOp:
    """Convex combination of tame complex structures, retracted back.

    The weighted sum has no real eigenvalues when every input is tame
    (hypotheses are still checked), and the retraction returns a complex
    structure that is again tame; the taming report is attached to the
    result as ``taming_report``.
    """
    ws = np.asarray(weights, dtype=float)
    if ws.ndim != 1 or len(J_list) != ws.size:
        raise BlendError("need one weight per operator")
    if np.any(ws < -1e-15) or abs(ws.sum() - 1.0) > 1e-12:
        raise BlendError("weights must be a convex combination")
    mats = [_as_matrix(J) for J in J_list]
    for i, J in enumerate(J_list):
        op = J if isinstance(J, LinOp) else LinOp(J)
        if not op.is_complex_structure:
            raise BlendError(f"input {i} is not a complex structure "
                             f"(defect {op.acs_defect:.2e})")
        rep = is_tame(omega, T, op, cfg)
        if not rep.tame:
            raise BlendError(f"input {i} is not tame: {rep.reason or rep.margin}")
    A = sum(w * m for w, m in zip(ws, mats))
    if has_real_eigenvalue(A, cfg):
        raise BlendError("blended operator has a real eigenvalue; inputs "
                         "violated the taming hypotheses")
    J = retract_to_acs(A, cfg)
    rep = is_tame(omega, T, J, cfg)
    if not rep.tame:
        raise BlendError(f"blended structure failed the taming check: "
                         f"margin {rep.margin:.3e}")
    J.taming_report = rep
    return J


# --------------------------------------------------------------------------
# kernel-isomorphism verifier
# --------------------------------------------------------------------------

class PairHypothesisError(TamingError):
    """A stated assumption of the kernel-isomorphism criterion failed."""

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        super().__init__(f"hypothesis {hypothesis!r} violated"
                         + (f": {detail}" if detail else ""))


def _rank(M: np.ndarray, tol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _same_column_space(A: np.ndarray, B: np.ndarray, tol: float) -> bool:
    ra, rb = _rank(A, tol), _rank(B, tol)
    return ra == rb == _rank(np.hstack([A, B]), tol)


def verify_pair_lemma(F, bF, rhoV, rhoW, V1, W1,
                      cfg: Config = DEFAULT) -> bool:
    """Check that rhoV restricts to a bijection ker bF -> ker F.

    The hypotheses are verified individually in a fixed order and the first
    violated one is reported by name via :class:`PairHypothesisError`:
    ``commutativity``, ``image_rhoV``, ``image_rhoW``, ``quotient_iso``,
    ``kernel_iso``.
    """
    F = np.asarray(F, dtype=float)
    bF = np.asarray(bF, dtype=float)
    rhoV = np.asarray(rhoV, dtype=float)
    rhoW = np.asarray(rhoW, dtype=float)
    V1 = np.asarray(V1, dtype=float)
    W1 = np.asarray(W1, dtype=float)
    rtol = cfg.tol.rank_tol

    comm = F @ rhoV - rhoW @ bF
    scale = max(1.0, np.linalg.norm(F, "fro") * max(1.0, np.linalg.norm(rhoV, "fro")))
    if np.linalg.norm(comm, "fro") > 1e-10 * scale:
        raise PairHypothesisError("commutativity",
                                  f"|F rhoV - rhoW bF| = {np.linalg.norm(comm):.2e}")
    if not _same_column_space(rhoV, V1, rtol):
        raise PairHypothesisError("image_rhoV", "im rhoV != V1")
    if not _same_column_space(rhoW, W1, rtol):
        raise PairHypothesisError("image_rhoW", "im rhoW != W1")

    CV = _orthonormal_null(V1.T, rtol)      # complement of V1 in V
    CW = _orthonormal_null(W1.T, rtol)
    if CV.shape[1] != CW.shape[1]:
        raise PairHypothesisError("quotient_iso",
                                  f"quotient dims {CV.shape[1]} != {CW.shape[1]}")
    if CV.shape[1]:
        Q = CW.T @ F @ CV
        s = np.linalg.svd(Q, compute_uv=False)
        if s.size == 0 or s[-1] <= rtol * max(1.0, s[0]):
            raise PairHypothesisError("quotient_iso", "descended map singular")

    KV = _orthonormal_null(rhoV, rtol)
    KW = _orthonormal_null(rhoW, rtol)
    if KV.shape[1] != KW.shape[1]:
        raise PairHypothesisError("kernel_iso",
                                  f"kernel dims {KV.shape[1]} != {KW.shape[1]}")
    if KV.shape[1]:
        P = KW.T @ bF @ KV
        s = np.linalg.svd(P, compute_uv=False)
        if s.size == 0 or s[-1] <= rtol * max(1.0, s[0]):
            raise PairHypothesisError("kernel_iso",
                                      "bF singular between the structure kernels")

    KbF = _orthonormal_null(bF, rtol)
    KF = _orthonormal_null(F, rtol)
    if KbF.shape[1] != KF.shape[1]:
        return False
    if KbF.shape[1] == 0:
        return True
    image = rhoV @ KbF
    if _rank(image, rtol) != KbF.shape[1]:
        return False
    return _same_column_space(image, KF, rtol)
