"""Random instances for the kernel-isomorphism verifier.

An instance is assembled from random invertible blocks so that every
hypothesis holds exactly (up to float rounding); mutation helpers break one
named hypothesis while keeping the earlier-checked ones intact.
"""

import numpy as np


def _well_conditioned(rng, n, m=None):
    m = n if m is None else m
    while True:
        M = rng.normal(size=(n, m))
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] > 0.15:
            return M


def random_pair_instance(rng, p=2, q=2, k=1, p_w=None):
    """Dims: V1 = p inside V = p+q; W1 = p_w inside W = p_w+q; kernels k."""
    p_w = p if p_w is None else p_w
    dimV, dimW = p + q, p_w + q
    dimbV, dimbW = p + k, p_w + k

    V1 = _well_conditioned(rng, dimV, p)
    W1 = _well_conditioned(rng, dimW, p_w)
    RV = _well_conditioned(rng, p, dimbV)      # surjective, kernel dim k
    RW = _well_conditioned(rng, p_w, dimbW)
    rhoV = V1 @ RV
    rhoW = W1 @ RW

    def null_basis(M):
        u, s, vt = np.linalg.svd(M)
        return vt[M.shape[0]:].T

    KV0 = null_basis(RV)                       # ker rhoV inside bV
    KW0 = null_basis(RW)
    SV = null_basis(KV0.T)                     # complement of the kernel
    Z = _well_conditioned(rng, k)              # kernel iso block
    bF_on_SV = rng.normal(size=(dimbW, p))
    bF = np.hstack([KW0 @ Z, bF_on_SV]) @ np.linalg.inv(np.hstack([KV0, SV]))

    # F on V1 is forced by commutativity; on a complement it is free with an
    # invertible descended block
    RV_pinv = np.linalg.pinv(RV)
    F_on_V1 = W1 @ (RW @ bF @ RV_pinv)         # columns: images of V1 basis
    CV0 = null_basis(V1.T)
    CW0 = null_basis(W1.T)
    Q = _well_conditioned(rng, q)
    F_on_CV0 = CW0 @ Q + W1 @ rng.normal(size=(p_w, q)) * 0.3
    B = np.hstack([V1, CV0])
    F = np.hstack([F_on_V1, F_on_CV0]) @ np.linalg.inv(B)
    return {"F": F, "bF": bF, "rhoV": rhoV, "rhoW": rhoW, "V1": V1, "W1": W1,
            "_blocks": {"KV0": KV0, "KW0": KW0, "SV": SV, "CV0": CV0,
                        "CW0": CW0, "RV": RV, "RW": RW}}


def mutate(instance, which, rng):
    """Return a copy violating exactly the named hypothesis."""
    inst = {k: (v.copy() if isinstance(v, np.ndarray) else v)
            for k, v in instance.items()}
    b = instance["_blocks"]
    if which == "commutativity":
        inst["F"] = inst["F"] + 0.05 * rng.normal(size=inst["F"].shape)
    elif which == "image_rhoV":
        inst["V1"] = _well_conditioned(rng, inst["V1"].shape[0],
                                       inst["V1"].shape[1] )
    elif which == "image_rhoW":
        inst["W1"] = _well_conditioned(rng, inst["W1"].shape[0],
                                       inst["W1"].shape[1])
    elif which == "quotient_iso":
        # kill the descended map along one quotient direction, keeping F on
        # V1 (hence commutativity) untouched
        q = b["CV0"].shape[1]
        Qbad = np.zeros((q, q))
        Qbad[: q - 1, : q - 1] = np.eye(q - 1)
        F_on_V1 = inst["F"] @ instance["V1"]
        F_on_CV0 = b["CW0"] @ Qbad
        B = np.hstack([instance["V1"], b["CV0"]])
        inst["F"] = np.hstack([F_on_V1, F_on_CV0]) @ np.linalg.inv(B)
    elif which == "kernel_iso":
        # singular block between the structure kernels; F on V1 must be
        # rebuilt to keep commutativity
        k = b["KV0"].shape[1]
        Zbad = np.zeros((k, k))
        Zbad[: k - 1, : k - 1] = np.eye(k - 1)
        p = b["SV"].shape[1]
        bF_on_SV = instance["bF"] @ b["SV"]
        bF = np.hstack([b["KW0"] @ Zbad, bF_on_SV]) \
            @ np.linalg.inv(np.hstack([b["KV0"], b["SV"]]))
        inst["bF"] = bF
        RV_pinv = np.linalg.pinv(b["RV"])
        F_on_V1 = instance["W1"] @ (b["RW"] @ bF @ RV_pinv)
        F_on_CV0 = instance["F"] @ b["CV0"]
        B = np.hstack([instance["V1"], b["CV0"]])
        inst["F"] = np.hstack([F_on_V1, F_on_CV0]) @ np.linalg.inv(B)
    else:
        raise ValueError(which)
    return inst


def as_args(instance):
    return (instance["F"], instance["bF"], instance["rhoV"],
            instance["rhoW"], instance["V1"], instance["W1"])
