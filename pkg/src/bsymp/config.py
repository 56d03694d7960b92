"""Global numeric tolerances and sampling defaults.

Every certificate records the values that were in effect, so reports stay
interpretable when the defaults change.
"""

from dataclasses import dataclass, field, asdict


@dataclass(frozen=True)
class Tolerances:
    # zero tests on sampled grids
    tol_zero: float = 1e-10
    # lower margins (transversality derivative, u nonvanishing, ...)
    tol_margin: float = 1e-6
    # relative threshold for calling an eigenvalue real
    eig_real_rel: float = 1e-9
    # complex-structure flag: ||J^2 + I||_F below this
    acs_flag: float = 1e-12
    # retraction output quality: ||J^2 + I||_F below this
    acs_result: float = 1e-10
    # rank / kernel decisions in the pair-lemma verifier
    rank_tol: float = 1e-9
    # cosymplectic nondegeneracy margin for theta ^ sigma^(n-1)
    cosymplectic_margin: float = 1e-8
    # sampled equality of forms / roundtrips
    tol_equality: float = 1e-9


@dataclass(frozen=True)
class Sampling:
    grid: int = 10                # points per axis for box grids
    sphere_samples: int = 32      # directions per base point
    random_points: int = 200      # unstructured samples for zero tests
    seed: int = 20260809
    t_max: float = 1.0            # cap for taming-parameter searches


@dataclass(frozen=True)
class Config:
    tol: Tolerances = field(default_factory=Tolerances)
    sampling: Sampling = field(default_factory=Sampling)

    def snapshot(self) -> dict:
        return {"tolerances": asdict(self.tol), "sampling": asdict(self.sampling)}


DEFAULT = Config()
