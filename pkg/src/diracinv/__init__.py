"""Direct and inverse spectral problems for matrix Dirac operators on [0, 1]."""
from .accelerant import (
    Accelerant,
    BlockKernelF,
    accelerant_from_data,
    accelerant_test,
    assemble_f,
    check_a3,
    sharp,
)
from .core import Potential, TriangularKernel, UniformGrid, symmetric_grid, unit_grid
from .direct import CharacteristicEvaluator, find_eigenvalues, norming_matrices, spectral_data, weyl_m
from .errors import DiracInvError, FallbackToDense, GridMismatch, SingularRow, StageError
from .krein import (
    factorization_check,
    glm_solve,
    krein_solve,
    krein_solve_dense,
    krein_solve_fast,
    l_from_krein,
    theta,
)
from .pipeline import ReconstructionConfig, convergence_study, reconstruct, roundtrip
from .spectra import A1Bounds, EigenRecord, SpectralData, check_a1, check_a2

__version__ = "0.1.0"
