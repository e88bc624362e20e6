"""
Spectrum of the P2 Laplacian pencil K x = lambda M_h x.

A stable discretisation has exactly one near-zero eigenvalue per connected
component (the constant) and nothing else close to zero. The dense path
solves the full generalized symmetric problem; the optional iterative path
uses ARPACK shift-invert around a negative shift for the lowest modes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import structlog

from src.errors import ConfigError, NumericalError
from src.operators.assembly import OperatorSet

logger = structlog.get_logger("analysis.spectrum")

NEAR_ZERO_THRESHOLD = 1e-8     # relative to lambda_max
DENSE_CAP = 3000               # P2 dofs
SHIFT = -1.0                   # K - SHIFT*M_h is SPD


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray     # ascending
    threshold: float            # absolute cut, = relative threshold * lambda_max
    lambda_max: float
    near_zero_count: int
    method: str

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues >= self.threshold]

    @property
    def gap_ratio(self) -> float | None:
        """Second over first nonzero eigenvalue (about 1 to a few on a clean spectrum)."""
        nz = self.nonzero
        if len(nz) < 2:
            return None
        return float(nz[1] / nz[0])

    def to_rows(self) -> list[dict]:
        return [{"index": i, "eigenvalue": float(lam), "near_zero": int(lam < self.threshold)}
                for i, lam in enumerate(self.eigenvalues)]

    def summary(self) -> dict:
        nz = self.nonzero
        return {
            "method": self.method,
            "n_eigenvalues": int(len(self.eigenvalues)),
            "near_zero_count": self.near_zero_count,
            "threshold": self.threshold,
            "lambda_max": self.lambda_max,
            "first_nonzero": float(nz[0]) if len(nz) else None,
            "gap_ratio": self.gap_ratio,
        }


def _dense(K: sp.spmatrix, M: sp.spmatrix) -> np.ndarray:
    try:
        return scipy.linalg.eigh(K.toarray(), M.toarray(), eigvals_only=True)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"dense eigensolve failed: {e}") from e


def _shift_invert(K: sp.spmatrix, M: sp.spmatrix, k: int) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    k = min(k, n - 2)
    try:
        top = spla.eigsh(K.tocsc(), k=1, M=M.tocsc(), which="LA", return_eigenvectors=False)
        low = spla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=SHIFT, which="LM",
                         return_eigenvectors=False)
    except (spla.ArpackNoConvergence, spla.ArpackError) as e:
        raise NumericalError(f"iterative eigensolve failed: {e}") from e
    return np.sort(low), float(top[0])


def laplacian_spectrum(ops: OperatorSet, near_zero_threshold: float = NEAR_ZERO_THRESHOLD,
                       dense_cap: int = DENSE_CAP, iterative: bool = False,
                       n_eigenvalues: int = 20,
                       stiffness: sp.spmatrix | None = None) -> SpectrumReport:
    """
    Eigenvalues of K x = lambda M_h x.

    Args:
        near_zero_threshold: relative to lambda_max
        dense_cap: largest P2 dof count for the dense path
        iterative: use shift-invert and return only the lowest n_eigenvalues
        stiffness: alternative left-hand operator (e.g. G^T M_u^{-1} G)
    """
    K = ops.K if stiffness is None else stiffness
    M = ops.Mh
    n = K.shape[0]

    if iterative:
        eigenvalues, lam_max = _shift_invert(K, M, n_eigenvalues)
        method = "shift-invert"
    else:
        if n > dense_cap:
            raise ConfigError(
                f"{n} P2 dofs exceeds the dense eigensolve cap {dense_cap}; "
                "coarsen the mesh or set iterative_eigensolver = true")
        eigenvalues = _dense(K, M)
        lam_max = float(eigenvalues[-1])
        method = "dense"

    threshold = near_zero_threshold * lam_max
    if eigenvalues[0] < -threshold:
        raise NumericalError(
            f"pencil is indefinite: smallest eigenvalue {eigenvalues[0]:.3e} < -{threshold:.3e}")
    count = int((eigenvalues < threshold).sum())

    report = SpectrumReport(eigenvalues=eigenvalues, threshold=threshold, lambda_max=lam_max,
                            near_zero_count=count, method=method)
    logger.info("spectrum_computed", n_dofs=n, **report.summary())
    return report
