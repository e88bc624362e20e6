"""
Geostrophically balanced states and the discrete divergence diagnostic.

A streamfunction psi in P2 gives the balanced pair

    u = perp grad psi = (-psi_y, psi_x)      (exactly representable in P1DG)
    h = (Fr^2 / Ro) psi

Two ways to build u are provided: pointwise differentiation of the local
quadratic, and the weak path M_u^{-1} G psi followed by the rotation. They
agree to round-off because M_u^{-1} G reproduces the gradient exactly.

When psi vanishes on every boundary dof, G^T u = 0 holds exactly, so the
balanced state is a fixed point of the time stepper.
"""

import numpy as np
import scipy.sparse as sp
import structlog

from src.config import SystemConfig
from src.errors import ConfigError
from src.operators.assembly import OperatorSet
from src.spaces.function_space import (
    Field, P1DGVectorSpace, P2ScalarSpace, pointwise_gradient,
)

logger = structlog.get_logger("analysis.balance")


def perpendicular(q: Field) -> Field:
    """Rotate a P1DG vector field by +90 degrees: (a, b) -> (-b, a)."""
    comps = q.space.components(q.coefficients)
    out = np.empty_like(comps)
    out[:, 0] = -comps[:, 1]
    out[:, 1] = comps[:, 0]
    return Field(q.space, out.ravel())


def balanced_velocity(psi: Field, config: SystemConfig | None = None,
                      v_space: P1DGVectorSpace | None = None) -> tuple[Field, Field | None]:
    """
    Balanced (u, h) from a P2 streamfunction.

    h is None when no SystemConfig is given. For Ro = inf it is zero.
    """
    if psi.is_vector:
        raise ConfigError("balanced_velocity needs a P2 streamfunction")
    u = perpendicular(pointwise_gradient(psi, v_space))
    h = None
    if config is not None:
        h = psi * config.balance_ratio
    return u, h


def weak_balanced_velocity(psi: Field, ops: OperatorSet) -> Field:
    """u = perp(M_u^{-1} G psi)."""
    q = Field(ops.v_space, ops.Mu_inverse @ (ops.G @ psi.coefficients))
    return perpendicular(q)


def divergence_residual(u: Field, ops: OperatorSet) -> np.ndarray:
    """r_j = int grad phi_j . u, the weak divergence tested against every P2 function."""
    return ops.Gt @ u.coefficients


def discrete_divergence_norm(u: Field, ops: OperatorSet) -> float:
    """sqrt(r^T M_h^{-1} r): the M_h norm of the P2 function representing G^T u."""
    r = divergence_residual(u, ops)
    if not np.any(r):
        return 0.0
    x = ops.mass_solve(r)
    return float(np.sqrt(abs(r @ x)))


def _dof_adjacency(space: P2ScalarSpace) -> sp.csr_matrix:
    """Binary matrix linking dofs that share an element (diagonal included)."""
    dofs = space.cell_dofs
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                        shape=(space.n_dofs, space.n_dofs)).tocsr()
    adj.data[:] = 1.0
    return adj


def random_boundary_zero_streamfunction(space: P2ScalarSpace, seed: int,
                                        smoothness: int = 2) -> Field:
    """
    Pseudo-random P2 streamfunction with every boundary dof exactly zero.

    Interior coefficients are standard normal draws (numpy default_rng,
    PCG64). Each smoothing pass replaces a coefficient by the mean over the
    dofs it shares an element with, then re-zeroes the boundary. The result
    is scaled to unit max-norm.
    """
    if smoothness < 0:
        raise ConfigError(f"smoothness must be >= 0, got {smoothness}")
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(space.n_dofs)
    boundary = space.boundary_dofs
    coeffs[boundary] = 0.0

    if smoothness:
        adj = _dof_adjacency(space)
        degree = np.asarray(adj.sum(axis=1)).ravel()
        for _ in range(smoothness):
            coeffs = (adj @ coeffs) / degree
            coeffs[boundary] = 0.0

    peak = np.abs(coeffs).max()
    if peak > 0:
        coeffs /= peak
    logger.debug("random_streamfunction", seed=seed, smoothness=smoothness, n_dofs=space.n_dofs)
    return Field(space, coeffs)
