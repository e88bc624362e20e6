"""
Crank-Nicolson time stepping with a Schur complement on the thickness.

The trapezoidal rule applied to

    M_u du/dt + (1/Ro) C u + (1/Fr^2) G h = 0
    M_h dh/dt - G^T u                     = 0

gives, with k = dt/2 and A = M_u + k/Ro C,

    A u'   + k/Fr^2 G h'  = (M_u - k/Ro C) u - k/Fr^2 G h      =: r_u
    M_h h' - k G^T u'     = M_h h + k G^T u                     =: r_h

A is block diagonal, so u' is eliminated element by element:

    S h' = r_h + k G^T A^{-1} r_u,   S = M_h + k^2/Fr^2 G^T A^{-1} G
    u'   = A^{-1} (r_u - k/Fr^2 G h')

S is factorised once per (mesh, dt). It is nonsymmetric when Ro < inf,
so the direct path uses SuperLU; large systems fall back to GMRES with an
incomplete-LU preconditioner at a 1e-12 relative residual.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import structlog

from src.config import SystemConfig
from src.errors import ConfigError, NumericalError
from src.operators.assembly import OperatorSet
from src.operators.blocks import ElementBlockOperator
from src.spaces.function_space import Field

logger = structlog.get_logger("dynamics.stepper")

SOLVER_RTOL = 1e-12
ITERATIVE_MAXITER = 2000
DIRECT_MAX_DOFS = 200_000


@dataclass(frozen=True)
class State:
    u: Field
    h: Field
    t: float = 0.0

    def __post_init__(self):
        if not self.u.is_vector or self.h.is_vector:
            raise ConfigError("State needs a P1DG velocity and a P2 thickness")
        if self.u.space.mesh is not self.h.space.mesh:
            raise ConfigError("velocity and thickness live on different meshes")

    def coefficients(self) -> np.ndarray:
        """u and h stacked into one vector (for drift and linearity checks)."""
        return np.concatenate([self.u.coefficients, self.h.coefficients])


@dataclass(eq=False)
class SchurSystem:
    ops: OperatorSet
    config: SystemConfig
    A_inverse: ElementBlockOperator
    B: ElementBlockOperator                # explicit half: M_u - (dt/2)/Ro C
    S: sp.csc_matrix
    solver: str
    _solve: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    iterations: list[int] = field(default_factory=list, repr=False)

    @property
    def dt(self) -> float:
        return self.config.dt

    def solve_schur(self, rhs: np.ndarray) -> np.ndarray:
        return self._solve(rhs)


def _direct_solver(S: sp.csc_matrix):
    try:
        lu = spla.splu(S)
    except RuntimeError as e:
        raise NumericalError(f"Schur matrix factorisation failed: {e}") from e
    return lu.solve


def _iterative_solver(S: sp.csc_matrix, iterations: list[int]):
    try:
        ilu = spla.spilu(S, drop_tol=1e-6, fill_factor=20)
        precond = spla.LinearOperator(S.shape, ilu.solve)
    except RuntimeError:
        logger.warning("ilu_failed_unpreconditioned")
        precond = None

    def solve(rhs: np.ndarray) -> np.ndarray:
        count = [0]

        def _cb(_):
            count[0] += 1

        x, info = spla.gmres(S, rhs, rtol=SOLVER_RTOL, atol=0.0, restart=100,
                             maxiter=ITERATIVE_MAXITER, M=precond,
                             callback=_cb, callback_type="pr_norm")
        norm = np.linalg.norm(rhs)
        residual = np.linalg.norm(S @ x - rhs) / (norm if norm > 0 else 1.0)
        if info != 0 or residual > 10 * SOLVER_RTOL:
            logger.error("schur_solve_not_converged", info=info, residual=float(residual))
            raise NumericalError(
                f"Schur solve did not converge (info={info}, relative residual {residual:.3e})")
        iterations.append(count[0])
        return x

    return solve


def build_stepper(ops: OperatorSet, config: SystemConfig, solver: str = "auto",
                  direct_max_dofs: int = DIRECT_MAX_DOFS) -> SchurSystem:
    """Factorise the element blocks A_e and the Schur matrix S for one dt."""
    k = 0.5 * config.dt
    rot = k * config.inverse_rossby

    A = ops.Mu + rot * ops.C if rot else ops.Mu
    B = ops.Mu - rot * ops.C if rot else ops.Mu
    A_inverse = A.inverse()

    coupling = (ops.Gt @ A_inverse.to_sparse() @ ops.G)
    S = (ops.Mh + (k * k * config.inverse_froude_sq) * coupling).tocsc()

    if solver == "auto":
        solver = "direct" if ops.s_space.n_dofs <= direct_max_dofs else "iterative"
    iterations: list[int] = []
    if solver == "direct":
        solve = _direct_solver(S)
    elif solver == "iterative":
        solve = _iterative_solver(S, iterations)
    else:
        raise ConfigError(f"unknown solver '{solver}'")

    logger.info("stepper_built", n_elements=ops.mesh.n_triangles, n_p2_dofs=ops.s_space.n_dofs,
                dt=config.dt, ro=config.ro, fr=config.fr, solver=solver, nnz_s=int(S.nnz))
    return SchurSystem(ops=ops, config=config, A_inverse=A_inverse, B=B, S=S,
                       solver=solver, _solve=solve, iterations=iterations)


def step(sys: SchurSystem, state: State) -> State:
    """Advance one Crank-Nicolson step of size sys.dt."""
    ops, cfg = sys.ops, sys.config
    k = 0.5 * cfg.dt
    g = k * cfg.inverse_froude_sq
    u = state.u.coefficients
    h = state.h.coefficients

    r_u = sys.B @ u - g * (ops.G @ h)
    r_h = ops.Mh @ h + k * (ops.Gt @ u)

    h_new = sys.solve_schur(r_h + k * (ops.Gt @ (sys.A_inverse @ r_u)))
    u_new = sys.A_inverse @ (r_u - g * (ops.G @ h_new))

    return State(u=state.u.with_coefficients(u_new), h=state.h.with_coefficients(h_new),
                 t=state.t + cfg.dt)


Observer = Callable[[int, State], None]


def run(sys: SchurSystem, state0: State, t_end: float,
        observer: Observer | None = None, every: int = 1) -> State:
    """
    Step from state0.t to t_end.

    The step count is round((t_end - t0) / dt), so the final time is within
    dt/2 of t_end. The observer sees (step index, state) for the initial
    state, every `every` steps, and the final state.
    """
    span = t_end - state0.t
    if span * np.sign(sys.dt) < -0.5 * abs(sys.dt):
        raise ConfigError(f"t_end {t_end} lies behind the initial time {state0.t}")
    n_steps = max(0, int(round(span / sys.dt)))

    state = state0
    if observer:
        observer(0, state)
    for n in range(1, n_steps + 1):
        state = step(sys, state)
        if observer and (n % every == 0 or n == n_steps):
            observer(n, state)

    logger.debug("run_complete", steps=n_steps, t=state.t)
    # Snap accumulated round-off in t
    return replace(state, t=state0.t + n_steps * sys.dt)


def energy(state: State, ops: OperatorSet, config: SystemConfig) -> float:
    """E = 1/2 (u^T M_u u + 1/Fr^2 h^T M_h h)."""
    u = state.u.coefficients
    h = state.h.coefficients
    kinetic = float(u @ (ops.Mu @ u))
    potential = float(h @ (ops.Mh @ h))
    return 0.5 * (kinetic + config.inverse_froude_sq * potential)
