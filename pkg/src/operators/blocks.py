"""
Block-diagonal operators on the P1DG velocity space.

One dense 6x6 block per element acting on [x0, x1, x2, y0, y1, y2]. There is
never any coupling between elements, so products, solves and inverses are
batched numpy calls over the leading element axis.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import structlog

from src.errors import NumericalError

logger = structlog.get_logger("operators.blocks")

BLOCK_SIZE = 6
SINGULAR_CONDITION = 1e13   # blocks worse than this are treated as singular


@dataclass(frozen=True, eq=False)
class ElementBlockOperator:
    blocks: np.ndarray    # (m, 6, 6)

    def __post_init__(self):
        blocks = np.ascontiguousarray(self.blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[1:] != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(f"blocks must have shape (m, 6, 6), got {blocks.shape}")
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_elements(self) -> int:
        return len(self.blocks)

    @property
    def shape(self) -> tuple[int, int]:
        n = BLOCK_SIZE * self.n_elements
        return (n, n)

    # --- Arithmetic ---

    def __add__(self, other: "ElementBlockOperator") -> "ElementBlockOperator":
        return ElementBlockOperator(self.blocks + other.blocks)

    def __sub__(self, other: "ElementBlockOperator") -> "ElementBlockOperator":
        return ElementBlockOperator(self.blocks - other.blocks)

    def __mul__(self, scalar: float) -> "ElementBlockOperator":
        return ElementBlockOperator(scalar * self.blocks)

    __rmul__ = __mul__

    @property
    def T(self) -> "ElementBlockOperator":
        return ElementBlockOperator(np.swapaxes(self.blocks, 1, 2))

    # --- Application ---

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("mij,mj->mi", self.blocks, np.asarray(x).reshape(-1, BLOCK_SIZE)).ravel()

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x)

    def check_conditioning(self) -> None:
        """Raise NumericalError naming the first (near-)singular element block."""
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.linalg.cond(self.blocks)
        bad = np.flatnonzero(~np.isfinite(cond) | (cond > SINGULAR_CONDITION))
        if bad.size:
            e = int(bad[0])
            logger.error("singular_element_block", element=e, condition=float(cond[e]),
                         n_bad=int(bad.size))
            raise NumericalError(
                f"element block {e} is singular (condition {cond[e]:.3e}); "
                f"the mesh has a degenerate triangle")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Independent dense solves per element."""
        self.check_conditioning()
        b = np.asarray(rhs, dtype=float).reshape(-1, BLOCK_SIZE, 1)
        return np.linalg.solve(self.blocks, b).ravel()

    def inverse(self) -> "ElementBlockOperator":
        self.check_conditioning()
        return ElementBlockOperator(np.linalg.inv(self.blocks))

    def to_sparse(self) -> sp.csr_matrix:
        m = self.n_elements
        bsr = sp.bsr_matrix((self.blocks.copy(), np.arange(m), np.arange(m + 1)), shape=self.shape)
        return bsr.tocsr()
