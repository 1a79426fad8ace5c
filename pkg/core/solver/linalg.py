# core/solver/linalg.py
from typing import Optional
import numpy as np
from scipy.sparse import csr_matrix

from core.config import CONFIG
from core.errors import NoConvergence
from core.utils.logging import get_logger

logger = get_logger(__name__)

INNER_TOLERANCE_FLOOR = 1e-12


class ConjugateGradient:
    """Jacobi-preconditioned conjugate gradients for a symmetric positive definite matrix.

    Convergence is judged on the recursively updated residual: ||r|| <= tol * ||b||.
    """

    def __init__(self, A: csr_matrix, tol: float = CONFIG.tol_lin, max_iter: Optional[int] = None):
        self.A = A
        self.tol = tol
        self.max_iter = max_iter if max_iter is not None else 10 * A.shape[0] + 10
        diag = A.diagonal()
        self.inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
        self.iterations = 0
        self.residual = np.nan
        self.converged = False

    def solve(self, b: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        self.iterations = 0
        b_norm = float(np.linalg.norm(b))
        if b_norm == 0.0:
            self.residual, self.converged = 0.0, True
            return np.zeros_like(b)
        x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
        r = b - self.A @ x
        target = self.tol * b_norm
        res = float(np.linalg.norm(r))
        if res <= target:
            self.residual, self.converged = res, True
            return x
        z = self.inv_diag * r
        d = z.copy()
        rz = float(r @ z)
        for k in range(1, self.max_iter + 1):
            Ad = self.A @ d
            alpha = rz / float(d @ Ad)
            x += alpha * d
            r -= alpha * Ad
            res = float(np.linalg.norm(r))
            if res <= target:
                self.iterations, self.residual, self.converged = k, res, True
                return x
            z = self.inv_diag * r
            rz_next = float(r @ z)
            d = z + (rz_next / rz) * d
            rz = rz_next
        self.iterations, self.residual, self.converged = self.max_iter, res, False
        raise NoConvergence(
            f"conjugate gradients stalled at relative residual {res / b_norm:.3e} after {self.max_iter} iterations"
        )


def cg_solve(A: csr_matrix, b: np.ndarray, tol: float = CONFIG.tol_lin, max_iter: Optional[int] = None,
             x0: Optional[np.ndarray] = None) -> np.ndarray:
    return ConjugateGradient(A, tol, max_iter).solve(b, x0)


class LinearSolver:
    """Repeated solves with one matrix, warm-started from the previous solution."""

    def __init__(self, A: csr_matrix, tol: float = CONFIG.tol_lin):
        self._cg = ConjugateGradient(A, tol)
        self._last: Optional[np.ndarray] = None
        self.total_iterations = 0

    def solve(self, b: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
        x = self._cg.solve(b, x0 if x0 is not None else self._last)
        self.total_iterations += self._cg.iterations
        self._last = x
        return x


def rayleigh_quotient(K: csr_matrix, M: csr_matrix, x: np.ndarray) -> float:
    return float(x @ (K @ x)) / float(x @ (M @ x))


def inverse_power_iteration(
    K: csr_matrix,
    M: csr_matrix,
    x0: np.ndarray,
    tol: float = CONFIG.eigen_tol,
    vector_tol: float = 1e-8,
    max_iter: int = CONFIG.max_outer,
) -> tuple[float, np.ndarray, int]:
    """Smallest eigenpair of K x = lambda M x; returns (lambda, x with x^T M x = 1, iterations)."""
    x = np.asarray(x0, dtype=float)
    x = x / np.sqrt(float(x @ (M @ x)))
    lam = float(x @ (K @ x))
    cg = ConjugateGradient(K)
    for it in range(1, max_iter + 1):
        Mx = M @ x
        outer = float(np.linalg.norm(K @ x - lam * Mx)) / float(np.linalg.norm(lam * Mx))
        cg.tol = max(1e-2 * outer, INNER_TOLERANCE_FLOOR)
        y = cg.solve(Mx, x / lam)
        y = y / np.sqrt(float(y @ (M @ y)))
        lam_next = float(y @ (K @ y))
        d_lam = abs(lam_next - lam) / abs(lam_next)
        d_vec = float(np.max(np.abs(y - x))) / float(np.max(np.abs(y)))
        x, lam = y, lam_next
        if d_lam < tol and d_vec < vector_tol:
            logger.message("Finished").subject("eigen").details(lam=lam, iterations=it).log("debug")
            return lam, x, it
    raise NoConvergence(f"inverse power iteration did not settle in {max_iter} iterations (last lambda {lam:.12g})")
