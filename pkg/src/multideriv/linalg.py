"""Sparse assembly, direct solves, and restarted GMRES with block Jacobi."""
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import GMRESStalled, SingularSystem


class TripletAssembler:
    """Collects (row, col, value) triplets; duplicates are summed on finalize."""

    def __init__(self, shape):
        self.shape = shape
        self._rows, self._cols, self._vals = [], [], []

    def add(self, rows, cols, vals):
        rows, cols, vals = np.broadcast_arrays(rows, cols, vals)
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel())

    def add_blocks(self, row_index, col_index, blocks):
        """Scatter dense blocks (..., r, c) at index arrays (..., r) and (..., c)."""
        rows = np.broadcast_to(row_index[..., :, None], blocks.shape)
        cols = np.broadcast_to(col_index[..., None, :], blocks.shape)
        self.add(rows, cols, blocks)

    def finalize(self):
        if not self._rows:
            return sp.csr_matrix(self.shape)
        A = sp.coo_matrix(
            (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
            shape=self.shape,
        )
        return A.tocsr()


class DirectSolver:
    """Sparse LU factorization reusable across right-hand sides."""

    def __init__(self, A):
        self.A = sp.csc_matrix(A)
        try:
            self._lu = spla.splu(self.A)
        except RuntimeError as exc:
            raise SingularSystem(f"sparse LU failed: {exc}") from exc

    def __call__(self, b):
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite solution from sparse LU")
        return x


def solve_direct(A, b, rel_tol=1e-12):
    x = DirectSolver(A)(b)
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        res = np.linalg.norm(A @ x - b) / bnorm
        if res > rel_tol:
            # one step of iterative refinement usually recovers the last digits
            x = x + DirectSolver(A)(b - A @ x)
            res = np.linalg.norm(A @ x - b) / bnorm
            if res > max(rel_tol, 1e-8):
                raise SingularSystem(f"relative residual {res:.3e} after direct solve")
    return x


class BlockJacobiPreconditioner:
    """Inverse of the block diagonal of A with uniform block size."""

    def __init__(self, A, block_size):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        if n % block_size:
            raise ValueError("matrix size is not a multiple of the block size")
        self.block_size = block_size
        nb = n // block_size
        coo = A.tocoo()
        bi = coo.row // block_size
        keep = bi == coo.col // block_size
        blocks = np.zeros((nb, block_size, block_size))
        np.add.at(blocks, (bi[keep], coo.row[keep] % block_size, coo.col[keep] % block_size), coo.data[keep])
        try:
            self.inverse_blocks = np.linalg.inv(blocks)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("singular diagonal block in block Jacobi") from exc

    def __call__(self, v):
        bs = self.block_size
        return np.einsum("kij,kj->ki", self.inverse_blocks, v.reshape(-1, bs)).ravel()


def gmres(A, b, M=None, x0=None, rel_tol=1e-12, restart=60, max_iter=5000, residuals=None):
    """Right-preconditioned restarted GMRES.

    Returns (x, iterations).  Residual norms relative to |b| are appended to
    ``residuals`` when a list is given.  Raises GMRESStalled carrying the
    best iterate if the tolerance is not met within ``max_iter``.
    """
    matvec = A.__matmul__ if hasattr(A, "__matmul__") else A
    precond = M if M is not None else (lambda v: v)
    b = np.asarray(b, dtype=float)
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    target = rel_tol * bnorm
    total = 0
    r = b - matvec(x)
    beta = np.linalg.norm(r)
    while beta > target and total < max_iter:
        m = min(restart, max_iter - total)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_used = 0
        for j in range(m):
            w = matvec(precond(V[j]))
            # classical Gram-Schmidt, applied twice for stability
            h = V[: j + 1] @ w
            w = w - V[: j + 1].T @ h
            h2 = V[: j + 1] @ w
            w = w - V[: j + 1].T @ h2
            H[: j + 1, j] = h + h2
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_used = j + 1
            if residuals is not None:
                residuals.append(abs(g[j + 1]) / bnorm)
            breakdown = abs(H[j, j]) < 1e-300 or denom == 0.0
            if abs(g[j + 1]) <= target or breakdown:
                break
            if j + 1 < m:
                V[j + 1] = w / np.linalg.norm(w)
        y = np.linalg.solve(np.triu(H[:j_used, :j_used]), g[:j_used])
        x = x + precond(V[:j_used].T @ y)
        r = b - matvec(x)
        beta = np.linalg.norm(r)
    if beta > target:
        raise GMRESStalled(
            f"GMRES relative residual {beta / bnorm:.3e} after {total} iterations",
            x=x,
            residual=beta / bnorm,
        )
    return x, total
