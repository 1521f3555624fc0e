"""Extremal eigenpairs of symmetric operators by thick-restart Lanczos.

The Krylov basis is fully reorthogonalized, both internally and against every
eigenvector already locked (deflation). Each cycle does a Rayleigh-Ritz
projection on the whole basis, locks the converged extremal Ritz pairs, and
restarts from the wanted unconverged Ritz vectors. Once enough pairs are
locked, a verification cycle in the complement of the locked space catches
eigenvalues a single Krylov sequence cannot see (repeated eigenvalues,
unlucky start vectors).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class EigenNonConvergence(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def _operator(m):
    """Return ``(matvec, n, frobenius_norm_or_None)``."""
    if sp.issparse(m):
        m = m.tocsr()
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        return (lambda x: m @ x), m.shape[0], float(np.sqrt((m.data ** 2).sum()))
    if isinstance(m, np.ndarray):
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        return (lambda x: m @ x), m.shape[0], float(np.linalg.norm(m))
    # duck-typed operator: needs .shape and .matvec (scipy LinearOperator fits)
    n = m.shape[0]
    return m.matvec, n, getattr(m, "frobenius_norm", None)


def _orth(x, bases, passes=2):
    for _ in range(passes):
        for b in bases:
            if b.shape[1]:
                x = x - b @ (b.T @ x)
    return x


def _fix_sign(v):
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


class _Solver:
    def __init__(self, matvec, n, fro, tol, budget, dim, seed):
        self.matvec = matvec
        self.n = n
        self.fro = fro
        self.scale = fro if fro is not None else 0.0
        self.tol = tol
        self.budget = budget
        self.dim = dim
        self.rng = np.random.default_rng(seed)
        self.locked = np.zeros((n, 0))
        self.vals: list[float] = []
        self.used = 0
        self.last_residual = np.inf

    def tol_abs(self):
        return self.tol * self.scale

    def _random(self):
        return self.rng.standard_normal(self.n)

    def _next_vector(self, v, Q):
        before = np.linalg.norm(v)
        v = _orth(v, (self.locked, Q))
        if np.linalg.norm(v) <= 1e-10 * max(before, 1e-300):
            # Krylov space is invariant: extend with a fresh direction
            v = _orth(self._random(), (self.locked, Q))
        nv = np.linalg.norm(v)
        return v / nv if nv > 1e-12 else None

    def cycle(self, Q, W, v, want):
        """Expand the basis, project, and return Ritz data (ascending)."""
        room = self.n - self.locked.shape[1]
        limit = min(max(self.dim, want + 10), room)
        n0 = Q.shape[1]
        Qb = np.zeros((self.n, limit))
        Wb = np.zeros((self.n, limit))
        Qb[:, :n0] = Q
        Wb[:, :n0] = W
        j = n0
        while j < limit:
            q = self._next_vector(v, Qb[:, :j])
            if q is None:
                break
            w = self.matvec(q)
            self.used += 1
            Qb[:, j] = q
            Wb[:, j] = w
            j += 1
            v = w
        Q, W = Qb[:, :j], Wb[:, :j]
        H = Q.T @ W
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        Y = Q @ S
        MY = W @ S
        res = np.linalg.norm(MY - Y * theta, axis=0)
        if self.fro is None:
            self.scale = max(self.scale, float(np.abs(theta).max()))
        complete = j == room
        return theta, Y, MY, res, complete

    def lock(self, vecs, vals):
        self.locked = np.column_stack([self.locked, vecs])
        self.vals.extend(float(x) for x in vals)
        order = np.argsort(self.vals, kind="stable")
        self.vals = [self.vals[i] for i in order]
        self.locked = self.locked[:, order]

    def find(self, k):
        """Lock ``k`` more extremal pairs of the deflated operator.

        Returns True when the final cycle spanned the whole complement, in
        which case the locked set is provably the k smallest.
        """
        target = len(self.vals) + k
        Q = np.zeros((self.n, 0))
        W = np.zeros((self.n, 0))
        v = self._random()
        while len(self.vals) < target:
            need = target - len(self.vals)
            theta, Y, MY, res, complete = self.cycle(Q, W, v, need)
            if complete:
                self.lock(Y[:, :need], theta[:need])
                return True
            nconv = 0
            while nconv < min(need, theta.size) and res[nconv] <= self.tol_abs():
                nconv += 1
            if nconv:
                self.lock(Y[:, :nconv], theta[:nconv])
            if len(self.vals) >= target:
                return False
            self.last_residual = float(res[nconv])
            if self.used > self.budget:
                raise EigenNonConvergence(
                    f"Lanczos locked {len(self.vals)} of {target} eigenpairs within "
                    f"{self.budget} matvecs (best unconverged residual {self.last_residual:.3e})",
                    self.last_residual)
            keep = min(theta.size - nconv, max(2 * (need - nconv), need - nconv + 10))
            # leave room for new Krylov directions or the next cycle cannot progress
            limit = min(max(self.dim, need - nconv + 10), self.n - self.locked.shape[1])
            keep = max(0, min(keep, limit - max(2, limit // 3)))
            Q = Y[:, nconv:nconv + keep]
            W = MY[:, nconv:nconv + keep]
            v = W[:, -1] if keep else self._random()
        return False

    def verify(self, k):
        """Confirm nothing below the k-th locked value hides in the complement."""
        while self.locked.shape[1] < self.n:
            cutoff = self.vals[k - 1]
            theta, Y, MY, res, complete = self.cycle(
                np.zeros((self.n, 0)), np.zeros((self.n, 0)), self._random(), 1)
            if theta[0] >= cutoff - self.tol_abs():
                return
            if complete or res[0] <= self.tol_abs():
                self.lock(Y[:, :1], theta[:1])
            else:
                self.find(1)
            if self.used > self.budget:
                raise EigenNonConvergence(
                    f"Lanczos verification exceeded {self.budget} matvecs", self.last_residual)


def symmetric_eigs(m, k: int, which: str = "smallest", seed=0, tol: float = 1e-6,
                   max_iter: int | None = None, krylov_dim: int | None = None):
    """``k`` extremal eigenpairs of the symmetric operator ``m``.

    ``m`` may be a scipy sparse matrix, a dense array, or any object with
    ``shape`` and ``matvec`` (an optional ``frobenius_norm`` attribute sets the
    tolerance scale; otherwise the largest Ritz magnitude seen is used, which
    never exceeds the Frobenius norm).

    Returns ``(values, vectors)`` sorted ascending, vectors as columns with the
    largest-magnitude entry of each made positive. Residuals satisfy
    ``||Mv - lambda v|| <= tol * ||M||_F``. ``max_iter`` caps the number of
    operator applications (default ``10 n``).
    """
    if which not in ("smallest", "largest"):
        raise ValueError(f"which must be 'smallest' or 'largest', got {which!r}")
    base_matvec, n, fro = _operator(m)
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for a {n}x{n} operator")
    if k == 0:
        return np.zeros(0), np.zeros((n, 0))
    sign = 1.0 if which == "smallest" else -1.0

    def matvec(x):
        return sign * np.asarray(base_matvec(x), dtype=np.float64).ravel()

    budget = 10 * n if max_iter is None else int(max_iter)
    dim = krylov_dim or max(2 * k + 20, 40)
    solver = _Solver(matvec, n, fro, tol, budget, dim, seed)
    if not solver.find(k):
        solver.verify(k)
    vals = np.array(solver.vals[:k]) * sign
    vecs = solver.locked[:, :k]
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = np.column_stack([_fix_sign(vecs[:, i]) for i in order])
    return vals, vecs
