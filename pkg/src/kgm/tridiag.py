"""Thomas elimination for symmetric tridiagonal M-matrices given by row sums.

The matrices assembled here all have the form

    T[i, i]   = a[i-1] + a[i] + s[i]
    T[i, i+1] = T[i+1, i] = -a[i]

with couplings a > 0 and row excesses s >= 0 (a[-1] = a[n-1] = 0).  Instead
of the diagonal, elimination tracks the excess e[i] of each reduced row,

    e[0] = s[0],   e[i] = s[i] + a[i-1] e[i-1] / (a[i-1] + e[i-1]),

which involves no subtraction.  Pivots and solves of nonnegative data are
then accurate to a few ulps componentwise even when the matrix is nearly
singular (weak screening), where plain LU loses every digit of the
constant mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RowSumFactor:
    a: list
    pivots: list
    mult: list

    @property
    def n(self) -> int:
        return len(self.pivots)

    @property
    def last_excess(self) -> float:
        """Schur complement of the last row; zero iff the matrix is singular."""
        return self.pivots[-1]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve T x = rhs.  ``rhs`` may be 1-D or (n, k)."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 2:
            return np.column_stack([self.solve(col) for col in rhs.T])
        n = self.n
        a, d, m = self.a, self.pivots, self.mult
        y = rhs.tolist()
        for i in range(1, n):
            y[i] += m[i] * y[i - 1]
        x = y
        x[n - 1] = y[n - 1] / d[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = (y[i] + a[i] * x[i + 1]) / d[i]
        return np.array(x)


def factor(a: np.ndarray, s: np.ndarray) -> RowSumFactor:
    """Factor the tridiagonal M-matrix with couplings ``a`` (length n-1) and
    row excesses ``s`` (length n)."""
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    n = len(s)
    if len(a) != n - 1:
        raise ValueError("need n-1 couplings for n rows")
    if np.any(a <= 0) or np.any(s < 0):
        raise ValueError("couplings must be positive and row excesses nonnegative")
    al = a.tolist()
    sl = s.tolist()
    e = [0.0] * n
    e[0] = sl[0]
    for i in range(1, n):
        ai = al[i - 1]
        ep = e[i - 1]
        e[i] = sl[i] + ai * ep / (ai + ep)
    pivots = [e[i] + al[i] for i in range(n - 1)] + [e[n - 1]]
    mult = [0.0] + [al[i - 1] / pivots[i - 1] for i in range(1, n)]
    return RowSumFactor(al + [0.0], pivots, mult)


def assemble(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Dense form of the matrix, for tests and small diagnostics."""
    a = np.asarray(a, dtype=float)
    s = np.asarray(s, dtype=float)
    ext = np.concatenate(([0.0], a, [0.0]))
    T = np.diag(ext[:-1] + ext[1:] + s)
    T -= np.diag(a, 1) + np.diag(a, -1)
    return T
