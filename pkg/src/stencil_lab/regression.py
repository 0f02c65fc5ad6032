"""Least-squares system assembly, skew-symmetry constraints, and the
affine projection used by the first-order solvers.

The design matrix A stacks one row per (sample, field, grid index): the
row holds the periodic patch (u_{i-R}, ..., u_{i+R}) and the target is
the corresponding time derivative at index i. Because A has at most 2R+1
columns, the Gram matrix A^T A and A^T b are precomputed once; every
solver iteration then costs O((2R+1)^2) regardless of the number of rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .training import TrainingSet


@dataclass(frozen=True, eq=False)
class RegressionSystem:
    """Tikhonov-regularized least squares min (1/2)||Aw-b||^2 + (lam/2)||w||^2
    with box bound |w_l| <= M available to the box-aware solvers."""

    A: np.ndarray
    b: np.ndarray
    lam: float = 1e-6
    M: float = 100.0
    gram: np.ndarray = field(init=False)      # A^T A
    atb: np.ndarray = field(init=False)       # A^T b
    btb: float = field(init=False)            # b^T b

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValueError(f"need A (rows x n) and matching b, got {A.shape} and {b.shape}")
        if A.shape[1] % 2 == 0:
            raise ValueError(f"stencil dimension must be odd (2R+1), got {A.shape[1]}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.M <= 0:
            raise ValueError("box bound M must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gram", A.T @ A)
        object.__setattr__(self, "atb", A.T @ b)
        object.__setattr__(self, "btb", float(b @ b))

    @property
    def n_coeffs(self) -> int:
        return self.A.shape[1]

    @property
    def R(self) -> int:
        return (self.n_coeffs - 1) // 2


def assemble_regression(ts: TrainingSet, R: int, lam: float = 1e-6, M: float = 100.0) -> RegressionSystem:
    """Stack patch rows and derivative targets into (A, b).

    Row order is deterministic: sample-major, all H-patch rows (targets
    dE/dt) before all E-patch rows (targets dH/dt), grid index ascending.
    """
    grid = ts.config.grid
    N = grid.N
    if R < 1:
        raise ValueError(f"stencil radius must be >= 1, got {R}")
    if N < 2 * R + 1:
        raise ValueError(f"grid N={N} too small for radius R={R} (need N >= {2 * R + 1})")
    # idx[i, j] = (i + j - R) mod N maps grid index i and column j to the patch entry
    idx = (np.arange(N)[:, None] + np.arange(-R, R + 1)[None, :]) % N
    # field order (H, E) per sample, matching targets (dE/dt, dH/dt)
    patches = ts.states[:, [1, 0], :][:, :, idx]                # (n, 2, N, 2R+1)
    A = patches.reshape(-1, 2 * R + 1)
    b = ts.derivatives[:, [0, 1], :].reshape(-1)
    return RegressionSystem(A=A, b=b, lam=lam, M=M)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Linear equality constraints C w = d with C of full row rank.

    The factorization of C C^T is computed once and cached; the affine
    projection is applied every PG/NAG iteration. Constraint sets built
    by build_skew_constraints are tagged so the projection can use the
    exactly antisymmetric closed form.
    """

    C: np.ndarray
    d: np.ndarray
    skew_pairing: bool = False
    _cct_factor: object = field(init=False, repr=False)

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if C.ndim != 2 or d.shape != (C.shape[0],):
            raise ValueError(f"need C (m x n) and matching d, got {C.shape} and {d.shape}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)
        if C.shape[0] == 0:
            object.__setattr__(self, "_cct_factor", None)
            return
        if np.linalg.matrix_rank(C) < C.shape[0]:
            raise ValueError("constraint matrix C must have full row rank")
        try:
            factor = scipy.linalg.cho_factor(C @ C.T)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("constraint matrix C must have full row rank") from exc
        object.__setattr__(self, "_cct_factor", factor)

    @property
    def n_constraints(self) -> int:
        return self.C.shape[0]

    def residual(self, w: np.ndarray) -> float:
        """||C w - d||_2."""
        if self.n_constraints == 0:
            return 0.0
        return float(np.linalg.norm(self.C @ w - self.d))


def build_skew_constraints(R: int) -> ConstraintSet:
    """Constraints equivalent to skew-adjointness of the convolution
    operator: w_0 = 0 and w_{-l} + w_{+l} = 0 for l = 1..R."""
    if R < 1:
        raise ValueError(f"radius must be >= 1, got {R}")
    n = 2 * R + 1
    C = np.zeros((R + 1, n))
    C[0, R] = 1.0
    for l in range(1, R + 1):
        C[l, R - l] = 1.0
        C[l, R + l] = 1.0
    return ConstraintSet(C=C, d=np.zeros(R + 1), skew_pairing=True)


def project_affine(z: np.ndarray, cs: ConstraintSet) -> np.ndarray:
    """Euclidean projection onto {w : C w = d}:
    z - C^T (C C^T)^{-1} (C z - d).

    For the skew pairing constraints this reduces to componentwise
    antisymmetrization (w_l - w_{-l}) / 2, which is used directly so the
    projected stencil is skew, and its operator matrix satisfies
    D^T = -D, exactly rather than to roundoff.
    """
    z = np.asarray(z, dtype=float)
    if cs.n_constraints == 0:
        return z.copy()
    if cs.skew_pairing:
        return 0.5 * (z - z[::-1])
    return z - cs.C.T @ scipy.linalg.cho_solve(cs._cct_factor, cs.C @ z - cs.d)


def objective_and_gradient(sys: RegressionSystem, w: np.ndarray) -> tuple[float, np.ndarray]:
    """f(w) = (1/2)||Aw-b||^2 + (lam/2)||w||^2 and its gradient
    A^T(Aw-b) + lam w, evaluated through the cached Gram form."""
    w = np.asarray(w, dtype=float)
    if w.shape != (sys.n_coeffs,):
        raise ValueError(f"w has shape {w.shape}, expected ({sys.n_coeffs},)")
    gw = sys.gram @ w
    f = 0.5 * float(w @ gw) - float(sys.atb @ w) + 0.5 * sys.btb + 0.5 * sys.lam * float(w @ w)
    grad = gw - sys.atb + sys.lam * w
    return f, grad


def lipschitz_estimate(sys: RegressionSystem, min_iters: int = 30, max_iters: int = 500) -> float:
    """Upper bound on ||A^T A||_2 + lam: power iteration on the Gram
    matrix (at least min_iters sweeps, continued until the Rayleigh
    quotient stabilizes) followed by a 1.01 safety factor. Clustered top
    eigenvalues converge slowly, hence the adaptive tail."""
    G = sys.gram
    if G.size == 0:
        raise ValueError("empty system")
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for k in range(max_iters):
        gv = G @ v
        nrm = np.linalg.norm(gv)
        if nrm == 0.0:
            return sys.lam
        new_rayleigh = float(v @ gv)
        v = gv / nrm
        if k >= min_iters and abs(new_rayleigh - rayleigh) <= 1e-12 * abs(new_rayleigh):
            rayleigh = new_rayleigh
            break
        rayleigh = new_rayleigh
    return 1.01 * rayleigh + sys.lam


def dump_diagnostics(sys: RegressionSystem, path: str | Path) -> dict:
    """Write system dimensions and the Gram matrix to JSON."""
    info = {
        "rows": int(sys.A.shape[0]),
        "cols": int(sys.A.shape[1]),
        "lambda": sys.lam,
        "box_bound": sys.M,
        "gram": [[float(v) for v in row] for row in sys.gram],
    }
    Path(path).write_text(json.dumps(info, indent=2) + "\n")
    return info
