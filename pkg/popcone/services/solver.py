"""
Interior-point solver for block conic programs

A ConicProgram is brought to the standard form

    minimize    c'x
    subject to  G x + s = h,   A x = b,   s in R^l_+ x S^m1_+ x ... x S^mk_+

with x free. Equality rows go to A; <= rows and nonnegativity functionals
are the R^l_+ part of G; every PSD block C + sum_k x_k F_k becomes one
semidefinite slack. The program is solved through the homogeneous
self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step, so primal and dual infeasibility come out as
certificates rather than as divergence.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..models.conic import ConicProgram, LinearRow, PsdBlock
from ..models.enums import Relation, Sense, SolveStatus
from ..models.reports import SolveReport, SolverConfig
from ..models.symtensor import is_psd

# Looser acceptance, as a multiple of the configured tolerances, for a stalled run;
# such a run is flagged reduced_accuracy and never reported OPTIMAL
REDUCED_ACCURACY = 1e3
# A near-converged run stops once its merit grows this much past the best iterate
DIVERGENCE = 1e2
# Steps shorter than this are a stall
MIN_STEP = 1e-10
# Relative diagonal shift of the reduced Newton matrix
KKT_REGULARIZATION = 1e-12
# Iterative refinement rounds against the full Newton system
REFINE_STEPS = 3
# Relative pivot size below which an equality row counts as dependent
ROW_RANK_TOL = 1e-10
# Number of entry pairs handled per chunk of a Schur complement update
SCHUR_CHUNK = 2_000_000
# Bound on the entries of a candidate improving ray
RAY_BOX = 1e4
RAY_TOL = 1e-6


class ConeVector:
    """An element of R^l x S^m1 x ... x S^mk."""
    __slots__ = ('lp', 'mats')

    def __init__(self, lp: np.ndarray, mats: List[np.ndarray]):
        self.lp = lp
        self.mats = mats

    def __add__(self, other: 'ConeVector') -> 'ConeVector':
        return ConeVector(self.lp + other.lp, [a + b for a, b in zip(self.mats, other.mats)])

    def __sub__(self, other: 'ConeVector') -> 'ConeVector':
        return ConeVector(self.lp - other.lp, [a - b for a, b in zip(self.mats, other.mats)])

    def __mul__(self, t: float) -> 'ConeVector':
        return ConeVector(self.lp * t, [a * t for a in self.mats])

    __rmul__ = __mul__

    def __neg__(self) -> 'ConeVector':
        return self * -1.0

    def dot(self, other: 'ConeVector') -> float:
        total = float(self.lp @ other.lp)
        for a, b in zip(self.mats, other.mats):
            total += float(np.sum(a * b))
        return total

    def norm(self) -> float:
        return math.sqrt(max(self.dot(self), 0.0))

    def symmetrized(self) -> 'ConeVector':
        return ConeVector(self.lp, [(a + a.T) / 2.0 for a in self.mats])


@dataclass
class _Block:
    size: int
    rows: np.ndarray
    cols: np.ndarray
    # Variables the block touches, and the local index of every entry's variable
    variables: np.ndarray
    # (size*size x n) map x -> vec(sum_k x_k F_k)
    vec_map: sp.csr_matrix
    # (entries x local vars) incidence weighted by coefficient
    incidence: sp.csr_matrix
    constant: np.ndarray


@dataclass
class _StandardForm:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    blocks: List[_Block]
    # Original row index of every row of A and every leading row of G
    eq_rows: List[int] = field(default_factory=list)
    le_rows: List[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def degree(self) -> int:
        return self.G.shape[0] + sum(b.size for b in self.blocks)

    def g_apply(self, x: np.ndarray) -> ConeVector:
        mats = [-(blk.vec_map @ x).reshape(blk.size, blk.size) for blk in self.blocks]
        return ConeVector(self.G @ x, mats)

    def g_adjoint(self, z: ConeVector) -> np.ndarray:
        out = self.G.T @ z.lp
        for blk, mat in zip(self.blocks, z.mats):
            out = out - blk.vec_map.T @ mat.reshape(-1)
        return np.asarray(out).ravel()

    def h_vector(self) -> ConeVector:
        return ConeVector(self.h.copy(), [blk.constant.copy() for blk in self.blocks])

    def identity(self) -> ConeVector:
        return ConeVector(np.ones(self.G.shape[0]), [np.eye(blk.size) for blk in self.blocks])


def _to_standard_form(prog: ConicProgram, active: np.ndarray) -> _StandardForm:
    local = {int(v): k for k, v in enumerate(active)}
    n = len(active)
    sign = -1.0 if prog.sense is Sense.max else 1.0
    c = np.zeros(n)
    for v, coef in prog.objective.items():
        if v in local:
            c[local[v]] = sign * coef

    eq_rows, le_rows = [], []
    a_rows, b_vals = [], []
    g_data, g_i, g_j, h_vals = [], [], [], []
    for k, row in enumerate(prog.rows):
        if row.relation is Relation.eq:
            dense = np.zeros(n)
            for v, coef in row.coefs.items():
                dense[local[v]] += coef
            a_rows.append(dense)
            b_vals.append(row.rhs)
            eq_rows.append(k)
        else:
            r = len(h_vals)
            for v, coef in row.coefs.items():
                g_i.append(r)
                g_j.append(local[v])
                g_data.append(coef)
            h_vals.append(row.rhs)
            le_rows.append(k)
    for functional in prog.nonneg:
        r = len(h_vals)
        for v, coef in functional.items():
            g_i.append(r)
            g_j.append(local[v])
            g_data.append(-coef)
        h_vals.append(0.0)

    G = sp.csr_matrix((g_data, (g_i, g_j)), shape=(len(h_vals), n))
    A = np.array(a_rows) if a_rows else np.zeros((0, n))

    blocks = []
    for block in prog.psd_blocks:
        m = block.size
        rows = np.array([e[1] for e in block.entries], dtype=int)
        cols = np.array([e[2] for e in block.entries], dtype=int)
        var = np.array([local[e[0]] for e in block.entries], dtype=int)
        coef = np.array([e[3] for e in block.entries], dtype=float)
        variables, loc = np.unique(var, return_inverse=True)
        vec_map = sp.csr_matrix((coef, (rows * m + cols, var)), shape=(m * m, n))
        incidence = sp.csr_matrix((coef, (np.arange(len(coef)), loc)), shape=(len(coef), len(variables)))
        constant = np.zeros((m, m))
        for i, j, value in block.constant:
            constant[i, j] += value
        blocks.append(_Block(m, rows, cols, variables, vec_map, incidence, constant))
    return _StandardForm(c, A, np.array(b_vals, dtype=float), G, np.array(h_vals, dtype=float),
                         blocks, eq_rows, le_rows)


def _drop_dependent_rows(std: _StandardForm) -> Tuple[_StandardForm, bool]:
    """
    Remove linearly dependent equality rows

    Returns:
        (reduced form, consistent); consistent is False when a dropped row
        contradicts the kept ones
    """
    A, b = std.A, std.b
    if A.shape[0] == 0:
        return std, True
    _, r, piv = scipy.linalg.qr(A.T, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return replace(std, A=np.zeros((0, std.n)), b=np.zeros(0), eq_rows=[]), bool(np.all(b == 0))
    rank = int(np.sum(diag > ROW_RANK_TOL * diag[0]))
    keep = np.sort(piv[:rank])
    drop = np.sort(piv[rank:])
    consistent = True
    if len(drop):
        weights = np.linalg.lstsq(A[keep].T, A[drop].T, rcond=None)[0]
        mismatch = np.abs(b[drop] - weights.T @ b[keep])
        consistent = bool(np.all(mismatch <= 1e-8 * (1.0 + np.abs(b[drop]))))
    eq_rows = [std.eq_rows[k] for k in keep]
    return replace(std, A=A[keep], b=b[keep], eq_rows=eq_rows), consistent


@dataclass
class _Equilibration:
    rows_a: np.ndarray
    rows_g: np.ndarray
    cols: np.ndarray


def _equilibrate(std: _StandardForm, enabled: bool) -> Tuple[_StandardForm, _Equilibration]:
    n = std.n
    if not enabled:
        return std, _Equilibration(np.ones(std.A.shape[0]), np.ones(std.G.shape[0]), np.ones(n))

    def inverse_max(values: np.ndarray) -> np.ndarray:
        out = np.ones_like(values)
        mask = values > 0
        out[mask] = 1.0 / values[mask]
        return out

    rows_a = inverse_max(np.max(np.abs(std.A), axis=1)) if std.A.shape[0] else np.zeros(0)
    g_abs = abs(std.G)
    rows_g = inverse_max(g_abs.max(axis=1).toarray().ravel()) if std.G.shape[0] else np.zeros(0)
    A = std.A * rows_a[:, None]
    G = sp.diags(rows_g) @ std.G

    col_max = np.zeros(n)
    if A.shape[0]:
        col_max = np.maximum(col_max, np.max(np.abs(A), axis=0))
    if G.shape[0]:
        col_max = np.maximum(col_max, abs(G).max(axis=0).toarray().ravel())
    for blk in std.blocks:
        col_max = np.maximum(col_max, abs(blk.vec_map).max(axis=0).toarray().ravel())
    cols = inverse_max(col_max)

    scale = sp.diags(cols)
    blocks = []
    for blk in std.blocks:
        local_cols = cols[blk.variables]
        blocks.append(replace(
            blk,
            vec_map=(blk.vec_map @ scale).tocsr(),
            incidence=(blk.incidence @ sp.diags(local_cols)).tocsr(),
        ))
    scaled = replace(
        std,
        c=std.c * cols,
        A=A * cols[None, :],
        b=std.b * rows_a,
        G=(G @ scale).tocsr(),
        h=std.h * rows_g,
        blocks=blocks,
    )
    return scaled, _Equilibration(rows_a, rows_g, cols)


class _Scaling:
    """
    Nesterov-Todd scaling W of a strictly feasible pair (s, z)

    For the LP part W = diag(sqrt(s/z)); for a PSD block W(U) = R'UR with
    R = L_s V diag(lambda)^(-1/2), where L_s, L_z are Cholesky factors and
    L_z' L_s = U diag(lambda) V'. Both W^{-T}s and Wz equal lambda.
    """

    def __init__(self, s: ConeVector, z: ConeVector):
        self.w = np.sqrt(s.lp / z.lp)
        self.lam_lp = np.sqrt(s.lp * z.lp)
        self.R, self.R_inv, self.P, self.RRt, self.lam, self.chol_s, self.chol_z = [], [], [], [], [], [], []
        for S, Z in zip(s.mats, z.mats):
            ls = np.linalg.cholesky(S)
            lz = np.linalg.cholesky(Z)
            _, lam, vt = np.linalg.svd(lz.T @ ls)
            if lam[-1] <= 0.0:
                raise np.linalg.LinAlgError('Degenerate scaling block')
            ls_inv = scipy.linalg.solve_triangular(ls, np.eye(len(lam)), lower=True)
            root = np.sqrt(lam)
            R = ls @ vt.T / root[None, :]
            R_inv = (root[:, None] * vt) @ ls_inv
            self.R.append(R)
            self.R_inv.append(R_inv)
            self.P.append(R_inv.T @ R_inv)
            self.RRt.append(R @ R.T)
            self.lam.append(lam)
            self.chol_s.append(ls)
            self.chol_z.append(lz)

    @classmethod
    def identity(cls, std: _StandardForm) -> '_Scaling':
        e = std.identity()
        return cls(e, e)

    def lam_vector(self) -> ConeVector:
        return ConeVector(self.lam_lp, [np.diag(lam) for lam in self.lam])

    def apply(self, v: ConeVector) -> ConeVector:
        """W v"""
        return ConeVector(self.w * v.lp, [R.T @ V @ R for R, V in zip(self.R, v.mats)])

    def apply_inv_t(self, v: ConeVector) -> ConeVector:
        """W^{-T} v"""
        return ConeVector(v.lp / self.w, [Ri @ V @ Ri.T for Ri, V in zip(self.R_inv, v.mats)])

    def apply_t(self, v: ConeVector) -> ConeVector:
        """W' v"""
        return ConeVector(self.w * v.lp, [R @ V @ R.T for R, V in zip(self.R, v.mats)])

    def gram(self, v: ConeVector) -> ConeVector:
        """W'W v"""
        return ConeVector(self.w ** 2 * v.lp, [M @ V @ M for M, V in zip(self.RRt, v.mats)])

    def gram_inv(self, v: ConeVector) -> ConeVector:
        """(W'W)^{-1} v"""
        return ConeVector(v.lp / self.w ** 2, [P @ V @ P for P, V in zip(self.P, v.mats)])

    def lam_square(self) -> ConeVector:
        return ConeVector(self.lam_lp ** 2, [np.diag(lam ** 2) for lam in self.lam])

    def lam_divide(self, t: ConeVector) -> ConeVector:
        """The u solving lambda o u = t."""
        mats = [2.0 * T / (lam[:, None] + lam[None, :]) for lam, T in zip(self.lam, t.mats)]
        return ConeVector(t.lp / self.lam_lp, mats)


def _jordan(u: ConeVector, v: ConeVector) -> ConeVector:
    return ConeVector(u.lp * v.lp, [(a @ b + b @ a) / 2.0 for a, b in zip(u.mats, v.mats)])


def _residual_size(errors: Tuple[np.ndarray, np.ndarray, ConeVector]) -> float:
    e1, e2, e3 = errors
    return float(np.linalg.norm(e1)) + float(np.linalg.norm(e2)) + e3.norm()


def _block_schur(blk: _Block, P: np.ndarray) -> np.ndarray:
    """Local block of G'(W'W)^{-1}G: entry (k, l) is <F_k, P F_l P>."""
    nnz = len(blk.rows)
    nloc = len(blk.variables)
    out = np.zeros((nloc, nloc))
    p_rows = P[:, blk.rows]
    p_cols = P[:, blk.cols]
    step = max(1, SCHUR_CHUNK // max(nnz, 1))
    incidence_t = blk.incidence.T.tocsr()
    for start in range(0, nnz, step):
        stop = min(nnz, start + step)
        pairs = p_rows[blk.rows[start:stop]] * p_cols[blk.cols[start:stop]]
        weighted = np.asarray(incidence_t @ pairs.T).T
        out += np.asarray(blk.incidence[start:stop].T @ weighted)
    return out


class _KKTSolver:
    """
    Solves [0 A' G'; A 0 0; G 0 -W'W] [x; y; z] = [r1; r2; r3]

    z is eliminated, leaving [H + A'A, A'; A, 0] with H = G'(W'W)^{-1}G, which
    is factored once per iteration.
    """

    def __init__(self, std: _StandardForm, scaling: _Scaling):
        self.std = std
        self.scaling = scaling
        n, p = std.n, std.A.shape[0]
        H = np.zeros((n, n))
        if std.G.shape[0]:
            H += (std.G.T @ sp.diags(1.0 / scaling.w ** 2) @ std.G).toarray()
        for blk, P in zip(std.blocks, scaling.P):
            H[np.ix_(blk.variables, blk.variables)] += _block_schur(blk, P)
        H += std.A.T @ std.A
        # Per-entry shift: small diagonals are not swamped by the largest one
        H[np.diag_indices(n)] += KKT_REGULARIZATION * (1.0 + np.abs(np.diag(H)))
        self.matrix = np.block([[H, std.A.T], [std.A, np.zeros((p, p))]])
        with warnings.catch_warnings():
            warnings.simplefilter('error', scipy.linalg.LinAlgWarning)
            self.lu = scipy.linalg.lu_factor(self.matrix)

    def _reduced(self, r1: np.ndarray, r2: np.ndarray,
                 r3: ConeVector) -> Tuple[np.ndarray, np.ndarray, ConeVector]:
        std = self.std
        rhs = np.concatenate([r1 + std.g_adjoint(self.scaling.gram_inv(r3)) + std.A.T @ r2, r2])
        sol = scipy.linalg.lu_solve(self.lu, rhs)
        x, y = sol[:std.n], sol[std.n:]
        z = self.scaling.gram_inv(std.g_apply(x) - r3).symmetrized()
        return x, y, z

    def residual(self, r1: np.ndarray, r2: np.ndarray, r3: ConeVector,
                 x: np.ndarray, y: np.ndarray, z: ConeVector) -> Tuple[np.ndarray, np.ndarray, ConeVector]:
        """Right-hand side minus the full (unreduced, unregularized) KKT operator applied to (x, y, z)."""
        std = self.std
        e1 = r1 - (std.A.T @ y + std.g_adjoint(z))
        e2 = r2 - std.A @ x
        e3 = r3 - (std.g_apply(x) - self.scaling.gram(z))
        return e1, e2, e3

    def solve(self, r1: np.ndarray, r2: np.ndarray, r3: ConeVector) -> Tuple[np.ndarray, np.ndarray, ConeVector]:
        x, y, z = self._reduced(r1, r2, r3)
        errors = self.residual(r1, r2, r3, x, y, z)
        size = _residual_size(errors)
        for _ in range(REFINE_STEPS):
            if not size > 0.0:
                break
            dx, dy, dz = self._reduced(*errors)
            candidate = (x + dx, y + dy, (z + dz).symmetrized())
            candidate_errors = self.residual(r1, r2, r3, *candidate)
            candidate_size = _residual_size(candidate_errors)
            # Refinement keeps only corrections that shrink the residual
            if not candidate_size < size:
                break
            (x, y, z), errors, size = candidate, candidate_errors, candidate_size
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise np.linalg.LinAlgError('Non-finite Newton direction')
        return x, y, z


def _max_step(v: ConeVector, dv: ConeVector, chols: List[np.ndarray]) -> float:
    """Largest t with v + t dv in the cone (inf if unlimited)."""
    step = math.inf
    neg = dv.lp < 0
    if np.any(neg):
        step = min(step, float(np.min(-v.lp[neg] / dv.lp[neg])))
    for L, D in zip(chols, dv.mats):
        half = scipy.linalg.solve_triangular(L, D, lower=True)
        scaled = scipy.linalg.solve_triangular(L, half.T, lower=True)
        smallest = np.linalg.eigvalsh((scaled + scaled.T) / 2.0)[0]
        if smallest < 0:
            step = min(step, -1.0 / smallest)
    return step


def _interior_shift(v: ConeVector, e: ConeVector) -> ConeVector:
    """Move v into the interior along e when it is not strictly inside."""
    violation = -math.inf
    if v.lp.size:
        violation = float(np.max(-v.lp))
    for M in v.mats:
        violation = max(violation, float(-np.linalg.eigvalsh(M)[0]))
    if violation == -math.inf:
        return v
    if violation >= -1e-8 * max(v.norm(), 1.0):
        return v + e * (1.0 + violation)
    return v


@dataclass
class _Outcome:
    status: SolveStatus
    x: np.ndarray
    y: np.ndarray
    z: ConeVector
    pcost: float = math.nan
    dcost: float = math.nan
    ray: Optional[np.ndarray] = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    message: str = ''
    reduced_accuracy: bool = False


@dataclass
class _Iterate:
    """A snapshot of the embedding variables with its residual statistics."""
    x: np.ndarray
    y: np.ndarray
    z: ConeVector
    tau: float
    stats: dict
    iteration: int
    merit: float


def _merit(stats: dict, cfg: SolverConfig) -> float:
    """Worst of the residuals and the duality gap, each as a multiple of its tolerance."""
    if not stats:
        return math.inf
    scale = 1.0 + abs(stats['pcost'])
    gap = max(stats['gap'], abs(stats['pcost'] - stats['dcost'])) / scale
    values = (stats['pres'] / cfg.tol_feas, stats['dres'] / cfg.tol_feas, gap / cfg.tol_gap)
    if not all(math.isfinite(v) for v in values):
        return math.inf
    return max(values)


def _homogeneous_ipm(std: _StandardForm, cfg: SolverConfig) -> _Outcome:
    c, A, b = std.c, std.A, std.b
    h = std.h_vector()
    e = std.identity()
    nu = std.degree
    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, h.norm())

    try:
        start = _KKTSolver(std, _Scaling.identity(std))
        x, _, neg_s = start.solve(np.zeros(std.n), b, h)
        _, y, z = start.solve(-c, np.zeros(len(b)), h * 0.0)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as err:
        return _Outcome(SolveStatus.numerical_trouble, np.zeros(std.n), np.zeros(len(b)), e * 0.0,
                        message=f'Initial factorization failed: {err}')
    s = _interior_shift(-neg_s.symmetrized(), e)
    z = _interior_shift(z, e)
    tau, kappa = 1.0, 1.0

    stats = {}
    best: Optional[_Iterate] = None
    status, message = None, ''
    cx = by = hz = 0.0
    iteration = 0
    for iteration in range(cfg.max_iter + 1):
        hrx = A.T @ y + std.g_adjoint(z)
        hry = A @ x
        hrz = std.g_apply(x) + s
        rx = hrx + c * tau
        ry = hry - b * tau
        rz = hrz - h * tau
        cx, by, hz = float(c @ x), float(b @ y), h.dot(z)
        rt = kappa + cx + by + hz
        gap = s.dot(z)
        mu = (gap + tau * kappa) / (nu + 1)
        pcost, dcost = cx / tau, -(by + hz) / tau
        stats = {
            'pres': max(float(np.linalg.norm(ry)) / resy0, rz.norm() / resz0) / tau,
            'dres': float(np.linalg.norm(rx)) / resx0 / tau,
            'gap': gap / tau ** 2,
            'pcost': pcost,
            'dcost': dcost,
            'pinfres': float(np.linalg.norm(hrx)) / resx0 / -(hz + by) if hz + by < 0 else math.inf,
            'dinfres': (max(float(np.linalg.norm(hry)) / resy0, hrz.norm() / resz0) / -cx
                        if cx < 0 else math.inf),
        }
        merit = _merit(stats, cfg)
        logging.debug(
            f"ipm {iteration:3d} pcost={pcost: .8e} dcost={dcost: .8e} gap={stats['gap']:.2e} "
            f"pres={stats['pres']:.2e} dres={stats['dres']:.2e} k/t={kappa / tau:.2e}"
        )
        if best is None or merit < best.merit:
            best = _Iterate(x, y, z, tau, stats, iteration, merit)

        if merit <= 1.0:
            status = SolveStatus.optimal
            break
        if stats['pinfres'] <= cfg.tol_feas:
            status = SolveStatus.infeasible
            break
        if stats['dinfres'] <= cfg.tol_feas:
            status = SolveStatus.unbounded
            break
        if pcost < -cfg.unbounded_threshold and stats['pres'] <= REDUCED_ACCURACY * cfg.tol_feas:
            status = SolveStatus.unbounded
            message = 'heuristic: objective passed the unbounded threshold'
            break
        if best.merit <= REDUCED_ACCURACY and merit > DIVERGENCE * best.merit:
            message = f'Residuals grew after iteration {best.iteration}'
            break
        if iteration == cfg.max_iter:
            message = f'Iteration limit {cfg.max_iter} reached'
            break

        try:
            scaling = _Scaling(s, z)
            kkt = _KKTSolver(std, scaling)
            x1, y1, z1 = kkt.solve(-c, b, h)
            denom = kappa / tau - (float(c @ x1) + float(b @ y1) + h.dot(z1))

            def direction(eta: float, t_c: ConeVector, t_tau: float):
                q = scaling.lam_divide(t_c)
                wq = scaling.apply_t(q)
                x2, y2, z2 = kkt.solve(-eta * rx, -eta * ry, (rz * -eta) - wq)
                dtau = (eta * rt + float(c @ x2) + float(b @ y2) + h.dot(z2) + t_tau / tau) / denom
                dx, dy, dz = x2 + dtau * x1, y2 + dtau * y1, z2 + z1 * dtau
                ds = (wq - scaling.gram(dz)).symmetrized()
                dkappa = (t_tau - kappa * dtau) / tau
                return dx, dy, dz, ds, dtau, dkappa

            def step_length(ds, dz, dtau, dkappa) -> float:
                step = min(_max_step(s, ds, scaling.chol_s), _max_step(z, dz, scaling.chol_z))
                if dtau < 0:
                    step = min(step, -tau / dtau)
                if dkappa < 0:
                    step = min(step, -kappa / dkappa)
                return step

            # Predictor
            _, _, dz_a, ds_a, dtau_a, dkappa_a = direction(1.0, -scaling.lam_square(), -tau * kappa)
            alpha_aff = min(1.0, step_length(ds_a, dz_a, dtau_a, dkappa_a))
            sigma = (1.0 - alpha_aff) ** 3

            # Corrector
            correction = _jordan(scaling.apply_inv_t(ds_a), scaling.apply(dz_a))
            t_c = -scaling.lam_square() + e * (sigma * mu) - correction
            t_tau = -tau * kappa + sigma * mu - dtau_a * dkappa_a
            dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, t_c, t_tau)
            alpha = min(1.0, cfg.step_fraction * step_length(ds, dz, dtau, dkappa))
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as err:
            message = f'Newton system failed at iteration {iteration}: {err}'
            break
        if alpha < MIN_STEP:
            message = f'Step length {alpha:.1e} at iteration {iteration}'
            break

        x = x + alpha * dx
        y = y + alpha * dy
        s = (s + ds * alpha).symmetrized()
        z = (z + dz * alpha).symmetrized()
        tau += alpha * dtau
        kappa += alpha * dkappa

    reduced = False
    if status is None:
        status, message, reduced = _classify_stalled(best, stats, cfg, iteration, message)
        if status is SolveStatus.optimal or reduced:
            x, y, z, tau, stats = best.x, best.y, best.z, best.tau, best.stats

    outcome = _Outcome(status, x, y, z, iterations=iteration, message=message, reduced_accuracy=reduced,
                       residuals={k: stats[k] for k in ('pres', 'dres', 'gap')} if stats else {})
    if status is SolveStatus.optimal or reduced:
        outcome.x, outcome.y, outcome.z = x / tau, y / tau, z * (1.0 / tau)
        outcome.pcost, outcome.dcost = stats['pcost'], stats['dcost']
    elif status is SolveStatus.unbounded:
        outcome.x = x / tau
        if cx < 0:
            outcome.ray = x / -cx
        outcome.pcost, outcome.dcost = -math.inf, -math.inf
    elif status is SolveStatus.infeasible:
        scale = -(hz + by)
        if scale > 0:
            outcome.y, outcome.z = y / scale, z * (1.0 / scale)
        outcome.pcost, outcome.dcost = math.inf, math.inf
    else:
        outcome.x = x / tau
    return outcome


def _classify_stalled(best: Optional[_Iterate], last: dict, cfg: SolverConfig, iteration: int,
                      message: str) -> Tuple[SolveStatus, str, bool]:
    """
    Status of a run that stopped without a verdict

    Optimality is judged on the best iterate seen, not on the last one.
    Unboundedness found only at loose tolerance comes back as an unverified
    UNBOUNDED that the caller must certify or drop.

    Returns:
        (status, message, reduced_accuracy)
    """
    if best is not None and best.merit <= 1.0:
        return SolveStatus.optimal, f'best iterate {best.iteration} kept ({message})', False
    if best is not None and best.merit <= REDUCED_ACCURACY:
        residuals = f"pres={best.stats['pres']:.1e} dres={best.stats['dres']:.1e} gap={best.stats['gap']:.1e}"
        return (SolveStatus.numerical_trouble,
                f'reduced accuracy at iteration {best.iteration}: {residuals} ({message})', True)
    if last and last['dinfres'] <= REDUCED_ACCURACY * cfg.tol_feas:
        return SolveStatus.unbounded, f'unbounded suspected ({message})', False
    if iteration >= cfg.max_iter:
        return SolveStatus.max_iter, message, False
    return SolveStatus.numerical_trouble, message, False


def _unbounded_variable(prog: ConicProgram) -> Optional[np.ndarray]:
    """A coordinate ray when a variable with nonzero cost appears in no constraint."""
    refs = prog.referenced_vars() - set(prog.objective)
    for row in prog.rows:
        refs.update(row.coefs)
    for functional in prog.nonneg:
        refs.update(functional)
    for block in prog.psd_blocks:
        refs.update(e[0] for e in block.entries)
    sign = -1.0 if prog.sense is Sense.max else 1.0
    for v, coef in sorted(prog.objective.items()):
        if v not in refs and coef != 0.0:
            ray = np.zeros(prog.num_vars)
            ray[v] = -np.sign(sign * coef) / abs(coef)
            return ray
    return None


def _constrained_vars(prog: ConicProgram) -> np.ndarray:
    refs = set()
    for row in prog.rows:
        refs.update(row.coefs)
    for functional in prog.nonneg:
        refs.update(functional)
    for block in prog.psd_blocks:
        refs.update(e[0] for e in block.entries)
    return np.array(sorted(refs), dtype=int)


def program_residuals(prog: ConicProgram, x: np.ndarray) -> dict:
    """Constraint violations of a point in the original variables."""
    row_violation = 0.0
    for row in prog.rows:
        value = row.value(x) - row.rhs
        row_violation = max(row_violation, abs(value) if row.relation is Relation.eq else max(value, 0.0))
    nonneg_violation = 0.0
    for functional in prog.nonneg:
        value = sum(c * x[v] for v, c in functional.items())
        nonneg_violation = max(nonneg_violation, -value)
    psd_violation = 0.0
    for block in prog.psd_blocks:
        mat = block.matrix(x)
        if mat.size:
            scale = 1.0 + np.max(np.sum(np.abs(mat), axis=1))
            psd_violation = max(psd_violation, -np.linalg.eigvalsh((mat + mat.T) / 2.0)[0] / scale)
    return {
        'row_violation': float(row_violation),
        'nonneg_violation': float(nonneg_violation),
        'psd_violation': float(max(psd_violation, 0.0)),
    }


def _check_program(prog: ConicProgram) -> Optional[SolveReport]:
    if not prog.rows and not prog.psd_blocks and not prog.nonneg:
        raise ValueError('The program has no rows and no cone constraints')
    for v in prog.referenced_vars():
        if not 0 <= v < prog.num_vars:
            raise ValueError(f'Variable {v} is not declared (program has {prog.num_vars})')
    for k, block in enumerate(prog.psd_blocks):
        if not block.is_symmetric():
            label = block.label or f'#{k}'
            return SolveReport(SolveStatus.numerical_trouble,
                               message=f'PSD block {label} does not map to symmetric matrices')
    return None


def _run(prog: ConicProgram, cfg: SolverConfig) -> SolveReport:
    sign = -1.0 if prog.sense is Sense.max else 1.0
    ray = _unbounded_variable(prog)
    if ray is not None:
        infinite = -sign * math.inf
        return SolveReport(SolveStatus.unbounded, primal_value=infinite, dual_value=infinite,
                           ray=ray, certified=True, message='A costed variable appears in no constraint')

    active = _constrained_vars(prog)
    std = _to_standard_form(prog, active)
    std, consistent = _drop_dependent_rows(std)
    if not consistent:
        return SolveReport(SolveStatus.infeasible, primal_value=sign * math.inf, dual_value=sign * math.inf,
                           certified=True, message='Equality rows are inconsistent')
    scaled, eq = _equilibrate(std, cfg.equilibrate)
    outcome = _homogeneous_ipm(scaled, cfg)

    def lift(local: np.ndarray) -> np.ndarray:
        full = np.zeros(prog.num_vars)
        full[active] = local * eq.cols
        return full

    x = lift(outcome.x)
    multipliers = np.zeros(len(prog.rows))
    if len(outcome.y):
        multipliers[scaled.eq_rows] = outcome.y * eq.rows_a
    n_le = len(scaled.le_rows)
    if n_le:
        multipliers[scaled.le_rows] = outcome.z.lp[:n_le] * eq.rows_g[:n_le]

    report = SolveReport(
        status=outcome.status,
        primal_value=sign * outcome.pcost,
        dual_value=sign * outcome.dcost,
        multipliers=multipliers,
        primal_solution=x,
        residuals=dict(outcome.residuals),
        iterations=outcome.iterations,
        ray=lift(outcome.ray) if outcome.ray is not None else None,
        message=outcome.message,
        reduced_accuracy=outcome.reduced_accuracy,
    )
    if report.status is SolveStatus.unbounded:
        _certify_unbounded(prog, report, cfg)
    report.residuals.update(program_residuals(prog, x))
    return report


def _certify_unbounded(prog: ConicProgram, report: SolveReport, cfg: SolverConfig):
    """
    Keep an UNBOUNDED verdict only with a checked improving ray or the threshold heuristic

    The iterate's own ray is tried first, then find_improving_ray. A verdict
    with neither is downgraded to NUMERICAL_TROUBLE.
    """
    candidate = report.ray
    if candidate is not None and not _is_recession_direction(prog, candidate):
        candidate = None
    if candidate is None and cfg.certify_rays:
        candidate = find_improving_ray(prog, cfg)
    if candidate is not None:
        report.ray = candidate
        report.certified = True
        return
    report.ray = None
    if report.message.startswith('heuristic'):
        return
    logging.warning(f"Unbounded verdict without an improving ray: {report.message or 'no message'}")
    report.status = SolveStatus.numerical_trouble
    report.primal_value = report.dual_value = math.nan
    report.message = f'unbounded verdict could not be certified ({report.message})'


def solve(prog: ConicProgram, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """
    Solve a block conic program

    Args:
        prog: Program with at least one row or cone constraint
        cfg: Solver tolerances (defaults when omitted)

    Returns:
        SolveReport; numerical failures are reported through the status, never raised
    """
    cfg = cfg or SolverConfig()
    failed = _check_program(prog)
    if failed is not None:
        logging.error(failed.message)
        return failed
    if not prog.psd_blocks:
        return lp_solve(prog, cfg)
    report = _run(prog, cfg)
    logging.debug(f"solve: {report.status.value} after {report.iterations} iterations ({report.message})")
    return report


def lp_solve(prog: ConicProgram, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """
    Solve a program without PSD blocks

    The same homogeneous method runs with an empty semidefinite part, so the
    Newton system reduces to a sparse diagonal update.
    """
    if prog.psd_blocks:
        raise ValueError('lp_solve needs a program without PSD blocks')
    cfg = cfg or SolverConfig()
    failed = _check_program(prog)
    if failed is not None:
        return failed
    report = _run(prog, cfg)
    logging.debug(f"lp_solve: {report.status.value} after {report.iterations} iterations")
    return report


def find_improving_ray(prog: ConicProgram, cfg: Optional[SolverConfig] = None) -> Optional[np.ndarray]:
    """
    Search for a recession direction along which the objective improves

    Solves  min c'r  s.t. every row with right-hand side 0, nonnegativity,
    PSD blocks without their constant part, c'r >= -1 and |r_k| <= RAY_BOX.
    The optimum is -1 exactly when a normalised improving ray exists.

    Args:
        prog: Program to certify
        cfg: Solver tolerances for the auxiliary solve

    Returns:
        Ray with c'r = -1 (c'r = 1 for maximisation), or None
    """
    cfg = cfg or SolverConfig()
    sign = -1.0 if prog.sense is Sense.max else 1.0
    objective = {v: sign * c for v, c in prog.objective.items() if c != 0.0}
    if not objective:
        return None
    rows = [LinearRow(dict(row.coefs), row.relation, 0.0, row.label) for row in prog.rows]
    rows.append(LinearRow({v: -c for v, c in objective.items()}, Relation.le, 1.0, label='ray-normalize'))
    for v in range(prog.num_vars):
        rows.append(LinearRow({v: 1.0}, Relation.le, RAY_BOX, label=f'ray-box+{v}'))
        rows.append(LinearRow({v: -1.0}, Relation.le, RAY_BOX, label=f'ray-box-{v}'))
    blocks = tuple(PsdBlock(b.size, b.entries, (), b.label) for b in prog.psd_blocks)
    homogeneous = ConicProgram(
        num_vars=prog.num_vars,
        objective=objective,
        sense=Sense.min,
        rows=tuple(rows),
        psd_blocks=blocks,
        nonneg=prog.nonneg,
        meta={'ray_for': dict(prog.meta)},
    )
    report = _run(homogeneous, replace(cfg, certify_rays=False))
    if not report.has_bound or report.primal_value > -1.0 + RAY_TOL:
        logging.debug(f"No improving ray: {report.status.value} {report.primal_value}")
        return None
    ray = report.primal_solution
    if not _is_recession_direction(prog, ray):
        logging.debug('Improving ray candidate failed the recession check')
        return None
    return ray


def _is_recession_direction(prog: ConicProgram, ray: np.ndarray) -> bool:
    """True when ray keeps every homogenized constraint and strictly improves the objective."""
    if not np.all(np.isfinite(ray)):
        return False
    sign = -1.0 if prog.sense is Sense.max else 1.0
    if sign * sum(c * ray[v] for v, c in prog.objective.items()) >= 0.0:
        return False
    scale = 1.0 + float(np.max(np.abs(ray)))
    tol = RAY_TOL * scale
    for row in prog.rows:
        value = row.value(ray)
        if (row.relation is Relation.eq and abs(value) > tol) or value > tol:
            return False
    for functional in prog.nonneg:
        if sum(c * ray[v] for v, c in functional.items()) < -tol:
            return False
    for block in prog.psd_blocks:
        if not is_psd(PsdBlock(block.size, block.entries).matrix(ray), tol=RAY_TOL):
            return False
    return True
