"""Bilateral tensor-ring (BTR) low-rank plus sparse decomposition.

A 4D patch tensor ``D`` (Nw x Nw x Nt x Np) is split into a background ``B4D``
and a sparse target part ``T4D``. The background is tied to a product
``A x_3^1 B`` of a spatial factor ``A`` (Nw x Nw x R) and a temporal-patch
factor ``B`` (R x Nt x Np), each of which is in turn tied to a three-core
tensor ring. The penalized objective is minimized by proximal alternating
minimization: every block update below is the exact minimizer of the
objective plus ``rho/2 * ||block - previous||^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError, ParameterError, ShapeError
from .tensor_core import frobenius_norm, l1_norm, spd_solve

log = logging.getLogger(__name__)

TRCores3 = tuple  # (G_a, G_b, G_c), each an order-3 array (r, I, r)

# Unfolding conventions used below (first index fastest, see tensor_core):
#   A  (Nw, Nw, R)       -> (Nw*Nw, R)
#   B  (R, Nt, Np)       -> (R, Nt*Np)
#   B4D (Nw, Nw, Nt, Np) -> (Nw*Nw, Nt*Np)


def _mat(t: np.ndarray, rows: int) -> np.ndarray:
    return t.reshape(rows, -1, order="F")


@dataclass
class BTRFactors:
    """The six cores: ``left`` = (G1, G2, G3), ``right`` = (G4, G5, G6)."""

    left: TRCores3
    right: TRCores3

    @property
    def ranks(self) -> tuple[int, int, int]:
        return (self.left[0].shape[0], self.left[2].shape[1], self.right[0].shape[0])

    @classmethod
    def ones(cls, nw: int, nt: int, np_: int, ranks: Sequence[int]) -> "BTRFactors":
        r1, r, r2 = ranks
        left = (np.ones((r1, nw, r1)), np.ones((r1, nw, r1)), np.ones((r1, r, r1)))
        right = (np.ones((r2, r, r2)), np.ones((r2, nt, r2)), np.ones((r2, np_, r2)))
        return cls(left, right)

    @classmethod
    def random(cls, nw: int, nt: int, np_: int, ranks: Sequence[int], rng: np.random.Generator,
               low: float = 0.0, high: float = 1.0) -> "BTRFactors":
        r1, r, r2 = ranks
        u = lambda *s: rng.uniform(low, high, size=s)
        left = (u(r1, nw, r1), u(r1, nw, r1), u(r1, r, r1))
        right = (u(r2, r, r2), u(r2, nt, r2), u(r2, np_, r2))
        return cls(left, right)

    def copy(self) -> "BTRFactors":
        return BTRFactors(tuple(g.copy() for g in self.left), tuple(g.copy() for g in self.right))


def _check_ring(cores: TRCores3) -> None:
    if len(cores) != 3:
        raise ShapeError(f"a ring needs three cores, got {len(cores)}")
    for k, g in enumerate(cores):
        if g.ndim != 3:
            raise ShapeError(f"core {k} has order {g.ndim}, expected 3")
        nxt = cores[(k + 1) % 3]
        if g.shape[2] != nxt.shape[0]:
            raise ShapeError(
                f"rank mismatch between core {k} (out {g.shape[2]}) and core {(k + 1) % 3} (in {nxt.shape[0]})"
            )


def tr_compose(cores: TRCores3) -> np.ndarray:
    """X(i, j, k) = trace(G1[:, i, :] @ G2[:, j, :] @ G3[:, k, :])."""
    _check_ring(cores)
    g1, g2, g3 = cores
    pair = np.tensordot(g1, g2, axes=(2, 0))  # (a, i, j, c)
    return np.tensordot(pair, g3, axes=([0, 3], [2, 0]))


def btr_compose(f: BTRFactors) -> np.ndarray:
    """Background tensor X(i, j, t, p) = sum_r A(i, j, r) B(r, t, p)."""
    a = tr_compose(f.left)
    b = tr_compose(f.right)
    if a.shape[2] != b.shape[0]:
        raise ShapeError(f"interaction ranks differ: {a.shape[2]} vs {b.shape[0]}")
    return link(a, b)


def link(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``A x_3^1 B`` for A (n1, n2, R) and B (R, n3, n4)."""
    n1, n2, r = a.shape
    _, n3, n4 = b.shape
    return (_mat(a, n1 * n2) @ _mat(b, r)).reshape(n1, n2, n3, n4, order="F")


def gk_matrix(g: np.ndarray) -> np.ndarray:
    """Core (a, i, b) as an I x R^2 matrix with column (a, b), a fastest."""
    ra, i, rb = g.shape
    return g.transpose(1, 0, 2).reshape(i, ra * rb, order="F")


def gk_from_matrix(m: np.ndarray, ra: int, rb: int) -> np.ndarray:
    return m.reshape(m.shape[0], ra, rb, order="F").transpose(1, 0, 2)


def subchain_matrix(cores: TRCores3, k: int) -> np.ndarray:
    """Merged matrix M_k of the two cores following core ``k`` (0-based) in the ring.

    Rows are the closing bond pair (a, b), a fastest, with ``a`` the bond
    entering core ``k`` and ``b`` the bond leaving it; columns are the two free
    indices of the following cores, the nearer one fastest. With
    :func:`circular_unfold` and :func:`gk_matrix` this gives
    ``circular_unfold(tr_compose(cores), k) == gk_matrix(cores[k]) @ M_k``.
    """
    _check_ring(cores)
    g_next = cores[(k + 1) % 3]
    g_next2 = cores[(k + 2) % 3]
    # S(b, i1, i2, a)
    s = np.tensordot(g_next, g_next2, axes=(2, 0))
    rb, i1, i2, ra = s.shape
    return s.transpose(3, 0, 1, 2).reshape(ra * rb, i1 * i2, order="F")


def circular_unfold(x: np.ndarray, k: int) -> np.ndarray:
    """Mode ``k`` as rows, the remaining modes in circular order (k+1 fastest) as columns."""
    order = (k, (k + 1) % 3, (k + 2) % 3)
    return np.transpose(x, order).reshape(x.shape[k], -1, order="F")


@dataclass
class SolverParams:
    alpha: float = 1.0
    lambda1: float = 0.1
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 2.0
    rho: float = 0.01
    max_iter: int = 20
    tol: float = 1e-3
    ranks: tuple[int, int, int] = (6, 3, 30)
    H: Optional[float] = None
    init: str = "svd"
    seed: int = 0

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        self.validate()

    def validate(self) -> None:
        for name in ("alpha", "lambda1", "beta1", "beta2", "beta3", "rho", "tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {v!r}")
        if int(self.max_iter) < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if len(self.ranks) != 3 or min(self.ranks) < 1:
            raise ParameterError(f"ranks must be three positive integers, got {self.ranks}")
        if self.H is not None and not (math.isfinite(self.H) and self.H > 0):
            raise ParameterError(f"H must be positive, got {self.H}")
        if self.init not in ("svd", "ones"):
            raise ParameterError(f"init must be 'svd' or 'ones', got {self.init!r}")

    def effective_lambda(self, nw: int, nt: int) -> float:
        if self.H is None:
            return self.lambda1
        return lambda_from_H(self.H, nw, nt)


def lambda_from_H(H: float, nw: int, nt: int) -> float:
    """Sparsity weight coupled to the constant ``H``: ``H / sqrt(nw * nw * nt)``."""
    if not (H > 0 and nw > 0 and nt > 0):
        raise ParameterError(f"H, nw and nt must be positive, got {H}, {nw}, {nt}")
    return H / math.sqrt(nw * nw * nt)


@dataclass
class SolverState:
    A: np.ndarray
    B: np.ndarray
    cores: BTRFactors
    B4D: np.ndarray
    T4D: np.ndarray
    iter: int = 0
    objective_history: list = field(default_factory=list)

    def copy(self) -> "SolverState":
        return SolverState(self.A.copy(), self.B.copy(), self.cores.copy(), self.B4D.copy(),
                           self.T4D.copy(), self.iter, list(self.objective_history))


def _scaled_ring(rng: np.random.Generator, rank: int, dims: Sequence[int], target: np.ndarray) -> TRCores3:
    cores = [rng.standard_normal((rank, d, rank)) / math.sqrt(rank) for d in dims]
    have = np.sqrt(np.mean(tr_compose(cores) ** 2))
    want = np.sqrt(np.mean(target ** 2))
    scale = (want / have) ** (1.0 / 3.0) if have > 0 else 1.0
    return tuple(c * scale for c in cores)


def init_state(D: np.ndarray, params: SolverParams) -> SolverState:
    """Starting point of the alternating scheme; B4D = D and T4D = 0 always.

    ``"svd"`` (default): A and B split the leading R singular triplets of the
    (Nw*Nw) x (Nt*Np) unfolding of D evenly; ring cores are Gaussian (seeded
    by ``params.seed``) and rescaled so each ring composes to the RMS of its
    target factor.

    ``"ones"``: every factor and core entry equal to one. This start is
    invariant under permutation of the bond indices, a symmetry the exact
    block updates preserve, so both rings stay effectively rank one.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 4:
        raise ShapeError(f"expected an order-4 tensor, got shape {D.shape}")
    nw1, nw2, nt, np_ = D.shape
    r1, r, r2 = params.ranks
    if params.init == "ones":
        A = np.ones((nw1, nw2, r))
        B = np.ones((r, nt, np_))
        left = (np.ones((r1, nw1, r1)), np.ones((r1, nw2, r1)), np.ones((r1, r, r1)))
        right = (np.ones((r2, r, r2)), np.ones((r2, nt, r2)), np.ones((r2, np_, r2)))
        cores = BTRFactors(left, right)
    else:
        u, s, vt = np.linalg.svd(_mat(D, nw1 * nw2), full_matrices=False)
        k = min(r, s.size)
        root = np.sqrt(s[:k])
        A = np.zeros((nw1 * nw2, r))
        B = np.zeros((r, nt * np_))
        A[:, :k] = u[:, :k] * root
        B[:k] = root[:, None] * vt[:k]
        A = A.reshape(nw1, nw2, r, order="F")
        B = B.reshape(r, nt, np_, order="F")
        rng = np.random.default_rng(params.seed)
        cores = BTRFactors(_scaled_ring(rng, r1, (nw1, nw2, r), A),
                           _scaled_ring(rng, r2, (r, nt, np_), B))
    return SolverState(A, B, cores, D.copy(), np.zeros_like(D))


def objective(state: SolverState, D: np.ndarray, params: SolverParams,
              lambda1: Optional[float] = None) -> float:
    """Penalized objective minimized by :func:`solve`."""
    lam = params.lambda1 if lambda1 is None else lambda1
    fit = frobenius_norm(state.B4D - link(state.A, state.B)) ** 2
    left = frobenius_norm(state.A - tr_compose(state.cores.left)) ** 2
    right = frobenius_norm(state.B - tr_compose(state.cores.right)) ** 2
    data = frobenius_norm(D - state.B4D - state.T4D) ** 2
    return (0.5 * params.alpha * fit + lam * l1_norm(state.T4D) + 0.5 * params.beta1 * left
            + 0.5 * params.beta2 * right + 0.5 * params.beta3 * data)


def update_A(state: SolverState, params: SolverParams) -> np.ndarray:
    n1, n2, r = state.A.shape
    X = _mat(state.B4D, n1 * n2)
    Bm = _mat(state.B, r)
    C = _mat(tr_compose(state.cores.left), n1 * n2)
    A_hat = _mat(state.A, n1 * n2)
    rhs = params.alpha * X @ Bm.T + params.beta1 * C + params.rho * A_hat
    lhs = params.alpha * Bm @ Bm.T + (params.beta1 + params.rho) * np.eye(r)
    # A @ lhs = rhs, lhs symmetric
    A = spd_solve(lhs, rhs.T).T
    return A.reshape(n1, n2, r, order="F")


def update_B(state: SolverState, params: SolverParams) -> np.ndarray:
    n1, n2, r = state.A.shape
    _, nt, np_ = state.B.shape
    X = _mat(state.B4D, n1 * n2)
    Am = _mat(state.A, n1 * n2)
    Dm = _mat(tr_compose(state.cores.right), r)
    B_hat = _mat(state.B, r)
    lhs = params.alpha * Am.T @ Am + (params.beta2 + params.rho) * np.eye(r)
    rhs = params.alpha * Am.T @ X + params.beta2 * Dm + params.rho * B_hat
    return spd_solve(lhs, rhs).reshape(r, nt, np_, order="F")


def update_core(state: SolverState, params: SolverParams, k: int) -> np.ndarray:
    """Proximal least-squares update of core ``k`` (0..5).

    Cores 0-2 form the ring tied to ``A`` (weight beta1); cores 3-5 the ring
    tied to ``B`` (weight beta2).
    """
    if not 0 <= k < 6:
        raise ParameterError(f"core index must be in 0..5, got {k}")
    if k < 3:
        ring, target, weight, j = state.cores.left, state.A, params.beta1, k
    else:
        ring, target, weight, j = state.cores.right, state.B, params.beta2, k - 3
    g_hat = ring[j]
    ra, _, rb = g_hat.shape
    M = subchain_matrix(ring, j)
    Ak = circular_unfold(target, j)
    G_hat = gk_matrix(g_hat)
    nrank, ncols = M.shape
    if ncols < nrank:
        # Push-through form: G = G_hat + w E (w M^T M + rho I)^-1 M^T with
        # E = Ak - G_hat M; same minimizer, ncols x ncols system instead of R^2 x R^2.
        E = Ak - G_hat @ M
        lhs = weight * M.T @ M + params.rho * np.eye(ncols)
        G = G_hat + weight * spd_solve(lhs, E.T).T @ M.T
    else:
        lhs = weight * M @ M.T + params.rho * np.eye(nrank)
        rhs = weight * Ak @ M.T + params.rho * G_hat
        G = spd_solve(lhs, rhs.T).T
    return gk_from_matrix(G, ra, rb)


def update_background(state: SolverState, D: np.ndarray, params: SolverParams) -> np.ndarray:
    a, b3, rho = params.alpha, params.beta3, params.rho
    return (a * link(state.A, state.B) + b3 * (D - state.T4D) + rho * state.B4D) / (a + b3 + rho)


def shrink1(x: np.ndarray, xi: float) -> np.ndarray:
    """Soft threshold: sign(x) * max(|x| - xi, 0)."""
    if xi < 0:
        raise ParameterError(f"threshold must be nonnegative, got {xi}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - xi, 0.0)


def update_target(state: SolverState, D: np.ndarray, params: SolverParams,
                  lambda1: Optional[float] = None) -> np.ndarray:
    lam = params.lambda1 if lambda1 is None else lambda1
    b3, rho = params.beta3, params.rho
    t_star = (b3 * (D - state.B4D) + rho * state.T4D) / (b3 + rho)
    return shrink1(t_star, lam / (b3 + rho))


def _set_core(state: SolverState, k: int, g: np.ndarray) -> None:
    if k < 3:
        left = list(state.cores.left)
        left[k] = g
        state.cores.left = tuple(left)
    else:
        right = list(state.cores.right)
        right[k - 3] = g
        state.cores.right = tuple(right)


def sweep(state: SolverState, D: np.ndarray, params: SolverParams,
          lambda1: Optional[float] = None) -> SolverState:
    """One pass of block updates in the order A, B, G1..G6, B4D, T4D (mutates ``state``)."""
    state.A = update_A(state, params)
    state.B = update_B(state, params)
    for k in range(6):
        _set_core(state, k, update_core(state, params, k))
    state.B4D = update_background(state, D, params)
    state.T4D = update_target(state, D, params, lambda1)
    state.iter += 1
    return state


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return frobenius_norm(new - old) / max(frobenius_norm(old), 1e-12)


def _finite(state: SolverState) -> bool:
    arrays = (state.A, state.B, state.B4D, state.T4D) + state.cores.left + state.cores.right
    return all(np.isfinite(a).all() for a in arrays)


def solve(D: np.ndarray, params: Optional[SolverParams] = None,
          record_objective: bool = True) -> tuple[np.ndarray, np.ndarray, SolverState]:
    """Decompose ``D`` into background and sparse target tensors.

    Stops after ``params.max_iter`` sweeps or once the relative change of the
    target tensor, ``||T_new - T_old|| / max(||T_old||, 1e-12)``, drops below
    ``params.tol``. While the target tensor is still identically zero the same
    test is applied to the background tensor instead.

    Returns
    -------
    B4D, T4D : ndarray
        Background and target tensors, same shape as ``D``.
    state : SolverState
        Final iterate; ``objective_history`` holds the objective at the start
        and after every sweep.
    """
    params = params or SolverParams()
    params.validate()
    D = np.asarray(D, dtype=float)
    if not np.isfinite(D).all():
        raise DivergenceError("input tensor contains non-finite values")
    nw, _, nt, _ = D.shape if D.ndim == 4 else (None,) * 4
    state = init_state(D, params)
    lam = params.effective_lambda(nw, nt)
    if record_objective:
        state.objective_history.append(objective(state, D, params, lam))
    for _ in range(int(params.max_iter)):
        t_old, b_old = state.T4D, state.B4D
        sweep(state, D, params, lam)
        if not _finite(state):
            raise DivergenceError(f"non-finite values after sweep {state.iter}")
        if record_objective:
            state.objective_history.append(objective(state, D, params, lam))
        change = _relative_change(state.T4D, t_old)
        if change == 0.0 and not state.T4D.any():
            # no target mass at all yet: judge convergence by the background
            change = _relative_change(state.B4D, b_old)
        log.debug("sweep %d: relative target change %.3e", state.iter, change)
        if change < params.tol:
            break
    return state.B4D, state.T4D, state
