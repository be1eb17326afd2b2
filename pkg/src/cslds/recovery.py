"""Observation-matrix recovery by model-based CoSaMP.

Given state estimates ``x_t`` and the measurements ``z_t = Phi_t y_t`` of
every frame, the coefficients ``S = Psi^T C`` are found greedily.  The
support model is row-group sparsity: all ``d`` columns of ``S`` share one
set of ``K`` rows, which is what the state-space ambiguity ``C -> C L``
preserves.  An optional static mean ``mu`` is carried as an extra column
with unit state, sparse in its own basis with its own sparsity level.

Per iteration::

    proxy      R = sum_t Theta_t^T v_t x_t^T,  Theta_t = Phi_t Psi
    merge      Omega = Omega_old U top-2K rows of R by row energy
    estimate   least squares over Omega, conjugate gradients
    prune      keep the K rows of largest energy
    residual   v_t = z_t - Theta_t S x_t
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .lds import VideoTensor
from .transforms import SparsifyingBasis

GROUPINGS = ("row_group", "per_column")

# largest (frames x rows x support) tensor materialized for the LS step
_DENSE_LIMIT = 2.5e7


@dataclass
class RecoveryConfig:
    K: int
    K_mu: int = 0
    basis_C: SparsifyingBasis = None
    basis_mu: SparsifyingBasis = None
    max_iters: int = 50
    tol: float = 1e-6
    ls_iters: int = 200
    ls_tol: float = 1e-10
    grouping: str = "row_group"
    use_common: bool = True

    def validate(self, N):
        if self.basis_C is None or self.basis_C.N != N:
            raise DimensionError(f"basis_C must be defined on N={N} pixels")
        if self.K_mu > 0 and (self.basis_mu is None or self.basis_mu.N != N):
            raise DimensionError(f"basis_mu must be defined on N={N} pixels when K_mu > 0")
        if self.grouping not in GROUPINGS:
            raise ValueError(f"grouping must be one of {GROUPINGS}")
        # per-column supports may span every row (plain least squares at K = N)
        limit = N if self.grouping == "per_column" else N // 2
        if not 1 <= self.K <= limit:
            raise ValueError(f"K={self.K} must lie in [1, {limit}] for {self.grouping} grouping on N={N}")
        if self.K_mu < 0 or 2 * self.K_mu > N:
            raise ValueError(f"K_mu={self.K_mu} must satisfy 0 <= K_mu and 2 K_mu <= N={N}")


@dataclass
class RecoveredModel:
    C: np.ndarray
    mu: np.ndarray
    support: np.ndarray
    mu_support: np.ndarray
    residual_history: list
    converged: bool
    iterations: int = 0
    coef: np.ndarray = field(default=None, repr=False)
    mu_coef: np.ndarray = field(default=None, repr=False)
    ls_residual_history: list = field(default_factory=list, repr=False)
    diagnostics: dict = field(default_factory=dict)


class FrameMeasurements:
    """Measurements of all frames laid out as padded ``(T, M_max)`` arrays.

    ``rows[t, j]`` indexes the shared full transform, ``weight`` is 0 on
    padding slots.  `X` holds one state column per frame.
    """

    def __init__(self, ensemble, common, innovation, X):
        self.transform = ensemble.common
        self.N, self.n = ensemble.N, ensemble.n
        T = len(innovation)
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != T:
            raise DimensionError(f"need states for all {T} frames, got {X.shape[1]}")
        per_rows, per_z = [], []
        for t in range(T):
            rows = [ensemble.innovation[t].rows]
            vals = [np.asarray(innovation[t], dtype=np.float64)]
            if common is not None and common[t] is not None:
                rows.insert(0, ensemble.common.rows)
                vals.insert(0, np.asarray(common[t], dtype=np.float64))
            per_rows.append(np.concatenate(rows))
            per_z.append(np.concatenate(vals))
        width = max((r.size for r in per_rows), default=0)
        self.rows = np.zeros((T, width), dtype=np.int64)
        self.weight = np.zeros((T, width))
        self.z = np.zeros((T, width))
        for t, (r, v) in enumerate(zip(per_rows, per_z)):
            if r.size != v.size:
                raise DimensionError(f"frame {t}: {v.size} measurements for {r.size} operator rows")
            self.rows[t, :r.size] = r
            self.weight[t, :r.size] = 1.0
            self.z[t, :r.size] = v
        self.X = X

    @property
    def T(self):
        return self.rows.shape[0]

    @property
    def count(self):
        return int(self.weight.sum())

    def transformed_atoms(self, basis, idx):
        """``W Psi[:, idx]``: the shared full transform of the selected atoms, shape (n, |idx|)."""
        coef = np.zeros((idx.size, self.N))
        coef[np.arange(idx.size), idx] = 1.0
        return self.transform.full_forward(basis.synthesize(coef).T)

    def forward(self, coef, basis, mu_coef=None, basis_mu=None):
        """Predicted measurements ``Phi_t Psi (S x_t) (+ Phi_t Psi_mu m)``."""
        G = self.transform.full_forward(basis.synthesize(coef.T).T)
        pred = np.einsum("tji,it->tj", G[self.rows], self.X)
        if mu_coef is not None:
            g = self.transform.full_forward(basis_mu.synthesize(mu_coef))
            pred += g[self.rows]
        return pred * self.weight

    def adjoint(self, V, basis, basis_mu=None):
        """``sum_t Theta_t^T v_t x_t^T`` and, with `basis_mu`, ``sum_t Theta_mu_t^T v_t``."""
        V = V * self.weight
        flat_rows = self.rows.ravel()
        P = np.empty((self.n, self.X.shape[0]))
        for i in range(self.X.shape[0]):
            P[:, i] = np.bincount(flat_rows, weights=(V * self.X[i][:, None]).ravel(), minlength=self.n)
        R = basis.analyze(self.transform.full_adjoint(P).T).T
        r_mu = None
        if basis_mu is not None:
            p = np.bincount(flat_rows, weights=V.ravel(), minlength=self.n)
            r_mu = basis_mu.analyze(self.transform.full_adjoint(p))
        return R, r_mu


def _top(values, k):
    """Indices of the `k` largest entries; ties go to the lowest index."""
    k = min(int(k), values.size)
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.argsort(-values, kind="stable")[:k])


def cgls(matvec, rmatvec, b, x0, maxiter, tol):
    """Conjugate gradients on the normal equations of ``min ||A x - b||``.

    Stops when ``||A^T r|| <= tol * ||A^T b||``.  Returns ``(x, info)``;
    ``info["breakdown"]`` is set if a search direction vanished in the
    range of A before convergence.
    """
    x = x0.copy()
    r = b - matvec(x)
    s = rmatvec(r)
    ref = np.linalg.norm(rmatvec(b))
    gamma = float(s @ s)
    info = {"iterations": 0, "converged": True, "breakdown": False}
    if ref == 0 or np.sqrt(gamma) <= tol * ref:
        return x, info
    p = s.copy()
    for k in range(1, maxiter + 1):
        q = matvec(p)
        qq = float(np.sum(q * q))
        if qq <= 0 or not np.isfinite(qq):
            info.update(iterations=k, converged=False, breakdown=True)
            return x, info
        alpha = gamma / qq
        x += alpha * p
        r -= alpha * q
        s = rmatvec(r)
        gamma_new = float(s @ s)
        info["iterations"] = k
        if np.sqrt(gamma_new) <= tol * ref:
            return x, info
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    info["converged"] = False
    return x, info


class _SupportLS:
    """Least-squares problem restricted to a support mask.

    The unknowns are the masked entries of the coefficient matrix followed
    by the masked mean coefficients.  Small problems precompute the
    restricted dictionary per frame; large ones stay matrix-free.
    """

    def __init__(self, fm, cfg, mask, mu_idx):
        self.fm, self.cfg = fm, cfg
        self.mask = mask
        self.rows_idx = np.flatnonzero(mask.any(axis=1))
        self.mu_idx = mu_idx
        self.n_coef = int(mask.sum())
        width = fm.rows.shape[1]
        dense_size = fm.T * width * (self.rows_idx.size + mu_idx.size)
        self.dense = dense_size <= _DENSE_LIMIT
        if self.dense:
            self.E = (fm.transformed_atoms(cfg.basis_C, self.rows_idx)[fm.rows]
                      * fm.weight[:, :, None])
            if mu_idx.size:
                self.E_mu = (fm.transformed_atoms(cfg.basis_mu, mu_idx)[fm.rows]
                             * fm.weight[:, :, None])
            self.sub_mask = mask[self.rows_idx]

    def unpack(self, u):
        coef = np.zeros(self.mask.shape)
        coef[self.mask] = u[:self.n_coef]
        mu_coef = None
        if self.mu_idx.size:
            mu_coef = np.zeros(self.mask.shape[0])
            mu_coef[self.mu_idx] = u[self.n_coef:]
        return coef, mu_coef

    def pack(self, coef, mu_coef):
        parts = [coef[self.mask]]
        if self.mu_idx.size:
            parts.append(mu_coef[self.mu_idx])
        return np.concatenate(parts)

    def matvec(self, u):
        fm = self.fm
        if not self.dense:
            coef, mu_coef = self.unpack(u)
            return fm.forward(coef, self.cfg.basis_C, mu_coef, self.cfg.basis_mu)
        sub = np.zeros(self.sub_mask.shape)
        sub[self.sub_mask] = u[:self.n_coef]
        pred = np.einsum("tjk,tk->tj", self.E, (sub @ fm.X).T)
        if self.mu_idx.size:
            pred += self.E_mu @ u[self.n_coef:]
        return pred

    def rmatvec(self, V):
        fm = self.fm
        if not self.dense:
            R, r_mu = fm.adjoint(V, self.cfg.basis_C, self.cfg.basis_mu if self.mu_idx.size else None)
            return self.pack(R, r_mu)
        grad = np.einsum("tjk,tj->tk", self.E, V).T @ fm.X.T
        parts = [grad[self.sub_mask]]
        if self.mu_idx.size:
            parts.append(np.einsum("tjk,tj->k", self.E_mu, V))
        return np.concatenate(parts)


def _check_states(X):
    gram = X @ X.T
    ev = np.linalg.eigvalsh(gram)
    if ev[-1] <= 0 or ev[0] <= 1e-12 * ev[-1]:
        raise NumericalError("states_not_exciting", "state estimate X X^T is singular")


def recover_observation(stream, states, cfg):
    """Recover ``C`` (and ``mu`` when ``cfg.K_mu > 0``) from a compressive stream.

    `states` is a ``(d, T)`` array, a :class:`StateSequence`, or a
    :class:`~cslds.state_estim.StateEstimate` (extended to all frames).
    Common measurements enter the fit unless ``cfg.use_common`` is false.
    """
    X = _state_matrix(states, stream.T)
    ens = stream.ensemble()
    return recover_from_measurements(ens, stream.common if cfg.use_common else None,
                                     stream.innovation, X, cfg)


def _state_matrix(states, T):
    if hasattr(states, "full_states"):
        return states.full_states(T)
    X = getattr(states, "X", states)
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


def recover_from_measurements(ensemble, common, innovation, X, cfg):
    """Model-based CoSaMP on explicit per-frame measurement lists."""
    N = ensemble.N
    cfg.validate(N)
    fm = FrameMeasurements(ensemble, common, innovation, X)
    d = fm.X.shape[0]
    _check_states(fm.X)
    use_mu = cfg.K_mu > 0
    basis_mu = cfg.basis_mu if use_mu else None

    coef = np.zeros((N, d))
    mu_coef = np.zeros(N) if use_mu else None
    mask_old = np.zeros((N, d), dtype=bool)
    mu_old = np.zeros(0, dtype=np.int64)
    V = fm.z.copy()
    z_energy = float(np.sum(fm.z ** 2))
    prev = z_energy
    history, ls_history = [], []
    converged = False
    diagnostics = {"cg_iterations": [], "cg_breakdown": False, "ls_unconverged": 0}
    it = 0

    for it in range(1, cfg.max_iters + 1):
        R, r_mu = fm.adjoint(V, cfg.basis_C, basis_mu)

        # support identification and merger
        mask = mask_old.copy()
        if cfg.grouping == "row_group":
            mask[_top(np.sum(R ** 2, axis=1), 2 * cfg.K), :] = True
        else:
            for i in range(d):
                mask[_top(R[:, i] ** 2, 2 * cfg.K), i] = True
        mu_idx = np.union1d(mu_old, _top(r_mu ** 2, 2 * cfg.K_mu)) if use_mu else np.zeros(0, dtype=np.int64)

        # least squares on the merged support, warm-started at the current estimate
        ls = _SupportLS(fm, cfg, mask, mu_idx)
        u0 = ls.pack(coef, mu_coef if use_mu else None)
        u, info = cgls(ls.matvec, ls.rmatvec, fm.z, u0, cfg.ls_iters, cfg.ls_tol)
        diagnostics["cg_iterations"].append(info["iterations"])
        if info["breakdown"]:
            diagnostics["cg_breakdown"] = True
        if not info["converged"]:
            diagnostics["ls_unconverged"] += 1
        B, m = ls.unpack(u)
        ls_history.append(float(np.sum((fm.z - ls.matvec(u)) ** 2)))

        # prune to the model's sparsity
        mask = np.zeros((N, d), dtype=bool)
        if cfg.grouping == "row_group":
            mask[_top(np.sum(B ** 2, axis=1), cfg.K), :] = True
        else:
            for i in range(d):
                mask[_top(B[:, i] ** 2, cfg.K), i] = True
        coef = np.where(mask, B, 0.0)
        if use_mu:
            mu_keep = _top(m ** 2, cfg.K_mu)
            mu_coef = np.zeros(N)
            mu_coef[mu_keep] = m[mu_keep]
            mu_old = mu_keep

        V = fm.z - fm.forward(coef, cfg.basis_C, mu_coef, basis_mu)
        energy = float(np.sum(V ** 2))
        history.append(energy)
        mask_old = mask
        if diagnostics["cg_breakdown"]:
            break
        if energy <= 1e-24 * z_energy or abs(prev - energy) < cfg.tol * prev:
            converged = True
            break
        prev = energy

    C = cfg.basis_C.synthesize(coef.T).T
    mu = cfg.basis_mu.synthesize(mu_coef) if use_mu else np.zeros(N)
    support = np.flatnonzero(mask_old.any(axis=1))
    return RecoveredModel(C, mu, support, np.asarray(mu_old), history, converged, it,
                          coef, mu_coef, ls_history, diagnostics)


def reconstruct_video(model, states, h, w, T=None):
    """Frames ``mu + C x_t`` for every frame covered by `states`."""
    if hasattr(states, "full_states"):
        X = states.full_states(T)
    else:
        X = np.atleast_2d(np.asarray(getattr(states, "X", states), dtype=np.float64))
        if T is not None:
            X = X[:, :T]
    if model.C.shape[1] != X.shape[0]:
        raise DimensionError(f"C has {model.C.shape[1]} columns but states have dimension {X.shape[0]}")
    return VideoTensor(model.C @ X + model.mu[:, None], h, w)
