"""Primal-dual interior-point solver for block SDPs and the general-resource teleportation SDP.

Standard form, all blocks complex Hermitian::

    maximize   sum_b <C_b, X_b>
    subject to A(X) = b,  X_b >= 0
    dual:      minimize b.y  s.t.  Z_b = A_b^*(y) - C_b >= 0

Each block's constraint map is stored as an ``(m, n_b^2)`` matrix whose row
``k`` is ``conj(vec(A_bk))`` (row-major vec), dense or ``scipy.sparse``.
Blocks may share one matrix object; the Schur complement then sums their
scalings before the (expensive) sandwich product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import core, linalg
from .errors import ConvergenceError, ResourceError, ValidationError
from .linalg import TensorSpace

PRIMARY_DIM_CAP = 64


@dataclass
class SdpInstance:
    block_dims: list
    objective: list
    constraint_maps: list
    rhs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        m = self.rhs.size
        if not (len(self.block_dims) == len(self.objective) == len(self.constraint_maps)):
            raise ValidationError("block_dims, objective and constraint_maps differ in length")
        for n, c, a in zip(self.block_dims, self.objective, self.constraint_maps):
            if np.shape(c) != (n, n):
                raise ValidationError(f"objective block shape {np.shape(c)} != ({n}, {n})")
            linalg.check_hermitian(c)
            if a.shape != (m, n * n):
                raise ValidationError(f"constraint map shape {a.shape} != ({m}, {n * n})")

    @property
    def num_constraints(self) -> int:
        return self.rhs.size

    def apply(self, blocks) -> np.ndarray:
        out = np.zeros(self.num_constraints)
        for a, x in zip(self.constraint_maps, blocks):
            out += np.real(a @ np.asarray(x).reshape(-1))
        return out

    def adjoint(self, y) -> list:
        y = np.asarray(y, dtype=float)
        out = []
        for n, a in zip(self.block_dims, self.constraint_maps):
            v = a.conj().T @ y
            v = np.asarray(v).reshape(n, n)
            out.append(0.5 * (v + v.conj().T))
        return out

    def objective_value(self, blocks) -> float:
        return float(sum(np.real(np.vdot(c, x)) for c, x in zip(self.objective, blocks)))

    def constraint(self, k: int):
        """Per-block coefficient matrices and right-hand side of constraint ``k``."""
        mats = []
        for n, a in zip(self.block_dims, self.constraint_maps):
            row = a[k]
            row = row.toarray() if sp.issparse(row) else np.asarray(row)
            mats.append(np.conj(row).reshape(n, n))
        return mats, float(self.rhs[k])

    @property
    def equality_constraints(self):
        return [self.constraint(k) for k in range(self.num_constraints)]

    def schur(self, scalings: Sequence[np.ndarray]) -> np.ndarray:
        groups: dict = {}
        for a, w in zip(self.constraint_maps, scalings):
            key = id(a)
            k = np.kron(w, w.conj())
            if key in groups:
                groups[key][1] += k
            else:
                groups[key] = [a, k]
        m = np.zeros((self.num_constraints, self.num_constraints))
        for a, k in groups.values():
            t = a @ k
            t = np.asarray(t)
            ah = a.conj().T
            m += np.real(np.asarray(t @ ah))
        return 0.5 * (m + m.T)


@dataclass
class SdpSolution:
    primal_blocks: list
    y: np.ndarray
    dual_slacks: list
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-9
    max_iter: int = 200
    step_fraction: float = 0.98


def _herm(m):
    return 0.5 * (m + m.conj().T)


def _nt_scaling(x, z):
    """Return ``G`` with ``G^-1 X G^-H = G^H Z G = diag(v)``, and ``v``."""
    lx = np.linalg.cholesky(x)
    lz = np.linalg.cholesky(z)
    u, s, qh = np.linalg.svd(lz.conj().T @ lx)
    g = lx @ qh.conj().T / np.sqrt(s)
    return g, s


def _max_step(x, dx):
    lx = np.linalg.cholesky(x)
    linv = scipy.linalg.solve_triangular(lx, np.eye(x.shape[0]), lower=True)
    w = np.linalg.eigvalsh(_herm(linv @ dx @ linv.conj().T))
    return np.inf if w[0] >= 0 else -1.0 / w[0]


def _inner(a_blocks, b_blocks) -> float:
    return float(sum(np.real(np.vdot(a, b)) for a, b in zip(a_blocks, b_blocks)))


def solve(instance: SdpInstance, options: SolverOptions | None = None, x0=None, y0=None) -> SdpSolution:
    """Mehrotra predictor-corrector path following with the Nesterov-Todd direction.

    ``x0`` (primal blocks) and ``y0`` must give positive definite ``X`` and
    ``Z``; identity-based defaults are used otherwise.
    """
    opt = options or SolverOptions()
    dims = instance.block_dims
    c = [np.asarray(cb, dtype=complex) for cb in instance.objective]
    b = instance.rhs
    x = [np.eye(n, dtype=complex) for n in dims] if x0 is None else [np.array(xb, dtype=complex) for xb in x0]
    if y0 is None:
        y = np.zeros(instance.num_constraints)
        z = [np.eye(n, dtype=complex) for n in dims]
    else:
        y = np.asarray(y0, dtype=float).copy()
        z = [a - cb for a, cb in zip(instance.adjoint(y), c)]
    n_total = sum(dims)
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.sqrt(_inner(c, c))
    history = []

    def status():
        rp = b - instance.apply(x)
        rd = [cb + zb - ab for cb, zb, ab in zip(c, z, instance.adjoint(y))]
        pv = instance.objective_value(x)
        dv = float(b @ y)
        return rp, rd, pv, dv

    it = 0
    while True:
        rp, rd, pv, dv = status()
        pres = np.linalg.norm(rp) / bnorm
        dres = np.sqrt(_inner(rd, rd)) / cnorm
        mu_gap = _inner(x, z)
        history.append((pv, dv, pres, dres))
        if pres <= opt.feas_tol and dres <= opt.feas_tol and abs(dv - pv) <= opt.gap_tol and mu_gap <= opt.gap_tol:
            break
        if it >= opt.max_iter:
            best = SdpSolution(x, y, z, pv, dv, dv - pv, it, pres, dres, history)
            raise ConvergenceError(f"no convergence in {it} iterations (gap {dv - pv:.3e})", best, dv - pv)
        it += 1
        mu = mu_gap / n_total

        scal = [_nt_scaling(_herm(xb), _herm(zb)) for xb, zb in zip(x, z)]
        w = [g @ g.conj().T for g, _ in scal]
        schur = instance.schur(w)
        try:
            factor = scipy.linalg.cho_factor(schur)
            solve_m = lambda r: scipy.linalg.cho_solve(factor, r)
        except np.linalg.LinAlgError:
            lu = scipy.linalg.lu_factor(schur)
            solve_m = lambda r: scipy.linalg.lu_solve(lu, r)

        wrdw = [wb @ rdb @ wb for wb, rdb in zip(w, rd)]

        def direction(rc):
            rhs = instance.apply([a + bb for a, bb in zip(rc, wrdw)]) - rp
            dy = solve_m(rhs)
            dz = [_herm(a - rdb) for a, rdb in zip(instance.adjoint(dy), rd)]
            dx = [_herm(rcb - wb @ dzb @ wb) for rcb, wb, dzb in zip(rc, w, dz)]
            return dx, dy, dz

        def steps(dx, dz):
            ap = min([1.0] + [opt.step_fraction * _max_step(xb, dxb) for xb, dxb in zip(x, dx)])
            ad = min([1.0] + [opt.step_fraction * _max_step(zb, dzb) for zb, dzb in zip(z, dz)])
            return ap, ad

        # predictor
        dx, dy, dz = direction([-xb for xb in x])
        ap, ad = steps(dx, dz)
        trial = _inner([xb + ap * d for xb, d in zip(x, dx)], [zb + ad * d for zb, d in zip(z, dz)])
        sigma = min(1.0, max(0.0, (trial / mu_gap) ** 3)) if mu_gap > 0 else 0.0

        # corrector in the scaled space
        rc = []
        for (g, v), dxb, dzb in zip(scal, dx, dz):
            ginv = np.linalg.inv(g)
            dxh = ginv @ dxb @ ginv.conj().T
            dzh = g.conj().T @ dzb @ g
            r = sigma * mu * np.eye(len(v)) - np.diag(v * v) - 0.5 * (dxh @ dzh + dzh @ dxh)
            u = 2.0 * r / (v[:, None] + v[None, :])
            rc.append(g @ u @ g.conj().T)
        dx, dy, dz = direction(rc)
        ap, ad = steps(dx, dz)
        x = [_herm(xb + ap * d) for xb, d in zip(x, dx)]
        y = y + ad * dy
        z = [_herm(zb + ad * d) for zb, d in zip(z, dz)]

    return SdpSolution(x, y, z, pv, dv, dv - pv, it, pres, dres, history)


# -- the general-resource teleportation SDP -------------------------------------

def hermitian_basis_rows(n: int) -> sp.csr_matrix:
    """Rows ``conj(vec(E_k))`` of an orthonormal Hermitian basis of ``n x n`` matrices."""
    rows, cols, vals = [], [], []
    k = 0
    r2 = 1.0 / np.sqrt(2.0)
    for p in range(n):
        rows.append(k), cols.append(p * n + p), vals.append(1.0)
        k += 1
    for p in range(n):
        for q in range(p + 1, n):
            rows += [k, k]
            cols += [p * n + q, q * n + p]
            vals += [r2, r2]
            k += 1
            # E = (-i|p><q| + i|q><p|)/sqrt2, stored conjugated
            rows += [k, k]
            cols += [p * n + q, q * n + p]
            vals += [1j * r2, -1j * r2]
            k += 1
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n * n, n * n))


def _lift_map(n_a: int, d: int) -> sp.csr_matrix:
    """Matrix of ``vec(X) -> vec(X (x) 1_d)`` (row-major)."""
    n = n_a * d
    rows, cols = [], []
    for p in range(n_a):
        for q in range(n_a):
            for k in range(d):
                rows.append((p * d + k) * n + (q * d + k))
                cols.append(p * n_a + q)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n * n, n_a * n_a))


def build_primary(n_ports: int, qudit_dim: int, override_size_cap: bool = False) -> SdpInstance:
    """Optimize ``(1/d^2) sum_i tr Pt_i sigma_i`` over ``Pt_i >= 0``, ``sum Pt_i = X (x) 1``, ``tr X = d^N``.

    Blocks: ``Pt_1..Pt_N`` of size ``d^(N+1)`` then ``X`` of size ``d^N``.
    Constraints: coordinates of ``sum Pt_i - X (x) 1`` in an orthonormal
    Hermitian basis (``d^(2N+2)`` of them), then the trace of ``X``.
    """
    core._validate_nd(n_ports, qudit_dim)
    n_ab = qudit_dim ** (n_ports + 1)
    n_a = qudit_dim ** n_ports
    if n_ab > PRIMARY_DIM_CAP and not override_size_cap:
        raise ResourceError(f"SDP block dimension {n_ab} exceeds {PRIMARY_DIM_CAP}; pass override_size_cap")
    states = core.signal_states(n_ports, qudit_dim, core.PHI_PLUS)
    basis = hermitian_basis_rows(n_ab)
    m = n_ab * n_ab + 1
    zero_row = sp.csr_matrix((1, n_ab * n_ab), dtype=complex)
    a_pi = sp.vstack([basis, zero_row]).tocsr()
    trace_row = sp.csr_matrix(np.eye(n_a).reshape(1, -1).astype(complex))
    a_x = sp.vstack([-(basis @ _lift_map(n_a, qudit_dim)), trace_row]).tocsr()
    objective = [s / qudit_dim ** 2 for s in states.sigmas] + [np.zeros((n_a, n_a))]
    rhs = np.zeros(m)
    rhs[-1] = n_a
    return SdpInstance(
        block_dims=[n_ab] * n_ports + [n_a],
        objective=objective,
        constraint_maps=[a_pi] * n_ports + [a_x],
        rhs=rhs,
        meta={"n_ports": n_ports, "qudit_dim": qudit_dim, "basis": basis, "states": states},
    )


def _omega_to_y(instance: SdpInstance, omega: np.ndarray, t: float) -> np.ndarray:
    basis = instance.meta["basis"]
    y = np.real(basis @ omega.reshape(-1))
    return np.append(y, t)


def dual_operators(instance: SdpInstance, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Dual variables in the normalization ``Omega - sigma_i >= 0``, ``a 1 - tr_B Omega >= 0``."""
    d = instance.meta["qudit_dim"]
    n_ab = instance.block_dims[0]
    basis = instance.meta["basis"]
    omega = np.asarray(basis.conj().T @ y[:-1]).reshape(n_ab, n_ab)
    return d ** 2 * _herm(omega), d ** 2 * float(y[-1])


def srm_warm_start(n_ports: int, qudit_dim: int, mix: float = 0.01) -> list:
    """Primal point ``X = 1``, ``Pt_i = (1 - mix) Pi_i^SRM + mix 1/N`` (strictly feasible for mix > 0)."""
    states = core.signal_states(n_ports, qudit_dim, core.PHI_PLUS)
    povm = core.srm_povm(states, "eigh")
    n_ab = qudit_dim ** (n_ports + 1)
    eye = np.eye(n_ab)
    blocks = [(1 - mix) * e + mix * eye / n_ports for e in povm.elements]
    return blocks + [np.eye(qudit_dim ** n_ports, dtype=complex)]


def _dual_start(instance: SdpInstance) -> np.ndarray:
    d = instance.meta["qudit_dim"]
    n = instance.meta["n_ports"]
    n_ab = instance.block_dims[0]
    # Omega = 2/d^(N+1) 1 clears every sigma_i/d^2; t leaves slack 1/d^N on the X block
    omega = 2.0 / d ** (n + 1) * np.eye(n_ab)
    return _omega_to_y(instance, omega, 3.0 / d ** n)


@dataclass
class PortSdpResult:
    n_ports: int
    qudit_dim: int
    solution: SdpSolution
    omega: np.ndarray
    a: float

    @property
    def F_primal(self) -> float:
        return self.solution.primal_value

    @property
    def F_dual(self) -> float:
        return self.solution.dual_value

    @property
    def gap(self) -> float:
        return self.solution.gap

    @property
    def pis(self) -> list:
        return self.solution.primal_blocks[:-1]

    @property
    def x(self) -> np.ndarray:
        return self.solution.primal_blocks[-1]

    def report(self) -> core.FidelityReport:
        return core.FidelityReport.build(self.n_ports, self.qudit_dim, self.F_primal, "sdp", core.PHI_PLUS)

    def to_json(self, dump_matrices: bool = False) -> dict:
        out = {"n": self.n_ports, "d": self.qudit_dim, "F_primal": self.F_primal,
               "F_dual": self.F_dual, "gap": self.gap, "iterations": self.solution.iterations}
        if dump_matrices:
            d, n = self.qudit_dim, self.n_ports
            out["X"] = linalg.matrix_to_json(self.x, TensorSpace.of(core.a_labels(n), d))
            out["Omega"] = linalg.matrix_to_json(self.omega, core.ab_space(n, d))
            out["a"] = self.a
        return out


def solve_primary(n_ports: int, qudit_dim: int = 2, options: SolverOptions | None = None,
                  override_size_cap: bool = False) -> PortSdpResult:
    instance = build_primary(n_ports, qudit_dim, override_size_cap)
    sol = solve(instance, options, x0=srm_warm_start(n_ports, qudit_dim), y0=_dual_start(instance))
    omega, a = dual_operators(instance, sol.y)
    return PortSdpResult(n_ports, qudit_dim, sol, omega, a)


def extract_resource(result: PortSdpResult, rank_tol: float = 1e-9):
    """Recover ``O = X^(1/2)`` and ``Pi_i = (O^+ (x) 1) Pt_i (O^+ (x) 1)``.

    Returns ``(O, povm, support)`` where ``support`` projects onto the range
    of ``X (x) 1``; the POVM is completed to the identity off that range.
    """
    d = result.qudit_dim
    x = _herm(result.x)
    o = linalg.sqrt_psd(x, rank_tol)
    o_pinv = linalg.pinv_on_support(o, rank_tol)
    lift = np.kron(o_pinv, np.eye(d))
    raw = [_herm(lift @ p @ lift.conj().T) for p in result.pis]
    support = np.kron(linalg.support_projector(x, rank_tol), np.eye(d))
    povm = core.Povm.completed(raw, kind="sdp")
    povm.info["support"] = support
    return o, povm, support
