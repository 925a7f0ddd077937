"""Dense complex linear algebra on labeled tensor-product spaces.

Matrices are plain ``numpy`` arrays. A :class:`TensorSpace` describes how the
row/column index factorizes, with the first factor most significant (the
usual ``np.kron`` ordering).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotPSDError, ValidationError

HERMITIAN_RTOL = 1e-12
DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True)
class TensorSpace:
    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate factor labels in {labels}")
        for label, dim in factors:
            if dim < 1:
                raise ValidationError(f"factor {label!r} has non-positive dimension {dim}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, labels: Iterable[str], dims: Iterable[int] | int) -> "TensorSpace":
        labels = list(labels)
        if isinstance(dims, (int, np.integer)):
            dims = [int(dims)] * len(labels)
        dims = list(dims)
        if len(dims) != len(labels):
            raise ValidationError("labels and dims differ in length")
        return cls(tuple(zip(labels, dims)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown factor label {label!r}; space has {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def subspace(self, labels: Iterable[str]) -> "TensorSpace":
        """Factors named in ``labels``, kept in this space's order."""
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return TensorSpace(tuple(f for f in self.factors if f[0] in wanted))

    def relabel(self, mapping: dict[str, str]) -> "TensorSpace":
        return TensorSpace(tuple((mapping.get(label, label), dim) for label, dim in self.factors))

    def __add__(self, other: "TensorSpace") -> "TensorSpace":
        return TensorSpace(self.factors + other.factors)


@dataclass(frozen=True)
class HermitianOperator:
    """A Hermitian matrix together with the tensor space it acts on."""

    space: TensorSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValidationError(f"matrix shape {m.shape} does not match space dimension {n}")
        check_hermitian(m)
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def to_json(self) -> dict:
        return matrix_to_json(self.matrix, self.space)

    @classmethod
    def from_json(cls, payload: dict) -> "HermitianOperator":
        m, space = matrix_from_json(payload)
        return cls(space, m)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _as_matrix(h) -> np.ndarray:
    if isinstance(h, HermitianOperator):
        return h.matrix
    return np.asarray(h)


def check_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> None:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    scale = np.abs(m).max() if m.size else 0.0
    if np.abs(m - m.conj().T).max(initial=0.0) > rtol * max(scale, 1e-300):
        raise ValidationError("matrix is not Hermitian within tolerance")


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1))
    for op in ops:
        out = np.kron(out, _as_matrix(op))
    return out


def _check_square(m: np.ndarray, space: TensorSpace) -> None:
    n = space.total_dim
    if m.shape != (n, n):
        raise ValidationError(f"matrix shape {m.shape} does not match space dimension {n}")


def permute(m: np.ndarray, space: TensorSpace, order: Sequence[str]) -> np.ndarray:
    """Reorder tensor factors of an operator so they follow ``order``."""
    m = np.asarray(m)
    _check_square(m, space)
    if sorted(order) != sorted(space.labels):
        raise ValidationError(f"order {list(order)} is not a permutation of {list(space.labels)}")
    perm = [space.index(label) for label in order]
    k = len(perm)
    t = m.reshape(space.dims * 2).transpose(perm + [p + k for p in perm])
    return t.reshape(m.shape)


def permute_vector(v: np.ndarray, space: TensorSpace, order: Sequence[str]) -> np.ndarray:
    v = np.asarray(v)
    if sorted(order) != sorted(space.labels):
        raise ValidationError(f"order {list(order)} is not a permutation of {list(space.labels)}")
    perm = [space.index(label) for label in order]
    return v.reshape(space.dims).transpose(perm).reshape(-1)


def partial_trace(m: np.ndarray, space: TensorSpace, keep: Iterable[str]) -> np.ndarray:
    """Trace out every factor not named in ``keep``.

    The result acts on the kept factors in their original relative order.
    """
    m = np.asarray(m)
    _check_square(m, space)
    keep = set(keep)
    for label in keep:
        space.index(label)
    k = len(space.dims)
    kept = [i for i, label in enumerate(space.labels) if label in keep]
    traced = [i for i in range(k) if i not in kept]
    t = m.reshape(space.dims * 2)
    t = t.transpose(kept + traced + [i + k for i in kept] + [i + k for i in traced])
    dk = int(np.prod([space.dims[i] for i in kept], dtype=np.int64))
    dt = int(np.prod([space.dims[i] for i in traced], dtype=np.int64))
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def apply_local(op: np.ndarray, m: np.ndarray, space: TensorSpace, targets: Sequence[str],
                side: str = "both") -> np.ndarray:
    """Multiply ``m`` by ``op`` acting on the ``targets`` factors (identity elsewhere).

    ``side`` is ``"left"`` (op @ m), ``"right"`` (m @ op) or ``"both"`` (op m op^dag).
    """
    m = np.asarray(m)
    _check_square(m, space)
    op = np.asarray(op)
    tdims = [space.dim(label) for label in targets]
    dt = int(np.prod(tdims, dtype=np.int64))
    if op.shape != (dt, dt):
        raise ValidationError(f"operator shape {op.shape} does not fit factors {list(targets)}")
    rest = [label for label in space.labels if label not in targets]
    order = list(targets) + rest
    mp = permute(m, space, order)
    dr = space.total_dim // dt
    big = mp.reshape(dt, dr, dt, dr)
    if side in ("left", "both"):
        big = np.einsum("ab,bjck->ajck", op, big)
    if side in ("right", "both"):
        right = op.conj().T if side == "both" else op
        big = np.einsum("ajck,cd->ajdk", big, right)
    out = big.reshape(mp.shape)
    pspace = TensorSpace(tuple((label, space.dim(label)) for label in order))
    return permute(out, pspace, space.labels)


def apply_local_vector(op: np.ndarray, v: np.ndarray, space: TensorSpace,
                       targets: Sequence[str]) -> np.ndarray:
    v = np.asarray(v)
    tdims = [space.dim(label) for label in targets]
    dt = int(np.prod(tdims, dtype=np.int64))
    rest = [label for label in space.labels if label not in targets]
    order = list(targets) + rest
    vp = permute_vector(v, space, order).reshape(dt, -1)
    out = (np.asarray(op) @ vp).reshape(-1)
    pspace = TensorSpace(tuple((label, space.dim(label)) for label in order))
    return permute_vector(out, pspace, space.labels)


def embed(op: np.ndarray, space: TensorSpace, targets: Sequence[str]) -> np.ndarray:
    """``op`` on ``targets`` tensored with identity on the remaining factors."""
    return apply_local(op, np.eye(space.total_dim, dtype=complex), space, targets, side="left")


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # first entry of largest magnitude made real positive
    idx = np.argmax(np.abs(vecs) > np.abs(vecs).max(axis=0) * (1 - 1e-8), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivots) / pivots)


def eigh(h) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Eigenvector phases are normalized so output is reproducible; inside a
    degenerate eigenspace the basis is whatever LAPACK returns.
    """
    m = _as_matrix(h)
    check_hermitian(m)
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    return EigenDecomposition(w, _fix_phases(v))


def _jacobi_real_symmetric(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def jacobi_eigh(h, cluster_tol: float = 1e-9) -> EigenDecomposition:
    """Cyclic Jacobi on the real-symmetric embedding [[Re, -Im], [Im, Re]].

    Slow (pure Python rotations); meant for small matrices and as an
    independent check on :func:`eigh`.
    """
    m = _as_matrix(h)
    check_hermitian(m)
    n = m.shape[0]
    emb = np.block([[m.real, -m.imag], [m.imag, m.real]])
    w2, v2 = _jacobi_real_symmetric(emb)
    scale = max(np.abs(w2).max(initial=0.0), 1.0)
    cand = v2[:n] + 1j * v2[n:]
    values, vectors = [], []
    start = 0
    while start < 2 * n:
        stop = start + 1
        while stop < 2 * n and w2[stop] - w2[stop - 1] <= cluster_tol * scale:
            stop += 1
        k = (stop - start) // 2
        u, _, _ = np.linalg.svd(cand[:, start:stop], full_matrices=False)
        block = u[:, :k]
        sub = block.conj().T @ m @ block
        sw, sv = np.linalg.eigh(0.5 * (sub + sub.conj().T)) if k > 1 else (np.real(np.diag(sub)), np.eye(1))
        values.extend(sw)
        vectors.append(block @ sv)
        start = stop
    return EigenDecomposition(np.array(values), _fix_phases(np.hstack(vectors)))


def _spectral_map(h, fn, rank_tol: float, require_psd: bool) -> np.ndarray:
    dec = eigh(h)
    w, v = dec.eigenvalues, dec.eigenvectors
    lmax = max(np.abs(w).max(initial=0.0), 1e-300)
    if require_psd and w.size and w[0] < -rank_tol * lmax:
        raise NotPSDError(f"negative eigenvalue {w[0]:.3e} below -{rank_tol:g} * lambda_max")
    keep = w > rank_tol * lmax
    mapped = np.zeros_like(w)
    mapped[keep] = fn(w[keep])
    return (v * mapped) @ v.conj().T


def inv_sqrt_on_support(h, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Pseudo-inverse square root: eigenvalues at or below ``rank_tol * lambda_max`` map to 0."""
    return _spectral_map(h, lambda w: w ** -0.5, rank_tol, require_psd=True)


def sqrt_psd(h, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    return _spectral_map(h, np.sqrt, rank_tol, require_psd=True)


def pinv_on_support(h, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    return _spectral_map(h, lambda w: 1.0 / w, rank_tol, require_psd=False)


def support_projector(h, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    return _spectral_map(h, np.ones_like, rank_tol, require_psd=False)


def psd_check(h, tol: float = 1e-9) -> tuple[bool, float]:
    m = _as_matrix(h)
    check_hermitian(m, rtol=1e-10)
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    lo = float(w[0]) if w.size else 0.0
    return lo >= -tol, lo


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, via the trace norm of sqrt(rho) sqrt(sigma)."""
    sv = np.linalg.svd(psd_sqrt_clipped(rho) @ psd_sqrt_clipped(sigma), compute_uv=False)
    return float(np.sum(sv) ** 2)


def psd_sqrt_clipped(m: np.ndarray, rel_floor: float = 1e-14) -> np.ndarray:
    """Square root after zeroing eigenvalues below ``rel_floor * lambda_max`` (noise from rounding)."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    floor = rel_floor * max(np.abs(w).max(initial=0.0), 1e-300)
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def max_entangled(d: int) -> np.ndarray:
    """|phi+> = sum_k |kk> / sqrt(d)."""
    v = np.zeros(d * d, dtype=complex)
    v[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return v


def singlet() -> np.ndarray:
    """|psi-> = (|01> - |10>) / sqrt 2."""
    return np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    return np.outer(v, v.conj())


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


# -- matrix JSON ------------------------------------------------------------

def matrix_to_json(m: np.ndarray, space: TensorSpace | None = None) -> dict:
    m = np.asarray(m, dtype=complex)
    if space is None:
        space = TensorSpace.of(["0"], [m.shape[0]])
    return {
        "dims": list(space.dims),
        "labels": list(space.labels),
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
    }


def matrix_from_json(payload) -> tuple[np.ndarray, TensorSpace]:
    if isinstance(payload, (str, bytes)):
        payload = json.loads(payload)
    try:
        re = np.array(payload["re"], dtype=float)
        im = np.array(payload.get("im", np.zeros_like(re).tolist()), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix JSON: {exc}") from None
    if re.ndim != 2 or re.shape[0] != re.shape[1] or im.shape != re.shape:
        raise ValidationError(f"matrix JSON must hold square 're'/'im' arrays, got {re.shape}")
    dims = payload.get("dims", [re.shape[0]])
    labels = payload.get("labels", [str(i) for i in range(len(dims))])
    space = TensorSpace.of(labels, dims)
    if space.total_dim != re.shape[0]:
        raise ValidationError(f"dims {dims} do not multiply to matrix size {re.shape[0]}")
    return re + 1j * im, space
