"""Exact spin-1/2 Clebsch-Gordan coefficients and the coupled N-qubit basis.

Angular momenta are passed doubled (``two_j = 2j``) so everything stays
integral. Qubit ``|0>`` is spin down (m = -1/2) and ``|1>`` is spin up.

Phase convention: ``cg_half(j1, m1, s, j)`` is the Condon-Shortley
coefficient with the spin-1/2 written first, ``<1/2, s/2; j1, m1 | j, m1 + s/2>``.
For ``j = j1 + 1/2`` it coincides with the usual ``<j1 m1; 1/2 s/2 | j>``;
for ``j = j1 - 1/2`` it differs by a sign. With this choice the two-qubit
singlet built by the recursion is exactly ``(|01> - |10>)/sqrt 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

MAX_SPINS = 12


@dataclass(frozen=True)
class CgValue:
    """``sign * sqrt(radicand)`` with a rational radicand."""

    sign: int
    radicand: Fraction

    def __post_init__(self):
        r = Fraction(self.radicand)
        if r < 0:
            raise DomainError("radicand must be non-negative")
        sign = 0 if r == 0 else int(np.sign(self.sign))
        if r != 0 and sign == 0:
            raise DomainError("nonzero radicand needs a sign")
        object.__setattr__(self, "radicand", r)
        object.__setattr__(self, "sign", sign)

    @classmethod
    def from_rational_times_sqrt(cls, coeff: Fraction, radicand: Fraction) -> "CgValue":
        coeff = Fraction(coeff)
        if coeff == 0 or radicand == 0:
            return ZERO
        return cls(1 if coeff > 0 else -1, coeff * coeff * Fraction(radicand))

    def __mul__(self, other: "CgValue") -> "CgValue":
        return CgValue(self.sign * other.sign, self.radicand * other.radicand)

    def __neg__(self) -> "CgValue":
        return CgValue(-self.sign, self.radicand)

    def square(self) -> Fraction:
        return self.radicand

    def __float__(self) -> float:
        return self.sign * sqrt(self.radicand.numerator / self.radicand.denominator)

    def __bool__(self) -> bool:
        return self.sign != 0


ZERO = CgValue(0, Fraction(0))


@dataclass(frozen=True)
class SpinLabel:
    """Irrep label: total spin, projection and the coupling path.

    ``path[k]`` is twice the total spin of the first ``k + 1`` coupled
    qubits, so ``path[0] == 1`` and ``path[-1] == two_j``. The path is the
    degeneracy label alpha.
    """

    two_j: int
    two_m: int
    path: tuple[int, ...]

    def __post_init__(self):
        path = tuple(int(p) for p in self.path)
        object.__setattr__(self, "path", path)
        if not path or path[0] != 1:
            raise DomainError(f"path must start at 1, got {path}")
        if any(abs(b - a) != 1 or b < 0 for a, b in zip(path, path[1:])):
            raise DomainError(f"path steps must be +-1 and stay non-negative: {path}")
        if path[-1] != self.two_j:
            raise DomainError(f"path {path} does not end at two_j={self.two_j}")
        if abs(self.two_m) > self.two_j or (self.two_j - self.two_m) % 2:
            raise DomainError(f"invalid projection two_m={self.two_m} for two_j={self.two_j}")

    @property
    def n(self) -> int:
        return len(self.path)

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def m(self) -> float:
        return self.two_m / 2


def cg_half(two_j1: int, two_m1: int, spin_sign: int, two_j: int) -> CgValue:
    """Coefficient coupling ``|j1 m1>`` with a spin-1/2 in state ``spin_sign`` (+1 up, -1 down) to ``j``."""
    if spin_sign not in (1, -1):
        raise DomainError(f"spin_sign must be +1 or -1, got {spin_sign}")
    if two_j1 < 0 or abs(two_j - two_j1) != 1 or two_j < 0:
        raise DomainError(f"cannot couple j1={two_j1}/2 with 1/2 to j={two_j}/2")
    if abs(two_m1) > two_j1 or (two_j1 - two_m1) % 2:
        raise DomainError(f"invalid projection two_m1={two_m1} for two_j1={two_j1}")
    denom = two_j1 + 1
    if two_j == two_j1 + 1:
        num = two_j1 + two_m1 + 2 if spin_sign > 0 else two_j1 - two_m1 + 2
        sign = 1
    else:
        num = two_j1 - two_m1 if spin_sign > 0 else two_j1 + two_m1
        sign = 1 if spin_sign > 0 else -1
    if num == 0:
        return ZERO
    return CgValue(sign, Fraction(num, 2 * denom))


def _fact(two_x: int) -> int:
    if two_x % 2 or two_x < 0:
        raise DomainError("factorial of a non-integer or negative argument")
    return factorial(two_x // 2)


def clebsch_gordan(two_j1: int, two_m1: int, two_j2: int, two_m2: int, two_j: int, two_m: int) -> CgValue:
    """General ``<j1 m1; j2 m2 | j m>`` (Condon-Shortley) from the Racah formula, exactly."""
    if two_m1 + two_m2 != two_m:
        return ZERO
    if not (abs(two_j1 - two_j2) <= two_j <= two_j1 + two_j2) or (two_j1 + two_j2 + two_j) % 2:
        return ZERO
    for tj, tm in ((two_j1, two_m1), (two_j2, two_m2), (two_j, two_m)):
        if abs(tm) > tj or (tj - tm) % 2:
            return ZERO
    radicand = Fraction(
        (two_j + 1) * _fact(two_j + two_j1 - two_j2) * _fact(two_j - two_j1 + two_j2)
        * _fact(two_j1 + two_j2 - two_j),
        _fact(two_j1 + two_j2 + two_j + 2),
    ) * (
        _fact(two_j + two_m) * _fact(two_j - two_m) * _fact(two_j1 - two_m1)
        * _fact(two_j1 + two_m1) * _fact(two_j2 - two_m2) * _fact(two_j2 + two_m2)
    )
    total = Fraction(0)
    k = 0
    while True:
        args = (
            2 * k,
            two_j1 + two_j2 - two_j - 2 * k,
            two_j1 - two_m1 - 2 * k,
            two_j2 + two_m2 - 2 * k,
            two_j - two_j2 + two_m1 + 2 * k,
            two_j - two_j1 - two_m2 + 2 * k,
        )
        if min(args[1:4]) < 0:
            break
        if min(args[4:]) >= 0:
            den = 1
            for a in args:
                den *= _fact(a)
            total += Fraction((-1) ** k, den)
        k += 1
    return CgValue.from_rational_times_sqrt(total, radicand)


def cg_symmetry_check(two_j1: int, two_m1: int, spin_sign: int, two_j: int) -> bool:
    """Check the spin-1/2 reordering identity against the general Racah routine.

    Verifies ``<j1 m1; 1/2 s> = (-1)^(j1 + 1/2 - j) <1/2 s; j1 m1>`` and that
    :func:`cg_half` equals the spin-1/2-first coefficient, all exactly.
    """
    two_m = two_m1 + spin_sign
    usual = clebsch_gordan(two_j1, two_m1, 1, spin_sign, two_j, two_m)
    swapped = clebsch_gordan(1, spin_sign, two_j1, two_m1, two_j, two_m)
    phase_exp = (two_j1 + 1 - two_j) // 2
    expected = swapped if phase_exp % 2 == 0 else -swapped
    return usual == expected and cg_half(two_j1, two_m1, spin_sign, two_j) == swapped


@lru_cache(maxsize=None)
def multiplicity(n: int, two_s: int) -> int:
    """Number of copies of spin ``s`` inside ``n`` coupled qubits."""
    if n < 0 or two_s < 0 or two_s > n or (n - two_s) % 2:
        raise DomainError(f"spin {two_s}/2 does not occur in {n} qubits")
    s_plus = (n + two_s) // 2
    s_minus = (n - two_s) // 2
    return (two_s + 1) * factorial(n) // (factorial(s_minus) * factorial(s_plus + 1))


def spins(n: int) -> list[int]:
    """Allowed ``two_j`` values for ``n`` qubits, ascending."""
    return list(range(n % 2, n + 1, 2))


def paths(n: int, two_j: int | None = None) -> Iterator[tuple[int, ...]]:
    """Coupling paths of ``n`` qubits in lexicographic order."""
    def walk(prefix):
        if len(prefix) == n:
            if two_j is None or prefix[-1] == two_j:
                yield tuple(prefix)
            return
        last = prefix[-1]
        for nxt in (last - 1, last + 1):
            if nxt >= 0:
                yield from walk(prefix + [nxt])
    if n >= 1:
        yield from walk([1])


def labels(n: int) -> list[SpinLabel]:
    """All labels of ``n`` qubits ordered by (path, two_m)."""
    out = []
    for p in paths(n):
        for two_m in range(-p[-1], p[-1] + 1, 2):
            out.append(SpinLabel(p[-1], two_m, p))
    return out


@dataclass(frozen=True)
class CoupledBasis:
    """Orthonormal total-spin basis of ``n`` qubits.

    ``order[k]`` is the qubit coupled at step ``k``; vectors are always
    expressed in the computational basis of qubits ``0..n-1``.
    """

    n: int
    order: tuple[int, ...]
    vectors: dict

    def matrix(self, label_list: Sequence[SpinLabel] | None = None) -> np.ndarray:
        label_list = labels(self.n) if label_list is None else label_list
        return np.column_stack([self.vectors[lab] for lab in label_list])

    def sector(self, two_s: int, two_sz: int) -> tuple[list[SpinLabel], np.ndarray]:
        labs = [SpinLabel(two_s, two_sz, p) for p in paths(self.n, two_s)]
        return labs, self.matrix(labs)


@lru_cache(maxsize=16)
def _canonical_vectors(n: int) -> dict:
    up, down = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    if n == 1:
        return {SpinLabel(1, 1, (1,)): up, SpinLabel(1, -1, (1,)): down}
    prev = _canonical_vectors(n - 1)
    out = {}
    for p in paths(n - 1):
        tj1 = p[-1]
        for tj in (tj1 - 1, tj1 + 1):
            if tj < 0:
                continue
            for tm in range(-tj, tj + 1, 2):
                vec = np.zeros(2 ** n)
                # spin down on the new qubit: m1 = m + 1/2
                if abs(tm + 1) <= tj1:
                    c = cg_half(tj1, tm + 1, -1, tj)
                    if c:
                        vec += float(c) * np.kron(prev[SpinLabel(tj1, tm + 1, p)], down)
                if abs(tm - 1) <= tj1:
                    c = cg_half(tj1, tm - 1, 1, tj)
                    if c:
                        vec += float(c) * np.kron(prev[SpinLabel(tj1, tm - 1, p)], up)
                out[SpinLabel(tj, tm, p + (tj,))] = vec
    return out


def build_coupled_basis(n: int, order: Sequence[int] | None = None) -> CoupledBasis:
    """Couple qubits one at a time in ``order`` (default ascending)."""
    if not 1 <= n <= MAX_SPINS:
        raise DomainError(f"n must be in 1..{MAX_SPINS}, got {n}")
    order = tuple(range(n)) if order is None else tuple(int(q) for q in order)
    if sorted(order) != list(range(n)):
        raise DomainError(f"order {order} is not a permutation of 0..{n - 1}")
    canon = _canonical_vectors(n)
    if order == tuple(range(n)):
        return CoupledBasis(n, order, dict(canon))
    # coupled step k lives on qubit order[k]
    axes = np.argsort(order)
    vectors = {lab: v.reshape([2] * n).transpose(axes).reshape(-1) for lab, v in canon.items()}
    return CoupledBasis(n, order, vectors)


def rebase_unitary(basis_a: CoupledBasis, basis_b: CoupledBasis, two_s: int,
                   tol: float = 1e-10) -> np.ndarray:
    """Overlap ``<Phi_a(s, sz, alpha) | Phi_b(s, sz, alpha')>`` between two coupling orders.

    The matrix must not depend on ``sz``; a deviation above ``tol`` raises.
    """
    if basis_a.n != basis_b.n:
        raise DomainError("bases have different qubit counts")
    n = basis_a.n
    multiplicity(n, two_s)
    mats = []
    for two_sz in range(-two_s, two_s + 1, 2):
        _, va = basis_a.sector(two_s, two_sz)
        _, vb = basis_b.sector(two_s, two_sz)
        if va.shape != vb.shape:
            raise DomainError("sector dimensions differ")
        mats.append(va.conj().T @ vb)
    dev = max(np.abs(m - mats[0]).max() for m in mats)
    if dev > tol:
        raise DomainError(f"overlap depends on s_z (deviation {dev:.2e})")
    return mats[0]


def total_spin_squared(n: int) -> np.ndarray:
    """Dense ``S^2`` on ``n`` qubits, used as an oracle."""
    sx = np.array([[0, 1], [1, 0]]) / 2
    sy = np.array([[0, -1j], [1j, 0]]) / 2
    sz = np.array([[-1, 0], [0, 1]]) / 2  # |0> is spin down
    total = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for s in (sx, sy, sz):
        comp = sum(np.kron(np.kron(np.eye(2 ** k), s), np.eye(2 ** (n - k - 1))) for k in range(n))
        total += comp @ comp
    return total


def total_sz(n: int) -> np.ndarray:
    sz = np.array([-0.5, 0.5])
    diag = np.zeros(2 ** n)
    for k in range(n):
        diag += np.kron(np.kron(np.ones(2 ** k), sz), np.ones(2 ** (n - k - 1)))
    return np.diag(diag)
