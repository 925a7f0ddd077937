"""Signal states, the port-sum operator rho, square-root measurement and fidelities.

Operators on ``H_A (x) H_B`` use the factor order ``[A1, ..., AN, B]``.
For qubits the default convention builds the signal states from the
singlet projector ``P-``; ``phi_plus`` uses ``P+`` and works for any ``d``.
The two are related by conjugation with ``1_A (x) sigma_y``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, sqrt
from typing import Sequence

import numpy as np

from . import linalg, su2
from .errors import DomainError, ResourceError, ValidationError
from .linalg import TensorSpace

SINGLET = "singlet"
PHI_PLUS = "phi_plus"
CONVENTIONS = (SINGLET, PHI_PLUS)

SIGNAL_DIM_CAP = 4096
DENSE_DIM_CAP = 512
BLOCK_N_CAP = 50

METHODS = ("closed_form", "block", "dense", "sdp", "choi")

POVM_PSD_TOL = 1e-9
POVM_COMPLETENESS_TOL = 1e-9


def ab_space(n_ports: int, qudit_dim: int) -> TensorSpace:
    return TensorSpace.of([f"A{k}" for k in range(1, n_ports + 1)] + ["B"], qudit_dim)


def a_labels(n_ports: int) -> list[str]:
    return [f"A{k}" for k in range(1, n_ports + 1)]


def check_dense_cap(n_ports: int, qudit_dim: int) -> None:
    dim = qudit_dim ** (n_ports + 1)
    if dim > DENSE_DIM_CAP:
        raise ResourceError(
            f"dense path needs dimension {dim} > {DENSE_DIM_CAP} (N={n_ports}, d={qudit_dim})")


def _validate_nd(n_ports: int, qudit_dim: int) -> None:
    if int(n_ports) != n_ports or n_ports < 1:
        raise DomainError(f"n_ports must be a positive integer, got {n_ports}")
    if int(qudit_dim) != qudit_dim or qudit_dim < 2:
        raise DomainError(f"qudit_dim must be an integer >= 2, got {qudit_dim}")


def average_fidelity(entanglement_fidelity: float, qudit_dim: int) -> float:
    return (entanglement_fidelity * qudit_dim + 1.0) / (qudit_dim + 1.0)


@dataclass(frozen=True)
class FidelityReport:
    n_ports: int
    qudit_dim: int
    entanglement_fidelity: float
    average_fidelity: float
    method: str
    convention: str = PHI_PLUS

    @classmethod
    def build(cls, n_ports, qudit_dim, F, method, convention=None):
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}")
        if convention is None:
            convention = SINGLET if qudit_dim == 2 else PHI_PLUS
        F = float(F)
        return cls(int(n_ports), int(qudit_dim), F, average_fidelity(F, qudit_dim), method, convention)

    @property
    def F(self) -> float:
        return self.entanglement_fidelity

    @property
    def f(self) -> float:
        return self.average_fidelity

    def to_json(self) -> dict:
        return {"n": self.n_ports, "d": self.qudit_dim, "F": self.F, "f": self.f,
                "method": self.method, "convention": self.convention}


# -- signal states ------------------------------------------------------------

@dataclass(frozen=True)
class SignalStateSet:
    n_ports: int
    qudit_dim: int
    convention: str
    space: TensorSpace
    sigmas: tuple
    rho: np.ndarray


def pair_projector(qudit_dim: int, convention: str) -> np.ndarray:
    if convention == SINGLET:
        if qudit_dim != 2:
            raise DomainError("singlet convention requires qubits")
        return linalg.projector(linalg.singlet())
    if convention == PHI_PLUS:
        return linalg.projector(linalg.max_entangled(qudit_dim))
    raise ValidationError(f"unknown convention {convention!r}")


def signal_state(n_ports: int, qudit_dim: int, port: int, convention: str = PHI_PLUS) -> np.ndarray:
    """``P_{A_i B} (x) 1 / d^(N-1)`` for port ``i`` (1-based)."""
    space = ab_space(n_ports, qudit_dim)
    pair = pair_projector(qudit_dim, convention)
    rest = [label for label in space.labels if label not in (f"A{port}", "B")]
    order = [f"A{port}", "B"] + rest
    m = np.kron(pair, np.eye(qudit_dim ** (n_ports - 1))) / qudit_dim ** (n_ports - 1)
    return linalg.permute(m, TensorSpace.of(order, qudit_dim), space.labels)


def signal_states(n_ports: int, qudit_dim: int = 2, convention: str | None = None) -> SignalStateSet:
    _validate_nd(n_ports, qudit_dim)
    if convention is None:
        convention = SINGLET if qudit_dim == 2 else PHI_PLUS
    pair_projector(qudit_dim, convention)
    dim = qudit_dim ** (n_ports + 1)
    if dim > SIGNAL_DIM_CAP:
        raise ResourceError(f"signal states need dimension {dim} > {SIGNAL_DIM_CAP}")
    sigmas = tuple(signal_state(n_ports, qudit_dim, i, convention) for i in range(1, n_ports + 1))
    rho = sum(sigmas)
    return SignalStateSet(n_ports, qudit_dim, convention, ab_space(n_ports, qudit_dim), sigmas, rho)


def convert_convention(m: np.ndarray, n_ports: int) -> np.ndarray:
    """Conjugate an operator on ``[A1..AN, B]`` by ``1_A (x) sigma_y`` (qubits)."""
    u = np.kron(np.eye(2 ** n_ports), linalg.PAULI_Y)
    return u @ m @ u.conj().T


def rho_recursive(n_ports: int) -> np.ndarray:
    """rho for qubit singlets built by adding one port at a time."""
    _validate_nd(n_ports, 2)
    p_minus = linalg.projector(linalg.singlet())
    rho = p_minus.copy()
    for n in range(2, n_ports + 1):
        # layout [A1..A(n-1), B, An]
        grown = np.kron(rho, np.eye(2) / 2) + np.kron(np.eye(2 ** (n - 1)) / 2 ** (n - 1), p_minus)
        labels = a_labels(n - 1) + ["B", f"A{n}"]
        rho = linalg.permute(grown, TensorSpace.of(labels, 2), a_labels(n) + ["B"])
    return rho


# -- spectrum of rho (qubits) -------------------------------------------------

MINUS, PLUS = "minus", "plus"


@dataclass(frozen=True)
class SpectrumEntry:
    branch: str
    two_j: int
    eigenvalue: Fraction
    degeneracy: int

    @property
    def total_two_j(self) -> int:
        return self.two_j + 1 if self.branch == MINUS else self.two_j - 1


@dataclass(frozen=True)
class RhoSpectrum:
    n_ports: int
    entries: tuple

    def multiset(self) -> dict:
        out: dict = {}
        for e in self.entries:
            if e.degeneracy:
                out[e.eigenvalue] = out.get(e.eigenvalue, 0) + e.degeneracy
        return dict(sorted(out.items()))

    def trace(self) -> Fraction:
        return sum((e.eigenvalue * e.degeneracy for e in self.entries), Fraction(0))

    def to_json(self) -> dict:
        return {"n": self.n_ports, "entries": [
            {"branch": e.branch, "two_j": e.two_j, "eigenvalue": float(e.eigenvalue),
             "eigenvalue_exact": str(e.eigenvalue), "degeneracy": e.degeneracy}
            for e in self.entries]}


def rho_eigenvalue(n_ports: int, branch: str, two_j: int) -> Fraction:
    """``(N/2 - j)/2^N`` on the minus branch, ``(N/2 + j + 1)/2^N`` on the plus branch."""
    if branch == MINUS:
        return Fraction(n_ports - two_j, 2 ** (n_ports + 1))
    if branch == PLUS:
        return Fraction(n_ports + two_j + 2, 2 ** (n_ports + 1))
    raise DomainError(f"unknown branch {branch!r}")


def rho_spectrum(n_ports: int) -> RhoSpectrum:
    _validate_nd(n_ports, 2)
    entries = []
    for two_j in su2.spins(n_ports):
        mult = su2.multiplicity(n_ports, two_j)
        entries.append(SpectrumEntry(MINUS, two_j, rho_eigenvalue(n_ports, MINUS, two_j),
                                     (two_j + 2) * mult))
        entries.append(SpectrumEntry(PLUS, two_j, rho_eigenvalue(n_ports, PLUS, two_j),
                                     two_j * mult))
    return RhoSpectrum(n_ports, tuple(entries))


def psi_eigenvector(n_ports: int, branch: str, two_j: int, two_m: int,
                    path: Sequence[int]) -> np.ndarray:
    """Eigenvector of rho: A-spins in irrep (j, path) coupled with B to total j +- 1/2.

    ``two_m`` is the total projection. The minus branch (total ``j + 1/2``)
    has eigenvalue ``lambda_j^-``; the plus branch (total ``j - 1/2``) has
    ``lambda_j^+``. Returned in the ``[A1..AN, B]`` layout.
    """
    path = tuple(path)
    if len(path) != n_ports or not path or path[-1] != two_j:
        raise DomainError(f"path {path} is not an {n_ports}-qubit path ending at {two_j}")
    if branch == MINUS:
        two_total, sign = two_j + 1, 1.0
    elif branch == PLUS:
        two_total, sign = two_j - 1, -1.0
    else:
        raise DomainError(f"unknown branch {branch!r}")
    if two_total < 0 or abs(two_m) > two_total or (two_total - two_m) % 2:
        raise DomainError(f"no state with two_m={two_m} for total spin {two_total}/2")
    basis = su2.build_coupled_basis(n_ports)
    vec = np.zeros(2 ** (n_ports + 1))
    for spin_sign, b_ket in ((-1, np.array([1.0, 0.0])), (1, np.array([0.0, 1.0]))):
        two_ma = two_m - spin_sign
        if abs(two_ma) > two_j:
            continue
        c = su2.cg_half(two_j, two_ma, spin_sign, two_total)
        if c:
            vec += float(c) * np.kron(basis.vectors[su2.SpinLabel(two_j, two_ma, path)], b_ket)
    return sign * vec


def psi_basis(n_ports: int):
    """All eigenvectors of rho as ``(branch, label, eigenvalue, vector)``."""
    out = []
    for branch in (MINUS, PLUS):
        for p in su2.paths(n_ports):
            two_j = p[-1]
            two_total = two_j + 1 if branch == MINUS else two_j - 1
            if two_total < 0:
                continue
            lam = rho_eigenvalue(n_ports, branch, two_j)
            for two_m in range(-two_total, two_total + 1, 2):
                out.append((branch, (two_j, two_m, p), lam,
                            psi_eigenvector(n_ports, branch, two_j, two_m, p)))
    return out


def rho_power_analytic(n_ports: int, power: float) -> np.ndarray:
    """``rho^power`` on its support from the exact spectrum and eigenvectors."""
    total = np.zeros((2 ** (n_ports + 1),) * 2)
    for _, _, lam, vec in psi_basis(n_ports):
        if lam > 0:
            total += float(lam) ** power * np.outer(vec, vec)
    return total


# -- square-root measurement --------------------------------------------------

@dataclass
class Povm:
    elements: list
    completeness_defect: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.elements = [np.asarray(e) for e in self.elements]
        if not self.elements:
            raise ValidationError("POVM needs at least one element")
        total = sum(self.elements)
        self.completeness_defect = float(np.abs(total - np.eye(total.shape[0])).max())

    def validate(self, psd_tol: float = POVM_PSD_TOL, completeness_tol: float = POVM_COMPLETENESS_TOL):
        for k, e in enumerate(self.elements):
            ok, lo = linalg.psd_check(e, psd_tol)
            if not ok:
                raise ValidationError(f"POVM element {k} has eigenvalue {lo:.3e}")
        if self.completeness_defect > completeness_tol:
            raise ValidationError(f"POVM elements miss identity by {self.completeness_defect:.3e}")
        return self

    @classmethod
    def completed(cls, elements, **info) -> "Povm":
        """Spread the missing weight ``(1 - sum)/N`` evenly over the elements."""
        elements = [np.asarray(e) for e in elements]
        total = sum(elements)
        delta = (np.eye(total.shape[0]) - total) / len(elements)
        povm = cls([e + delta for e in elements], info=dict(info))
        povm.info["delta"] = delta
        return povm

    def conjugated(self, u: np.ndarray) -> "Povm":
        return Povm([u @ e @ u.conj().T for e in self.elements], info=dict(self.info))


def rho_inv_sqrt(states: SignalStateSet, method: str = "auto",
                 rank_tol: float = linalg.DEFAULT_RANK_TOL) -> np.ndarray:
    """``rho^(-1/2)`` on its support; ``analytic`` uses the exact qubit spectrum."""
    if method == "auto":
        method = "analytic" if states.convention == SINGLET else "eigh"
    if method == "analytic":
        if states.convention != SINGLET:
            raise DomainError("analytic spectrum is available for the qubit singlet convention")
        return rho_power_analytic(states.n_ports, -0.5)
    if method == "eigh":
        return linalg.inv_sqrt_on_support(states.rho, rank_tol)
    raise ValidationError(f"unknown method {method!r}")


def srm_povm(states: SignalStateSet, method: str = "auto") -> Povm:
    """Square-root measurement, completed to the identity."""
    check_dense_cap(states.n_ports, states.qudit_dim)
    r = rho_inv_sqrt(states, method)
    raw = [r @ s @ r for s in states.sigmas]
    povm = Povm.completed(raw, kind="srm")
    delta = povm.info["delta"]
    povm.info["delta_overlap"] = max(abs(np.trace(s @ delta)) for s in states.sigmas)
    return povm.validate()


# -- matrix elements and c(s) -------------------------------------------------

def c_coefficient(n_ports: int, two_s: int) -> float:
    """Diagonal value of ``rho^(-1/2)`` between the port eigenvectors in sector ``s``."""
    su2.multiplicity(n_ports - 1, two_s)
    total = 0.0
    if two_s > 0:
        lam = rho_eigenvalue(n_ports, MINUS, two_s - 1)
        total += float(lam) ** -0.5 * two_s / (2 * (two_s + 1))
    lam = rho_eigenvalue(n_ports, PLUS, two_s + 1)
    total += float(lam) ** -0.5 * (two_s + 2) / (2 * (two_s + 1))
    return total


def xi_labels(n_ports: int) -> list:
    """Labels ``(two_s, two_sz, path)`` of the N-1 spectator qubits."""
    if n_ports == 1:
        return [(0, 0, ())]
    return [(lab.two_j, lab.two_m, lab.path) for lab in su2.labels(n_ports - 1)]


def xi_vector(n_ports: int, port: int, two_s: int, two_sz: int, path: Sequence[int]) -> np.ndarray:
    """``|psi->_{B A_i}`` times the coupled state of the other A qubits (ascending order)."""
    if not 1 <= port <= n_ports:
        raise DomainError(f"port {port} outside 1..{n_ports}")
    path = tuple(path)
    if n_ports == 1:
        if (two_s, two_sz, path) != (0, 0, ()):
            raise DomainError("a single port has only the trivial spectator label")
        spectators = np.ones(1)
    else:
        basis = su2.build_coupled_basis(n_ports - 1)
        label = su2.SpinLabel(two_s, two_sz, path)
        if label.n != n_ports - 1:
            raise DomainError(f"label describes {label.n} qubits, expected {n_ports - 1}")
        spectators = basis.vectors[label]
    others = [f"A{k}" for k in range(1, n_ports + 1) if k != port]
    order = ["B", f"A{port}"] + others
    vec = np.kron(linalg.singlet().real, spectators)
    return linalg.permute_vector(vec, TensorSpace.of(order, 2), ab_space(n_ports, 2).labels)


def xi_matrix(n_ports: int, port: int) -> tuple[list, np.ndarray]:
    labs = xi_labels(n_ports)
    return labs, np.column_stack([xi_vector(n_ports, port, *lab) for lab in labs])


def matrix_element_check(n_ports: int, port: int, label, label_other,
                         rho_inv_sqrt_matrix: np.ndarray | None = None) -> float:
    """Dense ``<xi(label)| rho^(-1/2) |xi(label_other)>`` computed with ``eigh``."""
    if rho_inv_sqrt_matrix is None:
        rho_inv_sqrt_matrix = linalg.inv_sqrt_on_support(signal_states(n_ports, 2, SINGLET).rho)
    a = xi_vector(n_ports, port, *label)
    b = xi_vector(n_ports, port, *label_other)
    return float(np.real(a @ rho_inv_sqrt_matrix @ b))


# -- fidelities -----------------------------------------------------------------

def fidelity_closed_form(n_ports: int) -> FidelityReport:
    _validate_nd(n_ports, 2)
    n = n_ports
    total = 0.0
    for k in range(n + 1):
        term = (n - 2 * k - 1) / sqrt(k + 1) + (n - 2 * k + 1) / sqrt(n - k + 1)
        total += term * term * comb(n, k)
    return FidelityReport.build(n, 2, total / 2 ** (n + 3), "closed_form", SINGLET)


def fidelity_blocks(n_ports: int) -> FidelityReport:
    _validate_nd(n_ports, 2)
    if n_ports > BLOCK_N_CAP:
        raise ResourceError(f"block path capped at N={BLOCK_N_CAP}")
    total = 0.0
    for two_s in su2.spins(n_ports - 1):
        c = c_coefficient(n_ports, two_s)
        total += (two_s + 1) * su2.multiplicity(n_ports - 1, two_s) * c * c
    return FidelityReport.build(n_ports, 2, n_ports * total / 4 ** n_ports, "block", SINGLET)


def fidelity_dense(states: SignalStateSet, povm: Povm,
                   resource_operator: np.ndarray | None = None) -> FidelityReport:
    """``(1/d^2) sum_i tr Pi_i (O (x) 1) sigma_i (O^dag (x) 1)``."""
    d, n = states.qudit_dim, states.n_ports
    if len(povm.elements) != n:
        raise ValidationError(f"POVM has {len(povm.elements)} elements for {n} ports")
    if resource_operator is None:
        sig = states.sigmas
    else:
        o = np.asarray(resource_operator)
        if o.shape != (d ** n, d ** n):
            raise ValidationError(f"resource operator must be {d ** n}x{d ** n}")
        norm = np.trace(o @ o.conj().T).real
        if abs(norm - d ** n) > 1e-9 * d ** n:
            raise ValidationError(f"tr O O^dag = {norm} differs from d^N = {d ** n}")
        big = np.kron(o, np.eye(d))
        sig = [big @ s @ big.conj().T for s in states.sigmas]
    F = sum(np.trace(p @ s).real for p, s in zip(povm.elements, sig)) / d ** 2
    return FidelityReport.build(n, d, F, "dense", states.convention)


def fidelity_srm_dense(n_ports: int, qudit_dim: int = 2, convention: str | None = None,
                       method: str = "auto") -> FidelityReport:
    check_dense_cap(n_ports, qudit_dim)
    states = signal_states(n_ports, qudit_dim, convention)
    return fidelity_dense(states, srm_povm(states, method))


def asymptotic_gap(n_ports: int) -> float:
    """``2N (1 - f(N))``; tends to 1 for large N."""
    return 2 * n_ports * (1.0 - fidelity_closed_form(n_ports).f)


def classical_limit(qudit_dim: int) -> float:
    return 2.0 / (qudit_dim + 1)


def qudit_lower_bound(n_ports: int, qudit_dim: int) -> float:
    return 1.0 - qudit_dim * (qudit_dim - 1) / n_ports


def dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True)
