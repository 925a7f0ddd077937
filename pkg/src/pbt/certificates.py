"""Numerical certificates: SRM optimality, the ``N/d^2`` upper bound and the protocol reaching it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core, linalg
from .errors import DomainError

PSD_TOL = 1e-9
SRM_OPTIMAL = "srm_optimal"
UNIVERSAL_UPPER = "universal_upper"
ORTHOGONAL_ACHIEVING = "orthogonal_achieving"


@dataclass(frozen=True)
class CertificateReport:
    kind: str
    passed: bool
    worst_margin: float
    margins: tuple = ()
    details: dict = field(default_factory=dict)

    @classmethod
    def from_margins(cls, kind: str, margins, tol: float = PSD_TOL, checks_ok: bool = True,
                     **details) -> "CertificateReport":
        margins = tuple(float(m) for m in margins)
        worst = min(margins)
        return cls(kind, bool(worst >= -tol and checks_ok), worst, margins, dict(details))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "passed": self.passed, "worst_margin": self.worst_margin,
               "margins": list(self.margins)}
        out.update(self.details)
        return out


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def y_dense(states: core.SignalStateSet, povm: core.Povm) -> np.ndarray:
    """``Y = sum_i Pi_i sigma_i``."""
    return sum(p @ s for p, s in zip(povm.elements, states.sigmas))


def y_blocks(n_ports: int) -> np.ndarray:
    """``sum_s c(s)/2^(N-1) rho(s)^(1/2)`` with ``s`` the total spin of ``A`` and ``B``."""
    dim = 2 ** (n_ports + 1)
    total = np.zeros((dim, dim))
    coeff = {}
    for branch, (two_j, two_m, path), lam, vec in core.psi_basis(n_ports):
        if lam == 0:
            continue
        two_s = two_j + 1 if branch == core.MINUS else two_j - 1
        if two_s not in coeff:
            coeff[two_s] = core.c_coefficient(n_ports, two_s)
        total += coeff[two_s] * np.sqrt(float(lam)) * np.outer(vec, vec)
    return total / 2 ** (n_ports - 1)


def certify_srm_optimal(n_ports: int, tol: float = PSD_TOL) -> CertificateReport:
    """Check that ``Y = sum Pi_i sigma_i`` is dual feasible for the qubit SRM.

    ``Y`` is built densely and from the spin blocks; the report carries the
    agreement of the two on the support of ``rho``, the margins of
    ``Y - sigma_i`` and the comparison of ``tr Y / 4`` with the closed form.
    """
    core.check_dense_cap(n_ports, 2)
    states = core.signal_states(n_ports, 2, core.SINGLET)
    povm = core.srm_povm(states)
    y = y_dense(states, povm)
    asym = float(np.abs(y - y.conj().T).max())
    y = 0.5 * (y + y.conj().T)
    support = linalg.support_projector(states.rho)
    block_diff = float(np.abs(support @ y @ support - y_blocks(n_ports)).max())
    margins = [_min_eig(y - s) for s in states.sigmas]
    trace_f = float(np.trace(y).real) / 4
    f_closed = core.fidelity_closed_form(n_ports).F
    ok = block_diff <= 1e-10 and abs(trace_f - f_closed) <= 1e-10
    return CertificateReport.from_margins(
        SRM_OPTIMAL, margins, tol, ok, n_ports=n_ports, qudit_dim=2, block_agreement=block_diff,
        asymmetry=asym, trace_over_4=trace_f, F_closed_form=f_closed)


def certify_universal_upper(n_ports: int, qudit_dim: int = 2, tol: float = PSD_TOL) -> CertificateReport:
    """Dual point ``Omega = rho``, ``a = N/d^N`` proving ``F <= N/d^2``."""
    core.check_dense_cap(n_ports, qudit_dim)
    states = core.signal_states(n_ports, qudit_dim)
    omega = states.rho
    a = n_ports / qudit_dim ** n_ports
    margins = [_min_eig(omega - s) for s in states.sigmas]
    marginal = linalg.partial_trace(omega, states.space, core.a_labels(n_ports))
    margins.append(_min_eig(a * np.eye(marginal.shape[0]) - marginal))
    # dual objective is d^N a scaled by 1/d^2
    bound = qudit_dim ** n_ports * a / qudit_dim ** 2
    return CertificateReport.from_margins(
        UNIVERSAL_UPPER, margins, tol, n_ports=n_ports, qudit_dim=qudit_dim, a=a, F_bound=bound)


@dataclass(frozen=True)
class OrthogonalProtocol:
    n_ports: int
    qudit_dim: int
    resource_operator: np.ndarray
    povm: core.Povm
    report: core.FidelityReport

    def describe(self) -> dict:
        return {"resource": "product |0>_A_k |k-1>_B_k",
                "povm": "1_A (x) |i-1><i-1| on the B (or C) factor, last outcome takes the rest",
                "n_ports": self.n_ports, "qudit_dim": self.qudit_dim}


def orthogonal_protocol(n_ports: int, qudit_dim: int) -> OrthogonalProtocol:
    """Separable resource ``(x)_k |0>|e_k>`` with a port-revealing measurement; needs ``N <= d``.

    The resource is ``(O (x) 1)|phi+>^(x)N`` with ``O = (x)_k sqrt(d)|0><k-1|``.
    Alice reads the input's computational-basis value ``k-1`` and names port ``k``.
    """
    n, d = n_ports, qudit_dim
    core._validate_nd(n, d)
    if n > d:
        raise DomainError(f"orthogonal protocol needs N <= d, got N={n}, d={d}")
    core.check_dense_cap(n, d)
    o = np.ones((1, 1))
    for k in range(n):
        o = np.kron(o, np.sqrt(d) * np.outer(linalg.ket(0, d), linalg.ket(k, d)))
    elements = []
    for k in range(n - 1):
        elements.append(np.kron(np.eye(d ** n), np.outer(linalg.ket(k, d), linalg.ket(k, d))))
    elements.append(np.eye(d ** (n + 1)) - sum(elements, np.zeros((d ** (n + 1),) * 2)))
    povm = core.Povm(elements, info={"kind": "orthogonal"}).validate()
    states = core.signal_states(n, d, core.PHI_PLUS)
    rep = core.fidelity_dense(states, povm, o)
    return OrthogonalProtocol(n, d, o, povm, rep)


def certify_orthogonal(n_ports: int, qudit_dim: int, tol: float = 1e-12) -> CertificateReport:
    proto = orthogonal_protocol(n_ports, qudit_dim)
    bound = n_ports / qudit_dim ** 2
    slack = bound - proto.report.F
    return CertificateReport.from_margins(
        ORTHOGONAL_ACHIEVING, [-abs(slack)], tol, n_ports=n_ports, qudit_dim=qudit_dim,
        F=proto.report.F, f=proto.report.f, F_bound=bound)


def random_povm_check(n_ports: int, samples: int = 20, seed: int = 0) -> list:
    """Fidelities of seeded unitary conjugations of the SRM, to compare against the SRM value."""
    states = core.signal_states(n_ports, 2, core.SINGLET)
    povm = core.srm_povm(states)
    rng = np.random.default_rng(seed)
    dim = 2 ** (n_ports + 1)
    out = []
    for _ in range(samples):
        u = linalg.random_unitary(dim, rng)
        out.append(core.fidelity_dense(states, povm.conjugated(u)).F)
    return out
