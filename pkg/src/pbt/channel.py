"""Dense simulation of the port-based teleportation channel and the programmable processor.

The global state lives on ``[A1..AN, B1..BN, C]`` (plus optional reference
factors). Alice's POVM acts on ``[A1..AN, C]``; the same matrices serve as
the ``[A1..AN, B]`` operators of the fidelity formula, since moving from the
physical ``AC`` picture to the ``AB`` picture only renames ``C`` to ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import core, linalg
from .errors import ValidationError
from .linalg import TensorSpace

ZERO_PROBABILITY = 1e-14


def _a(n):
    return [f"A{k}" for k in range(1, n + 1)]


def _b(n):
    return [f"B{k}" for k in range(1, n + 1)]


@dataclass(frozen=True)
class Resource:
    """Pure entangled state shared by Alice (A1..AN) and Bob (B1..BN)."""

    n_ports: int
    qudit_dim: int
    state: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.state, dtype=complex).reshape(-1)
        if v.size != self.qudit_dim ** (2 * self.n_ports):
            raise ValidationError(f"resource state has {v.size} amplitudes, expected d^(2N)")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"resource state has norm {norm}")
        object.__setattr__(self, "state", v)

    @property
    def space(self) -> TensorSpace:
        return TensorSpace.of(_a(self.n_ports) + _b(self.n_ports), self.qudit_dim)

    @classmethod
    def from_pairs(cls, pair: np.ndarray, n_ports: int, qudit_dim: int) -> "Resource":
        """``pair^(x)N`` with pair ``k`` on ``(A_k, B_k)``."""
        v = np.ones(1, dtype=complex)
        for _ in range(n_ports):
            v = np.kron(v, pair)
        pair_order = [lab for k in range(1, n_ports + 1) for lab in (f"A{k}", f"B{k}")]
        space = TensorSpace.of(pair_order, qudit_dim)
        return cls(n_ports, qudit_dim, linalg.permute_vector(v, space, _a(n_ports) + _b(n_ports)))

    @classmethod
    def singlets(cls, n_ports: int) -> "Resource":
        return cls.from_pairs(linalg.singlet(), n_ports, 2)

    @classmethod
    def phi_plus(cls, n_ports: int, qudit_dim: int) -> "Resource":
        return cls.from_pairs(linalg.max_entangled(qudit_dim), n_ports, qudit_dim)

    @classmethod
    def from_operator(cls, operator: np.ndarray, n_ports: int, qudit_dim: int) -> "Resource":
        """``(O_A (x) 1_B) |phi+>^(x)N``; requires ``tr O O^dag = d^N``."""
        o = np.asarray(operator, dtype=complex)
        dim_a = qudit_dim ** n_ports
        if o.shape != (dim_a, dim_a):
            raise ValidationError(f"resource operator must be {dim_a}x{dim_a}")
        base = cls.phi_plus(n_ports, qudit_dim)
        return cls(n_ports, qudit_dim, np.kron(o, np.eye(dim_a)) @ base.state)

    @classmethod
    def for_convention(cls, n_ports: int, qudit_dim: int, convention: str) -> "Resource":
        if convention == core.SINGLET:
            return cls.singlets(n_ports)
        return cls.phi_plus(n_ports, qudit_dim)

    def density(self) -> np.ndarray:
        return linalg.projector(self.state)

    def signal_state(self, port: int) -> np.ndarray:
        """Reduced state of ``A`` and ``B_port`` laid out as ``[A1..AN, B]``."""
        n = self.n_ports
        m = linalg.partial_trace(self.density(), self.space, _a(n) + [f"B{port}"])
        return m


@dataclass(frozen=True)
class ProgramOperation:
    """Operation stored in the processor, given by Kraus operators on one port."""

    kraus_ops: tuple
    trace_preserving: bool = True

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValidationError("program needs at least one Kraus operator")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise ValidationError(f"Kraus operator shape {k.shape} != ({d}, {d})")
        gram = sum(k.conj().T @ k for k in ops)
        tp = np.abs(gram - np.eye(d)).max() <= 1e-12
        if not tp:
            ok, lo = linalg.psd_check(np.eye(d) - gram, 1e-9)
            if not ok:
                raise ValidationError(f"Kraus operators increase trace (margin {lo:.3e})")
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "trace_preserving", bool(tp))

    @classmethod
    def unitary(cls, u: np.ndarray) -> "ProgramOperation":
        return cls((u,))

    @classmethod
    def identity(cls, d: int) -> "ProgramOperation":
        return cls((np.eye(d),))

    @classmethod
    def depolarizing(cls, d: int) -> "ProgramOperation":
        """Completely depolarizing channel via the ``d^2`` operators ``|k><l|/sqrt d``."""
        ops = []
        for k in range(d):
            for l in range(d):
                op = np.zeros((d, d))
                op[k, l] = 1.0 / np.sqrt(d)
                ops.append(op)
        return cls(tuple(ops))

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def apply_on(self, rho: np.ndarray, space: TensorSpace, label: str) -> np.ndarray:
        return sum(linalg.apply_local(k, rho, space, [label]) for k in self.kraus_ops)


@dataclass(frozen=True)
class TeleportOutcome:
    index: int
    probability: float
    conditional_output: np.ndarray

    def to_json(self) -> dict:
        return {"i": self.index, "p": self.probability,
                "rho": linalg.matrix_to_json(self.conditional_output)}


def _check_povm(povm: core.Povm, resource: Resource) -> None:
    dim = resource.qudit_dim ** (resource.n_ports + 1)
    if len(povm.elements) != resource.n_ports:
        raise ValidationError(f"POVM has {len(povm.elements)} outcomes for {resource.n_ports} ports")
    for e in povm.elements:
        if e.shape != (dim, dim):
            raise ValidationError(f"POVM element shape {e.shape}, expected ({dim}, {dim}) on A and C")


def _unnormalized_outputs(input_state: np.ndarray, input_space: TensorSpace, resource: Resource,
                          povm: core.Povm, program: ProgramOperation | None = None,
                          keep_all_ports: bool = False) -> list:
    """Per-outcome unnormalized states of the selected port (plus any extra input factors).

    ``input_space`` must contain a factor ``C``; other factors are carried
    along untouched (e.g. a reference ``D`` for Choi states).
    """
    _check_povm(povm, resource)
    n, d = resource.n_ports, resource.qudit_dim
    if input_space.dim("C") != d:
        raise ValidationError(f"input factor C has dimension {input_space.dim('C')}, expected {d}")
    rho_in = np.asarray(input_state, dtype=complex)
    if rho_in.shape != (input_space.total_dim,) * 2:
        raise ValidationError(f"input shape {rho_in.shape} does not match {input_space.labels}")
    res = resource.density()
    if program is not None:
        if program.dim != d:
            raise ValidationError(f"program acts on dimension {program.dim}, ports have {d}")
        for label in _b(n):
            res = program.apply_on(res, resource.space, label)
    space = resource.space + input_space
    total = np.kron(res, rho_in)
    extras = [label for label in input_space.labels if label != "C"]
    outputs = []
    for i, element in enumerate(povm.elements, start=1):
        root = linalg.psd_sqrt_clipped(element)
        post = linalg.apply_local(root, total, space, _a(n) + ["C"])
        keep = (_b(n) if keep_all_ports else [f"B{i}"]) + extras
        outputs.append(linalg.partial_trace(post, space, keep))
    return outputs


def teleport(input_state: np.ndarray, resource: Resource, povm: core.Povm,
             program: ProgramOperation | None = None):
    """Run Alice's measurement and Bob's port selection on a single-qudit input.

    Returns ``(outcomes, average_output)`` where ``average_output`` is the sum
    of the unnormalized conditional states (trace < 1 only for
    trace-decreasing programs).
    """
    d = resource.qudit_dim
    rho_in = np.asarray(input_state, dtype=complex)
    if rho_in.ndim == 1:
        rho_in = linalg.projector(rho_in)
    if rho_in.shape != (d, d):
        raise ValidationError(f"input must be {d}x{d}, got {rho_in.shape}")
    raw = _unnormalized_outputs(rho_in, TensorSpace.of(["C"], d), resource, povm, program)
    outcomes = []
    for i, omega in enumerate(raw, start=1):
        p = float(np.trace(omega).real)
        if p < ZERO_PROBABILITY:
            outcomes.append(TeleportOutcome(i, 0.0, np.zeros_like(omega)))
        else:
            outcomes.append(TeleportOutcome(i, p, omega / p))
    return outcomes, sum(raw)


def bob_marginal(input_state: np.ndarray, resource: Resource, povm: core.Povm) -> np.ndarray:
    """Bob's state on all ports, averaged over outcomes he has not been told."""
    d = resource.qudit_dim
    rho_in = np.asarray(input_state, dtype=complex)
    if rho_in.ndim == 1:
        rho_in = linalg.projector(rho_in)
    raw = _unnormalized_outputs(rho_in, TensorSpace.of(["C"], d), resource, povm, keep_all_ports=True)
    return sum(raw)


def choi_state(resource: Resource, povm: core.Povm) -> np.ndarray:
    """``(Lambda (x) 1) P+_{CD}`` on ``[B, D]``."""
    d = resource.qudit_dim
    p_cd = linalg.projector(linalg.max_entangled(d))
    raw = _unnormalized_outputs(p_cd, TensorSpace.of(["C", "D"], d), resource, povm)
    return sum(raw)


def choi_fidelity(resource: Resource, povm: core.Povm, convention: str | None = None) -> core.FidelityReport:
    """Entanglement fidelity as the overlap of the simulated Choi state with ``P+``."""
    d = resource.qudit_dim
    choi = choi_state(resource, povm)
    phi = linalg.max_entangled(d)
    F = float(np.real(phi.conj() @ choi @ phi))
    return core.FidelityReport.build(resource.n_ports, d, F, "choi", convention)


class Processor:
    """Fixed measurement and port selection; the program lives in the resource."""

    def __init__(self, resource: Resource, povm: core.Povm):
        _check_povm(povm, resource)
        self.resource = resource
        self.povm = povm

    @classmethod
    def srm(cls, n_ports: int, qudit_dim: int = 2, convention: str | None = None) -> "Processor":
        states = core.signal_states(n_ports, qudit_dim, convention)
        return cls(Resource.for_convention(n_ports, qudit_dim, states.convention), core.srm_povm(states))

    def teleport(self, input_state, program: ProgramOperation | None = None):
        return teleport(input_state, self.resource, self.povm, program)

    def channel(self, input_state) -> np.ndarray:
        return self.teleport(input_state)[1]

    def execute(self, program: ProgramOperation, input_state) -> tuple[np.ndarray, float]:
        """Teleport through ``(1 (x) eps^(x)N)|psi>``.

        Returns the port output normalized by the pooled acceptance
        probability, and that probability (1 for trace-preserving programs).
        """
        _, avg = self.teleport(input_state, program)
        p = float(np.trace(avg).real)
        if p < ZERO_PROBABILITY:
            return np.zeros_like(avg), 0.0
        return avg / p, p


def processor_execute(program: ProgramOperation, input_state, resource: Resource,
                      povm: core.Povm) -> tuple[np.ndarray, float]:
    return Processor(resource, povm).execute(program, input_state)


@dataclass
class MonotonicityReport:
    with_program: list = field(default_factory=list)
    without_program: list = field(default_factory=list)
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return all(a >= b - self.tol for a, b in zip(self.with_program, self.without_program))


def monotonicity_check(program: ProgramOperation, inputs: Sequence[np.ndarray], processor: Processor,
                       tol: float = 1e-10) -> MonotonicityReport:
    """Compare ``F(eps(chi), eps(Lambda(chi)))`` with ``F(chi, Lambda(chi))`` per input."""
    if not program.trace_preserving:
        raise ValidationError("monotonicity holds for trace-preserving programs only")
    report = MonotonicityReport(tol=tol)
    for chi in inputs:
        chi = np.asarray(chi, dtype=complex)
        target = linalg.projector(chi) if chi.ndim == 1 else chi
        out = processor.channel(target)
        report.without_program.append(linalg.fidelity(target, out))
        report.with_program.append(linalg.fidelity(program.apply(target), program.apply(out)))
    return report
