import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbt import linalg
from pbt.errors import NotPSDError, ValidationError
from pbt.linalg import TensorSpace


def _rand_herm(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return a + a.conj().T


def _rand_density(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = a @ a.conj().T
    return m / np.trace(m)


def test_partial_trace_of_product():
    rng = np.random.default_rng(0)
    a, b, c = _rand_density(2, rng), _rand_density(3, rng), _rand_density(2, rng)
    space = TensorSpace.of(["A", "B", "C"], [2, 3, 2])
    m = linalg.kron(a, b, c)
    assert np.abs(linalg.partial_trace(m, space, ["B"]) - b).max() < 1e-14
    assert np.abs(linalg.partial_trace(m, space, ["C", "A"]) - np.kron(a, c)).max() < 1e-14
    assert abs(linalg.partial_trace(m, space, []).item() - 1) < 1e-14


def test_permute_swaps_kron_factors():
    rng = np.random.default_rng(1)
    a, b = _rand_herm(2, rng), _rand_herm(3, rng)
    space = TensorSpace.of(["A", "B"], [2, 3])
    assert np.abs(linalg.permute(np.kron(a, b), space, ["B", "A"]) - np.kron(b, a)).max() < 1e-14
    v, w = rng.standard_normal(2), rng.standard_normal(3)
    assert np.abs(linalg.permute_vector(np.kron(v, w), space, ["B", "A"]) - np.kron(w, v)).max() < 1e-14


def test_apply_local_matches_embedding():
    rng = np.random.default_rng(2)
    space = TensorSpace.of(["A", "B", "C"], 2)
    m = _rand_herm(8, rng)
    u = linalg.random_unitary(4, rng)
    full = linalg.embed(u, space, ["A", "C"])
    ref = linalg.permute(np.kron(u, np.eye(2)), TensorSpace.of(["A", "C", "B"], 2), ["A", "B", "C"])
    assert np.abs(full - ref).max() < 1e-14
    assert np.abs(linalg.apply_local(u, m, space, ["A", "C"]) - full @ m @ full.conj().T).max() < 1e-12
    assert np.abs(linalg.apply_local(u, m, space, ["A", "C"], side="left") - full @ m).max() < 1e-12
    assert np.abs(linalg.apply_local(u, m, space, ["A", "C"], side="right") - m @ full).max() < 1e-12


def test_unknown_label_and_bad_shape():
    space = TensorSpace.of(["A", "B"], 2)
    with pytest.raises(ValidationError):
        linalg.partial_trace(np.eye(4), space, ["Z"])
    with pytest.raises(ValidationError):
        linalg.partial_trace(np.eye(3), space, ["A"])
    with pytest.raises(ValidationError):
        TensorSpace.of(["A", "A"], 2)
    with pytest.raises(ValidationError):
        linalg.HermitianOperator(space, np.arange(16).reshape(4, 4))


def test_eigh_and_jacobi_agree():
    rng = np.random.default_rng(3)
    for dim in (1, 3, 6):
        h = _rand_herm(dim, rng)
        a = linalg.eigh(h)
        b = linalg.jacobi_eigh(h)
        assert np.abs(a.eigenvalues - b.eigenvalues).max() < 1e-10
        assert np.abs(b.reconstruct() - h).max() < 1e-10
        assert np.abs(b.eigenvectors.conj().T @ b.eigenvectors - np.eye(dim)).max() < 1e-10


def test_jacobi_degenerate_spectrum():
    rng = np.random.default_rng(4)
    u = linalg.random_unitary(5, rng)
    h = u @ np.diag([1.0, 1.0, 2.0, 2.0, 2.0]) @ u.conj().T
    dec = linalg.jacobi_eigh(h)
    assert np.abs(dec.eigenvalues - [1, 1, 2, 2, 2]).max() < 1e-10
    assert np.abs(dec.reconstruct() - h).max() < 1e-10


def test_spectral_functions():
    rng = np.random.default_rng(5)
    v = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    p = v @ v.conj().T
    r = linalg.inv_sqrt_on_support(p)
    proj = linalg.support_projector(p)
    assert np.abs(r @ p @ r - proj).max() < 1e-10
    assert abs(np.trace(proj).real - 2) < 1e-12
    s = linalg.sqrt_psd(p)
    assert np.abs(s @ s - p).max() < 1e-10
    assert np.abs(p @ linalg.pinv_on_support(p) @ p - p).max() < 1e-10
    with pytest.raises(NotPSDError):
        linalg.sqrt_psd(-p)


def test_psd_check():
    ok, lo = linalg.psd_check(np.diag([1.0, 0.0]))
    assert ok and lo == 0.0
    ok, lo = linalg.psd_check(np.diag([1.0, -1e-6]))
    assert not ok and abs(lo + 1e-6) < 1e-18


def test_uhlmann_fidelity():
    rng = np.random.default_rng(6)
    psi, phi = linalg.random_pure_state(3, rng), linalg.random_pure_state(3, rng)
    f = linalg.fidelity(linalg.projector(psi), linalg.projector(phi))
    assert abs(f - abs(np.vdot(psi, phi)) ** 2) < 1e-10
    rho = _rand_density(3, rng)
    assert abs(linalg.fidelity(rho, rho) - 1) < 1e-10
    assert abs(linalg.fidelity(np.eye(2) / 2, np.diag([1.0, 0])) - 0.5) < 1e-12


def test_states():
    assert abs(np.linalg.norm(linalg.max_entangled(3)) - 1) < 1e-15
    s = linalg.singlet()
    swap = linalg.permute_vector(s, TensorSpace.of(["A", "B"], 2), ["B", "A"])
    assert np.abs(swap + s).max() < 1e-15
    u = linalg.random_unitary(4, np.random.default_rng(7))
    assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-12


def test_matrix_json_roundtrip():
    rng = np.random.default_rng(8)
    space = TensorSpace.of(["A", "B"], [2, 3])
    m = _rand_herm(6, rng)
    text = json.dumps(linalg.matrix_to_json(m, space))
    back, sp = linalg.matrix_from_json(text)
    assert sp == space and np.abs(back - m).max() == 0
    op = linalg.HermitianOperator.from_json(linalg.HermitianOperator(space, m).to_json())
    assert np.abs(op.matrix - m).max() < 1e-15


def test_matrix_json_rejects_malformed():
    with pytest.raises(ValidationError):
        linalg.matrix_from_json({"re": [[1, 0, 0]], "im": [[0, 0, 0]]})
    with pytest.raises(ValidationError):
        linalg.matrix_from_json({"im": [[1]]})
    with pytest.raises(ValidationError):
        linalg.matrix_from_json({"re": [[1, 0], [0, 1]], "dims": [3]})


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_partial_trace_is_trace_preserving(da, db, seed):
    rng = np.random.default_rng(seed)
    m = _rand_density(da * db, rng)
    space = TensorSpace.of(["A", "B"], [da, db])
    ra = linalg.partial_trace(m, space, ["A"])
    assert abs(np.trace(ra) - 1) < 1e-12
    assert np.abs(ra - ra.conj().T).max() < 1e-12
