import numpy as np
import pytest

from pbt import channel, core, linalg, sdp
from pbt.errors import ConvergenceError, ResourceError, ValidationError

_CACHE = {}


def solved(n, d=2):
    if (n, d) not in _CACHE:
        _CACHE[n, d] = sdp.solve_primary(n, d)
    return _CACHE[n, d]


def _eig_instance(c):
    n = c.shape[0]
    row = np.eye(n).reshape(1, -1).astype(complex)
    return sdp.SdpInstance([n], [c], [row], np.array([1.0]))


def test_solver_on_max_eigenvalue():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    c = a + a.conj().T
    sol = sdp.solve(_eig_instance(c))
    top = np.linalg.eigvalsh(c)[-1]
    assert abs(sol.primal_value - top) < 1e-6
    assert abs(sol.dual_value - top) < 1e-6
    assert sol.gap < 1e-7


def test_solver_two_blocks():
    # max <C1,X1> + <C2,X2> with tr X1 + tr X2 = 1: the larger top eigenvalue wins
    c1, c2 = np.diag([1.0, 2.0]), np.diag([3.0, 0.5, 0.1])
    r1 = np.eye(2).reshape(1, -1).astype(complex)
    r2 = np.eye(3).reshape(1, -1).astype(complex)
    inst = sdp.SdpInstance([2, 3], [c1, c2], [r1, r2], np.array([1.0]))
    sol = sdp.solve(inst)
    assert abs(sol.primal_value - 3.0) < 1e-6
    assert abs(np.trace(sol.primal_blocks[1]).real - 1) < 1e-6


def test_solver_reports_nonconvergence():
    c = np.diag([1.0, 2.0, 3.0])
    with pytest.raises(ConvergenceError) as err:
        sdp.solve(_eig_instance(c), sdp.SolverOptions(max_iter=1))
    assert err.value.best is not None and err.value.gap is not None


def test_instance_validation():
    with pytest.raises(ValidationError):
        sdp.SdpInstance([2], [np.eye(3)], [np.zeros((1, 4))], np.zeros(1))
    with pytest.raises(ValidationError):
        sdp.SdpInstance([2], [np.eye(2)], [np.zeros((1, 3))], np.zeros(1))


def test_hermitian_basis_is_orthonormal():
    rows = sdp.hermitian_basis_rows(3).toarray()
    assert rows.shape == (9, 9)
    assert np.abs(rows @ rows.conj().T - np.eye(9)).max() < 1e-15
    for r in rows:
        e = np.conj(r).reshape(3, 3)
        assert np.abs(e - e.conj().T).max() < 1e-15


def test_primary_instance_shape():
    inst = sdp.build_primary(1, 2)
    assert inst.block_dims == [4, 2]
    # one coordinate per entry of a 4x4 Hermitian matrix, plus the trace of X
    assert inst.num_constraints == 16 + 1
    x0 = sdp.srm_warm_start(2, 2)
    inst2 = sdp.build_primary(2, 2)
    assert np.abs(inst2.apply(x0) - inst2.rhs).max() < 1e-12
    with pytest.raises(ResourceError):
        sdp.build_primary(6, 2)
    with pytest.raises(ResourceError):
        sdp.build_primary(3, 3)


@pytest.mark.parametrize("n,target", [(1, 0.25), (2, 0.5)])
def test_small_optima(n, target):
    res = solved(n)
    assert abs(res.F_primal - target) < 1e-6
    assert abs(res.F_dual - target) < 1e-6
    assert 0 <= res.gap <= 1e-7


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_optimum_matches_cos_squared(n):
    # independent closed form for the optimal qubit protocol: cos^2(pi/(N+2))
    assert abs(solved(n).F_primal - np.cos(np.pi / (n + 2)) ** 2) < 1e-6


@pytest.mark.parametrize("n", [3, 4])
def test_sdp_beats_srm_and_respects_bound(n):
    res = solved(n)
    F_srm = core.fidelity_closed_form(n).F
    assert res.F_primal >= F_srm - 1e-7
    assert res.F_primal <= res.F_dual + 1e-9
    assert res.F_dual <= n / 4 + 1e-7
    assert res.gap <= 1e-7
    if n == 3:
        assert res.F_primal > F_srm + 1e-3


def test_qutrit_pair():
    res = solved(2, 3)
    assert abs(res.F_primal - 2 / 9) < 1e-6


@pytest.mark.parametrize("n", [1, 2, 3])
def test_primal_and_dual_feasibility(n):
    res = solved(n)
    sol = res.solution
    assert sol.primal_residual <= 1e-8
    for blk in sol.primal_blocks:
        assert np.linalg.eigvalsh(blk)[0] >= -1e-9
    st = core.signal_states(n, 2, core.PHI_PLUS)
    for s in st.sigmas:
        assert np.linalg.eigvalsh(res.omega - s)[0] >= -1e-9
    marginal = linalg.partial_trace(res.omega, st.space, core.a_labels(n))
    assert np.linalg.eigvalsh(res.a * np.eye(2 ** n) - marginal)[0] >= -1e-9
    # dual value in these variables is d^N a / d^2
    assert abs(res.F_dual - 2 ** n * res.a / 4) < 1e-12


def test_extract_resource_reproduces_value():
    n = 3
    res = solved(n)
    o, povm, support = sdp.extract_resource(res)
    assert abs(np.trace(o @ o.conj().T).real - 2 ** n) < 1e-6
    st = core.signal_states(n, 2, core.PHI_PLUS)
    assert abs(core.fidelity_dense(st, povm, o).F - res.F_primal) < 1e-6
    sim = channel.choi_fidelity(channel.Resource.from_operator(o, n, 2), povm)
    assert abs(sim.F - res.F_primal) < 1e-6


def test_result_json():
    js = solved(1).to_json(dump_matrices=True)
    assert set(["n", "d", "F_primal", "F_dual", "gap", "iterations", "X", "Omega", "a"]) <= set(js)
    assert js["X"]["dims"] == [2]
    assert solved(1).report().method == "sdp"
