import json

import numpy as np
import pytest

from pbt import certificates, channel, core
from pbt.errors import DomainError, ResourceError


@pytest.mark.parametrize("n", range(1, 8))
def test_srm_certificate(n):
    rep = certificates.certify_srm_optimal(n)
    assert rep.passed
    assert rep.worst_margin >= -1e-9
    assert rep.details["block_agreement"] < 1e-10
    assert abs(rep.details["trace_over_4"] - core.fidelity_closed_form(n).F) < 1e-10
    assert len(rep.margins) == n


def test_srm_certificate_small_values():
    rep = certificates.certify_srm_optimal(1)
    assert abs(rep.details["trace_over_4"] - 0.25) < 1e-14
    assert rep.worst_margin >= -1e-12
    assert abs(certificates.certify_srm_optimal(3).details["trace_over_4"] - 0.625) < 1e-12


def test_y_blocks_agree_with_dense():
    n = 4
    st = core.signal_states(n)
    y = certificates.y_dense(st, core.srm_povm(st))
    assert np.abs(y - certificates.y_blocks(n)).max() < 1e-10


def test_certificate_report_json():
    rep = certificates.certify_srm_optimal(2)
    js = json.loads(json.dumps(rep.to_json()))
    assert js["kind"] == "srm_optimal" and js["passed"] is True
    assert set(["kind", "passed", "worst_margin", "margins"]) <= set(js)
    bad = certificates.CertificateReport.from_margins("universal_upper", [0.0, -1e-6])
    assert not bad.passed and bad.worst_margin == -1e-6
    assert certificates.CertificateReport.from_margins("universal_upper", [-5e-10]).passed


@pytest.mark.parametrize("n,d", [(1, 2), (2, 2), (3, 2), (4, 2), (1, 3), (2, 3), (3, 3), (4, 3), (2, 4)])
def test_universal_upper(n, d):
    rep = certificates.certify_universal_upper(n, d)
    assert rep.passed
    assert abs(rep.details["F_bound"] - n / d ** 2) < 1e-15
    # the marginal condition is tight
    assert abs(rep.margins[-1]) < 1e-12


def test_upper_bound_dominates_srm():
    for n in (1, 2, 3):
        for d in (2, 3):
            assert core.fidelity_srm_dense(n, d).F <= n / d ** 2 + 1e-12


@pytest.mark.parametrize("n,d", [(1, 2), (2, 2), (1, 3), (2, 3), (3, 3), (2, 4)])
def test_orthogonal_protocol_reaches_bound(n, d):
    proto = certificates.orthogonal_protocol(n, d)
    assert abs(proto.report.F - n / d ** 2) < 1e-12
    assert abs(proto.report.f - (d + n) / (d * (d + 1))) < 1e-12
    assert abs(np.trace(proto.resource_operator @ proto.resource_operator.conj().T) - d ** n) < 1e-9
    assert certificates.certify_orthogonal(n, d).passed


def test_orthogonal_protocol_examples():
    assert abs(certificates.orthogonal_protocol(1, 2).report.f - 0.5) < 1e-12
    assert abs(certificates.orthogonal_protocol(2, 2).report.f - 2 / 3) < 1e-12
    assert abs(certificates.orthogonal_protocol(2, 3).report.f - 5 / 12) < 1e-12
    with pytest.raises(DomainError):
        certificates.orthogonal_protocol(3, 2)


def test_orthogonal_protocol_by_simulation():
    n, d = 2, 3
    proto = certificates.orthogonal_protocol(n, d)
    res = channel.Resource.from_operator(proto.resource_operator, n, d)
    rep = channel.choi_fidelity(res, proto.povm)
    assert abs(rep.f - 5 / 12) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_random_povms_do_not_beat_srm(n):
    F_srm = core.fidelity_closed_form(n).F
    values = certificates.random_povm_check(n, samples=20, seed=n)
    assert len(values) == 20
    assert max(values) <= F_srm + 1e-9


def test_dense_cap():
    with pytest.raises(ResourceError):
        certificates.certify_srm_optimal(9)
    with pytest.raises(ResourceError):
        certificates.certify_universal_upper(5, 3)
