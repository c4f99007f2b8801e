"""Tests for certification module."""

from dataclasses import replace

import numpy as np
import pytest

from hdmpc.certification import FAIL, PASS, RUNTIME, CheckResult, certify_instance
from hdmpc.instance import load_config


class TestCertifyInstance:
    """Tests for certify_instance."""

    def test_twin_passes(self, twin_doc):
        report = certify_instance(twin_doc)
        assert report.passed
        assert report.check("schur").status == PASS
        assert report.check("terminal_invariance").value == pytest.approx(0.45)
        assert report.check("terminal_inputs").value == pytest.approx(0.75)
        assert report.check("slater").value == pytest.approx(0.49)
        assert report.phi == pytest.approx(0.6576, abs=1e-4)
        assert report.gamma == pytest.approx(0.1216, abs=1e-4)

    def test_cost_decrease_is_runtime_checked(self, twin_doc):
        report = certify_instance(twin_doc)
        assert report.check("cost_decrease").status == RUNTIME
        assert report.check("cost_decrease").passed

    def test_strong_coupling_fails(self, strongly_coupled_path):
        report = certify_instance(load_config(strongly_coupled_path))
        assert not report.passed
        assert report.check("weak_coupling").status == FAIL
        assert report.phi is None

    def test_unstable_plant_fails(self, non_schur_path):
        report = certify_instance(load_config(non_schur_path))
        assert report.check("schur").status == FAIL
        assert report.check("schur").value == pytest.approx(1.2)
        assert report.check("terminal_invariance").value == pytest.approx(-0.1)
        assert report.check("weak_coupling").status == PASS

    def test_gain_override_reaches_every_terminal_check(self, twin_doc):
        report = certify_instance(replace(twin_doc, K=np.zeros((2, 2))))
        assert report.check("schur").value == pytest.approx(0.6)
        assert report.check("terminal_invariance").value == pytest.approx(0.2)
        assert report.check("terminal_inputs").value == pytest.approx(1.0)

    def test_coupled_gain_override_fails(self, twin_doc):
        coupled = np.array([[-0.5, 0.1], [0.0, -0.5]])
        report = certify_instance(replace(twin_doc, K=coupled))
        assert not report.passed
        assert report.check("schur").status == FAIL
        assert report.check("terminal_invariance").status == FAIL

    def test_unknown_check(self, twin_doc):
        with pytest.raises(KeyError):
            certify_instance(twin_doc).check("nonexistent")

    def test_to_dict(self, twin_doc):
        data = certify_instance(twin_doc).to_dict()
        assert data["passed"] is True
        names = [c["name"] for c in data["checks"]]
        assert names == [
            "schur",
            "terminal_invariance",
            "terminal_inputs",
            "slater",
            "norm_bound",
            "weak_coupling",
            "cost_decrease",
        ]


class TestCheckResult:
    """Tests for CheckResult."""

    @pytest.mark.parametrize("status,passed", [(PASS, True), (FAIL, False), (RUNTIME, True)])
    def test_passed(self, status, passed):
        assert CheckResult("x", status).passed is passed
