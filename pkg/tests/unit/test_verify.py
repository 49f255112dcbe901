"""
Unit tests for the verification suite

Tests cover:
- Check and VerifyReport bookkeeping
- Individual fast checks, including the c1 negative control
- The composite error exponent read from the finest eps halving
- Guarded check groups and suite selection
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from layerbvp import verify
from layerbvp.asymptotics import Branch
from layerbvp.errors import ConfigurationError, NoCrossingError
from layerbvp.shooting import ErrorScaling
from layerbvp.verify import (
    Check,
    VerifyReport,
    check_composite_exponent,
    check_composite_symmetry,
    check_constants,
    check_dilog,
    check_lambert,
    check_naive_trap,
    dilog_oracle,
    run_suite,
)


class TestReport:
    """Test Check and VerifyReport"""

    @pytest.mark.unit
    def test_row(self):
        """Test table formatting of a check"""
        check = Check("drift", 1.23456789e-10, 1e-9, True)
        assert check.row() == ["drift", "1.23457e-10", "1e-09", "PASS"]
        assert Check("roots", 2, 3, False).row()[-1] == "FAIL"

    @pytest.mark.unit
    def test_report(self):
        """Test pass/fail aggregation and the JSON payload"""
        report = VerifyReport("fast", checks=[Check("a", 0.0, 1.0, True),
                                              Check("b", 2.0, 1.0, False, "too big")])
        assert not report.passed
        assert [c.name for c in report.failures] == ["b"]
        payload = report.payload()
        assert payload["suite"] == "fast"
        assert payload["passed"] is False
        assert payload["checks"][1]["detail"] == "too big"
        assert VerifyReport("fast").passed


class TestFastChecks:
    """Test the cheap checks one by one"""

    @pytest.mark.unit
    def test_constants_pass(self):
        """Test that the stored constants pass"""
        assert all(c.passed for c in check_constants())

    @pytest.mark.unit
    def test_perturbed_c1_fails(self):
        """Test that shifting c1 by 1e-3 breaks the tail and offset checks"""
        checks = {c.name: c for c in check_constants(perturb_c1=1e-3)}
        failed = [name for name, c in checks.items() if not c.passed]
        assert any("tail matching" in name for name in failed)
        assert "M tail offset" in failed
        assert checks["c2 B0 vs 2.594"].passed

    @pytest.mark.unit
    def test_lambert(self):
        """Test the Lambert W residual check on a small sample"""
        assert all(c.passed for c in check_lambert(n=500))

    @pytest.mark.unit
    def test_dilog(self):
        """Test the dilog check and its oracle"""
        assert dilog_oracle(-3.0) == pytest.approx(-1.9393754207667089, rel=1e-14)
        assert check_dilog(points=5).passed

    @pytest.mark.unit
    def test_composite_symmetry(self, params):
        """Test the composite reflection check"""
        assert all(c.passed for c in check_composite_symmetry(params, n=21))

    @pytest.mark.unit
    def test_naive_trap(self):
        """Test that the naive slope is flagged as disagreeing"""
        check = check_naive_trap()
        assert check.passed
        assert check.measured < 0.5


class TestCompositeExponent:
    """Test the composite error exponent checks"""

    @staticmethod
    def _scaling(branch, errors, local, fitted):
        return ErrorScaling(branch, 1, (0.1, 0.05, 0.025), errors, local, fitted)

    @pytest.mark.unit
    def test_local_exponent_decides(self, mocker):
        """Test that a whole-sequence fit above 2.2 still passes on the finest halving"""
        b0 = self._scaling(Branch.B0, (0.0768, 0.01529, 0.003489), 2.13, 2.23)
        m = self._scaling(Branch.M, (0.0160, 0.00588, 0.00134), 2.13, 1.787)
        mocker.patch.object(verify, "composite_error_scaling",
                            side_effect=lambda branch, *_: b0 if branch is Branch.B0 else m)
        checks = check_composite_exponent()
        assert [c.passed for c in checks] == [True, True, True]
        assert "2.2300" in checks[0].detail
        assert "1.7870" in checks[2].detail

    @pytest.mark.unit
    def test_slow_m_error_fails(self, mocker):
        """Test that an M exponent below 1.8 fails"""
        b0 = self._scaling(Branch.B0, (0.04, 0.01, 0.0025), 2.0, 2.0)
        m = self._scaling(Branch.M, (0.02, 0.01, 0.005), 1.0, 1.0)
        mocker.patch.object(verify, "composite_error_scaling",
                            side_effect=lambda branch, *_: b0 if branch is Branch.B0 else m)
        checks = check_composite_exponent()
        assert [c.passed for c in checks] == [True, True, False]


class TestSuite:
    """Test run_suite"""

    @pytest.mark.unit
    def test_unknown_suite(self):
        """Test that only fast and full are accepted"""
        with pytest.raises(ConfigurationError):
            run_suite("medium")

    @pytest.mark.unit
    def test_guarded_failure(self, mocker):
        """Test that a raising group becomes one failed check and the rest still run"""
        mocker.patch.object(verify, "check_critical_point",
                            side_effect=NoCrossingError("no crossing"))
        mocker.patch.object(verify, "solve_all", return_value={})
        for name in ("check_branch_slopes", "check_endpoint_relation",
                     "check_conserved_drift", "check_curve_symmetry", "check_lambert",
                     "check_dilog", "check_composite_symmetry", "check_naive_trap"):
            mocker.patch.object(verify, name, return_value=[Check(name, 0.0, 1.0, True)])
        seen = []
        report = run_suite("fast", progress=seen.append)
        assert [c.name for c in report.failures] == ["critical point"]
        assert report.failures[0].measured == "NoCrossingError"
        assert len(seen) == len(report.checks)
        assert any(c.name == "check_naive_trap" for c in report.checks)

    @pytest.mark.unit
    def test_perturbation_propagates(self, mocker):
        """Test that perturb_c1 reaches the constants check"""
        constants = mocker.patch.object(verify, "check_constants", return_value=[])
        mocker.patch.object(verify, "solve_all", return_value={})
        for name in ("check_critical_point", "check_branch_slopes",
                     "check_endpoint_relation", "check_conserved_drift", "check_curve_symmetry",
                     "check_lambert", "check_dilog", "check_composite_symmetry",
                     "check_naive_trap"):
            mocker.patch.object(verify, name, return_value=[])
        report = run_suite("fast", perturb_c1=1e-3)
        constants.assert_called_once_with(1e-3)
        assert report.perturb_c1 == 1e-3
        assert report.passed
