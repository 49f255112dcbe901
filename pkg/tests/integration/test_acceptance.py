"""
Acceptance checks over whole computations

Tests cover:
- The critical point and the eps = 0.1 branch slopes
- Transcendentally small slopes of B1 and M in 50-digit mode
- B0 slope error and composite error scaling
- Pitchfork root counts and separation exponent
- Conservation, endpoint relation and reflection symmetry of solved branches
- Special functions and the naive-slope negative control
"""

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from layerbvp.asymptotics import Branch, b0_constants, naive_slope_diagnostic
from layerbvp.bifurcation import count_roots, locate_critical, separation_exponent
from layerbvp.dynamics import CRITICAL_EPSILON, Params
from layerbvp.hpreal import extended
from layerbvp.shooting import composite_error_scaling, slope_sweep
from layerbvp.verify import TST_EPSILONS, check_dilog, check_lambert, check_tst


@pytest.fixture(scope="module")
def sweep50():
    """50-digit slope sweep over the TST epsilons"""
    return slope_sweep(TST_EPSILONS, extended(50))


def _rows(records, branch):
    return sorted((r for r in records if r.branch is branch), key=lambda r: -r.epsilon)


@pytest.mark.integration
class TestCriticalPoint:
    """Critical point"""

    def test_critical_point(self):
        """Test eps_c and z_c to 1e-9 and 1e-8"""
        cp = locate_critical()
        assert abs(cp.epsilon_c - 0.2159869288903) <= 1e-9
        assert abs(cp.z_c + 3.9052637703) <= 1e-8
        assert abs(cp.travel_time - 0.5) <= 1e-8


@pytest.mark.integration
class TestBranches:
    """Solved branches at eps = 0.1"""

    def test_slopes(self, branches_eps01):
        """Test B0 = -10.6942 and B1 = 0.9999 to four decimals"""
        assert abs(branches_eps01[Branch.B0].initial_slope + 10.6942) <= 5e-4
        assert round(branches_eps01[Branch.B1].initial_slope, 4) == 0.9999

    @pytest.mark.parametrize("branch", list(Branch))
    def test_conserved_drift(self, branch, branches_eps01):
        """Test max |C^2(t) - C^2(0)| <= 1e-9"""
        assert branches_eps01[branch].trajectory.max_conserved_drift() <= 1e-9

    @pytest.mark.parametrize("branch", list(Branch))
    def test_endpoint_relation(self, branch, branches_eps01):
        """Test f(z0) = f(z1) within 1e-8"""
        assert branches_eps01[branch].endpoint_mismatch() <= 1e-8

    def test_reflection(self, branches_eps01):
        """Test |y_B1(x) + y_B0(1 - x)| <= 1e-8 on a grid"""
        b0 = branches_eps01[Branch.B0].trajectory
        b1 = branches_eps01[Branch.B1].trajectory
        worst = max(abs(b1.evaluate(i / 200).y + b0.evaluate(1 - i / 200).y)
                    for i in range(201))
        assert worst <= 1e-8


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.extended
class TestTranscendentallySmallSlopes:
    """Exponentially small initial gaps in 50-digit mode"""

    @pytest.mark.parametrize("branch", [Branch.B1, Branch.M])
    def test_ratio_band_and_monotone(self, branch, sweep50):
        """Test ratio in [1 - 5 eps, 1 + 5 eps] and |ratio - 1| shrinking with eps"""
        rows = _rows(sweep50, branch)
        assert [r.epsilon for r in rows] == list(TST_EPSILONS)
        deviations = []
        for r in rows:
            assert 1 - 5 * r.epsilon <= r.ratio <= 1 + 5 * r.epsilon
            deviations.append(float(abs(r.ratio - 1)))
        assert all(b < a for a, b in zip(deviations, deviations[1:]))

    def test_gap_span(self, sweep50):
        """Test that the measured gaps cover at least 10 decades"""
        gaps = [float(r.gap) for r in sweep50 if r.branch is not Branch.B0]
        assert math.log10(max(gaps)) - math.log10(min(gaps)) >= 10

    def test_b1_gap_is_below_double_resolution(self, sweep50):
        """Test that the eps = 0.04 B1 gap is resolved below machine epsilon"""
        gap = _rows(sweep50, Branch.B1)[-1].gap
        assert 0 < gap < 1e-13

    def test_b0_slope_error_order(self, sweep50):
        """Test that halving eps from 0.1 to 0.05 shrinks the B0 slope error by 1.6-2.6"""
        b0 = {r.epsilon: r for r in _rows(sweep50, Branch.B0)}
        ratio = abs(b0[0.1].slope - b0[0.1].predicted) / abs(b0[0.05].slope - b0[0.05].predicted)
        assert 1.6 <= ratio <= 2.6

    def test_suite_check_agrees(self):
        """Test that the verify TST group passes on its own"""
        assert all(c.passed for c in check_tst())


@pytest.mark.integration
@pytest.mark.slow
class TestCompositeScaling:
    """First-order composite error"""

    def test_b0_exponent(self):
        """Test max error ~ eps^p with p in [1.8, 2.2] over the finest halving"""
        scaling = composite_error_scaling(Branch.B0, 1)
        assert 1.8 <= scaling.local_exponent <= 2.2
        assert max(scaling.scaled) / min(scaling.scaled) <= 2.0

    def test_m_exponent(self):
        """Test that the M error falls at least as fast as eps^1.8 over the finest halving"""
        scaling = composite_error_scaling(Branch.M, 1)
        assert scaling.local_exponent >= 1.8
        assert all(a > b for a, b in zip(scaling.errors, scaling.errors[1:]))


@pytest.mark.integration
@pytest.mark.slow
class TestPitchfork:
    """Root counts around eps_c"""

    def test_counts(self):
        """Test 3 roots at eps_c - 1e-3 and 1 at eps_c + 1e-3"""
        assert count_roots(CRITICAL_EPSILON - 1e-3) == 3
        assert count_roots(CRITICAL_EPSILON + 1e-3) == 1

    def test_separation_exponent(self):
        """Test outer-root separation ~ (eps_c - eps)^(1/2)"""
        p, samples = separation_exponent(CRITICAL_EPSILON)
        assert 0.4 <= p <= 0.6
        assert all(sep > 0 for _, sep in samples)


@pytest.mark.integration
class TestSpecialFunctionsAndConstants:
    """Special functions and the B0 constant"""

    def test_lambert(self):
        """Test 10^4 back-substitution residuals per branch"""
        assert all(c.passed for c in check_lambert())

    def test_dilog(self):
        """Test dilog against the integral on [-5, 0.9]"""
        assert check_dilog().passed

    def test_c2_b0(self):
        """Test c2 for B0 against 2.594"""
        assert abs(b0_constants()[1] - 2.594) <= 5e-4


@pytest.mark.integration
class TestNaiveSlopeTrap:
    """Negative control for the naive composite slope"""

    def test_naive_disagrees(self):
        """Test that the naive M gap misses the transfer gap by more than a factor 2"""
        diag = naive_slope_diagnostic(Params(0.05))
        assert not 0.5 <= float(diag.ratio) <= 2.0

    @pytest.mark.slow
    @pytest.mark.extended
    def test_transfer_passes(self, sweep50):
        """Test that the numeric M gap obeys the exponential law at eps = 0.05"""
        m = {r.epsilon: r for r in _rows(sweep50, Branch.M)}[0.05]
        assert 1 - 5 * 0.05 <= m.ratio <= 1 + 5 * 0.05
