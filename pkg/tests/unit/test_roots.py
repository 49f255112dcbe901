"""
Unit tests for the bracketing root finder

Tests cover:
- Agreement with scipy.optimize.brentq
- Extended-precision polishing
- Bracket and budget errors
- Sign-change detection
"""

import math
import sys
from pathlib import Path

import pytest
from scipy import optimize

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from layerbvp.errors import BracketError, NonConvergenceError
from layerbvp.roots import brentq, sign_changes


class TestBrentq:
    """Test brentq"""

    @pytest.mark.unit
    @pytest.mark.parametrize("f,a,b", [
        (lambda x: x ** 3 - 2 * x - 5, 2.0, 3.0),
        (lambda x: math.cos(x) - x, 0.0, 1.0),
        (lambda x: math.exp(x) - 10.0, 0.0, 5.0),
        (lambda x: (x - 1.0) ** 3, 0.0, 3.0),
    ])
    def test_matches_scipy(self, f, a, b):
        """Test roots against scipy.optimize.brentq"""
        expected = optimize.brentq(f, a, b, xtol=1e-14)
        result = brentq(f, a, b, xtol=1e-14)
        assert result.converged
        assert result.root == pytest.approx(expected, abs=1e-12)

    @pytest.mark.unit
    def test_counts_function_calls(self):
        """Test that passing fa/fb saves two evaluations"""
        calls = []

        def f(x):
            calls.append(x)
            return x * x - 2

        full = brentq(f, 0.0, 2.0)
        n_full = len(calls)
        calls.clear()
        brentq(f, 0.0, 2.0, fa=-2.0, fb=2.0)
        assert len(calls) == n_full - 2
        assert full.function_calls == n_full

    @pytest.mark.unit
    def test_exact_root_at_endpoint(self):
        """Test that an endpoint root is returned immediately"""
        result = brentq(lambda x: x - 1.0, 1.0, 2.0)
        assert result.root == 1.0
        assert result.iterations == 0

    @pytest.mark.unit
    def test_extended_precision(self, ext50):
        """Test sqrt(2) to 45 digits"""
        result = brentq(lambda x: x * x - 2, ext50.one, 2 * ext50.one,
                        xtol=ext50.mpf("1e-48"), rtol=4 * ext50.eps)
        assert abs(result.root - ext50.sqrt(2 * ext50.one)) < ext50.mpf("1e-45")

    @pytest.mark.unit
    def test_no_sign_change(self):
        """Test that a bracket without a sign change raises BracketError"""
        with pytest.raises(BracketError):
            brentq(lambda x: x * x + 1, -1.0, 1.0)

    @pytest.mark.unit
    def test_budget_exhausted(self):
        """Test the iteration budget"""
        with pytest.raises(NonConvergenceError):
            brentq(lambda x: x ** 3 - 0.3, 0.0, 1.0, xtol=1e-300, rtol=0.0, max_iter=3)

    @pytest.mark.unit
    def test_budget_without_raising(self):
        """Test that raise_on_failure=False reports the best estimate"""
        result = brentq(lambda x: x ** 3 - 0.3, 0.0, 1.0, xtol=1e-300, rtol=0.0, max_iter=3,
                        raise_on_failure=False)
        assert not result.converged
        assert 0.0 <= result.root <= 1.0


class TestSignChanges:
    """Test sign-change detection"""

    @pytest.mark.unit
    def test_simple(self):
        """Test alternating values"""
        assert sign_changes([1.0, 2.0, -1.0, -3.0, 4.0]) == [(1, 2), (3, 4)]

    @pytest.mark.unit
    def test_exact_zero_counts_once(self):
        """Test that a sampled zero is one crossing"""
        assert sign_changes([1.0, 0.0, -1.0]) == [(0, 1)]

    @pytest.mark.unit
    def test_none(self):
        """Test constant sign and degenerate input"""
        assert sign_changes([1.0, 2.0, 3.0]) == []
        assert sign_changes([]) == []
        assert sign_changes([0.0, 0.0]) == []
