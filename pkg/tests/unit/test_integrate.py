"""
Unit tests for the adaptive integrator and singular quadrature

Tests cover:
- IntegratorConfig validation and per-kernel defaults
- Accuracy against scipy's DOP853, exact end times and conservation
- Cartesian/canonical agreement, dense output and events
- Tolerance proportionality and time reversal
- Failure modes: no crossing and escaping states
- quad_singular on integrable endpoint singularities
- Trajectory CSV export
"""

import math
import sys
from pathlib import Path

import pytest
from scipy import integrate, special

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from layerbvp.dynamics import PhasePoint, cartesian_field
from layerbvp.errors import (
    ConfigurationError,
    DomainError,
    NoCrossingError,
    NumericalError,
    QuadratureError,
)
from layerbvp.export import read_csv
from layerbvp.hpreal import extended
from layerbvp.integrate import (
    CANONICAL,
    CARTESIAN,
    LEFT,
    NONE,
    RIGHT,
    IntegratorConfig,
    dormand_prince,
    integrate_canonical,
    integrate_to_event,
    integrate_to_time,
    quad_singular,
    write_trajectory_csv,
)


def _scipy_final(p0, t_end, eps):
    def f(t, s):
        return [s[1], s[0] * (s[1] - 1) / eps]

    sol = integrate.solve_ivp(f, (0.0, t_end), [p0.y, p0.z], method="DOP853",
                              rtol=1e-13, atol=1e-14)
    return sol.y[0, -1], sol.y[1, -1]


class TestIntegratorConfig:
    """Test integrator configuration"""

    @pytest.mark.unit
    @pytest.mark.parametrize("kwargs", [
        {"rel_tol": 0.0}, {"abs_tol": -1.0}, {"max_steps": 0}, {"max_step": 0.0},
    ])
    def test_rejects_invalid(self, kwargs):
        """Test that bad tolerances and budgets are configuration errors"""
        with pytest.raises(ConfigurationError):
            IntegratorConfig(**kwargs)

    @pytest.mark.unit
    def test_for_kernel(self, machine):
        """Test per-kernel defaults and overrides"""
        assert IntegratorConfig.for_kernel(machine) == IntegratorConfig()
        assert IntegratorConfig.for_kernel(extended(50)).rel_tol == pytest.approx(1e-13)
        assert IntegratorConfig.for_kernel(extended(20)).rel_tol == pytest.approx(1e-12)
        assert IntegratorConfig.for_kernel(machine, rel_tol=1e-6).rel_tol == 1e-6


class TestIntegrateToTime:
    """Test fixed-end integration"""

    @pytest.mark.unit
    def test_matches_scipy(self, params, tight_cfg):
        """Test the final state against DOP853"""
        p0 = PhasePoint(1.0, -3.0)
        traj = integrate_to_time(p0, 0.6, params, tight_cfg, coordinates=CARTESIAN)
        y, z = _scipy_final(p0, 0.6, 0.1)
        assert traj.final_point.y == pytest.approx(y, abs=1e-8)
        assert traj.final_point.z == pytest.approx(z, abs=1e-7)

    @pytest.mark.unit
    def test_final_time_is_exact(self, params):
        """Test that the last step is clipped to t_end"""
        traj = integrate_to_time(PhasePoint(1.0, -3.0), 0.37, params)
        assert traj.final_time == 0.37
        assert traj.times[0] == 0.0

    @pytest.mark.unit
    def test_coordinates_agree(self, params, tight_cfg):
        """Test that cartesian and canonical runs reach the same point"""
        p0 = PhasePoint(1.0, -3.0)
        a = integrate_to_time(p0, 1.0, params, tight_cfg, coordinates=CARTESIAN)
        b = integrate_to_time(p0, 1.0, params, tight_cfg)
        assert b.coordinates == CANONICAL
        assert a.final_point.y == pytest.approx(b.final_point.y, abs=1e-8)
        assert a.final_point.z == pytest.approx(b.final_point.z, abs=1e-7)

    @pytest.mark.unit
    def test_conservation(self, params, tight_cfg):
        """Test that C^2 drifts by less than 1e-9"""
        traj = integrate_to_time(PhasePoint(1.0, -10.0), 1.0, params, tight_cfg)
        assert traj.max_conserved_drift() < 1e-9

    @pytest.mark.unit
    def test_canonical_start(self, params, tight_cfg):
        """Test integrate_canonical from a gap given as its logarithm"""
        traj = integrate_canonical(1.0, math.log(4.0), 0.5, params, tight_cfg)
        ref = integrate_to_time(PhasePoint(1.0, -3.0), 0.5, params, tight_cfg)
        assert traj.final_point.y == pytest.approx(ref.final_point.y, abs=1e-10)
        assert traj.gap(0) == pytest.approx(4.0)
        assert traj.log_gap(0) == pytest.approx(math.log(4.0))

    @pytest.mark.unit
    def test_canonical_needs_z_below_one(self, params):
        """Test that canonical coordinates are refused for z >= 1"""
        with pytest.raises(DomainError):
            integrate_to_time(PhasePoint(1.0, 1.5), 0.1, params, coordinates=CANONICAL)
        with pytest.raises(ConfigurationError):
            integrate_to_time(PhasePoint(1.0, 0.0), 0.1, params, coordinates="polar")

    @pytest.mark.unit
    def test_negative_end_time(self, params):
        """Test that t_end must be positive"""
        with pytest.raises(DomainError):
            integrate_to_time(PhasePoint(1.0, 0.0), -1.0, params)

    @pytest.mark.unit
    def test_escaping_state(self, params):
        """Test that a run above z = 1 fails with the last finite state attached"""
        with pytest.raises(NumericalError) as info:
            integrate_to_time(PhasePoint(1.0, 2.0), 1.0, params)
        assert info.value.last_state is not None
        assert info.value.last_state[0] > 1.0

    @pytest.mark.unit
    def test_error_follows_tolerance(self, params):
        """Test that two quarterings of rel_tol cut the final-state error at least fourfold"""
        p0 = PhasePoint(1.0, -3.0)
        ref = integrate_to_time(p0, 0.6, params, IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15),
                                coordinates=CARTESIAN).final_point
        errors = []
        for rel_tol in (1e-5, 2.5e-6, 6.25e-7):
            cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=rel_tol * 1e-2)
            end = integrate_to_time(p0, 0.6, params, cfg, coordinates=CARTESIAN).final_point
            errors.append(max(abs(end.y - ref.y), abs(end.z - ref.z)))
        assert errors[1] < errors[0]
        assert errors[2] <= errors[0] / 4

    @pytest.mark.unit
    def test_time_reversal(self, params):
        """Test that integrating forward then along the reversed field returns to the start"""
        cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
        field = cartesian_field(params)
        start = (1.0, -3.0)
        _, states, _, _ = dormand_prince(field, start, 0.3, cfg=cfg)
        _, back, _, _ = dormand_prince(lambda s: tuple(-v for v in field(s)), states[-1], 0.3,
                                       cfg=cfg)
        assert back[-1][0] == pytest.approx(start[0], abs=100 * cfg.rel_tol)
        assert back[-1][1] == pytest.approx(start[1], abs=100 * cfg.rel_tol * abs(start[1]))


class TestDenseOutput:
    """Test interpolation between steps"""

    @pytest.mark.unit
    def test_evaluate_matches_integration(self, params, tight_cfg):
        """Test dense output against an integration to the same time"""
        traj = integrate_to_time(PhasePoint(1.0, -3.0), 1.0, params, tight_cfg)
        ref = integrate_to_time(PhasePoint(1.0, -3.0), 0.4321, params, tight_cfg)
        assert traj.evaluate(0.4321).y == pytest.approx(ref.final_point.y, abs=1e-7)

    @pytest.mark.unit
    def test_evaluate_range(self, params):
        """Test that times outside the run are refused"""
        traj = integrate_to_time(PhasePoint(1.0, -3.0), 0.5, params)
        with pytest.raises(DomainError):
            traj.evaluate(0.6)
        assert traj.evaluate(0.5) == traj.final_point

    @pytest.mark.unit
    def test_requires_dense_output(self, params):
        """Test that interpolation needs dense_output"""
        cfg = IntegratorConfig(dense_output=False)
        traj = integrate_to_time(PhasePoint(1.0, -3.0), 0.5, params, cfg)
        with pytest.raises(ConfigurationError):
            traj.evaluate(0.25)


class TestEvents:
    """Test terminal events"""

    @pytest.mark.unit
    def test_stops_on_crossing(self, params, tight_cfg):
        """Test that the run ends on y = 0"""
        traj = integrate_to_event(PhasePoint(1.0, -10.0), 0.0, params, tight_cfg)
        assert abs(traj.final_point.y) < 1e-10
        assert traj.terminal_event is not None
        assert traj.terminal_event.time == traj.final_time
        assert 0.0 < traj.final_time < 1.0

    @pytest.mark.unit
    def test_no_crossing(self, params):
        """Test that a closed orbit never reaching the level raises NoCrossingError"""
        cfg = IntegratorConfig(max_steps=2000)
        with pytest.raises(NoCrossingError):
            integrate_to_event(PhasePoint(0.5, 0.0), 0.9, params, cfg)


@pytest.mark.timeout(60)
class TestQuadSingular:
    """Test quadrature with endpoint singularities"""

    @pytest.mark.unit
    def test_half_inverse_square_root(self):
        """Test integral_0^1 1/(2 sqrt(x)) dx = 1 in x-form on the machine kernel"""
        value = quad_singular(lambda x: 1 / (2 * math.sqrt(x)), 0.0, 1.0, LEFT)
        assert value == pytest.approx(1.0, abs=1e-13)

    @pytest.mark.unit
    def test_inverse_square_root(self):
        """Test integral of an inverse square root singularity at either end"""
        value = quad_singular(lambda x: 1 / math.sqrt(x), 0.0, 1.0, LEFT)
        assert value == pytest.approx(2.0, abs=1e-13)
        value = quad_singular(lambda d: 1 / math.sqrt(d), 0.0, 1.0, RIGHT, distance_form=True)
        assert value == pytest.approx(2.0, abs=1e-13)

    @pytest.mark.unit
    def test_distance_form(self):
        """Test that distance_form hands f the distance to the singular end"""
        value = quad_singular(lambda d: 1 / math.sqrt(d), -3.0, 0.0, LEFT, distance_form=True)
        assert value == pytest.approx(2 * math.sqrt(3.0), abs=1e-13)

    @pytest.mark.unit
    def test_against_erfi(self):
        """Test integral_0^1 e^x / sqrt(x) dx = sqrt(pi) erfi(1)"""
        expected = math.sqrt(math.pi) * special.erfi(1.0)
        value = quad_singular(lambda x: math.exp(x) / math.sqrt(x), 0.0, 1.0, LEFT)
        assert value == pytest.approx(expected, abs=1e-12)

    @pytest.mark.unit
    def test_extended(self, ext50):
        """Test a 50-digit singular integral"""
        value = quad_singular(lambda x: 1 / ext50.sqrt(x), 0, 1, LEFT, 1e-40, ext50)
        assert abs(value - 2) < ext50.mpf("1e-40")

    @pytest.mark.unit
    def test_smooth(self):
        """Test the no-singularity path"""
        assert quad_singular(lambda x: x * x, 0.0, 1.0, NONE) == pytest.approx(1 / 3, abs=1e-14)

    @pytest.mark.unit
    def test_bad_arguments(self):
        """Test interval and endpoint validation"""
        with pytest.raises(DomainError):
            quad_singular(lambda x: x, 1.0, 0.0)
        with pytest.raises(ConfigurationError):
            quad_singular(lambda x: x, 0.0, 1.0, "middle")

    @pytest.mark.unit
    def test_unreachable_tolerance(self):
        """Test that an error estimate above tol raises QuadratureError"""
        with pytest.raises(QuadratureError):
            quad_singular(lambda x: math.log(x) * math.sin(40 * x), 0.0, 1.0, NONE, tol=1e-300)


class TestTrajectoryCsv:
    """Test trajectory export"""

    @pytest.mark.unit
    def test_columns_and_metadata(self, params, temp_output_dir):
        """Test the t, y, z, C2 layout"""
        traj = integrate_to_time(PhasePoint(1.0, -3.0), 0.5, params)
        path = write_trajectory_csv(traj, temp_output_dir / "traj.csv", {"run": "unit"})
        meta, header, rows = read_csv(path)
        assert header == ["t", "y", "z", "C2"]
        assert len(rows) == len(traj)
        assert meta["epsilon"] == "0.1"
        assert meta["coordinates"] == CANONICAL
        assert meta["run"] == "unit"
        assert float(rows[-1][0]) == 0.5
