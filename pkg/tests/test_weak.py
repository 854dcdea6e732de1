import math

import numpy as np
import pytest

from shelab.drift import ConstantDrift, SineDrift, ZeroDrift, mollify
from shelab.grids import DomainKind, DomainSetup, Grid1D, TimeGrid
from shelab.kernels import SemigroupOperator, apply_semigroup
from shelab.noise import coarsen_noise, sample_noise, simulate_convolution
from shelab.solver import SchemeKind, SchemeSpec, scheme_for, simulate_path
from shelab.weak import (CosineNeumann, DriftFunctional, GaussianBump,
                         HermiteWholeLine, TrigPeriodic, default_test_family,
                         fit_seminorm_domination, pair, reconstruct_R,
                         reflected_bump, riemann_nonlinear_integral,
                         schwartz_seminorm, weak_residual,
                         weak_residual_report)


@pytest.fixture(scope="module")
def grid():
    return Grid1D(DomainSetup(DomainKind.PERIODIC_UNIT), 64)


@pytest.fixture(scope="module")
def tg():
    return TimeGrid(64, 1.0)


@pytest.fixture(scope="module")
def conv(grid, tg):
    return simulate_convolution(sample_noise(grid, tg, 6174, 0))


@pytest.fixture(scope="module")
def sin_path(grid, tg, conv):
    scheme = scheme_for(SchemeKind.SPLITTING_EXACT, SineDrift(), grid, tg)
    return simulate_path(scheme, conv, 0.0)


class TestPair:
    def test_unit_product(self, grid):
        assert pair(np.ones(grid.npts), TrigPeriodic(0, "cos"), grid) == \
            pytest.approx(1.0, abs=1e-14)

    def test_orthogonality(self, grid):
        f = np.sin(2 * np.pi * grid.coords)
        assert abs(pair(f, TrigPeriodic(1, "cos"), grid)) < 1e-12

    def test_sin_squared(self, grid):
        f = np.sin(2 * np.pi * grid.coords)
        assert pair(f, TrigPeriodic(1, "sin"), grid) == pytest.approx(0.5,
                                                                      abs=1e-12)

    def test_bilinear(self, grid, rng):
        f = rng.standard_normal(grid.npts)
        g = rng.standard_normal(grid.npts)
        phi = TrigPeriodic(2, "cos")
        lhs = pair(2.5 * f + g, phi, grid)
        rhs = 2.5 * pair(f, phi, grid) + pair(g, phi, grid)
        assert abs(lhs - rhs) < 1e-12


class TestTestFunctions:
    def test_trig_derivative_cycle(self):
        phi = TrigPeriodic(3, "sin")
        x = np.linspace(0, 1, 11)
        w = 2 * np.pi * 3
        assert np.abs(phi.derivative(x, 1) - w * np.cos(w * x)).max() < 1e-12
        assert np.abs(phi.laplacian(x) + w * w * np.sin(w * x)).max() < 1e-9

    def test_cosine_neumann_boundary_condition(self):
        for k in (1, 4, 9):
            phi = CosineNeumann(k)
            assert abs(phi.derivative(np.array([0.0]))[0]) < 1e-12
            assert abs(phi.derivative(np.array([1.0]))[0]) < 1e-9

    def test_hermite_orthonormal(self):
        x = np.linspace(-12, 12, 6001)
        h2, h7 = HermiteWholeLine(2), HermiteWholeLine(7)
        trapezoid = getattr(np, "trapezoid", np.trapz)
        assert trapezoid(h2(x) ** 2, x) == pytest.approx(1.0, abs=1e-10)
        assert abs(trapezoid(h2(x) * h7(x), x)) < 1e-10

    def test_hermite_oscillator_identity(self):
        # h_k'' = (x^2 - (2k+1)) h_k
        x = np.linspace(-6, 6, 101)
        for k in (0, 3, 8):
            h = HermiteWholeLine(k)
            lhs = h.derivative(x, 2)
            rhs = (x**2 - (2 * k + 1)) * h(x)
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_hermite_decay(self):
        h = HermiteWholeLine(12)
        assert abs(h(np.array([9.0]))[0]) < 1e-7

    def test_bump_derivatives_match_finite_differences(self):
        phi = GaussianBump(0.4, 0.1)
        x = np.linspace(0.1, 0.7, 13)
        eps = 1e-6
        fd = (phi(x + eps) - phi(x - eps)) / (2 * eps)
        assert np.abs(phi.derivative(x, 1) - fd).max() < 1e-5

    def test_reflected_bump_neumann_ends(self):
        phi = reflected_bump(0.3, 0.08, DomainKind.NEUMANN_UNIT)
        assert abs(phi.derivative(np.array([0.0]))[0]) < 1e-14
        assert abs(phi.derivative(np.array([1.0]))[0]) < 1e-14

    def test_default_families_sized(self):
        for kind in DomainKind:
            fam = default_test_family(kind, 16)
            assert len(fam) == 16


class TestSeminorm:
    def test_constant_m0(self):
        # weight (1+|x|^0)^2 = 4 on the unit interval
        val = schwartz_seminorm(TrigPeriodic(0, "cos"), 0).value
        assert val == pytest.approx(4.0, rel=1e-12)

    def test_zero_function(self):
        assert schwartz_seminorm(TrigPeriodic(1, "sin"), 3).value > 0
        zero = GaussianBump(0.5, 0.1)

        class Zero(GaussianBump):
            def derivative(self, x, order=1):
                return np.zeros_like(np.asarray(x, dtype=float))

        assert schwartz_seminorm(Zero(0.5, 0.1), 4).value == 0.0

    def test_nondecreasing_in_m(self):
        phi = GaussianBump(0.5, 0.1)
        vals = [schwartz_seminorm(phi, m).value for m in range(5)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_order_guard(self):
        with pytest.raises(ValueError):
            schwartz_seminorm(TrigPeriodic(1), 9)


class TestWeakResidual:
    def test_zero_at_time_zero(self, sin_path):
        phi = TrigPeriodic(1, "sin")
        assert weak_residual(sin_path, sin_path.scheme.drift_eval, phi, 0.0) == 0.0

    def test_linear_case_refines(self):
        fine = sample_noise(Grid1D(DomainSetup(DomainKind.PERIODIC_UNIT), 128),
                            TimeGrid(128, 1.0), 9, 2)
        phi = TrigPeriodic(1, "sin")
        res = []
        for factor in (4, 2, 1):
            nz = coarsen_noise(fine, factor, factor) if factor > 1 else fine
            path = simulate_path(
                SchemeSpec(SchemeKind.SPLITTING_EXACT, mollify(ZeroDrift(), 8)),
                simulate_convolution(nz), 0.0)
            res.append(abs(weak_residual(path, None, phi, 1.0)))
        assert all(a / b >= 1.3 for a, b in zip(res, res[1:])), res

    def test_sin_drift_residual_comparable_to_linear(self, grid, tg):
        nz = sample_noise(grid, tg, 12, 0)
        conv = simulate_convolution(nz)
        phi = TrigPeriodic(1, "sin")
        p0 = simulate_path(SchemeSpec(SchemeKind.SPLITTING_EXACT,
                                      mollify(ZeroDrift(), 8)), conv, 0.0)
        r0 = abs(weak_residual(p0, None, phi, 1.0))
        scheme = scheme_for(SchemeKind.SPLITTING_EXACT, SineDrift(), grid, tg)
        ps = simulate_path(scheme, conv, 0.0)
        rs = abs(weak_residual(ps, scheme.drift_eval, phi, 1.0))
        assert rs < 10 * r0

    def test_report_records(self, sin_path):
        rep = weak_residual_report(sin_path, sin_path.scheme.drift_eval,
                                   TrigPeriodic(1, "sin"))
        recs = list(rep.to_records())
        assert recs[0]["t"] == 0.0 and recs[0]["residual"] == 0.0
        assert {"phi", "t", "residual", "drift_term"} <= set(recs[0])


class TestRiemannIntegral:
    def test_linear_functional_telescopes(self):
        H = lambda tau, phi: 3.0 * tau
        val = riemann_nonlinear_integral(H, lambda s: None, 0.7, 64)
        assert val == pytest.approx(math.floor(64 * 0.7) / 64 * 3.0, abs=1e-12)

    def test_time_independent_test_function_telescopes_exactly(self, sin_path):
        H = DriftFunctional(sin_path, sin_path.scheme.drift_eval)
        phi = TrigPeriodic(2, "cos")
        val = riemann_nonlinear_integral(H, lambda s: phi, 1.0, 64)
        assert val == pytest.approx(H(1.0, phi), abs=1e-14)

    def test_converges_to_double_quadrature(self, sin_path, grid):
        # f_s = P_{t-s} phi: the sum approximates the direct double integral
        t = 1.0
        phi = TrigPeriodic(1, "sin")
        phivals = phi(grid.coords)
        H = DriftFunctional(sin_path, sin_path.scheme.drift_eval)
        f = lambda s: apply_semigroup(SemigroupOperator(grid, t - s), phivals)
        approx = riemann_nonlinear_integral(H, f, t, 64)
        dt = sin_path.tgrid.dt
        direct = sum(
            float(H.fields[m] @ (f(m * dt) * grid.weights)) * dt
            for m in range(64))
        assert approx == pytest.approx(direct, abs=1e-12)

    def test_level_must_divide_grid(self, sin_path):
        H = DriftFunctional(sin_path, sin_path.scheme.drift_eval)
        with pytest.raises(ValueError):
            riemann_nonlinear_integral(H, lambda s: TrigPeriodic(1), 1.0, 48)


class TestReconstruction:
    def test_zero_drift_reconstructs_zero(self, conv, grid):
        path = simulate_path(SchemeSpec(SchemeKind.SPLITTING_EXACT,
                                        mollify(ZeroDrift(), 8)), conv, 0.0)
        H = DriftFunctional(path, path.scheme.drift_eval)
        rep = reconstruct_R(H, 1.0, grid.coords[5], [8 / 64, 4 / 64, 2 / 64])
        assert rep.extrapolated == pytest.approx(0.0, abs=1e-13)
        assert all(v == 0.0 for v in rep.values)

    def test_constant_drift_exact_after_extrapolation(self, conv, grid):
        drift = mollify(ConstantDrift(value=1.3), 64)
        path = simulate_path(SchemeSpec(SchemeKind.SPLITTING_EXACT, drift),
                             conv, 0.0)
        H = DriftFunctional(path, drift)
        rep = reconstruct_R(H, 1.0, grid.coords[40],
                            [16 / 64, 8 / 64, 4 / 64, 2 / 64])
        assert rep.extrapolated == pytest.approx(1.3, abs=1e-6)
        assert rep.cauchy_ok

    def test_sin_drift_matches_solver_k(self, sin_path, grid):
        # coarse-grid variant; the 5e-3 acceptance tolerance applies at 256^2
        H = DriftFunctional(sin_path, sin_path.scheme.drift_eval)
        x = grid.coords[17]
        rep = reconstruct_R(H, 1.0, x, [16 / 64, 8 / 64, 4 / 64, 2 / 64])
        assert abs(rep.extrapolated - sin_path.K[-1, 17]) < 3e-2
        assert rep.agreement is not None and rep.agreement < 3e-2

    def test_cutoff_floor(self, sin_path, grid):
        H = DriftFunctional(sin_path, sin_path.scheme.drift_eval)
        with pytest.raises(ValueError):
            reconstruct_R(H, 1.0, grid.coords[0], [4 / 64, 2 / 64, 1 / 64])


class TestTimeDependentIdentity:
    def test_backward_heat_probes_reduce_to_semigroup_identity(self, sin_path,
                                                               grid):
        # with f_s = P_{t-s} phi the time-dependent residual collapses onto
        # the mild-type pairing identity: both must agree within quadrature
        t = 1.0
        phi = TrigPeriodic(1, "sin")
        phivals = phi(grid.coords)
        w = grid.weights
        H = DriftFunctional(sin_path, sin_path.scheme.drift_eval)
        f = lambda s: apply_semigroup(SemigroupOperator(grid, t - s), phivals)
        nonlinear = riemann_nonlinear_integral(H, f, t, 64)
        # stochastic term: fresh noise of each step paired with the
        # backward-propagated probe (exact in the shared mode basis)
        dt = sin_path.tgrid.dt
        stoch = sum(
            float(sin_path.conv.increment_fields[m] @ (f((m + 1) * dt) * w))
            for m in range(64))
        lhs = float(sin_path.u[-1] @ (phivals * w))
        pu0 = apply_semigroup(SemigroupOperator(grid, t), sin_path.u0)
        rhs = float(pu0 @ (phivals * w)) + nonlinear + stoch
        assert abs(lhs - rhs) < 5e-3

    def test_seminorm_domination_fit(self, sin_path):
        family = default_test_family(DomainKind.PERIODIC_UNIT, 16)
        fit = fit_seminorm_domination(sin_path, family)
        assert fit.valid
        assert fit.m <= 8
        assert fit.max_ratio <= 1.0


class TestResidualSerialization:
    def test_ndjson_one_record_per_phi_t(self, sin_path, tmp_path):
        import json

        from shelab.weak import write_residual_reports

        reps = [weak_residual_report(sin_path, sin_path.scheme.drift_eval, phi)
                for phi in (TrigPeriodic(1, "sin"), TrigPeriodic(2, "cos"))]
        out = tmp_path / "residuals.ndjson"
        write_residual_reports(reps, out)
        lines = out.read_text().splitlines()
        assert len(lines) == sum(len(r.times) for r in reps)
        rec = json.loads(lines[0])
        assert {"phi", "t", "residual", "drift_term"} <= set(rec)
