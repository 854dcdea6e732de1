import math

import numpy as np
import pytest

from shelab.grids import DomainKind, DomainSetup, Grid1D, TimeGrid
from shelab.kernels import spectral_eigenvalues
from shelab.noise import (SnappedTimeWarning, coarsen_noise,
                          convolution_increment_residual, pair_with_test,
                          read_array_dump, sample_noise, simulate_convolution,
                          write_array_dump)

ONE_OVER_SQRT_PI = 0.5641895835477563


def _var_se(sample_var: float, n: int) -> float:
    return sample_var * math.sqrt(2.0 / max(n - 1, 1))


class TestSampling:
    def test_bit_exact_replay(self, periodic_grid, tgrid):
        a = sample_noise(periodic_grid, tgrid, 99, 7)
        b = sample_noise(periodic_grid, tgrid, 99, 7)
        assert np.array_equal(a.increments, b.increments)

    def test_distinct_indices_differ(self, periodic_grid, tgrid):
        a = sample_noise(periodic_grid, tgrid, 99, 7)
        b = sample_noise(periodic_grid, tgrid, 99, 8)
        assert not np.array_equal(a.increments, b.increments)

    def test_cell_variance(self, periodic_grid, tgrid):
        # white-noise covariance with indicator test functions: each cell
        # increment has variance dt*dx
        incr = np.concatenate([
            sample_noise(periodic_grid, tgrid, 5, i).increments.ravel()
            for i in range(30)])
        target = tgrid.dt * periodic_grid.dx
        assert abs(incr.var() - target) < 3 * _var_se(target, incr.size)

    def test_coarsening_variance(self, periodic_grid, tgrid):
        coarse = coarsen_noise(sample_noise(periodic_grid, tgrid, 5, 0), 2, 2)
        assert coarse.grid.n_space == periodic_grid.n_space // 2
        samples = np.concatenate([
            coarsen_noise(sample_noise(periodic_grid, tgrid, 5, i), 2, 2)
            .increments.ravel() for i in range(30)])
        target = coarse.tgrid.dt * coarse.grid.dx
        assert abs(samples.var() - target) < 3 * _var_se(target, samples.size)


class TestPairing:
    def test_zero_test_function(self, periodic_grid, tgrid):
        nz = sample_noise(periodic_grid, tgrid, 3, 0)
        assert pair_with_test(nz, lambda x: 0.0 * x, 1.0) == 0.0

    def test_martingale_variance(self, periodic_grid, tgrid):
        phi = lambda x: math.sqrt(2.0) * np.sin(2 * np.pi * x)  # ||phi||_2 = 1
        vals = np.array([pair_with_test(sample_noise(periodic_grid, tgrid, 3, i),
                                        phi, 1.0) for i in range(800)])
        assert abs(vals.var() - 1.0) < 3 * _var_se(1.0, vals.size)

    def test_half_time_variance(self, periodic_grid, tgrid):
        phi = lambda x: math.sqrt(2.0) * np.sin(2 * np.pi * x)
        vals = np.array([pair_with_test(sample_noise(periodic_grid, tgrid, 31, i),
                                        phi, 0.5) for i in range(800)])
        assert abs(vals.var() - 0.5) < 3 * _var_se(0.5, vals.size)

    def test_orthogonal_functions_uncorrelated(self, periodic_grid, tgrid):
        phi = lambda x: math.sqrt(2.0) * np.sin(2 * np.pi * x)
        psi = lambda x: math.sqrt(2.0) * np.cos(2 * np.pi * x)
        pairs = np.array([
            (pair_with_test(nz, phi, 1.0), pair_with_test(nz, psi, 1.0))
            for nz in (sample_noise(periodic_grid, tgrid, 8, i)
                       for i in range(800))])
        cov = np.cov(pairs.T)[0, 1]
        assert abs(cov) < 3.0 / math.sqrt(pairs.shape[0])

    def test_snapping_warns(self, periodic_grid, tgrid):
        nz = sample_noise(periodic_grid, tgrid, 3, 0)
        with pytest.warns(SnappedTimeWarning):
            pair_with_test(nz, lambda x: x, 0.503)


class TestConvolution:
    def test_starts_at_zero(self, periodic_conv):
        assert np.abs(periodic_conv.values[0]).max() == 0.0

    def test_variance_matches_rho_periodic(self, periodic_grid, tgrid):
        finals = np.array([
            simulate_convolution(sample_noise(periodic_grid, tgrid, 11, i))
            .values[-1] for i in range(600)])
        rho = simulate_convolution(
            sample_noise(periodic_grid, tgrid, 11, 0)).rho[-1, 0]
        emp = finals.var(axis=0).mean()
        # columns are correlated: use the conservative single-column SE
        assert abs(emp - rho) < 3 * _var_se(rho, finals.shape[0])

    def test_rho_against_mode_sum_oracle(self, periodic_conv):
        lam = spectral_eigenvalues(periodic_conv.grid)[1:]
        t = periodic_conv.tgrid.horizon
        oracle = t + np.sum(2.0 * -np.expm1(-2 * lam * t) / (2 * lam))
        # rfft modes cover k <= n/2; the Nyquist mode enters with weight 1
        oracle -= -np.expm1(-2 * lam[-1] * t) / (2 * lam[-1])
        assert periodic_conv.rho[-1, 0] == pytest.approx(oracle, rel=1e-12)

    def test_whole_line_variance_law(self, line_grid):
        tg = TimeGrid(64, 1.0)
        finals = np.array([
            simulate_convolution(sample_noise(line_grid, tg, 17, i)).values[-1]
            for i in range(400)])
        emp = finals.var(axis=0)[line_grid.window_mask].mean()
        assert abs(emp - ONE_OVER_SQRT_PI) < 3 * _var_se(ONE_OVER_SQRT_PI, 400)

    def test_neumann_variance_boundary_doubling(self, neumann_grid):
        tg = TimeGrid(64, 1.0)
        conv = simulate_convolution(sample_noise(neumann_grid, tg, 2, 0))
        rho = conv.rho[-1]
        interior = rho[neumann_grid.n_space // 2]
        # reflected images double the boundary variance of the bounded part
        assert rho[0] > 1.2 * interior

    def test_mode_lag1_autocorrelation(self, periodic_grid, tgrid):
        from shelab.noise import _mode_increments, _ou_coefficients
        from shelab._backend import ou_scan

        decay, gain = _ou_coefficients(periodic_grid, tgrid)
        k = 4
        num = den = 0.0
        for i in range(400):
            z = _mode_increments(sample_noise(periodic_grid, tgrid, 77, i))
            modes = np.zeros((tgrid.n_time + 1, z.shape[1]), dtype=z.dtype)
            ou_scan(decay, gain, z, modes)
            vk = modes[:, k]
            num += float(np.real(np.vdot(vk[:-1], vk[1:])))
            den += float(np.real(np.vdot(vk[:-1], vk[:-1])))
        se = 1.0 / math.sqrt(400 * tgrid.n_time)
        assert abs(num / den - decay[k]) < 3 * se

    def test_increment_residual_zero_at_equal_times(self, periodic_conv):
        res = convolution_increment_residual(periodic_conv, 0.5, 0.5)
        assert np.abs(res).max() == 0.0

    def test_increment_residual_from_zero_is_v(self, periodic_conv):
        res = convolution_increment_residual(periodic_conv, 0.0, 1.0)
        assert np.abs(res - periodic_conv.values[-1]).max() < 1e-12

    def test_increment_residual_independent_of_past(self, periodic_grid, tgrid):
        # correlation with an increment strictly before s vanishes in law
        vals = []
        for i in range(600):
            nz = sample_noise(periodic_grid, tgrid, 23, i)
            conv = simulate_convolution(nz)
            res = convolution_increment_residual(conv, 0.5, 1.0)
            vals.append((res[0], nz.increments[:16].sum()))
        vals = np.array(vals)
        corr = np.corrcoef(vals.T)[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(vals.shape[0])

    def test_order_error(self, periodic_conv):
        with pytest.raises(ValueError):
            convolution_increment_residual(periodic_conv, 0.75, 0.5)

    def test_euler_coupling_consistency(self):
        # exact spectral V vs Euler convolution of the same increments, under
        # time refinement at fixed spatial grid
        from shelab.kernels import (Representation, SemigroupOperator,
                                    apply_semigroup)

        # keep the full spatial band out of the stiff regime at the finest dt
        grid = Grid1D(DomainSetup(DomainKind.PERIODIC_UNIT), 16)
        fine = sample_noise(grid, TimeGrid(4096, 1.0), 4, 0)
        diffs = []
        for factor in (8, 4, 2, 1):
            nz = coarsen_noise(fine, factor, 1) if factor > 1 else fine
            conv = simulate_convolution(nz)
            op = SemigroupOperator(grid, nz.tgrid.dt, Representation.SPECTRAL)
            euler = np.zeros(grid.npts)
            for m in range(nz.tgrid.n_time):
                euler = apply_semigroup(op, euler + nz.increments[m] / grid.dx)
            diffs.append(np.abs(euler - conv.values[-1]).max())
        ratios = [a / b for a, b in zip(diffs, diffs[1:])]
        assert all(r >= 1.3 for r in ratios), (diffs, ratios)


class TestDump:
    def test_round_trip(self, tmp_path, periodic_grid, tgrid):
        nz = sample_noise(periodic_grid, tgrid, 1, 0)
        path = tmp_path / "w.bin"
        write_array_dump(path, nz.increments)
        back = read_array_dump(path)
        assert np.array_equal(back, nz.increments)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "a.bin"
        write_array_dump(path, np.arange(6.0).reshape(2, 3))
        raw = path.read_bytes()
        assert int.from_bytes(raw[:8], "little") == 2
        assert int.from_bytes(raw[8:16], "little") == 3
        assert len(raw) == 16 + 6 * 8
        assert np.frombuffer(raw[16:], dtype="<f8").tolist() == \
            [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]


class TestCovarianceIdentity:
    def test_spatial_covariance_against_kernel_quadrature(self, periodic_grid,
                                                          tgrid):
        # independent oracle: Cov(V_t(x), V_t(y)) = int_0^t p_{2s}(x, y) ds
        # (Chapman-Kolmogorov plus kernel symmetry), by adaptive quadrature
        from scipy import integrate

        from shelab.kernels import periodic_kernel

        ix, iy = 10, 20
        x, y = periodic_grid.coords[ix], periodic_grid.coords[iy]
        oracle, _ = integrate.quad(lambda s: periodic_kernel(2 * s, x, y),
                                   0, 1, limit=200)
        vals = np.array([
            simulate_convolution(sample_noise(periodic_grid, tgrid, 99, i))
            .values[-1] for i in range(800)])
        emp = float(np.cov(vals[:, ix], vals[:, iy])[0, 1])
        assert abs(emp - oracle) < 3 * 1.5 / math.sqrt(800)

    def test_v_increment_regularity_exponents(self, periodic_grid, tgrid):
        # L2(Omega) moduli: ~h^{1/4} in time and ~d^{1/2} in space
        from shelab.diagnostics import fit_exponent

        tlags, slags = [1, 2, 4, 8, 16], [1, 2, 4, 8, 16]
        tacc = np.zeros(len(tlags))
        sacc = np.zeros(len(slags))
        n_r = 300
        for i in range(n_r):
            v = simulate_convolution(
                sample_noise(periodic_grid, tgrid, 7, i)).values
            for j, L in enumerate(tlags):
                tacc[j] += np.mean((v[L:] - v[:-L]) ** 2)
            last = v[-1]
            for j, L in enumerate(slags):
                sacc[j] += np.mean((np.roll(last, -L) - last) ** 2)
        tfit = fit_exponent(zip([L * tgrid.dt for L in tlags],
                                np.sqrt(tacc / n_r)))
        sfit = fit_exponent(zip([L * periodic_grid.dx for L in slags],
                                np.sqrt(sacc / n_r)))
        assert abs(tfit.exponent - 0.25) < 0.05
        assert abs(sfit.exponent - 0.50) < 0.05
