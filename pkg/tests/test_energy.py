import math

import numpy as np
import pytest
from scipy import integrate

from nlphase.energy import (BallWindow, BoxWindow, PERIOD, ConfigurationError,
                            WindowError, build_weights, rescale_field,
                            unit_pair_integral)
from nlphase.lattice import Direction, Field, build_domain
from nlphase.model import KernelSpec, PotentialSpec

CORE = 1.0 / 16.0


def oracle_unit_weight(s, d1, d2):
    """Adaptive cartesian quadrature of the unit-cell pair integral."""
    q = 2.0 + 2.0 * s
    touching = max(abs(d1), abs(d2)) <= 1
    core = CORE if (d1 == d2 == 0 or (touching and s >= 0.5)) else 0.0

    def f(z2, z1):
        r2 = z1 * z1 + z2 * z2
        if core and r2 < core * core:
            return 0.0
        return (r2 ** (-q / 2.0) * max(1 - abs(z1 - d1), 0.0)
                * max(1 - abs(z2 - d2), 0.0))

    val, _ = integrate.dblquad(f, d1 - 1, d1 + 1, d2 - 1, d2 + 1,
                               epsabs=1e-11, epsrel=1e-9)
    return val


def axis_setup(s=0.25, family="standard", M=4.0, h=0.25, B=2.0, tau=1.0,
               r_cut=2.0):
    kernel = KernelSpec(dim=2, s=s, tau=tau, family=family)
    domain = build_domain(tau, Direction((0, 1), tau), M=M, h=h, buffer=B)
    return kernel, domain, build_weights(kernel, domain, r_cut)


class TestPairWeights:
    @pytest.mark.filterwarnings("ignore::UserWarning")
    @pytest.mark.filterwarnings("ignore:.*roundoff.*")
    @pytest.mark.parametrize("s", [0.25, 0.75])
    def test_matches_adaptive_oracle(self, s):
        # includes touching offsets and the self pair
        offsets = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (3, 2), (5, 0)]
        for d1, d2 in offsets:
            mine = unit_pair_integral(2, s, d1, d2)
            ref = oracle_unit_weight(s, d1, d2)
            assert mine == pytest.approx(ref, rel=1e-3), (s, d1, d2)

    @pytest.mark.parametrize("s", [0.25, 0.75])
    def test_far_corrected_midpoint_accuracy(self, s):
        for d1, d2 in [(7, 0), (8, 3), (12, 5)]:
            q = 2 + 2 * s
            r = math.hypot(d1, d2)
            approx = r ** (-q) + (q * q / 12.0) * r ** (-q - 2)
            ref = oracle_unit_weight(s, d1, d2)
            assert approx == pytest.approx(ref, rel=2e-3)

    def test_scaling_in_h(self):
        # w(h) = h^(n-2s) * unit value
        k1, dom1, wt1 = axis_setup(h=0.25, r_cut=2.0)
        k2, dom2, wt2 = axis_setup(h=0.125, r_cut=1.0)
        w1 = wt1.pair_weight((0, 4), (0, 7))
        w2 = wt2.pair_weight((0, 4), (0, 7))
        assert w2 / w1 == pytest.approx(0.5 ** (2 - 0.5), rel=1e-12)

    def test_symmetry_exact(self):
        _, dom, wt = axis_setup(family="modulated", r_cut=1.5)
        rng = np.random.default_rng(0)
        for _ in range(100):
            i = (rng.integers(0, dom.n_p), rng.integers(0, dom.n_t))
            j = (rng.integers(0, dom.n_p), rng.integers(0, dom.n_t))
            m = int(rng.integers(-2, 3))
            try:
                wij = wt.pair_weight(i, j, m)
            except ConfigurationError:
                continue
            wji = wt.pair_weight(j, i, -m)
            assert wij == wji

    def test_shell_sum_matches_analytic(self):
        # weight sum over a shell vs h^n times the continuum shell integral
        # (the other cell-measure factor h^n sits inside each weight); the
        # shell must span many cells for the rim coverage error to drop
        s = 0.25
        _, dom, wt = axis_setup(s=s, M=8.0, h=0.0625, B=4.0, r_cut=6.5)
        K = wt.k_cells
        dp = np.arange(-K, K + 1)
        DP, DT = np.meshgrid(dp, dp, indexing="ij")
        R = np.hypot(DP, DT) * dom.h
        q = 2 + 2 * s
        for r_in in (2.0, 3.0):
            shell = (R >= r_in) & (R < 2 * r_in)
            total = wt.stencil[shell].sum()
            analytic = (dom.cell_volume * 2 * math.pi
                        * (r_in ** (2 - q) - (2 * r_in) ** (2 - q)) / (q - 2))
            assert total == pytest.approx(analytic, rel=0.02)

    def test_modulated_weight_against_refined_sum(self):
        kernel, dom, wt = axis_setup(family="modulated", h=0.125, r_cut=1.0)
        i, j = (1, 8), (2, 9)
        mine = wt.pair_weight(i, j)
        # refined quadrature: 16x16 subcells per cell, exact subpair envelope
        n_sub = 16
        hs = dom.h / n_sub
        ci = np.array([(i[0] + 0.5) * dom.h, dom.t_lo + (i[1] + 0.5) * dom.h])
        cj = np.array([(j[0] + 0.5) * dom.h, dom.t_lo + (j[1] + 0.5) * dom.h])
        offs = (np.arange(n_sub) - (n_sub - 1) / 2.0) * hs
        XX, YY = np.meshgrid(offs, offs, indexing="ij")
        subs_i = ci + np.stack([XX, YY], axis=-1).reshape(-1, 2)
        subs_j = cj + np.stack([XX, YY], axis=-1).reshape(-1, 2)
        total_a = total_1 = 0.0
        for a in subs_i:
            d = np.linalg.norm(subs_j - a, axis=1)
            ker = d ** (-kernel.exponent)
            amp = 1.0 + 0.25 * (kernel.modulation(a)
                                + kernel.modulation(subs_j))
            total_a += float(np.sum(amp * ker)) * hs ** 4
            total_1 += float(np.sum(ker)) * hs ** 4
        # compare the heterogeneity factor; the midpoint bias of the
        # refined sum near the touching corner cancels in the ratio
        std = KernelSpec(dim=2, s=kernel.s, tau=kernel.tau)
        wt_std = build_weights(std, dom, 1.0)
        ratio = mine / wt_std.pair_weight(i, j)
        assert ratio == pytest.approx(total_a / total_1, rel=1e-3)
        assert mine == pytest.approx(total_a, rel=0.02)

    def test_rcut_guards(self):
        kernel, dom, wt = axis_setup()
        with pytest.raises(ConfigurationError):
            build_weights(kernel, dom, 0.5)  # < 4h
        with pytest.raises(ConfigurationError):
            wt.pair_weight((0, 0), (0, dom.n_t - 1))  # beyond r_cut

    def test_tails_decrease_with_rcut(self):
        # strictly smaller once the cutoff bites (distance to the far plane
        # below r_cut), never larger otherwise
        kernel, dom, _ = axis_setup(M=4.0, h=0.25, B=2.0)
        wt1 = build_weights(kernel, dom, 4.5)
        wt2 = build_weights(kernel, dom, 6.0)
        for it in (0, dom.n_t // 2, dom.n_t - 1):
            t1 = wt1.tail_weights((0, it))
            t2 = wt2.tail_weights((0, it))
            tc = dom.t_lo + (it + 0.5) * dom.h
            d = (tc - dom.t_lo, dom.t_hi - tc)
            for side in (0, 1):
                assert t2[side] >= 0.0
                if d[side] < 4.5:
                    assert t1[side] > t2[side]
                else:
                    assert t1[side] >= t2[side]


def brute_window(wt, fld, window):
    """Direct pair enumeration of a window energy (small domains only)."""
    dom = wt.domain
    K = wt.k_cells
    n_p, n_t = dom.shape
    u = fld.values

    def val(ip, it):
        if it < 0:
            return fld.far_below
        if it >= n_t:
            return fld.far_above
        return u[ip % n_p, it]

    def in_win(ip, it):
        p = (ip + 0.5) * dom.h
        t = dom.t_lo + (it + 0.5) * dom.h
        return bool(window.contains(np.array(p), np.array(t)))

    kin_in = kin_cross = pot_cells = 0.0
    lo_p = -3 * n_p - K
    hi_p = 3 * n_p + K
    for ip in range(lo_p, hi_p):
        for it in range(-K, n_t + K):
            if not in_win(ip, it):
                continue
            for dp in range(-K, K + 1):
                for dt in range(-K, K + 1):
                    w = 0.0
                    if abs(dp) <= K and abs(dt) <= K:
                        try:
                            w = wt.offset_weight(((ip % n_p), it), dp, dt)
                        except ConfigurationError:
                            continue
                    if w == 0.0:
                        continue
                    diff2 = (val(ip, it) - val(ip + dp, it + dt)) ** 2
                    if in_win(ip + dp, it + dt):
                        kin_in += 0.5 * w * diff2
                    else:
                        kin_cross += w * diff2
            tp, tm = wt.tail_weights((ip % n_p, it)) if 0 <= it < n_t else (
                wt._tail_row(it))
            kin_cross += ((val(ip, it) - fld.far_below) ** 2 * tp
                          + (val(ip, it) - fld.far_above) ** 2 * tm)
    return kin_in, kin_cross


class TestWindowEnergies:
    def test_constant_field_zero(self):
        _, dom, wt = axis_setup()
        pot = PotentialSpec(family="quartic")
        rep = wt.window_report(Field.full(dom, 1.0, matching_far=True),
                               PERIOD, pot)
        assert rep.total == 0.0

    def test_zero_field_potential_volume(self):
        _, dom, wt = axis_setup(h=0.125, r_cut=1.0)
        pot = PotentialSpec(family="quartic")
        R = 1.5
        rep = wt.window_report(Field(dom, np.zeros(dom.shape)),
                               BallWindow((0.5, 2.0), R), pot)
        assert rep.potential == pytest.approx(math.pi * R * R, rel=0.02)

    def test_decomposition_identity(self):
        _, dom, wt = axis_setup(family="modulated")
        pot = PotentialSpec(family="cosine", Q_modulation=True)
        rng = np.random.default_rng(1)
        fld = Field(dom, rng.uniform(-1, 1, dom.shape))
        for window in (PERIOD, BallWindow((0.5, 2.0), 1.5),
                       BoxWindow(0.0, 1.0, 0.5, 3.5)):
            rep = wt.window_report(fld, window, pot)
            lhs = rep.kinetic_in + rep.kinetic_cross + rep.potential
            assert rep.total == pytest.approx(lhs, rel=1e-12)
            assert min(rep.kinetic_in, rep.kinetic_cross, rep.potential) >= 0

    @pytest.mark.parametrize("family,s,direction", [
        ("standard", 0.25, (0, 1)),
        ("modulated", 0.25, (0, 1)),
        ("standard", 0.75, (1, 1)),
        ("modulated", 0.6, (1, 1)),
    ])
    def test_window_matches_brute_force(self, family, s, direction):
        tau = 1.0
        d = Direction(direction, tau)
        L = tau * d.norm_p
        h = L / 4
        kernel = KernelSpec(dim=2, s=s, tau=tau, family=family)
        dom = build_domain(tau, d, M=2 * h * 2, h=h, buffer=2 * h)
        wt = build_weights(kernel, dom, 5 * h)
        rng = np.random.default_rng(2)
        fld = Field(dom, rng.uniform(-1, 1, dom.shape))
        window = BallWindow((0.4 * L, 0.7), 3.1 * h)
        rep = wt.window_report(fld, window)
        kin_in, kin_cross = brute_window(wt, fld, window)
        assert rep.kinetic_in == pytest.approx(kin_in, rel=1e-10)
        assert rep.kinetic_cross == pytest.approx(kin_cross, rel=1e-10)

    def test_period_two_paths_agree(self):
        _, dom, wt = axis_setup(family="modulated", M=4.0, h=0.25, B=2.0,
                                r_cut=2.0)
        pot = PotentialSpec(family="quartic", Q_modulation=True)
        t = dom.t_centers()
        fld = Field(dom, np.tile(np.tanh(2.0 - t), (dom.n_p, 1)))
        rep = wt.window_report(fld, PERIOD, pot)
        direct = _direct_period(wt, fld) + wt.potential_sum(fld, pot)
        assert rep.total == pytest.approx(direct, rel=1e-10)

    def test_additivity_of_distant_windows(self):
        _, dom, wt = axis_setup(M=8.0, h=0.25, B=2.0, r_cut=1.0)
        rng = np.random.default_rng(3)
        fld = Field(dom, rng.uniform(-1, 1, dom.shape))
        w1 = BallWindow((0.5, 0.5), 0.6)
        w2 = BallWindow((0.5, 7.5), 0.6)

        class Union:
            def contains(self, P, T):
                return w1.contains(P, T) | w2.contains(P, T)

            def bounds(self):
                return (-0.2, 1.2, -0.2, 8.2)

        rep1 = wt.window_report(fld, w1)
        rep2 = wt.window_report(fld, w2)
        rep12 = wt.window_report(fld, Union())
        assert rep12.kinetic_in == pytest.approx(
            rep1.kinetic_in + rep2.kinetic_in, rel=1e-10)

    def test_window_outside_region_rejected(self):
        _, dom, wt = axis_setup()
        with pytest.raises(WindowError):
            wt.window_report(Field.full(dom, 0.0),
                             BallWindow((0.5, dom.t_hi + 5.0), 1.0))

    def test_epsilon_scales_potential_only(self):
        _, dom, wt = axis_setup()
        pot = PotentialSpec(family="quartic")
        rng = np.random.default_rng(4)
        fld = Field(dom, rng.uniform(-1, 1, dom.shape))
        r1 = wt.window_report(fld, PERIOD, pot)
        r2 = wt.window_report(fld, PERIOD, pot, epsilon=0.5)
        assert r2.kinetic_in == r1.kinetic_in
        assert r2.potential == pytest.approx(
            r1.potential * 0.5 ** (-0.5), rel=1e-12)


def _direct_period(wt, fld):
    """Independent per-period kinetic summation (loops, small domains)."""
    dom = wt.domain
    K = wt.k_cells
    n_p, n_t = dom.shape
    u = fld.values

    def val(ip, it):
        if it < 0:
            return fld.far_below
        if it >= n_t:
            return fld.far_above
        return u[ip % n_p, it]

    acc = 0.0
    for ip in range(n_p):
        for it in range(n_t):
            tp, tm = wt.tail_weights((ip, it))
            acc += ((u[ip, it] - fld.far_below) ** 2 * tp
                    + (u[ip, it] - fld.far_above) ** 2 * tm)
            for dp in range(-K, K + 1):
                for dt in range(-K, K + 1):
                    try:
                        w = wt.offset_weight((ip, it), dp, dt)
                    except ConfigurationError:
                        continue
                    if w == 0.0:
                        continue
                    diff2 = (u[ip, it] - val(ip + dp, it + dt)) ** 2
                    jt = it + dt
                    acc += 0.5 * w * diff2 if 0 <= jt < n_t else w * diff2
    return acc


class TestOperatorAndGradient:
    def test_lk_constant_zero(self):
        _, dom, wt = axis_setup()
        lk = wt.apply_lk(Field.full(dom, 0.3, matching_far=True))
        # zero up to spectral round-off of the correlation path
        assert np.max(np.abs(lk)) < 1e-11

    def test_lk_odd_symmetry_center(self):
        # symmetric strip, profile odd about a cell center
        kernel = KernelSpec(dim=2, s=0.25)
        dom = build_domain(1.0, Direction((0, 1), 1.0), M=4.25, h=0.25,
                           buffer=2.0)
        wt = build_weights(kernel, dom, 2.0)
        t = dom.t_centers()
        t0 = 0.5 * (dom.t_lo + dom.t_hi)
        assert np.min(np.abs(t - t0)) < 1e-12  # center is a cell center
        fld = Field(dom, np.tile(np.tanh(t0 - t), (dom.n_p, 1)))
        ic = int(np.argmin(np.abs(t - t0)))
        assert abs(wt.apply_lk(fld, (0, ic))) < 1e-10

    def test_lk_matches_refined_quadrature(self):
        # u = cos(2 pi x1) along the period, +-1 far field, s = 0.25
        kernel = KernelSpec(dim=2, s=0.25)
        h = 1.0 / 32.0
        dom = build_domain(1.0, Direction((0, 1), 1.0), M=4.0, h=h, buffer=2.0)
        wt = build_weights(kernel, dom, 2.0)
        P, T = dom.frame_centers()
        fld = Field(dom, np.cos(2 * math.pi * P))
        probe = (3, dom.n_t // 2)
        mine = wt.apply_lk(fld, probe)

        # oracle: 4x refined midpoint summation of the same strip function
        # plus the analytic singular-core correction and far tails
        s = kernel.s
        hf = h / 4
        x0 = np.array([(probe[0] + 0.5) * h, dom.t_lo + (probe[1] + 0.5) * h])
        u0 = math.cos(2 * math.pi * x0[0])
        span = wt.r_cut
        g = np.arange(-span, span, hf) + hf / 2
        X, Y = np.meshgrid(x0[0] + g, x0[1] + g, indexing="ij")
        D = np.hypot(X - x0[0], Y - x0[1])
        UY = np.where(Y < dom.t_lo, 1.0,
                      np.where(Y >= dom.t_hi, -1.0, np.cos(2 * math.pi * X)))
        core = D < hf
        vals = np.where(core, 0.0, (u0 - UY) * D ** (-2 - 2 * s)) * hf * hf
        ring = D <= span
        oracle = float(vals[ring].sum())
        # singular core: (u0-u(y)) ~ -(1/4) lap(u)(x0) |z|^2 on average
        lap = -(2 * math.pi) ** 2 * u0
        oracle += -lap / 4.0 * 2 * math.pi * hf ** (2 - 2 * s) / (2 - 2 * s)
        tp, tm = wt.tail_weights(probe)
        oracle += ((u0 - 1.0) * tp + (u0 + 1.0) * tm) / dom.cell_volume
        assert mine == pytest.approx(oracle, rel=0.03)

    @pytest.mark.parametrize("family,pf,eps", [
        ("standard", "quartic", None),
        ("modulated", "power_d", None),
        ("standard", "cosine", 0.5),
        ("modulated", "cosine_sq", 0.25),
    ])
    def test_gradient_matches_finite_differences(self, family, pf, eps):
        _, dom, wt = axis_setup(family=family)
        pot = PotentialSpec(family=pf, Q_modulation=True)
        rng = np.random.default_rng(5)
        u = rng.uniform(-0.8, 0.8, dom.shape)
        fld = Field(dom, u)
        grad = wt.gradient(fld, pot, eps)
        step = 1e-6
        for _ in range(20):
            i = (int(rng.integers(0, dom.n_p)), int(rng.integers(0, dom.n_t)))
            up = u.copy()
            up[i] += step
            um = u.copy()
            um[i] -= step
            fd = (wt.period_value(Field(dom, up), pot, eps)
                  - wt.period_value(Field(dom, um), pot, eps)) / (2 * step)
            assert grad[i] == pytest.approx(fd, rel=1e-6)

    def test_gradient_zero_at_matching_well(self):
        _, dom, wt = axis_setup()
        pot = PotentialSpec(family="quartic")
        g = wt.gradient(Field.full(dom, 1.0, matching_far=True), pot)
        assert np.max(np.abs(g)) == 0.0

    def test_kinetic_response_linearity(self):
        _, dom, wt = axis_setup()
        rng = np.random.default_rng(6)
        u = rng.uniform(-0.5, 0.5, dom.shape)
        base = wt.gradient(Field(dom, u), potential=None)
        pert = np.zeros(dom.shape)
        pert[2, 10] = 0.01
        g1 = wt.gradient(Field(dom, u + pert), potential=None) - base
        g2 = wt.gradient(Field(dom, u + 2 * pert), potential=None) - base
        assert np.allclose(g2, 2 * g1, rtol=1e-9, atol=1e-14)


class TestRescale:
    def test_identity_at_one(self):
        _, dom, wt = axis_setup()
        rng = np.random.default_rng(7)
        fld = Field(dom, rng.uniform(-1, 1, dom.shape))
        out = rescale_field(fld, 1.0)
        assert out.domain == dom
        assert np.array_equal(out.values, fld.values)

    def test_geometry_scales(self):
        _, dom, _ = axis_setup()
        rng = np.random.default_rng(8)
        fld = Field(dom, rng.uniform(-1, 1, dom.shape))
        out = rescale_field(fld, 0.25)
        assert out.domain.h == pytest.approx(dom.h * 0.25)
        assert out.domain.M == pytest.approx(dom.M * 0.25)
        assert out.domain.tau == pytest.approx(dom.tau * 0.25)
        assert np.array_equal(out.values, fld.values)

    def test_band_scales_exactly(self):
        from nlphase.geometry import interface_width
        _, dom, _ = axis_setup()
        t = dom.t_centers()
        fld = Field(dom, np.tile(np.tanh(2.0 - t), (dom.n_p, 1)))
        w0 = interface_width(fld, 0.9)
        w1 = interface_width(rescale_field(fld, 0.5), 0.9)
        assert w1 == pytest.approx(0.5 * w0, rel=1e-12)

    def test_out_of_range(self):
        _, dom, _ = axis_setup()
        fld = Field.full(dom, 0.0)
        with pytest.raises(ValueError):
            rescale_field(fld, 1.5)


class TestOneDimensional:
    def test_unit_integrals_match_quad(self):
        for s in (0.25, 0.6):
            for d in (0, 1, 2, 4):
                core = CORE if (d == 0 or (d <= 1 and s >= 0.5)) else 0.0
                q = 1 + 2 * s

                def f(z):
                    if core and abs(z) < core:
                        return 0.0
                    return abs(z) ** (-q) * max(1 - abs(z - d), 0.0)

                ref, _ = integrate.quad(f, d - 1, d + 1, points=[d],
                                        limit=200)
                assert unit_pair_integral(1, s, d) == pytest.approx(
                    ref, rel=1e-8)

    def test_line_energy_runs(self):
        kernel = KernelSpec(dim=1, s=0.25, tau=1.0)
        dom = build_domain(1.0, Direction((1,), 1.0), M=4.0, h=0.25,
                           buffer=2.0)
        wt = build_weights(kernel, dom, 2.0)
        pot = PotentialSpec(family="quartic")
        t = dom.t_centers()
        fld = Field(dom, np.tanh(2.0 - t)[None, :])
        rep = wt.window_report(fld, PERIOD, pot)
        assert rep.total > 0 and rep.kinetic_in > 0
        g = wt.gradient(fld, pot)
        step = 1e-6
        up = fld.values.copy()
        up[0, 8] += step
        um = fld.values.copy()
        um[0, 8] -= step
        fd = (wt.period_value(Field(dom, up), pot)
              - wt.period_value(Field(dom, um), pot)) / (2 * step)
        assert g[0, 8] == pytest.approx(fd, rel=1e-6)
