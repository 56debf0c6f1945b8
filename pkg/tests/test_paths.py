import math

import numpy as np
import pytest

from levyforge.levy_model import LevyTriplet, is_martingale
from levyforge.paths import (
    PathSet,
    TimeGrid,
    compensate,
    first_jump_node,
    jump_count,
    simulate_bm_drift,
    simulate_compound_poisson,
    simulate_jump_diffusion,
    simulate_levy,
    simulate_poisson,
)
from levyforge.randomness import Dirac, Gaussian, Uniform


def mean_se(x):
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


def var_se(x):
    # delta-method SE of the sample variance
    c = x - x.mean()
    return c.var(ddof=1), np.std(c * c, ddof=1) / math.sqrt(x.size)


class TestTimeGrid:
    def test_nodes(self):
        g = TimeGrid(1.0, 0.01)
        assert g.n_steps == 100 and len(g) == 101
        assert g.times[0] == 0.0 and g.times[-1] == 1.0

    def test_last_node_exact_for_awkward_dt(self):
        g = TimeGrid(50.0, 2.5e-3)
        assert g.times[-1] == 50.0 and g.n_steps == 20_000

    @pytest.mark.parametrize("T, dt", [(1.0, 0.3), (0.0, 0.1), (1.0, -0.1), (1.0, math.inf)])
    def test_rejects_bad_grid(self, T, dt):
        with pytest.raises(ValueError):
            TimeGrid(T, dt)

    def test_node_lookup(self):
        g = TimeGrid(2.0, 0.01)
        assert g.node(1.0) == 100
        with pytest.raises(ValueError):
            g.node(0.005)
        with pytest.raises(ValueError):
            g.node(3.0)

    def test_coarsen(self):
        g = TimeGrid(1.0, 0.0025)
        assert g.coarsen(4).n_steps == 100
        with pytest.raises(ValueError):
            g.coarsen(3)

    def test_times_are_read_only(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0.1).times[0] = 1.0


class TestBrownian:
    def test_zero_coefficients(self):
        ps = simulate_bm_drift(TimeGrid(1.0, 0.1), 5, 0.0, 0.0)
        assert np.all(ps.values == 0)

    def test_moments_at_fifty(self):
        ps = simulate_bm_drift(TimeGrid(50.0, 0.5), 10_000, 1.0, 2.0, seed=3)
        x = ps.at(50.0)
        m, se = mean_se(x)
        assert abs(m - 50) <= 3 * se
        v, vse = var_se(x)
        assert abs(v - 200) <= 3 * vse

    def test_single_step_increment(self):
        dt = 0.01
        inc = simulate_bm_drift(TimeGrid(dt, dt), 20_000, 0.5, 1.5, seed=4).values[:, 1]
        m, se = mean_se(inc)
        assert abs(m - 0.5 * dt) <= 3 * se
        v, vse = var_se(inc)
        assert abs(v - 2.25 * dt) <= 3 * vse

    def test_no_jumps_and_start_at_zero(self):
        ps = simulate_bm_drift(TimeGrid(1.0, 0.1), 3, 1.0, 1.0)
        assert all(len(j) == 0 for j in ps.jump_times)
        assert np.all(ps.values[:, 0] == 0)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            simulate_bm_drift(TimeGrid(1.0, 0.1), 3, 0.0, -1.0)


class TestPoisson:
    def test_zero_rate(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.1), 10, 0.0)
        assert np.all(ps.values == 0) and all(len(j) == 0 for j in ps.jump_times)

    def test_empty_probability(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.01), 100_000, 1.0, seed=5)
        p = math.exp(-1)
        freq = np.mean(ps.at(1.0) == 0)
        assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / 100_000)

    def test_interarrival_mean(self):
        # only the first few gaps: gaps completed before T are biased short,
        # but P(fewer than 5 events by T = 50) is negligible
        ps = simulate_poisson(TimeGrid(50.0, 0.5), 2_000, 1.0, seed=6)
        gaps = np.concatenate([np.diff(np.concatenate(([0.0], t[:5]))) for t in ps.jump_times])
        assert gaps.size == 10_000
        m, se = mean_se(gaps)
        assert abs(m - 1.0) <= 3 * se

    def test_values_count_events(self):
        ps = simulate_poisson(TimeGrid(5.0, 0.05), 50, 2.0, seed=7)
        for p in ps:
            counts = np.searchsorted(p.jump_times, p.grid.times, side="right")
            assert np.array_equal(p.values, counts)
            assert np.all(np.diff(p.jump_times) > 0)
            assert np.all((p.jump_times > 0) & (p.jump_times <= 5.0))

    def test_jump_count_mean(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.1), 100_000, 1.0, seed=8)
        c = np.array([len(t) for t in ps.jump_times], dtype=float)
        m, se = mean_se(c)
        assert abs(m - 1) <= 3 * se

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            simulate_poisson(TimeGrid(1.0, 0.1), 1, -1.0)


class TestCompoundPoisson:
    def test_dirac_one_equals_poisson(self):
        g = TimeGrid(3.0, 0.01)
        a = simulate_compound_poisson(g, 100, 2.0, Dirac(1.0), seed=9)
        b = simulate_poisson(g, 100, 2.0, seed=9)
        assert np.array_equal(a.values, b.values)

    def test_gaussian_jump_moments(self):
        ps = simulate_compound_poisson(TimeGrid(1.0, 0.01), 40_000, 1.0, Gaussian(2.0), seed=10)
        x = ps.at(1.0)
        m, se = mean_se(x)
        assert abs(m) <= 3 * se
        m2, se2 = mean_se(x * x)
        assert abs(m2 - 4.0) <= 3 * se2

    def test_uniform_jump_second_moment(self):
        ps = simulate_compound_poisson(TimeGrid(1.0, 0.01), 20_000, 10.0, Uniform(-1, 1), seed=11)
        m2, se2 = mean_se(ps.at(1.0) ** 2)
        assert abs(m2 - 10 / 3) <= 3 * se2

    def test_piecewise_constant(self):
        ps = simulate_compound_poisson(TimeGrid(2.0, 0.01), 50, 3.0, Uniform(-1, 1), seed=12)
        for p in ps:
            changed = np.flatnonzero(np.diff(p.values) != 0) + 1
            assert set(changed) <= set(p.event_nodes())


class TestJumpDiffusion:
    def test_no_jumps_matches_bm(self):
        g = TimeGrid(1.0, 0.01)
        a = simulate_jump_diffusion(g, 20, LevyTriplet(b=0.3, sigma2=4.0), seed=13)
        b = simulate_bm_drift(g, 20, 0.3, 2.0, seed=13)
        assert np.array_equal(a.values, b.values)

    def test_adding_jumps_keeps_brownian_draws(self, jd_triplet):
        g = TimeGrid(1.0, 0.01)
        jd = simulate_jump_diffusion(g, 20, jd_triplet, seed=14)
        bm = simulate_bm_drift(g, 20, 0.0, 1.0, seed=14)
        cont = np.vstack([p.continuous_part() for p in jd])
        assert np.allclose(cont, bm.values, atol=1e-12)

    def test_moments(self, jd_triplet):
        ps = simulate_jump_diffusion(TimeGrid(1.0, 0.01), 20_000, jd_triplet, seed=15)
        x = ps.at(1.0)
        m, se = mean_se(x)
        assert abs(m) <= 3 * se
        v, vse = var_se(x)
        assert abs(v - (1 + 10 / 3)) <= 3 * vse

    def test_martingale_mean_over_time(self, jd_triplet):
        ps = simulate_jump_diffusion(TimeGrid(50.0, 0.1), 2_000, jd_triplet, seed=16)
        for t in (1.0, 10.0, 50.0):
            m, se = mean_se(ps.at(t))
            assert abs(m) <= 3 * se

    def test_stationary_increments(self, jd_triplet):
        ps = simulate_jump_diffusion(TimeGrid(2.0, 0.01), 20_000, jd_triplet, seed=17)
        a = ps.at(1.0)
        b = ps.at(2.0) - ps.at(1.0)
        ma, sa = mean_se(a)
        mb, sb = mean_se(b)
        assert abs(ma - mb) <= 4 * math.hypot(sa, sb)
        va, vsa = var_se(a)
        vb, vsb = var_se(b)
        assert abs(va - vb) <= 4 * math.hypot(vsa, vsb)

    def test_node_event_consistency(self, jd_triplet):
        ps = simulate_jump_diffusion(TimeGrid(1.0, 0.01), 30, jd_triplet, seed=18)
        for p in ps:
            rebuilt = p.continuous_part() + np.array(
                [p.jump_sizes[p.jump_times <= t].sum() for t in p.grid.times])
            assert np.allclose(rebuilt, p.values, rtol=1e-10, atol=1e-12)

    def test_off_grid_evaluation(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.1), 1, 5.0, seed=19)
        p = ps[0]
        s = p.jump_times[0]
        assert p.value_at(s) == 1.0 and p.left_limit_at(s) == 0.0


class TestDeterminism:
    def test_same_seed_bitwise(self, jd_triplet):
        g = TimeGrid(1.0, 0.01)
        a = simulate_levy(g, 300, jd_triplet, seed=20)
        b = simulate_levy(g, 300, jd_triplet, seed=20)
        assert np.array_equal(a.values, b.values)
        assert all(np.array_equal(x, y) for x, y in zip(a.jump_sizes, b.jump_sizes))

    def test_workers_bitwise(self, jd_triplet):
        g = TimeGrid(1.0, 0.01)
        a = simulate_levy(g, 700, jd_triplet, seed=21, workers=1)
        b = simulate_levy(g, 700, jd_triplet, seed=21, workers=8)
        assert np.array_equal(a.values, b.values)

    def test_prefix_stable(self, jd_triplet):
        g = TimeGrid(1.0, 0.01)
        a = simulate_levy(g, 10, jd_triplet, seed=22)
        b = simulate_levy(g, 50, jd_triplet, seed=22)
        assert np.array_equal(a.values, b.values[:10])

    def test_zero_paths_rejected(self, jd_triplet):
        with pytest.raises(ValueError):
            simulate_levy(TimeGrid(1.0, 0.1), 0, jd_triplet)


class TestCompensate:
    def test_zero_rate_identity(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.1), 3, 1.0)
        assert compensate(ps, 0.0) is ps

    def test_compensated_poisson_mean(self):
        ps = compensate(simulate_poisson(TimeGrid(4.0, 0.5), 20_000, 2.0, seed=23), 2.0)
        for k in range(1, len(ps.grid)):
            m, se = mean_se(ps.values[:, k])
            assert abs(m) <= 3 * se
        assert is_martingale(ps.triplet)

    def test_compound_poisson_compensated_triplet(self):
        law = Uniform(-0.5, 2.0)
        ps = simulate_compound_poisson(TimeGrid(1.0, 0.1), 2, 3.0, law)
        assert is_martingale(compensate(ps, 3.0 * law.moment(1)).triplet)

    def test_jumps_untouched(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.1), 3, 2.0, seed=24)
        cps = compensate(ps, 2.0)
        assert cps.jump_times is ps.jump_times


class TestJumpQueries:
    def test_jump_count(self):
        ps = simulate_compound_poisson(TimeGrid(1.0, 0.01), 20, 5.0, Uniform(-1, 1), seed=25)
        for p in ps:
            assert jump_count(p, 1.0, 2.0) == 0
            assert jump_count(p, 1.0) == p.n_jumps
        pp = simulate_poisson(TimeGrid(1.0, 0.01), 20, 5.0, seed=26)
        for p in pp:
            assert jump_count(p, 1.0) == p.values[-1]

    def test_jump_count_guards(self):
        p = simulate_poisson(TimeGrid(1.0, 0.1), 1, 1.0)[0]
        with pytest.raises(ValueError):
            jump_count(p, 2.0)
        with pytest.raises(ValueError):
            jump_count(p, 1.0, -1.0)

    def test_first_jump_node(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.01), 200, 2.0, seed=27)
        for p in ps:
            k = first_jump_node(p)
            if p.n_jumps == 0:
                assert k == p.grid.n_steps
            else:
                assert p.values[k] >= 1 and (k == 0 or p.values[k - 1] == 0)

    def test_pathset_indexing(self):
        ps = simulate_poisson(TimeGrid(1.0, 0.1), 4, 1.0)
        assert isinstance(ps, PathSet) and ps.n_paths == 4
        assert len(list(ps)) == 4
        assert np.array_equal(ps.coarsen(2).values, ps.values[:, ::2])
