import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from driftbandit.detector import compute_shifts
from driftbandit.environments import (
    Bump,
    RewardFunction,
    eval_mean,
    gap_table,
    global_shift_count,
    hard_instance_grid_size,
    lipschitz_check,
    make_flip_env,
    make_global_shift_env,
    make_local_shift_env,
    make_stationary_hard,
    make_tv_budget_env,
    sample_round,
    true_gap,
    tv_upper_bound,
)
from driftbandit.grid import BinId, bin_mass

from env_zoo import constant_env


def bump_env(T=100, d=1, sign=1, amp=Fraction(1, 8), scale=2, cell=(1,)):
    """Two arms: flat 1/2 and 1/2 + one signed bump."""
    from driftbandit.environments import Environment, Phase

    flat = RewardFunction(base=Fraction(1, 2))
    bumpy = RewardFunction(
        base=Fraction(1, 2), bumps=(Bump(scale=scale, cell=cell, sign=sign, amplitude=amp),)
    )
    return Environment(T=T, K=2, d=d, phases=(Phase(1, (flat, bumpy)),), noise="noiseless")


class TestRewardFunction:
    def test_peak_and_support(self):
        env = bump_env()
        q = (1 + 0.5) / 2  # center of cell 1 at scale 2
        assert eval_mean(env, 1, 1, (q,)) == pytest.approx(0.5 + 1 / 8)
        assert eval_mean(env, 1, 1, (0.2,)) == 0.5  # outside the support
        # vanishes on the support-cell boundary
        assert eval_mean(env, 1, 1, (0.5,)) == pytest.approx(0.5)
        assert eval_mean(env, 1, 1, (1.0,)) == pytest.approx(0.5)

    def test_rejects_overlapping_bumps(self):
        with pytest.raises(ValueError):
            RewardFunction(
                base=Fraction(1, 2),
                bumps=(
                    Bump(2, (1,), 1, Fraction(1, 8)),
                    Bump(4, (2,), 1, Fraction(1, 16)),  # nested inside cell 1 of scale 2
                ),
            )

    def test_rejects_slope_above_one(self):
        with pytest.raises(ValueError):
            Bump(scale=4, cell=(0,), sign=1, amplitude=Fraction(1, 4))  # slope 2

    def test_rejects_range_escape(self):
        with pytest.raises(ValueError):
            RewardFunction(base=Fraction(15, 16), bumps=(Bump(2, (0,), 1, Fraction(1, 8)),))

    def test_out_of_range_round_and_arm(self):
        env = bump_env()
        with pytest.raises(ValueError):
            eval_mean(env, 0, 0, (0.5,))
        with pytest.raises(ValueError):
            eval_mean(env, 1, 2, (0.5,))


class TestGaps:
    def test_true_gap_two_arms(self):
        env = constant_env(10, values=[Fraction(3, 5), Fraction(1, 2)])
        assert true_gap(env, 1, 1, (0.4,)) == pytest.approx(0.1)
        assert true_gap(env, 1, 0, (0.4,)) == 0.0

    def test_equal_arms_zero_gap(self):
        env = constant_env(10)
        assert true_gap(env, 5, 0, (0.9,)) == 0.0
        assert true_gap(env, 5, 1, (0.9,)) == 0.0

    def test_hard_instance_peak_gap(self):
        env = make_stationary_hard(816, 1, 0)
        M = env.meta["M"]
        bumps = env.phases[0].arms[1].bumps
        b = bumps[0]
        q = (b.cell[0] + 0.5) / M
        losing = 0 if b.sign > 0 else 1
        assert true_gap(env, 1, losing, (q,)) == pytest.approx(0.25 / M)


class TestSampling:
    def test_noiseless_rewards_equal_means(self, rng):
        env = bump_env()
        s = sample_round(env, 3, rng)
        assert np.array_equal(s.rewards, s.means)

    def test_bernoulli_sure_success(self, rng):
        env = constant_env(10, values=[1, 1], noise="bernoulli")
        for t in range(1, 11):
            s = sample_round(env, t, rng)
            assert s.rewards.tolist() == [1.0, 1.0]

    def test_bernoulli_monte_carlo_mean(self, rng):
        # f == 1/2: empirical mean within a 4-sigma binomial band of 0.5
        env = constant_env(1, values=[Fraction(1, 2), Fraction(1, 2)], noise="bernoulli")
        n = 10**5
        hits = sum(sample_round(env, 1, rng).rewards[0] for _ in range(n // 100)) * 0
        u = rng.random(n)
        hits = float(np.mean(u < 0.5))
        assert abs(hits - 0.5) < 4 * math.sqrt(0.25 / n)

    def test_fixed_context_model(self):
        env = make_local_shift_env(32, BinId(1, (0,)), 1, 1, 5, avoid_region=True)
        rng = np.random.default_rng(0)
        xs = [sample_round(env, t, rng).context[0] for t in range(1, 33)]
        assert np.array_equal(xs, env.fixed_contexts[:32, 0])
        assert all(x >= 0.5 for x in xs)  # region [0, 1/2) avoided


class TestStationaryHard:
    def test_grid_size_example(self):
        assert hard_instance_grid_size(816, 1) == 5

    def test_lipschitz_oracle(self, rng):
        env = make_stationary_hard(2048, 1, 3)
        assert lipschitz_check(env, 10**4, rng) <= 1 + 1e-9

    def test_center_margin(self):
        # |f - 1/2| >= C_phi / (2M) at every cell center
        env = make_stationary_hard(500, 1, 9)
        M = env.meta["M"]
        f = env.phases[0].arms[1]
        centers = (np.arange(M)[:, None] + 0.5) / M
        vals = f.eval(centers)
        assert np.all(np.abs(vals - 0.5) >= 0.25 / (2 * M) - 1e-15)

    def test_supports_tile(self):
        env = make_stationary_hard(300, 2, 1)
        M = env.meta["M"]
        bumps = env.phases[0].arms[1].bumps
        assert len(bumps) == M**2
        assert len({b.cell for b in bumps}) == M**2

    def test_range_check(self):
        env = make_stationary_hard(1000, 1, 4)
        xs = np.linspace(0, 1, 4001)[:, None]
        vals = env.phases[0].arms[1].eval(xs)
        assert vals.min() >= 0 and vals.max() <= 1


class TestGlobalShift:
    def test_zero_shifts_matches_stationary(self):
        env = make_global_shift_env(512, 0, 1, 7)
        assert len(env.phases) == 1
        assert global_shift_count(env) == 0

    def test_phase_starts_example(self):
        env = make_global_shift_env(1000, 3, 1, 7)
        assert [p.start for p in env.phases] == [1, 251, 501, 751]

    def test_shift_count_bound(self):
        for L in (0, 1, 4, 9):
            env = make_global_shift_env(730, L, 1, L)
            assert global_shift_count(env) <= L

    def test_manual_three_phase_count(self):
        env = make_flip_env(90, 1, [0, 1, 0], 0.5)
        assert global_shift_count(env) == 2
        # identical-neighbour boundaries do not count
        p = env.phases
        env2 = replace(env, phases=(p[0], replace(p[1], arms=p[0].arms), p[2]))
        assert global_shift_count(env2) == 0
        env3 = replace(env, phases=(p[0], p[1], replace(p[2], arms=p[1].arms)))
        assert global_shift_count(env3) == 1

    def test_bit_reproducible(self):
        a = make_global_shift_env(400, 2, 1, 99)
        b = make_global_shift_env(400, 2, 1, 99)
        assert a.phases == b.phases


class TestTotalVariation:
    def test_stationary_zero(self):
        assert tv_upper_bound(make_stationary_hard(256, 1, 0), 128) == 0.0

    def test_single_jump_closed_form(self):
        # one arm jumps by c on a region of mass p: bound = c * p
        lo = RewardFunction(base=Fraction(1, 2))
        hi = RewardFunction(base=Fraction(1, 2), bumps=(Bump(2, (0,), 1, Fraction(1, 5)),))
        from driftbandit.environments import Environment, Phase

        env = Environment(
            T=10, K=2, d=1,
            phases=(Phase(1, (lo, lo)), Phase(6, (lo, hi))),
            noise="noiseless",
        )
        # integral of the tent over its cell: amplitude/2 * mass(cell)
        want = 0.2 / 2 * 0.5
        assert tv_upper_bound(env, 4096) == pytest.approx(want, rel=1e-5)

    def test_additive_over_boundaries(self):
        env = make_global_shift_env(900, 2, 1, 13)
        total = tv_upper_bound(env, 512)
        parts = 0.0
        for i in range(2):
            seg = replace(
                env,
                T=2,
                phases=(
                    replace(env.phases[i], start=1),
                    replace(env.phases[i + 1], start=2),
                ),
            )
            parts += tv_upper_bound(seg, 512)
        assert total == pytest.approx(parts, rel=1e-12)

    def test_budget_example_and_bound(self):
        env = make_tv_budget_env(4096, 1.0, 1, 7)
        assert env.meta["Delta"] == 512  # ceil(4096^(3/4))
        assert tv_upper_bound(env, 512) <= 1.0
        assert tv_upper_bound(env, 1024) <= 1.0  # cross-resolution check

    def test_budget_fallback(self):
        env = make_tv_budget_env(4096, 0.01, 1, 7)
        assert len(env.phases) == 1
        assert tv_upper_bound(env, 256) == 0.0

    def test_budget_rejects_bad_v(self):
        with pytest.raises(ValueError):
            make_tv_budget_env(100, 0.0, 1, 0)
        with pytest.raises(ValueError):
            make_tv_budget_env(100, 101.0, 1, 0)


class TestLocalShift:
    def test_zero_flips_stationary(self):
        env = make_local_shift_env(64, BinId(1, (1,)), 0, 1, 2)
        assert len(env.phases) == 1 and global_shift_count(env) == 0

    def test_avoided_region_hides_shifts(self, rng):
        env = make_local_shift_env(400, BinId(1, (0,)), 5, 1, 3, avoid_region=True)
        assert global_shift_count(env) >= 1
        contexts = env.fixed_contexts[:400]
        rep = compute_shifts(gap_table(env, contexts), contexts,
                             mode="exact", interval_family="all")
        assert rep.count == 0

    def test_experienced_region_reveals_shifts(self):
        env = replace(
            make_local_shift_env(2**13, BinId(1, (0,)), 2, 1, 12), noise="noiseless"
        )
        rng = np.random.default_rng(5)
        contexts = rng.random((env.T, 1))
        rep = compute_shifts(gap_table(env, contexts), contexts,
                             mode="exact", interval_family="all")
        assert rep.count >= 1

    def test_avoid_root_rejected(self):
        with pytest.raises(ValueError):
            make_local_shift_env(10, BinId(0, (0,)), 1, 1, 0, avoid_region=True)


class TestLipschitzCheck:
    def test_constant_zero(self, rng):
        assert lipschitz_check(constant_env(10), 500, rng) == 0.0

    def test_full_slope_bump_near_one(self, rng):
        env = bump_env(amp=Fraction(1, 4), scale=2, cell=(0,))  # slope exactly 1
        worst = lipschitz_check(env, 10**4, rng)
        assert worst <= 1 + 1e-9
        assert worst > 0.8  # sampled pairs do approach the slope


def test_uniform_marginal_strong_density():
    # mu(B) = r^d exactly for every bin under the uniform marginal
    assert bin_mass(BinId(3, (5,)), 1) == 2.0**-3
    assert bin_mass(BinId(2, (1, 3)), 2) == 2.0**-4
