import numpy as np
import pytest

from driftbandit.grid import (
    BinId,
    ancestors,
    bin_mass,
    bin_of,
    contains,
    context_grid_coords,
    iter_bins,
    level_for,
    parent,
)


def test_level_for_examples():
    assert level_for(16, 2, 1) == 1  # (2/16)^(1/3) = 0.5 -> r = 1/2
    assert level_for(1, 2, 0) == 0  # K/n >= 1 -> root level
    assert level_for(32, 2, 0) == 2  # (2/32)^(1/2) = 0.25 -> r = 1/4


def test_level_for_rejects_bad_inputs():
    with pytest.raises(ValueError):
        level_for(0, 2, 1)
    with pytest.raises(ValueError):
        level_for(4, 1, 1)
    with pytest.raises(ValueError):
        level_for(4, 2, -1)


def test_level_for_monotone():
    for K in (2, 3, 5):
        for d in (0, 1, 2):
            levels = [level_for(n, K, d) for n in range(1, 4000)]
            assert all(a <= b for a, b in zip(levels, levels[1:]))
    # non-increasing in K
    for n in (1, 7, 64, 999):
        ms = [level_for(n, K, 1) for K in range(2, 12)]
        assert all(a >= b for a, b in zip(ms, ms[1:]))


def test_level_for_exactness():
    # K 2^((m-1)(2+d)) < n <= K 2^(m(2+d)) whenever m >= 1
    for K in (2, 5):
        for d in (0, 1, 2):
            for n in range(1, 5000, 7):
                m = level_for(n, K, d)
                assert n <= K * 2 ** (m * (2 + d))
                if m >= 1:
                    assert K * 2 ** ((m - 1) * (2 + d)) < n


def test_bin_of_examples():
    assert bin_of((0.3, 0.7), 1).coords == (0, 1)
    assert bin_of((1.0,), 3).coords == (7,)  # boundary clamps inward
    assert bin_of((0.9999, 0.0001), 0).coords == (0, 0)


def test_bin_of_rejects_out_of_range():
    with pytest.raises(ValueError):
        bin_of((1.2,), 1)


def test_parent_examples():
    assert parent(BinId(2, (3, 1))) == BinId(1, (1, 0))
    assert parent(BinId(1, (0, 0))) == BinId(0, (0, 0))
    with pytest.raises(ValueError):
        parent(BinId(0, (0, 0)))


def test_contains():
    assert contains(BinId(1, (0, 1)), (0.3, 0.7))
    assert not contains(BinId(1, (1, 1)), (0.3, 0.7))
    assert contains(BinId(0, (0, 0)), (0.123, 0.987))


def test_ancestors_chain():
    b = bin_of((0.3, 0.7), 3)
    chain = ancestors(b)
    assert len(chain) == 4
    assert chain[0] == b and chain[-1].m == 0
    for child, anc in zip(chain, chain[1:]):
        assert parent(child) == anc


def test_nesting_on_grid():
    # parent(bin_of(x, m)) == bin_of(x, m-1) exhaustively on a grid
    xs = np.linspace(0, 1, 33)
    for x1 in xs:
        for x2 in (0.0, 0.31, 0.75, 1.0):
            for m in range(1, 6):
                assert parent(bin_of((x1, x2), m)) == bin_of((x1, x2), m - 1)


def test_partition_tiles(rng):
    # every context lands in exactly one bin per level, and masses sum to one
    for m in (0, 1, 3):
        for d in (1, 2):
            bins = list(iter_bins(m, d))
            assert len(bins) == 2 ** (m * d)
            assert abs(sum(bin_mass(b, d) for b in bins) - 1.0) < 1e-12
            for _ in range(50):
                x = rng.random(d)
                owners = [b for b in bins if contains(b, x)]
                assert len(owners) == 1


def test_bin_side_exact():
    assert BinId(3, (0,)).side == 0.125
    assert BinId(0, ()).side == 1.0


def test_context_grid_coords_matches_bin_of(rng):
    xs = rng.random((200, 2))
    xs[0] = (1.0, 1.0)
    g = context_grid_coords(xs, 6)
    for row, x in zip(g, xs):
        for m in range(0, 7):
            want = bin_of(x, m).coords
            got = tuple(int(c) >> (6 - m) for c in row)
            assert got == want
