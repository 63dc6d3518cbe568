import math

import numpy as np
import pytest

from isopart import grid as gr
from isopart import network as nw
from isopart.constructions import make_cone, make_lens, make_reuleaux


def split_grid(n, fn, half=0.5):
    g = gr.GridPartition(np.zeros((n, n), dtype=np.int64), 2 * half / n, gr.band_mask(n), {})
    X, Y = g.centers()
    g.labels = fn(X, Y).astype(np.int64)
    return g


def test_uniform_grid_has_no_energy():
    assert gr.grid_energy(split_grid(32, lambda X, Y: 0 * X)) == 0.0


def test_vertical_split_has_unit_length():
    g = split_grid(128, lambda X, Y: X > 0)
    assert gr.grid_energy(g) == pytest.approx(1.0, rel=0.01)


def test_diagonal_split_has_diagonal_length():
    g = split_grid(128, lambda X, Y: Y > X)
    assert gr.grid_energy(g) == pytest.approx(math.sqrt(2), rel=0.03)


@pytest.mark.parametrize("deg", [0.0, 22.5, 45.0])
def test_calibration_is_exact_at_fitted_angles(deg):
    assert gr.anisotropy(math.radians(deg)) == pytest.approx(1.0, abs=1e-12)


def test_anisotropy_is_small_at_all_angles():
    a = [gr.anisotropy(t) for t in np.linspace(0, math.pi / 2, 181)]
    assert 0.98 <= min(a) and max(a) <= 1.02


def test_interface_energy_splits_total():
    g = gr.rasterize(make_reuleaux(1.0), 96, 2.0)
    parts = sum(gr.interface_energy(g, a, b) for a in range(4) for b in range(a + 1, 4))
    assert parts == pytest.approx(gr.grid_energy(g), rel=1e-12)


def test_rasterization_converges_monotonically():
    p = make_lens(1.0)
    exact = gr.square_window_energy(p, 2.0)
    err = [abs(gr.grid_energy(gr.rasterize(p, n, 2.0)) - exact) for n in (64, 128, 256)]
    assert err[0] > err[1] > err[2]
    assert err[2] / exact <= 0.03


def test_square_window_energy_of_a_line():
    assert gr.square_window_energy(make_cone("halfplane"), 2.0) == pytest.approx(4.0, abs=1e-12)
    assert gr.square_window_energy(make_cone("triple_junction"), 1.0) == pytest.approx(
        1 + 2 / math.cos(math.pi / 6), abs=1e-12)


def test_anneal_conserves_counts_and_lowers_energy():
    g = gr.rasterize(gr.jitter_network(make_lens(1.0), 0.15, 0), 64, 2.0)
    before = g.counts()
    res = gr.anneal(g, gr.Schedule(sweeps=60), seed=0)
    after = res.grid.counts()
    for k in g.targets:
        assert after[k] == before[k]
    assert res.energy <= res.initial_energy
    assert np.array_equal(res.grid.labels[g.frozen], g.labels[g.frozen])


def test_anneal_is_deterministic():
    g = gr.rasterize(make_reuleaux(1.0), 48, 2.0)
    a = gr.anneal(g, gr.Schedule(sweeps=30), seed=5)
    b = gr.anneal(g, gr.Schedule(sweeps=30), seed=5)
    assert np.array_equal(a.grid.labels, b.grid.labels)
    assert np.array_equal(a.trace, b.trace)


def test_replicas_keep_the_best_chain():
    g = gr.rasterize(make_reuleaux(1.0), 48, 2.0)
    one = gr.anneal(g, gr.Schedule(sweeps=30), seed=5)
    many = gr.anneal(g, gr.Schedule(sweeps=30, replicas=3), seed=5)
    assert many.energy <= one.energy + 0.05


def test_infeasible_targets_rejected():
    g = gr.rasterize(make_lens(1.0), 32, 2.0)
    g.targets = {2: g.targets[2] + 5}
    with pytest.raises(gr.InfeasibleTargets):
        gr.anneal(g)


def test_match_targets_reaches_exact_counts():
    g = gr.rasterize(make_lens(1.0), 64, 2.0)
    want = {2: g.targets[2] + 17}
    out = gr.match_targets(g, want, seed=0)
    assert out.counts()[2] == want[2]
    out = gr.match_targets(g, {2: g.targets[2] - 9}, seed=0)
    assert out.counts()[2] == g.targets[2] - 9


def test_line_band_anneals_to_a_straight_interface():
    res = gr.anneal_network(make_cone("halfplane"), 128, 2.0, seed=0)
    assert res.energy == pytest.approx(4.0, rel=0.02)


@pytest.mark.slow
def test_lens_anneal_matches_network_energy():
    p = make_lens(1.0)
    res = gr.anneal_network(p, 256, 2.0, seed=0)
    assert res.energy == pytest.approx(gr.square_window_energy(p, 2.0), rel=0.02)


# ---------------------------------------------------------------------------
# variations


def half_planes(n=128, half=2.0):
    return split_grid(n, lambda X, Y: (Y < 0).astype(int), half)


def test_zero_shift_is_identity():
    g = half_planes()
    res = gr.volume_fixing_variation(g, {0: 0.0, 1: 0.0}, [])
    assert res.delta_p == 0.0
    assert np.array_equal(res.grid.labels, g.labels)


def test_small_shift_between_half_planes_is_within_bound():
    g = half_planes()
    d = 0.01
    res = gr.volume_fixing_variation(g, {0: d, 1: -d}, [gr.Ball(1, (0.0, -0.8), 0.4)])
    assert res.within_bound
    assert res.bound == pytest.approx(gr.volume_fixing_constant(2) * 2 * math.sqrt(d))
    assert res.grid.counts()[0] - g.counts()[0] == res.cells_moved[0]


def test_constant_value():
    assert gr.volume_fixing_constant(3) == pytest.approx(2 * (3 * 2 + 2 * math.pi) / math.pi)
    assert gr.C2 == pytest.approx(2 * math.sqrt(math.pi))


def test_sparse_donor_ball_rejected():
    g = half_planes()
    with pytest.raises(gr.PreconditionError, match="1/2"):
        gr.volume_fixing_variation(g, {0: 0.01, 1: -0.01}, [gr.Ball(1, (0.0, 0.1), 0.4)])


def test_unbalanced_shifts_rejected():
    with pytest.raises(gr.PreconditionError):
        gr.volume_fixing_variation(half_planes(), {0: 0.02, 1: -0.01}, [gr.Ball(1, (0.0, -0.8), 0.4)])


def test_overlapping_balls_rejected():
    g = split_grid(128, lambda X, Y: np.where(Y < 0, np.where(X < 0, 1, 2), 0), 2.0)
    balls = [gr.Ball(1, (-0.3, -0.8), 0.4), gr.Ball(2, (0.3, -0.8), 0.4)]
    with pytest.raises(gr.PreconditionError, match="disjoint"):
        gr.volume_fixing_variation(g, {0: 0.02, 1: -0.01, 2: -0.01}, balls)


def test_ball_outside_window_rejected():
    with pytest.raises(gr.PreconditionError):
        gr.volume_fixing_variation(half_planes(), {0: 0.01, 1: -0.01}, [gr.Ball(1, (0.0, -1.9), 0.4)])


def test_slab_zero_area_is_identity():
    g = half_planes()
    assert np.array_equal(gr.thin_slab_volume_shift(g, 1, 0, 0.0, 0.1).grid.labels, g.labels)


def test_slab_shift_respects_budget():
    g = half_planes(512, 6.0)
    res = gr.thin_slab_volume_shift(g, 1, 0, 0.5, 0.1)
    assert res.delta_p <= 0.1
    moved = res.grid.counts()[0] - g.counts()[0]
    assert moved == round(0.5 / g.h**2)


def test_slab_reports_required_width():
    with pytest.raises(gr.PreconditionError, match="width"):
        gr.thin_slab_volume_shift(half_planes(512, 0.5), 1, 0, 0.5, 0.1)


def test_slab_needs_flat_interface():
    g = gr.rasterize(make_lens(1.0), 64, 2.0)
    with pytest.raises(gr.PreconditionError, match="flat"):
        gr.thin_slab_volume_shift(g, 1, 0, 0.1, 0.1)
