import math

import numpy as np
import pytest

from isopart import network as nw
from isopart.constructions import lens_radius, make_cone, make_double_bubble, make_lens, make_peanut, make_reuleaux
from isopart.minimize import (
    ConstraintMode, DescentOptions, TopologyMove, TopologyMoveRejected, apply_topology_move, energy,
    jitter, local_minimality_check, minimize, pin_far_field,
)


@pytest.fixture(scope="module")
def lens_run():
    return minimize(jitter(make_lens(1.0), 0.05, seed=1))


def test_energy_examples():
    assert energy(make_cone("triple_junction", 1.0)) == pytest.approx(3.0, abs=1e-14)
    assert energy(nw.ArcPartition((nw.Region(0, math.inf),), (), (), 3.0)) == 0.0
    # two half-line stubs outside the lens plus its two arcs
    r = lens_radius(1.0)
    chord = 2 * r * math.sin(math.pi / 3)
    R = 10.0
    assert energy(make_lens(1.0)) == pytest.approx(2 * R - chord + 4 * math.pi * r / 3, rel=1e-12)


def test_jittered_lens_recovers_constructor_energy(lens_run):
    assert lens_run.converged
    assert lens_run.energy == pytest.approx(energy(make_lens(1.0)), rel=1e-4)


def test_lens_multiplier_is_pressure(lens_run):
    assert lens_run.multipliers[2] == pytest.approx(1 / lens_radius(1.0), abs=1e-3)


def test_trace_energy_is_non_increasing_and_areas_conserved(lens_run):
    e = [t["energy"] for t in lens_run.trace]
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert all(t["max_area_violation"] <= 1e-10 for t in lens_run.trace)
    assert set(lens_run.trace[0]) == {"iteration", "energy", "max_area_violation", "step_norm"}


def test_converged_output_is_stationary(lens_run):
    tol = nw.Tolerances(angle=1e-5, curvature=1e-5, pressure=1e-5)
    assert nw.check_stationarity(lens_run.partition, tol).passed


def test_local_minimality_spot_check(lens_run):
    assert local_minimality_check(lens_run, n=50, seed=0) >= -1e-9


def test_straight_line_is_a_fixed_point():
    res = minimize(make_cone("halfplane"), ConstraintMode(frozenset()))
    assert res.converged
    assert res.energy == pytest.approx(20.0, abs=1e-12)


def test_unconstrained_lens_shrinks_to_a_line():
    res = minimize(make_lens(1.0), ConstraintMode(frozenset()))
    assert res.energy == pytest.approx(20.0, abs=1e-9)


def test_line_with_bump_and_empty_constraints_reaches_2R():
    base = make_cone("halfplane")
    pinned = pin_far_field(base)
    piece = next(e for e in pinned.edges if nw.edge_kind(pinned, e) == "arc")
    q = pinned.with_edge(piece.id, kappa=0.05)
    assert energy(q) > 20.0
    res = minimize(q, ConstraintMode(frozenset()))
    assert res.energy == pytest.approx(20.0, abs=1e-8)


@pytest.mark.parametrize("make", [lambda: make_reuleaux(1.0), lambda: make_double_bubble(1.0, 2.0),
                                  lambda: make_peanut(1.0, 2.0)])
def test_jittered_standard_partitions_relax_back(make):
    p = make()
    res = minimize(jitter(p, 0.03, seed=4))
    assert res.converged
    assert res.energy == pytest.approx(energy(p), rel=1e-6)


def test_minimize_is_deterministic():
    p = jitter(make_reuleaux(1.0), 0.04, seed=2)
    a, b = minimize(p, seed=0), minimize(p, seed=0)
    assert a.energy == b.energy
    assert a.trace == b.trace


def test_unknown_constraint_label_rejected():
    with pytest.raises(ValueError):
        minimize(make_lens(1.0), ConstraintMode(frozenset({7})))


def test_invalid_initial_rejected():
    p = make_lens(1.0).with_edge(0, left=2, right=2)
    with pytest.raises(ValueError):
        minimize(p)


def test_options_must_be_positive():
    with pytest.raises(ValueError):
        DescentOptions(max_iter=0)


def test_iteration_cap_flags_non_convergence():
    res = minimize(jitter(make_lens(1.0), 0.05, seed=1), opts=DescentOptions(max_iter=1))
    assert not res.converged
    assert math.isfinite(res.energy)


# ---------------------------------------------------------------------------
# topology moves


def test_long_edge_collapse_rejected():
    with pytest.raises(TopologyMoveRejected):
        apply_topology_move(make_peanut(1.0, 1.0), TopologyMove("collapse", 1), 1e-3)


def test_ray_collapse_rejected():
    p = make_lens(1.0)
    ray = next(e for e in p.edges if nw.edge_kind(p, e) == "ray")
    with pytest.raises(TopologyMoveRejected):
        apply_topology_move(p, TopologyMove("collapse", ray.id), 10.0)


def test_collapse_that_would_make_a_quadruple_point_rejected():
    p = make_peanut(1.0, 1.0)
    mid = next(e for e in p.edges if {e.left, e.right} == {2, 3})
    with pytest.raises(TopologyMoveRejected):
        apply_topology_move(p, TopologyMove("collapse", mid.id), 100.0)


def test_flip_without_four_distinct_neighbours_rejected():
    p = make_double_bubble(1.0, 1.0)
    mid = next(e for e in p.edges if {e.left, e.right} == {1, 2})
    with pytest.raises(TopologyMoveRejected):
        apply_topology_move(p, TopologyMove("flip", mid.id), 100.0)


def test_flip_of_short_middle_edge_keeps_vertices_trivalent():
    p = make_peanut(1.0, 1.0)
    mid = next(e for e in p.edges if {e.left, e.right} == {2, 3})
    threshold = 1.01 * nw.energy_of_edge(p, mid)
    q = apply_topology_move(p, TopologyMove("flip", mid.id), threshold)
    assert nw.validate_topology(q).ok
    new = q.edge_map[mid.id]
    assert {new.left, new.right} == {0, 1}
    assert {frozenset((e.left, e.right)) for e in q.edges} != {frozenset((e.left, e.right)) for e in p.edges}


def test_vanishing_peanut_region_becomes_a_lens():
    p = make_peanut(1.0, 0.1)
    for m in (0.01, 1e-4, 1e-6):
        res = minimize(p, targets={3: m})
        assert res.converged
        p = res.partition
    q = apply_topology_move(p, TopologyMove("remove_triangle", 3), 1e-2)
    assert nw.validate_topology(q).ok
    assert 3 not in {e.left for e in q.edges} | {e.right for e in q.edges}
    res = minimize(q)
    assert res.energy == pytest.approx(energy(make_lens(1.0)), rel=1e-9)
    assert nw.classify_far_field(res.partition).kind == nw.LINE


def test_pinning_keeps_energy_and_areas():
    p = make_reuleaux(1.0)
    q = pin_far_field(p)
    assert nw.validate_topology(q).ok
    assert energy(q) == pytest.approx(energy(p), rel=1e-12)
    assert nw.finite_region_areas(q)[3] == pytest.approx(1.0, rel=1e-12)


def test_jitter_preserves_validity():
    for seed in range(5):
        assert nw.validate_topology(jitter(make_reuleaux(1.0), 0.1, seed)).ok
