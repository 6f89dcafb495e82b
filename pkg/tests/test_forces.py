import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbgforce import (DegenerateForceVectorError, ForceVector, NodeGrid, PointForce, distribute_forces,
                      pack_parameters, tip_load, unpack_parameters)
from fbgforce.forces import trapezoid

L = 0.29


def test_midpoint_force_splits_evenly():
    grid = NodeGrid(L, 30)
    dx = grid.spacing
    j = 10
    s = 0.5 * (grid.locations[j - 1] + grid.locations[j])
    d = distribute_forces(ForceVector.of((s, 1.0, 0.0)), grid)
    assert d.f_x[j - 1] == pytest.approx(0.5 / dx, rel=1e-12)
    assert d.f_x[j] == pytest.approx(0.5 / dx, rel=1e-12)
    assert np.count_nonzero(d.f_x) == 2 and np.all(d.f_y == 0)


def test_on_node_force_goes_to_that_node():
    grid = NodeGrid(L, 30)
    j = 12
    d = distribute_forces(ForceVector.of((grid.locations[j], 0.0, 1.0)), grid)
    assert d.f_y[j] == pytest.approx(1.0 / grid.spacing, rel=1e-12)
    assert d.f_y[j - 1] == 0 and d.f_y[j + 1] == 0


def test_nearer_node_gets_larger_share():
    grid = NodeGrid(L, 30)
    j = 5
    s = grid.locations[j - 1] + 0.2 * grid.spacing
    d = distribute_forces(ForceVector.of((s, 1.0, 0.0)), grid)
    assert d.f_x[j - 1] == pytest.approx(0.8 / grid.spacing)
    lit = distribute_forces(ForceVector.of((s, 1.0, 0.0)), grid, swap_node_weights=True)
    assert lit.f_x[j - 1] == pytest.approx(0.2 / grid.spacing)


def test_forces_on_same_cell_superpose():
    grid = NodeGrid(L, 30)
    a = distribute_forces(ForceVector.of((0.1001, 0.3, 0.1)), grid)
    b = distribute_forces(ForceVector.of((0.1002, -0.2, 0.5)), grid)
    ab = distribute_forces(ForceVector.of((0.1001, 0.3, 0.1), (0.1002, -0.2, 0.5)), grid)
    np.testing.assert_allclose(ab.f_x, a.f_x + b.f_x, rtol=1e-14)
    np.testing.assert_allclose(ab.f_y, a.f_y + b.f_y, rtol=1e-14)


def test_tip_force_routed_to_boundary():
    grid = NodeGrid(L, 50)
    fv = ForceVector.of((0.1, 0.2, 0.0), (L, 0.4, -0.3))
    d = distribute_forces(fv, grid)
    assert d.f_x[-1] == 0
    np.testing.assert_allclose(tip_load(fv, grid).force, [0.4, -0.3, 0.0])
    assert trapezoid(d.f_x, grid) == pytest.approx(0.2, rel=1e-12)


def test_empty_vector_gives_zero_load():
    grid = NodeGrid(L, 20)
    d = distribute_forces(ForceVector(), grid)
    assert np.all(d.f_x == 0) and np.all(d.f_y == 0)
    assert ForceVector().h == 0


def test_rejects_out_of_range_and_unordered():
    grid = NodeGrid(L, 20)
    with pytest.raises(ValueError):
        distribute_forces(ForceVector.of((0.3, 1.0, 0.0)), grid)
    with pytest.raises(ValueError):
        PointForce(-0.01, 1.0, 0.0)
    with pytest.raises(DegenerateForceVectorError):
        ForceVector.of((0.2, 1.0, 0.0), (0.1, 1.0, 0.0))
    with pytest.raises(DegenerateForceVectorError):
        ForceVector.of((0.2, 1.0, 0.0), (0.2, 1.0, 0.0))


force_triples = st.lists(
    st.tuples(st.floats(0.0, L), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0)),
    min_size=1, max_size=3, unique_by=lambda t: t[0])


@settings(max_examples=100, deadline=None)
@given(force_triples, st.integers(2, 400))
def test_trapezoid_conserves_force(triples, q):
    fv = ForceVector.of(*sorted(triples))
    grid = NodeGrid(L, q)
    d = distribute_forces(fv, grid)
    tip = tip_load(fv, grid).force
    for k, dens in ((0, d.f_x), (1, d.f_y)):
        total = sum(t[k + 1] for t in triples)
        scale = max(sum(abs(t[k + 1]) for t in triples), 1e-300)
        assert abs(trapezoid(dens, grid) + tip[k] - total) <= 1e-12 * scale


def test_base_moment_consistency():
    grid = NodeGrid(L, 250)
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = np.sort(rng.uniform(0.05 * L, L * 0.999, 3))
        f = rng.uniform(-2, 2, (3, 2))
        fv = ForceVector.of(*[(si, *fi) for si, fi in zip(s, f)])
        d = distribute_forces(fv, grid)
        loc = grid.locations
        for k, dens in ((0, d.f_x), (1, d.f_y)):
            exact = float(np.sum(f[:, k] * s))
            approx = trapezoid(dens * loc, grid)
            assert abs(approx - exact) < 5e-3 * np.sum(np.abs(f[:, k]) * s)


def test_pack_unpack_examples():
    fv = unpack_parameters([0.2, 0.3, 0.0])
    assert fv == ForceVector.of((0.2, 0.3, 0.0))
    np.testing.assert_array_equal(pack_parameters(fv), [0.2, 0.3, 0.0])
    assert unpack_parameters([]).h == 0
    assert pack_parameters(ForceVector()).size == 0


@settings(max_examples=50, deadline=None)
@given(force_triples)
def test_pack_round_trip(triples):
    x = pack_parameters(ForceVector.of(*sorted(triples)))
    np.testing.assert_array_equal(pack_parameters(unpack_parameters(x)), x)


def test_unpack_validates():
    with pytest.raises(ValueError):
        unpack_parameters([0.1, 0.2])
    with pytest.raises(ValueError):
        unpack_parameters([0.1, 0.2, 0.3], h=2)
    with pytest.raises(DegenerateForceVectorError):
        unpack_parameters([0.2, 1, 0, 0.1, 1, 0])


def test_force_vector_helpers():
    fv = ForceVector.of((0.1, 3.0, 4.0), (0.2, 0.0, -1.0))
    np.testing.assert_allclose(fv.magnitudes, [5.0, 1.0])
    np.testing.assert_allclose(fv.shifted(0.01).locations, [0.11, 0.21])
    np.testing.assert_allclose(fv.rotated(np.pi / 2).components, [[-4.0, 3.0], [1.0, 0.0]], atol=1e-15)
    np.testing.assert_allclose(fv.scaled(-2).components, [[-6.0, -8.0], [0.0, 2.0]])
