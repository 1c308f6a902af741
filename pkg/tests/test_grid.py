from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kawarada.errors import MeshError
from kawarada.grid import (Mesh1D, Mesh2D, MeshMapping, build_mesh, build_mesh2d, compute_kh,
                           max_step, refine_halve, step_jump)

from oracles import k_of_h_loop

mappings = st.one_of(
    st.just(MeshMapping("uniform")),
    st.just(MeshMapping("sine")),
    st.builds(lambda s, c: MeshMapping("clustered", s=s, center=c),
              st.floats(-0.9, 0.9), st.floats(-0.5, 0.5)),
)


def test_uniform_three_nodes():
    m = build_mesh(3, MeshMapping("uniform"))
    np.testing.assert_array_equal(m.nodes, [-1, -0.5, 0, 0.5, 1])
    assert np.all(m.steps == 0.5)


def test_uniform_single_node():
    m = build_mesh(1)
    np.testing.assert_array_equal(m.nodes, [-1, 0, 1])
    np.testing.assert_array_equal(m.steps, [1, 1])
    assert m.n_interior == 1


def test_sine_mapping_nodes():
    m = build_mesh(3, MeshMapping("sine"))
    r = math.sqrt(2) / 2
    np.testing.assert_allclose(m.nodes, [-1, -r, 0, r, 1], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 7, 10, 63])
def test_uniform_steps_exact(n):
    m = build_mesh(n, MeshMapping("uniform"))
    assert np.all(m.steps == 2.0 / (n + 1))


def test_rejects_inversion_and_names_it():
    with pytest.raises(MeshError, match="2"):
        Mesh1D.from_nodes([-1.0, -0.2, 0.3, 0.1, 1.0])


def test_rejects_wrong_span():
    with pytest.raises(MeshError):
        Mesh1D.from_nodes([-1.0, 0.0, 0.9])


def test_mapping_parameter_checks():
    with pytest.raises(MeshError):
        MeshMapping("clustered", s=1.0)
    with pytest.raises(MeshError):
        MeshMapping("clustered", center=-1.0)
    with pytest.raises(MeshError):
        MeshMapping("spline")


def test_refine_examples():
    np.testing.assert_array_equal(refine_halve(build_mesh(1)).nodes, [-1, -0.5, 0, 0.5, 1])
    m = refine_halve(build_mesh(3, MeshMapping("sine")))
    assert m.nodes.size == 9
    assert math.isclose(m.nodes[1], (-1 - math.sqrt(2) / 2) / 2, rel_tol=1e-15)


@given(st.integers(1, 40), mappings)
def test_mesh_invariants(n, mapping):
    m = build_mesh(n, mapping)
    assert m.nodes[0] == -1.0 and m.nodes[-1] == 1.0
    assert np.all(m.steps > 0)
    assert abs(m.steps.sum() - 2.0) <= 1e-12
    assert m.n_interior == n


@given(st.integers(1, 30), mappings)
def test_refine_preserves_parents_and_doubles_segments(n, mapping):
    m = build_mesh(n, mapping)
    r = refine_halve(m)
    assert r.steps.size == 2 * m.steps.size
    assert r.n_interior == 2 * n + 1
    np.testing.assert_array_equal(r.nodes[::2], m.nodes)
    np.testing.assert_array_equal(refine_halve(r).nodes, refine_halve(refine_halve(m)).nodes)


@given(st.integers(1, 12), st.integers(1, 12))
def test_lexicographic_index_is_bijection(nx, ny):
    m = build_mesh2d(nx, ny)
    ks = [m.index(i, j) for j in range(1, ny + 1) for i in range(1, nx + 1)]
    assert ks == list(range(nx * ny))
    for k in ks:
        assert m.index(*m.node_of(k)) == k
    if ny > 1:
        assert m.index(1, 2) == nx


@given(st.integers(1, 15), st.integers(1, 15), mappings)
def test_h_min_is_min_step_product(nx, ny, mapping):
    m = build_mesh2d(nx, ny, mapping)
    prods = [h[:-1] * h[1:] for h in (m.mx.steps, m.my.steps)]
    assert m.h_min == min(p.min() for p in prods)


def test_coordinates_and_coarse_indices():
    m = build_mesh2d(3, 2, MeshMapping("sine"))
    X, Y = m.coordinates()
    assert X.shape == (6,)
    assert X[1] == m.mx.nodes[2] and Y[3] == m.my.nodes[2]
    f = m.refine_halve().refine_halve()
    idx = f.coarse_indices(2)
    FX, FY = f.coordinates()
    np.testing.assert_array_equal(FX[idx], X)
    np.testing.assert_array_equal(FY[idx], Y)


@pytest.mark.parametrize("n", [2, 5, 31])
@pytest.mark.parametrize("ab,expected", [(2.0, 0.125), (1.0, 0.5)])
def test_kh_uniform(n, ab, expected):
    m = build_mesh2d(n, n, a=ab, b=ab)
    assert math.isclose(compute_kh(m), expected, rel_tol=1e-12)


@given(st.integers(2, 20), st.integers(2, 20), mappings, st.floats(0.5, 3), st.floats(0.5, 3))
def test_kh_matches_loop_oracle(nx, ny, mapping, a, b):
    m = build_mesh2d(nx, ny, mapping, a=a, b=b)
    assert math.isclose(compute_kh(m), k_of_h_loop(m.mx.steps, m.my.steps, a, b), rel_tol=1e-12, abs_tol=1e-12)


def test_kh_clustered_n8():
    m = build_mesh2d(8, 8, MeshMapping("clustered", s=-0.5), a=2, b=2)
    assert math.isclose(compute_kh(m), k_of_h_loop(m.mx.steps, m.my.steps, 2, 2), rel_tol=1e-13)


def test_kh_needs_two_nodes():
    with pytest.raises(MeshError):
        compute_kh(build_mesh2d(1, 3))


def test_sine_step_jumps_are_second_order():
    ns = np.array([15, 31, 63])
    jumps = [step_jump(build_mesh(n, MeshMapping("sine"))) for n in ns]
    hs = [max_step(build_mesh(n, MeshMapping("sine"))) for n in ns]
    slope = np.polyfit(np.log(hs), np.log(jumps), 1)[0]
    assert slope >= 1.9


def test_meshes_are_immutable():
    m = build_mesh(4)
    with pytest.raises(ValueError):
        m.nodes[1] = 0.0
    with pytest.raises(AttributeError):
        m.nodes = None
    assert isinstance(build_mesh2d(2, 2), Mesh2D)
