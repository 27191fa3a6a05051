import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import bfs_distance, brute_l1_diameter, ell_by_enumeration, flood_fill
from perco.clusters import (ChemicalMetric, chemical_ball, chemical_distance, closest_in_set,
                            double_sweep_diameter, ell, label_components, pseudo_distance,
                            restrict_S_r, s_infty_proxy)
from perco.lattice import Config, PreconditionError, Window
from perco.samplers import sample_bernoulli


def cfg_from(occ, anchor=None, torus=False):
    occ = np.asarray(occ, bool)
    if torus:
        w = Window.torus(occ.shape[0], occ.ndim)
    else:
        w = Window(tuple(anchor or (0,) * occ.ndim), occ.shape)
    return Config(w, occ, "test", 0)


# ---------------------------------------------------------------- labelling


def test_all_ones_box():
    lab = label_components(cfg_from(np.ones((5, 5))))
    assert lab.n_components == 1
    assert lab.sizes.tolist() == [25]
    assert lab.diameters.tolist() == [8]


def test_all_zeros():
    lab = label_components(cfg_from(np.zeros((4, 4))))
    assert lab.n_components == 0
    assert np.all(lab.labels == -1)


@pytest.mark.parametrize("torus", [False, True])
def test_labels_match_flood_fill(torus):
    g = np.random.default_rng(0)
    for _ in range(10):
        occ = g.random((32, 32)) < 0.5
        lab = label_components(cfg_from(occ, torus=torus))
        assert np.array_equal(lab.labels, flood_fill(occ, torus))


def test_diameters_match_brute_force_d3():
    g = np.random.default_rng(3)
    occ = g.random((8, 9, 7)) < 0.35
    cfg = cfg_from(occ, anchor=(-2, 3, 0))
    lab = label_components(cfg)
    for c in range(lab.n_components):
        assert lab.diameters[c] == brute_l1_diameter(lab.component_sites(c))


def test_torus_diameter_is_upper_bound():
    occ = np.ones((6, 6), bool)
    lab = label_components(cfg_from(occ, torus=True))
    # full torus: d * floor(N / 2)
    assert lab.diameters.tolist() == [6]


# ---------------------------------------------------------------- S_r and proxy


def test_restrict_r0_and_large_r():
    g = np.random.default_rng(1)
    cfg = cfg_from(g.random((12, 12)) < 0.5)
    assert np.array_equal(restrict_S_r(cfg, 0), cfg.occ)
    assert not restrict_S_r(cfg, 23).any()


def test_restrict_isolated_site_and_path():
    occ = np.zeros((5, 9), bool)
    occ[0, 0] = True           # isolated
    occ[3, 2:8] = True         # path of l1 length 5
    s = restrict_S_r(cfg_from(occ), 2)
    assert not s[0, 0] and s[3, 2:8].all() and s.sum() == 6


def test_proxy_all_ones():
    cfg = cfg_from(np.ones((6, 6)))
    for policy in ("diameter_span", "largest"):
        assert s_infty_proxy(cfg, policy).all()


def test_proxy_threshold():
    occ = np.zeros((20, 20), bool)
    occ[0, :] = True           # diameter 19
    occ[:, 19] = True          # joined: diameter 38 >= 30
    occ[10:12, 5:7] = True     # diameter 2
    occ[15, 3:5] = True
    cfg = cfg_from(occ)
    lab = label_components(cfg)
    assert sorted(lab.diameters.tolist()) == [1, 2, 38]
    proxy = s_infty_proxy(cfg, "diameter_span", lab)
    assert proxy[0, 0] and not proxy[10, 5] and not proxy[15, 3]


def test_proxy_largest_tie_break():
    # two congruent bars; the one holding the l-smaller site wins
    occ = np.zeros((7, 7), bool)
    occ[1, 1:6] = True
    occ[5, 1:6] = True
    cfg = cfg_from(occ, anchor=(-3, -3))
    proxy = s_infty_proxy(cfg, "largest")
    # bar at row -2 has closest site (-2, 0) with l = ell((-2, 0)); bar at 2 has (2, 0)
    want_row = 1 if ell((-2, 0)) < ell((2, 0)) else 5
    assert proxy[want_row, 1:6].all() and proxy.sum() == 5


# ---------------------------------------------------------------- chemical distance


def test_full_lattice_distance_is_l1():
    cfg = cfg_from(np.ones((8, 8)))
    assert chemical_distance(cfg, (0, 0), (3, 4)) == 7


def test_ring_distance():
    occ = np.ones((3, 3), bool)
    occ[1, 1] = False
    assert chemical_distance(cfg_from(occ), (0, 1), (2, 1)) == 4


def test_disconnected_is_inf():
    occ = np.zeros((3, 5), bool)
    occ[:, 0] = True
    occ[:, 4] = True
    assert chemical_distance(cfg_from(occ), (0, 0), (0, 4)) == math.inf


def test_distance_requires_occupied():
    cfg = cfg_from(np.zeros((3, 3)))
    with pytest.raises(PreconditionError):
        chemical_distance(cfg, (0, 0), (1, 1))


def test_metric_buffers_reset():
    g = np.random.default_rng(5)
    occ = g.random((20, 20)) < 0.7
    cfg = cfg_from(occ)
    m = ChemicalMetric(cfg)
    pts = np.argwhere(occ)[:15]
    for a in pts:
        for b in pts[::3]:
            assert m.distance(a, b) == bfs_distance(occ, a, b)


def test_ball_examples():
    cfg = cfg_from(np.ones((5, 5)))
    assert chemical_ball(cfg, (2, 2), 0).tolist() == [[2, 2]]
    assert len(chemical_ball(cfg, (2, 2), 1)) == 5
    assert len(chemical_ball(cfg, (0, 0), 1)) == 3


def test_ball_membership_agrees_with_distance():
    g = np.random.default_rng(6)
    occ = g.random((15, 15)) < 0.65
    cfg = cfg_from(occ)
    x = tuple(np.argwhere(occ)[0])
    ball = {tuple(p) for p in chemical_ball(cfg, x, 6)}
    for p in np.argwhere(occ):
        assert (tuple(p) in ball) == (bfs_distance(occ, x, p) <= 6)


def test_path_is_geodesic():
    g = np.random.default_rng(7)
    occ = g.random((16, 16)) < 0.7
    cfg = cfg_from(occ)
    m = ChemicalMetric(cfg)
    pts = np.argwhere(occ)
    for a, b in zip(pts[:10], pts[-10:]):
        p = m.path(a, b)
        if p is None:
            assert m.distance(a, b) == math.inf
            continue
        assert len(p) - 1 == m.distance(a, b)
        assert np.all(np.abs(np.diff(p, axis=0)).sum(axis=1) == 1)
        assert occ[tuple(p.T)].all()


# ---------------------------------------------------------------- labelling of Z^d and Phi


@pytest.mark.parametrize("d,radius", [(1, 6), (2, 5), (3, 3)])
def test_ell_is_the_enumeration_bijection(d, radius):
    ref = ell_by_enumeration(radius, d)
    for p, i in ref.items():
        assert ell(p) == i


def test_closest_in_set_member():
    V = np.array([[0, 0], [3, 1], [-2, 5]])
    assert closest_in_set((3, 1), V).tolist() == [3, 1]


def test_closest_in_set_tie_lexicographic():
    V = np.array([[1, 0], [-1, 0]])
    assert closest_in_set((0, 0), V).tolist() == [-1, 0]


@given(st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=12),
       st.tuples(st.integers(-6, 6), st.integers(-6, 6)),
       st.tuples(st.integers(-20, 20), st.integers(-20, 20)))
@settings(max_examples=200, deadline=None)
def test_closest_in_set_translation_covariant(V, x, z):
    V = np.array(V)
    x, z = np.array(x), np.array(z)
    assert np.array_equal(closest_in_set(x + z, V + z), closest_in_set(x, V) + z)
    best = min(V.tolist(), key=lambda v: ell(np.array(v) - x))
    assert closest_in_set(x, V).tolist() == best


# ---------------------------------------------------------------- pseudo distance


def test_pseudo_distance_properties():
    cfg = sample_bernoulli(0.75, Window.centered(10, 2), 3)
    proxy = s_infty_proxy(cfg)
    m = ChemicalMetric(cfg)
    sites = np.argwhere(proxy) - 10
    a, b = sites[0], sites[-1]
    assert pseudo_distance(cfg, proxy, a, b, m) == m.distance(a, b)
    assert pseudo_distance(cfg, proxy, (3, -2), (3, -2), m) == 0
    g = np.random.default_rng(2)
    for _ in range(30):
        x, y, z = g.integers(-10, 11, size=(3, 2))
        dxy = pseudo_distance(cfg, proxy, x, y, m)
        dxz = pseudo_distance(cfg, proxy, x, z, m)
        dzy = pseudo_distance(cfg, proxy, z, y, m)
        assert dxy <= dxz + dzy


# ---------------------------------------------------------------- double sweep


def _exact_diameter(cfg, comp_sites):
    m = ChemicalMetric(cfg)
    return max(int(m.distances_from(p).max()) for p in comp_sites)


def test_double_sweep_full_torus_exact():
    for N in (4, 5, 8):
        cfg = cfg_from(np.ones((N, N, N)), torus=True)
        bound, _, _ = double_sweep_diameter(cfg, (0, 0, 0))
        assert bound == 3 * (N // 2)


def test_double_sweep_lower_bound_and_tree():
    g = np.random.default_rng(4)
    for s in range(5):
        occ = g.random((8, 8, 8)) < 0.6
        cfg = cfg_from(occ, torus=True)
        lab = label_components(cfg)
        c = lab.largest()
        sites = np.argwhere(lab.labels == c)
        bound, _, _ = double_sweep_diameter(cfg, sites[0])
        assert bound <= _exact_diameter(cfg, sites)
    # a tree (comb): double sweep is exact
    occ = np.zeros((9, 9), bool)
    occ[4, :] = True
    occ[:, 2] = True
    occ[0:4, 6] = True
    cfg = cfg_from(occ)
    bound, _, _ = double_sweep_diameter(cfg, (4, 4))
    assert bound == _exact_diameter(cfg, np.argwhere(occ))
