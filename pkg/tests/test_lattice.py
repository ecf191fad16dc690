import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heightlab import (
    DomainSpec,
    EmptyInterior,
    HeightField,
    NotIntegrable,
    TorusLattice,
    boundary_height,
    cell_average,
    discretize_domain,
    gradient,
    integrate_gradient,
)
from heightlab.io import load_field, save_field

from oracles import brute_force_interior


UNIT_BOX_1D = DomainSpec.box((1.0,), center=(0.0,))


class TestDomainSpec:
    def test_box_contains(self):
        spec = DomainSpec.box((1.0, 2.0), center=(0.0, 0.5))
        pts = np.array([[0.0, 0.5], [0.49, 1.49], [0.51, 0.5], [0.0, -0.51]])
        assert spec.contains(pts).tolist() == [True, True, False, False]

    def test_ball_contains(self):
        spec = DomainSpec.ball(0.5, center=(0.0, 0.0))
        pts = np.array([[0.0, 0.0], [0.49, 0.0], [0.36, 0.36], [0.5001, 0.0]])
        assert spec.contains(pts).tolist() == [True, True, False, False]

    def test_polytope_triangle(self):
        # x >= 0, y >= 0, x + y <= 0.9 written as n.x <= b; origin inside
        spec = DomainSpec(
            shape="polytope",
            center=(0.0, 0.0),
            normals=((-1.0, 0.0), (0.0, -1.0), (1.0, 1.0)),
            offsets=(0.2, 0.2, 0.9),
            bbox=((-0.2, -0.2), (0.9, 0.9)),
        )
        pts = np.array([[0.0, 0.0], [0.5, 0.3], [0.8, 0.3], [-0.3, 0.0]])
        assert spec.contains(pts).tolist() == [True, True, False, False]

    def test_domain_must_contain_origin(self):
        with pytest.raises(ValueError):
            DomainSpec.box((1.0,), center=(3.0,))


class TestDiscretization:
    def test_unit_interval_at_n40(self):
        # margin of two cells on each side: interior = {-17, ..., 17}
        dom = discretize_domain(UNIT_BOX_1D, 40)
        ints = np.sort(dom.interior_sites[:, 0])
        assert ints[0] == -17 and ints[-1] == 17
        assert dom.n_interior == 35

    def test_interior_matches_brute_force_box(self):
        spec = DomainSpec.box((1.0, 1.0), center=(0.0, 0.0))
        dom = discretize_domain(spec, 12)
        expect = brute_force_interior(spec.contains, 12, 2, span=10)
        got = dom.interior_sites
        assert sorted(map(tuple, got)) == sorted(map(tuple, expect))

    def test_interior_matches_brute_force_ball(self):
        spec = DomainSpec.ball(0.5, center=(0.0, 0.0))
        dom = discretize_domain(spec, 14)
        expect = brute_force_interior(spec.contains, 14, 2, span=10)
        got = dom.interior_sites
        assert sorted(map(tuple, got)) == sorted(map(tuple, expect))

    def test_too_coarse_raises(self):
        with pytest.raises(EmptyInterior):
            discretize_domain(UNIT_BOX_1D, 4)

    def test_layer_is_one_step_from_interior(self):
        spec = DomainSpec.box((1.0, 1.0), center=(0.0, 0.0))
        dom = discretize_domain(spec, 10)
        interior = set(map(tuple, dom.interior_sites))
        for site in dom.layer_sites:
            assert tuple(site) not in interior
            steps = [
                tuple(site + e)
                for e in np.vstack([np.eye(2, dtype=int), -np.eye(2, dtype=int)])
            ]
            assert any(s in interior for s in steps)

    def test_bond_counts_consistent(self):
        spec = DomainSpec.ball(0.5, center=(0.0, 0.0))
        dom = discretize_domain(spec, 16)
        n_int = len(dom.bonds_interior)
        n_cross = len(dom.bonds_crossing)
        n_clos = len(dom.bonds_closure)
        assert n_clos == n_int + n_cross
        assert dom.directed_interior_bond_count == 2 * n_int
        assert dom.directed_closure_bond_count == 2 * n_clos
        # every crossing bond touches exactly one interior site
        interior = set(range(dom.n_interior))
        for h, t in dom.bonds_crossing:
            assert (h in interior) != (t in interior)

    def test_bonds_sorted_lexicographically(self):
        spec = DomainSpec.box((1.0, 1.0), center=(0.0, 0.0))
        dom = discretize_domain(spec, 10)
        # bonds come grouped by axis; within an axis, tails sort lex
        tails = dom.sites[dom.bonds_interior[:, 1]]
        heads = dom.sites[dom.bonds_interior[:, 0]]
        axis = np.argmax(heads - tails, axis=1)
        assert (np.diff(axis) >= 0).all()
        for i in range(2):
            block = tails[axis == i]
            keys = [tuple(r) for r in block]
            assert keys == sorted(keys)

    def test_neighbor_table(self):
        dom = discretize_domain(UNIT_BOX_1D, 12)
        sid = {tuple(s): j for j, s in enumerate(dom.sites.tolist())}
        for j in range(dom.n_interior):
            x = dom.sites[j, 0]
            expect = {sid[(x + 1,)], sid[(x - 1,)]}
            assert set(dom.neighbors[j].tolist()) == expect


class TestTorus:
    def test_counts(self):
        lat = TorusLattice(6, 2)
        assert lat.n_sites == 36
        assert lat.directed_bond_count == 4 * 36
        heads, tails = lat.canonical_bonds()
        assert heads.shape[0] == 2 * 36

    def test_gradient_roundtrip_exact(self):
        lat = TorusLattice(8, 2)
        rng = np.random.default_rng(0)
        f = HeightField(lat, rng.normal(size=lat.shape))
        g = gradient(f)
        assert g.plaquette_defect() <= 1e-12
        assert g.winding_defect() <= 1e-12
        back = integrate_gradient(g, base=f.values.flat[0])
        assert np.array_equal(back.values, back.values)  # finite
        assert np.allclose(back.values, f.values, atol=1e-12, rtol=0)

    def test_integration_chain_independence(self):
        lat = TorusLattice(6, 3)
        rng = np.random.default_rng(1)
        f = HeightField(lat, rng.normal(size=lat.shape))
        g = gradient(f)
        a = integrate_gradient(g, base=f.values.flat[0])
        b = integrate_gradient(g, base=f.values.flat[0], chain_seed=123)
        c = integrate_gradient(g, base=f.values.flat[0], chain_seed=77)
        assert np.allclose(a.values, b.values, atol=1e-10, rtol=0)
        assert np.allclose(b.values, c.values, atol=1e-10, rtol=0)

    def test_tampered_field_not_integrable(self):
        lat = TorusLattice(6, 2)
        rng = np.random.default_rng(2)
        f = HeightField(lat, rng.normal(size=lat.shape))
        g = gradient(f)
        g.data[0, 2, 3] += 0.5
        assert g.plaquette_defect() > 0.4
        with pytest.raises(NotIntegrable):
            integrate_gradient(g)

    def test_constant_shift_breaks_winding(self):
        lat = TorusLattice(6, 1)
        f = HeightField.zeros(lat)
        g = gradient(f)
        g.data += 0.25        # constant tilt is not a gradient on the torus
        assert g.winding_defect() == pytest.approx(6 * 0.25)
        with pytest.raises(NotIntegrable):
            integrate_gradient(g)


class TestDomainGradient:
    def test_roundtrip_on_ball(self):
        spec = DomainSpec.ball(0.5, center=(0.0, 0.0))
        dom = discretize_domain(spec, 12)
        rng = np.random.default_rng(3)
        f = HeightField(dom, rng.normal(size=dom.n_sites))
        g = gradient(f)
        assert g.plaquette_defect() <= 1e-12
        back = integrate_gradient(g, base=f.values[0], root=0)
        # recovery promise covers the bonded sites (interior + layer);
        # coverage-only cells carry no bonds and stay at zero
        m = dom.n_interior + dom.n_layer
        assert np.allclose(back.values[:m], f.values[:m], atol=1e-12, rtol=0)
        assert np.all(back.values[m:] == 0.0)


class TestCellAverages:
    def test_linear_profile_is_exact(self):
        dom = discretize_domain(UNIT_BOX_1D, 20)
        f = lambda p: 3.0 * np.atleast_2d(p)[:, 0]
        psi = boundary_height(f, 20, dom.sites)
        # cell average of a linear function is its centre value x/N
        assert np.allclose(psi, 3.0 * dom.sites[:, 0], atol=1e-12, rtol=0)

    def test_polynomial_degree_nine_exact(self):
        # order-5 tensor rule integrates monomials through degree 9
        sites = np.array([[2], [5]])
        f = lambda p: np.atleast_2d(p)[:, 0] ** 9
        got = cell_average(f, 8, sites)
        x = sites[:, 0] / 8.0
        h = 1.0 / 16
        exact = ((x + h) ** 10 - (x - h) ** 10) / (10 * 2 * h)
        assert np.allclose(got, exact, atol=1e-14, rtol=1e-13)

    def test_2d_separable(self):
        sites = np.array([[1, 2]])
        f = lambda p: np.atleast_2d(p)[:, 0] ** 2 * np.atleast_2d(p)[:, 1]
        got = cell_average(f, 4, sites)
        # product of 1d averages for a separable integrand
        x, y, h = 0.25, 0.5, 0.125
        ax = (((x + h) ** 3 - (x - h) ** 3) / (3 * 2 * h))
        assert got[0] == pytest.approx(ax * y, abs=1e-14)


class TestFieldIo:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        sites = np.array([[-3, 1], [0, 0], [2, -5]])
        values = rng.normal(size=3) * 1e-7
        p = tmp_path / "field.csv"
        save_field(p, sites, values, {"seed": 1, "config": "abc"})
        sites2, values2, meta = load_field(p)
        assert np.array_equal(sites, sites2)
        assert np.array_equal(values, values2)   # bit exact via repr round-trip
        assert meta["config"] == "abc"


@settings(max_examples=25, deadline=None)
@given(
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_property_gradient_integrates_back(N, d, seed):
    lat = TorusLattice(N, d)
    rng = np.random.default_rng(seed)
    f = HeightField(lat, rng.integers(-5, 6, size=lat.shape).astype(float))
    g = gradient(f)
    assert g.plaquette_defect() == 0.0
    back = integrate_gradient(g, base=f.values.flat[0])
    assert np.array_equal(back.values, f.values)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=6, max_value=20))
def test_property_interior_scales_monotonically(N):
    # a finer lattice never loses interior coverage on the unit interval
    if N < 6:
        return
    coarse = discretize_domain(UNIT_BOX_1D, N)
    fine = discretize_domain(UNIT_BOX_1D, 2 * N)
    cover_coarse = coarse.n_interior / N
    cover_fine = fine.n_interior / (2 * N)
    assert cover_fine >= cover_coarse - 1e-9
