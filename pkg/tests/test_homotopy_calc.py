"""Tests for group descriptors and the product splitting."""

import pytest

from modules.errors import LevelOutOfRange, ManifestError, UnknownManifold
from modules.homotopy_calc import (
    M_MAX,
    HomotopyCatalog,
    cyclic,
    direct_product,
    direct_sum,
    free_abelian,
    named,
    normalize,
    parse_group,
    product_table,
    split_product,
    trivial,
)

CATALOG_IDS = ["R1", "R2", "R3", "R4", "S1", "S2", "S3", "T2"]


def random_group(rng, depth=0):
    choice = rng.integers(0, 6 if depth < 3 else 4)
    if choice == 0:
        return trivial()
    if choice == 1:
        return free_abelian(int(rng.integers(0, 3)))
    if choice == 2:
        return cyclic(int(rng.integers(0, 5)))
    if choice == 3:
        return named(f"G{int(rng.integers(0, 3))}")
    parts = [random_group(rng, depth + 1) for _ in range(int(rng.integers(1, 4)))]
    return direct_sum(*parts) if choice == 4 else direct_product(*parts)


class TestNormalize:
    def test_trivial_summand_dropped(self):
        assert normalize(direct_sum(trivial(), free_abelian(1))) == free_abelian(1)

    def test_free_ranks_merge(self):
        assert normalize(direct_sum(free_abelian(1), free_abelian(1))) == free_abelian(2)

    def test_cyclic_edge_orders(self):
        assert normalize(cyclic(1)) == trivial()
        assert normalize(cyclic(0)) == free_abelian(1)

    def test_nested_sums_flatten(self):
        g = direct_sum(cyclic(3), direct_sum(free_abelian(1), cyclic(2)), free_abelian(2))
        assert str(normalize(g)) == "Z^3 + Z_2 + Z_3"

    def test_abelian_product_becomes_sum(self):
        assert normalize(direct_product(free_abelian(1), cyclic(2))) == normalize(direct_sum(free_abelian(1), cyclic(2)))

    def test_nonabelian_product_kept(self):
        g = normalize(direct_product(free_abelian(1), named("F2")))
        assert g.kind == "direct_product"
        assert not g.is_abelian
        assert str(g) == "F2 × Z"

    def test_idempotent_on_random_expressions(self, rng):
        for _ in range(200):
            g = normalize(random_group(rng))
            assert normalize(g) == g

    def test_parse_round_trip_on_random_expressions(self, rng):
        for _ in range(100):
            g = normalize(random_group(rng))
            assert parse_group(str(g)) == g


class TestParseGroup:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("0", trivial()),
            ("Z", free_abelian(1)),
            ("Z^2", free_abelian(2)),
            ("Z_2", cyclic(2)),
            ("Z + 0", free_abelian(1)),
            ("Z ⊕ Z", free_abelian(2)),
            ("pi1(Sigma2)", named("pi1(Sigma2)")),
        ],
    )
    def test_descriptors(self, text, expected):
        assert parse_group(text) == expected

    def test_bad_descriptor(self):
        with pytest.raises(ManifestError):
            parse_group("Z +")


class TestSplitProduct:
    @pytest.mark.parametrize("manifold", CATALOG_IDS)
    @pytest.mark.parametrize("m", range(1, M_MAX + 1))
    def test_line_fiber_is_identity(self, manifold, m):
        catalog = HomotopyCatalog()
        assert split_product(manifold, "interval", m) == catalog.group(manifold, m)

    @pytest.mark.parametrize("manifold", CATALOG_IDS)
    def test_circle_fiber_adds_integers_at_level_one(self, manifold):
        catalog = HomotopyCatalog()
        base = catalog.group(manifold, 1)
        assert split_product(manifold, "S1", 1) == normalize(direct_sum(base, free_abelian(1)))
        for m in range(2, M_MAX + 1):
            assert split_product(manifold, "S1", m) == catalog.group(manifold, m)

    @pytest.mark.parametrize("m,expected", [(1, "Z"), (2, "Z"), (3, "Z"), (4, "Z_2")])
    def test_sphere_times_circle(self, m, expected):
        assert str(split_product("S2", "S1", m)) == expected

    @pytest.mark.parametrize("first", CATALOG_IDS)
    @pytest.mark.parametrize("second", ["S1", "S2", "S3", "T2"])
    def test_commutative(self, first, second):
        for m in range(1, M_MAX + 1):
            assert split_product(first, second, m) == split_product(second, first, m)

    def test_catalog_consistency(self):
        catalog = HomotopyCatalog()
        for n in range(1, 5):
            assert all(catalog.group(f"R{n}", m).is_trivial for m in range(1, M_MAX + 1))
        assert catalog.group("S1", 1) == free_abelian(1)
        assert all(catalog.group("S1", m).is_trivial for m in range(2, M_MAX + 1))

    def test_nested_product_ids(self):
        assert str(split_product("S2 x S1", "S1", 1)) == "Z^2"
        assert str(split_product("T2 x S3", "interval", 3)) == "Z"

    def test_unknown_manifold(self):
        with pytest.raises(UnknownManifold):
            split_product("K3", "S1", 2)

    @pytest.mark.parametrize("m", [0, 5])
    def test_level_out_of_range(self, m):
        with pytest.raises(LevelOutOfRange):
            split_product("S2", "S1", m)


class TestUserEntries:
    def test_nonabelian_fundamental_group(self):
        catalog = HomotopyCatalog()
        catalog.register("Sigma2", ["pi1(Sigma2)", "0", "0", "0"], source="closed genus-2 surface")
        g = split_product("Sigma2", "S1", 1, catalog)
        assert g.kind == "direct_product"
        assert str(g) == "pi1(Sigma2) × Z"
        assert split_product("Sigma2", "interval", 2, catalog).is_trivial

    def test_user_entries_stay_local(self):
        HomotopyCatalog().register("Sigma2", ["pi1(Sigma2)"])
        with pytest.raises(UnknownManifold):
            split_product("Sigma2", "S1", 1)

    def test_higher_levels_must_be_abelian(self):
        with pytest.raises(ManifestError):
            HomotopyCatalog().register("bad", ["0", "F2"])

    def test_short_entry_limits_levels(self):
        catalog = HomotopyCatalog()
        catalog.register("P", ["Z_2"])
        with pytest.raises(LevelOutOfRange):
            catalog.group("P", 2)


class TestProductTable:
    def test_rows(self):
        table = product_table(["S2 x S1", "T2 x interval"])
        assert [str(g) for g in table["S2 x S1"]] == ["Z", "Z", "Z", "Z_2"]
        assert [str(g) for g in table["T2 x interval"]] == ["Z^2", "0", "0", "0"]

    def test_catalog_table_covers_all_entries(self):
        table = HomotopyCatalog().table()
        assert set(CATALOG_IDS) <= set(table)
        assert all(len(row) == M_MAX for row in table.values())
