import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedsurvey.dataset import (
    BalanceWarning,
    FeatureSpec,
    Schema,
    SiteSpec,
    SiteTable,
    SynthSpec,
    balanced_test_subsets,
    default_synth_spec,
    generate_synthetic,
    load_csv,
    make_fold_plan,
    subsample_training,
    supersample_balance,
    synthetic_schema,
    write_csv,
)
from fedsurvey.errors import (
    BoundsViolation,
    EmptyAfterFiltering,
    InvalidConfig,
    InvalidSpec,
    MissingColumn,
    OneClassOnly,
    SiteTooSmall,
)
from fedsurvey.stats import cohens_d

SCHEMA = Schema((FeatureSpec("a"), FeatureSpec("b", "ordinal", (0, 10))), FeatureSpec("y"), "regression")


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- schema ------------------------------------------------------------------

def test_feature_bounds_must_be_ordered():
    with pytest.raises(InvalidSpec):
        FeatureSpec("a", bounds=(3, 3))


def test_schema_rejects_duplicate_names():
    with pytest.raises(InvalidSpec):
        Schema((FeatureSpec("a"), FeatureSpec("a")), FeatureSpec("y"))


def test_classification_target_must_be_binary():
    with pytest.raises(InvalidSpec):
        Schema((FeatureSpec("a"),), FeatureSpec("y"), "classification")


# -- load_csv ----------------------------------------------------------------

def test_load_csv_drops_incomplete_row(tmp_path):
    path = write(tmp_path, "site,a,b,y\n1,0.5,2,1.0\n1,,3,2.0\n2,1.5,4,3.0\n")
    tables = load_csv(path, SCHEMA, "site")
    assert sum(t.n for t in tables) == 2
    assert tables.dropped == 1


def test_load_csv_treats_na_and_garbage_as_missing(tmp_path):
    path = write(tmp_path, "site,a,b,y\nx,NA,1,1\nx,abc,1,1\nx,1,1,1\n")
    tables = load_csv(path, SCHEMA, "site")
    assert [t.n for t in tables] == [1]
    assert tables.dropped == 2


def test_load_csv_missing_target_column(tmp_path):
    path = write(tmp_path, "site,a,b\n1,0,1\n")
    with pytest.raises(MissingColumn) as err:
        load_csv(path, SCHEMA, "site")
    assert err.value.name == "y"


def test_load_csv_empty_site(tmp_path):
    path = write(tmp_path, "site,a,b,y\n1,0,1,1\n2,,1,1\n")
    with pytest.raises(EmptyAfterFiltering) as err:
        load_csv(path, SCHEMA, "site")
    assert err.value.site == "2"


def test_load_csv_bounds_violation(tmp_path):
    path = write(tmp_path, "site,a,b,y\n1,0,11,1\n")
    with pytest.raises(BoundsViolation) as err:
        load_csv(path, SCHEMA, "site")
    assert err.value.feature == "b"


def test_load_csv_keeps_site_and_row_order(tmp_path):
    path = write(tmp_path, "site,a,b,y\nB,1,1,1\nA,2,1,2\nB,3,1,3\n")
    tables = load_csv(path, SCHEMA, "site")
    assert [t.site_id for t in tables] == ["B", "A"]
    assert tables[0].y.tolist() == [1.0, 3.0]


def test_table1_sizes_round_trip_through_csv(tmp_path):
    spec = default_synth_spec("regression", seed=3, n_features=3)
    tables = generate_synthetic(spec)
    path = tmp_path / "synth.csv"
    write_csv(path, tables, spec.schema)
    loaded = load_csv(path, spec.schema, "site")
    assert [t.n for t in loaded] == [2415, 1550, 2530, 2220, 933]
    assert sum(t.n for t in loaded) == 9648
    for a, b in zip(tables, loaded):
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)


# -- folds -------------------------------------------------------------------

def test_fold_sizes_divisible():
    t = SiteTable("s", np.zeros((10, 1)), np.zeros(10))
    plan = make_fold_plan([t], 5, seed=0)
    assert [len(plan.test_indices("s", f)) for f in range(5)] == [2] * 5


def test_folds_independent_of_site_order(regression_sites):
    a = make_fold_plan(regression_sites, 5, seed=9)
    b = make_fold_plan(regression_sites[::-1], 5, seed=9)
    for t in regression_sites:
        np.testing.assert_array_equal(a.assignment[t.site_id], b.assignment[t.site_id])


def test_global_test_split_size_for_table1_layout():
    tables = [SiteTable(str(i), np.zeros((n, 1)), np.zeros(n)) for i, n in enumerate((2415, 1550, 2530, 2220, 933))]
    plan = make_fold_plan(tables, 5, seed=42)
    for fold in range(5):
        size = sum(len(plan.test_indices(t.site_id, fold)) for t in tables)
        assert abs(size - 1930) <= 5


@given(st.lists(st.integers(2, 40), min_size=1, max_size=4), st.integers(2, 6), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_fold_partition_property(sizes, k, seed):
    tables = [SiteTable(f"s{i}", np.zeros((n, 1)), np.zeros(n)) for i, n in enumerate(sizes)]
    if min(sizes) < k:
        with pytest.raises(SiteTooSmall):
            make_fold_plan(tables, k, seed)
        return
    plan = make_fold_plan(tables, k, seed)
    for t in tables:
        parts = [plan.test_indices(t.site_id, f) for f in range(k)]
        assert sorted(np.concatenate(parts).tolist()) == list(range(t.n))
        assert all(t.n // k <= len(p) <= math.ceil(t.n / k) for p in parts)


def test_fold_plan_rejects_k_below_two(regression_sites):
    with pytest.raises(InvalidConfig):
        make_fold_plan(regression_sites, 1, 0)


# -- balancing ---------------------------------------------------------------

def _binary(pos, neg):
    y = np.array([1.0] * pos + [0.0] * neg)
    return SiteTable("s", np.arange(len(y), dtype=float)[:, None], y)


def test_supersample_forced_counts():
    t = _binary(10, 4)
    bal = supersample_balance(t, 1)
    y = t.y[bal.indices]
    assert (y == 1).sum() == 10 and (y == 0).sum() == 10
    assert set(range(14)) <= set(bal.indices.tolist())
    assert bal.provenance == "supersampled"


def test_supersample_identity_when_balanced():
    bal = supersample_balance(_binary(7, 7), 1)
    assert bal.indices.tolist() == list(range(14))


def test_supersample_single_negative_repeated():
    t = _binary(100, 1)
    bal = supersample_balance(t, 5)
    assert (bal.indices == 100).sum() == 100


def test_supersample_one_class():
    with pytest.raises(OneClassOnly):
        supersample_balance(_binary(5, 0), 1)


def test_balanced_subsets_disjoint_and_balanced():
    y = np.array([0.0] * 40 + [1.0] * 8)
    subsets = balanced_test_subsets(y, 4, seed=3)
    assert [len(s) for s in subsets] == [16] * 4
    negs = [set(s.indices[y[s.indices] == 0].tolist()) for s in subsets]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not negs[i] & negs[j]


def test_balanced_subsets_degrade_with_warning():
    y = np.array([0.0] * 10 + [1.0] * 8)
    with pytest.warns(BalanceWarning):
        subsets = balanced_test_subsets(y, 4, seed=3)
    assert len(subsets) == 1


def test_balanced_subsets_exhaust_larger_class():
    y = np.array([0.0] * 32 + [1.0] * 8)
    subsets = balanced_test_subsets(y, 4, seed=11)
    union = set().union(*(set(s.indices[y[s.indices] == 0].tolist()) for s in subsets))
    assert union == set(range(32))


@given(st.integers(1, 20), st.integers(1, 120), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_balanced_subsets_property(n_pos, n_neg, seed):
    y = np.array([1.0] * n_pos + [0.0] * n_neg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BalanceWarning)
        subsets = balanced_test_subsets(y, 4, seed)
    assert len(subsets) == min(4, max(n_pos, n_neg) // min(n_pos, n_neg))
    seen = set()
    for s in subsets:
        assert (y[s.indices] == 1).sum() == (y[s.indices] == 0).sum()
        assert len(set(s.indices.tolist())) == len(s)
        larger = 1.0 if n_pos > n_neg else 0.0
        rows = set(s.indices[y[s.indices] == larger].tolist()) if n_pos != n_neg else set()
        assert not rows & seen
        seen |= rows


# -- subsampling -------------------------------------------------------------

def test_subsample_quarter_of_352():
    t = SiteTable("s", np.zeros((352, 1)), np.zeros(352))
    assert subsample_training([t], 0.25, seed=0)[0].n == 88


def test_subsample_identity_at_one(regression_sites):
    out = subsample_training(regression_sites, 1.0, seed=0)
    assert all(a is b for a, b in zip(out, regression_sites))


def test_subsample_seeds_differ_without_duplicates():
    t = SiteTable("s", np.arange(10, dtype=float)[:, None], np.zeros(10))
    a = subsample_training([t], 0.5, seed=1)[0].X[:, 0]
    b = subsample_training([t], 0.5, seed=2)[0].X[:, 0]
    assert len(set(a)) == 5 and len(set(b)) == 5
    assert set(a) != set(b)


def test_subsample_too_small():
    t = SiteTable("s", np.zeros((5, 1)), np.zeros(5))
    with pytest.raises(SiteTooSmall):
        subsample_training([t], 0.1, seed=0)


# -- synthetic ---------------------------------------------------------------

def test_synthetic_homogeneous_means_agree():
    schema = synthetic_schema(4)
    spec = SynthSpec(tuple(SiteSpec(str(i), 2000) for i in range(3)), schema, seed=5)
    tables = generate_synthetic(spec)
    for f in range(4):
        means = [t.X[:, f].mean() for t in tables]
        se = math.sqrt(2 / 2000)
        assert max(means) - min(means) < 3 * se * 2


def test_synthetic_shift_gives_expected_effect_size():
    schema = synthetic_schema(3)
    spec = SynthSpec((SiteSpec("a", 3000, (2.0,)), SiteSpec("b", 3000)), schema, seed=8)
    a, b = generate_synthetic(spec)
    assert abs(cohens_d(a.X[:, 0], b.X[:, 0]) - 2.0) < 0.2


def test_synthetic_is_deterministic():
    spec = default_synth_spec("classification", seed=4, n_features=5)
    for a, b in zip(generate_synthetic(spec), generate_synthetic(spec)):
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)


def test_default_classification_allows_four_test_subsets():
    tables = generate_synthetic(default_synth_spec("classification", seed=42))
    y = np.concatenate([t.y for t in tables])
    assert 4 * y.sum() <= (y == 0).sum()


@pytest.mark.parametrize("kwargs", [{"noise_sd": 0.0}, {"sites": ()}])
def test_synthetic_invalid_spec(kwargs):
    base = dict(sites=(SiteSpec("a", 20),), schema=synthetic_schema(2))
    base.update(kwargs)
    with pytest.raises(InvalidSpec):
        generate_synthetic(SynthSpec(**base))


def test_synthetic_site_too_small():
    with pytest.raises(InvalidSpec):
        generate_synthetic(SynthSpec((SiteSpec("a", 9),), synthetic_schema(2)))
