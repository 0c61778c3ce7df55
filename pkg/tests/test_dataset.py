import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memshield import catalog as cat
from memshield.dataset import (
    Dataset,
    LabelInfo,
    fit_apply_minmax,
    fit_minmax,
    load_dataset,
    parse_category,
    preprocess,
    validate_counts,
)
from memshield.errors import (
    CategoryParseError,
    CountValidationError,
    RowParseError,
    SchemaError,
)
from memshield.fixtures import FixtureSpec, make_fixture, malmem_profile_spec

# --- parse_category -----------------------------------------------------------


def test_parse_benign():
    assert parse_category("Benign") == LabelInfo(0)
    assert parse_category("benign") == LabelInfo(0)


def test_parse_malware_with_hash_suffix():
    info = parse_category("Ransomware-Ako-0d6e6ab0cafe01")
    assert info == LabelInfo(1, "Ransomware", "Ako")


def test_parse_spyware_transponder():
    info = parse_category("Spyware-Transponder-deadbeef")
    assert info == LabelInfo(1, "Spyware", "Transponder")


def test_parse_alias_tokens():
    assert parse_category("Trojan-Zeus-x").subtype == "Zeus"
    assert parse_category("Spyware-CWS-x").subtype == "CoolWebSearch"
    assert parse_category("Spyware-180solutions-x").subtype == "180Solutions"
    assert parse_category("Ransomware-MAZE-x").subtype == "MAZE"


@pytest.mark.parametrize(
    "raw",
    ["", "  ", "Ransomware", "Malware-Ako-x", "Ransomware-NotASubtype-x",
     "Spyware-Ako-x"],  # Ako is Ransomware, not Spyware
)
def test_parse_errors(raw):
    with pytest.raises(CategoryParseError):
        parse_category(raw)


def test_labelinfo_consistency_enforced():
    with pytest.raises(ValueError):
        LabelInfo(0, "Spyware", "Gator")
    with pytest.raises(ValueError):
        LabelInfo(1)


# --- load_dataset -------------------------------------------------------------


def _write_fixture_csv(tmp_path, name="fix.csv", **kwargs):
    defaults = dict(n_benign=12, n_per_subtype=6, n_subtypes=2,
                    separation=3.0, catalog=cat.MALMEM_CATALOG, n_features=55)
    defaults.update(kwargs)
    ds = make_fixture(FixtureSpec(**defaults), seed=5)
    path = tmp_path / name
    ds.write_csv(path)
    return path, ds


def test_load_roundtrip(tmp_path):
    path, original = _write_fixture_csv(tmp_path)
    loaded = load_dataset(path, count_check=False)
    assert len(loaded) == len(original)
    assert loaded.feature_names == cat.MALMEM_CATALOG.names
    assert loaded.class_counts() == original.class_counts()
    assert loaded.subtype_counts() == original.subtype_counts()
    np.testing.assert_allclose(loaded.X, original.X, rtol=0, atol=1e-12)


def test_load_missing_file():
    with pytest.raises(SchemaError):
        load_dataset("/nonexistent/never.csv")


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(SchemaError):
        load_dataset(path)


def test_load_rejects_missing_feature_column(tmp_path):
    path, _ = _write_fixture_csv(tmp_path)
    text = path.read_text().splitlines()
    header = text[0].split(",")
    drop = header.index("pslist.nproc")
    rows = [",".join(line.split(",")[:drop] + line.split(",")[drop + 1:]) for line in text]
    bad = tmp_path / "missing.csv"
    bad.write_text("\n".join(rows))
    with pytest.raises(SchemaError, match="pslist.nproc"):
        load_dataset(bad, count_check=False)


def test_load_rejects_unknown_column(tmp_path):
    path, _ = _write_fixture_csv(tmp_path)
    lines = path.read_text().splitlines()
    lines[0] += ",mystery"
    lines[1:] = [line + ",1.0" for line in lines[1:]]
    bad = tmp_path / "extra.csv"
    bad.write_text("\n".join(lines))
    with pytest.raises(SchemaError, match="mystery"):
        load_dataset(bad, count_check=False)


def test_load_reports_bad_cell_row(tmp_path):
    path, _ = _write_fixture_csv(tmp_path)
    lines = path.read_text().splitlines()
    cells = lines[3].split(",")
    cells[5] = "not-a-number"
    lines[3] = ",".join(cells)
    bad = tmp_path / "cell.csv"
    bad.write_text("\n".join(lines))
    with pytest.raises(RowParseError) as err:
        load_dataset(bad, count_check=False)
    assert err.value.row == 2  # third data row


def test_load_rejects_class_category_disagreement(tmp_path):
    path, _ = _write_fixture_csv(tmp_path)
    lines = path.read_text().splitlines()
    first = lines[1].split(",")
    first[-1] = "Malware" if first[0] == "Benign" else "Benign"
    lines[1] = ",".join(first)
    bad = tmp_path / "clash.csv"
    bad.write_text("\n".join(lines))
    with pytest.raises(RowParseError, match="disagrees"):
        load_dataset(bad, count_check=False)


def test_count_check_rejects_partial_files(tmp_path):
    path, _ = _write_fixture_csv(tmp_path)
    with pytest.raises(CountValidationError):
        load_dataset(path)  # count check on by default


def test_count_check_passes_on_published_distribution(tmp_path):
    ds = make_fixture(malmem_profile_spec(), seed=2)
    assert ds.class_counts() == (cat.BENIGN_COUNT, cat.MALWARE_COUNT)
    validate_counts(ds)  # no error
    assert ds.subtype_counts() == cat.SUBTYPE_COUNTS


def test_ten_row_fixture_counts(tmp_path):
    # hand-written file: 4 benign rows and 6 malware rows
    features = ",".join(cat.MALMEM_CATALOG.names)
    rows = ["Category," + features + ",Class"]
    values = ",".join(["1.0"] * 55)
    for i in range(4):
        rows.append(f"Benign,{values},Benign")
    for subtype in ["Zeus", "Ako", "Gator", "Pysa", "Scar", "TIBS"]:
        token = cat.TYPE_OF_SUBTYPE[subtype].replace("TrojanHorse", "Trojan")
        rows.append(f"{token}-{subtype}-00ff,{values},Malware")
    path = tmp_path / "ten.csv"
    path.write_text("\n".join(rows) + "\n")
    ds = load_dataset(path, count_check=False)
    assert len(ds) == 10
    assert ds.class_counts() == (4, 6)


# --- preprocess ---------------------------------------------------------------


def test_preprocess_drops_the_three_invariant_features():
    ds = make_fixture(malmem_profile_spec(scale=0.01), seed=7)
    out = preprocess(ds)
    assert out.n_features == 52
    assert len(out) == len(ds)
    for name in cat.MALMEM_CATALOG.invariant_names:
        assert name not in out.feature_names
    assert "pslist.nprocs64bit" not in out.feature_names


def test_preprocess_is_idempotent():
    ds = make_fixture(malmem_profile_spec(scale=0.01), seed=7)
    once = preprocess(ds)
    twice = preprocess(once)
    assert twice.feature_names == once.feature_names
    assert np.array_equal(twice.X, once.X)


def test_preprocess_keeps_synthetic_catalogs_untouched():
    ds = make_fixture(FixtureSpec(n_benign=10, n_per_subtype=5, n_features=4), seed=1)
    assert preprocess(ds) is ds


# --- min-max scaling ----------------------------------------------------------


def _column_dataset(train_col, test_col):
    from memshield.catalog import FeatureCatalog, FeatureEntry

    catle = FeatureCatalog((FeatureEntry("f0", "Synthetic"),))

    def build(col, offset):
        col = np.asarray(col, dtype=float).reshape(-1, 1)
        n = len(col)
        return Dataset(catle, col, np.zeros(n, dtype=np.int8),
                       np.full(n, "", "U32"), np.full(n, "", "U32"),
                       np.arange(offset, offset + n))

    return build(train_col, 0), build(test_col, 1000)


def test_minmax_affine_map():
    train, test = _column_dataset([0.0, 5.0, 10.0], [2.5])
    train_s, test_s, params = fit_apply_minmax(train, test)
    np.testing.assert_array_equal(train_s.X[:, 0], [0.0, 0.5, 1.0])
    assert test_s.X[0, 0] == 0.25
    assert not params.degenerate[0]


def test_minmax_degenerate_column_maps_to_zero():
    train, test = _column_dataset([3.0, 3.0, 3.0], [7.0])
    train_s, test_s, params = fit_apply_minmax(train, test)
    assert (train_s.X == 0.0).all()
    assert (test_s.X == 0.0).all()
    assert params.degenerate[0]


def test_minmax_does_not_clamp_test_values():
    train, test = _column_dataset([0.0, 10.0], [12.0])
    _, test_s, params = fit_apply_minmax(train, test)
    assert test_s.X[0, 0] == pytest.approx(1.2)
    assert params.out_of_range_seen[0]


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=30),
)
def test_minmax_train_output_in_unit_interval(values):
    train, _ = _column_dataset(values, [0.0])
    params = fit_minmax(train)
    out = params.transform(train.X)
    if not params.degenerate[0]:
        assert out.min() >= 0.0 and out.max() <= 1.0
    else:
        assert (out == 0.0).all()


# --- Dataset invariants ---------------------------------------------------------


def test_dataset_rejects_non_finite_values():
    from memshield.catalog import FeatureCatalog, FeatureEntry

    catle = FeatureCatalog((FeatureEntry("f0", "Synthetic"),))
    with pytest.raises(ValueError, match="non-finite"):
        Dataset(catle, np.array([[np.nan]]), np.array([0]),
                np.array([""]), np.array([""]), np.array([0]))


def test_dataset_arrays_are_read_only(binary_ds):
    with pytest.raises(ValueError):
        binary_ds.X[0, 0] = 99.0


def test_instance_view(multi_ds):
    inst = multi_ds.instance(0)
    assert inst.label_info.label == 0
    assert inst.source_row == 0
    assert len(inst.features) == multi_ds.n_features
    last = multi_ds.instance(len(multi_ds) - 1)
    assert last.label_info.label == 1
    assert last.label_info.subtype in cat.SUBTYPE_NAMES
