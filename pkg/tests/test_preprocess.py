import numpy as np
import pytest

from pfcpbench.corpus import SynthConfig, default_schema, synth_benign
from pfcpbench.errors import GuidelineViolation, PipelineError
from pfcpbench.preprocess import (
    DEFAULT_GT1_PATTERNS,
    PipelineModel,
    apply_imputer,
    apply_scaler,
    drop_environment_features,
    drop_uninformative,
    filter_control_plane,
    fit_imputer,
    fit_pipeline,
    fit_scaler,
    transform,
)
from pfcpbench.traffic import (
    MISSING_CODE,
    CategoricalDomain,
    ClassLabel,
    FeatureDescriptor,
    FeatureSchema,
    LabeledDataset,
    NumericDomain,
)



def make_dataset(columns, n, labels=None, protocols=None, env=None):
    """columns: name -> (kind, values); categorical values are codes."""
    feats = []
    cats, nums = [], []
    for name, (kind, values) in columns.items():
        proto = (protocols or {}).get(name, "pfcp")
        flagged = (env or {}).get(name, False)
        if kind == "cat":
            feats.append(
                FeatureDescriptor(name, "categorical", proto, flagged, CategoricalDomain(("a", "b", "c")))
            )
            cats.append(values)
        else:
            feats.append(
                FeatureDescriptor(name, "numerical", proto, flagged, NumericDomain(-1e9, 1e9))
            )
            nums.append(values)
    schema = FeatureSchema(features=tuple(feats))
    cats = np.column_stack(cats) if cats else np.empty((n, 0), dtype=np.int64)
    nums = np.column_stack(nums) if nums else np.empty((n, 0))
    return LabeledDataset(schema, cats, nums, labels or [ClassLabel.NORMAL] * n)


# --- environment fields ------------------------------------------------------


def test_gt1_drops_endpoints():
    schema = default_schema()
    ds = synth_benign(SynthConfig(n_benign=20, seed=1), schema)
    out, report = drop_environment_features(ds)
    for name in ("ip.src", "ip.dst", "udp.srcport", "udp.dstport"):
        assert report[name] == "GT1"
        assert name not in out.schema.names
    assert "pfcp.msg_type" in out.schema.names


def test_gt1_identity_when_clean():
    ds = make_dataset({"pfcp.a": ("num", np.arange(5.0))}, 5)
    out, report = drop_environment_features(ds)
    assert report == {}
    assert out.schema.names == ds.schema.names


def test_gt1_blocklist_is_extensible():
    ds = make_dataset({"pfcp.weird": ("num", np.arange(4.0))}, 4)
    out, report = drop_environment_features(ds, patterns=DEFAULT_GT1_PATTERNS + ("pfcp.weird",))
    assert report == {"pfcp.weird": "GT1"}
    assert len(out.schema) == 0


# --- control plane filtering --------------------------------------------------


def test_gt2_drops_tcp_columns_and_rows():
    n = 4
    ds = make_dataset(
        {
            "tcp.len": ("num", np.array([10.0, np.nan, 11.0, np.nan])),
            "pfcp.len": ("num", np.array([np.nan, 50.0, np.nan, 60.0])),
            "udp.len": ("num", np.array([np.nan, 58.0, np.nan, 68.0])),
        },
        n,
        protocols={"tcp.len": "tcp", "pfcp.len": "pfcp", "udp.len": "udp"},
    )
    out, report = filter_control_plane(ds)
    assert report == {"tcp.len": "GT2"}
    assert "tcp.len" not in out.schema.names
    assert len(out) == 2  # TCP-only rows removed


def test_gt2_identity_for_pure_pfcp():
    ds = make_dataset({"pfcp.a": ("num", np.arange(3.0))}, 3)
    out, report = filter_control_plane(ds)
    assert report == {}
    assert len(out) == 3


# --- uninformative columns -----------------------------------------------------


def test_gt3_constant_and_duplicate_and_all_missing():
    n = 6
    ds = make_dataset(
        {
            "pfcp.const": ("num", np.full(n, 7.0)),
            "pfcp.a": ("num", np.arange(float(n))),
            "pfcp.b": ("num", np.arange(float(n))),  # exact duplicate of a
            "pfcp.gone": ("num", np.full(n, np.nan)),
            "pfcp.keep": ("num", np.array([1.0, 2, 1, 2, 3, 1])),
        },
        n,
    )
    out, report = drop_uninformative(ds)
    assert report["pfcp.const"] == "GT3:constant"
    assert report["pfcp.b"] == "GT3:duplicate-of-pfcp.a"
    assert report["pfcp.gone"] == "GT3:all-missing"
    assert set(out.schema.names) == {"pfcp.a", "pfcp.keep"}


def test_gt3_identity_for_varying_columns():
    ds = make_dataset(
        {"pfcp.a": ("num", np.arange(4.0)), "pfcp.b": ("num", np.arange(4.0) ** 2)}, 4
    )
    out, report = drop_uninformative(ds)
    assert report == {}
    assert out.schema.names == ds.schema.names


# --- imputation -----------------------------------------------------------------


def test_categorical_mode_imputation():
    ds = make_dataset(
        {"pfcp.kind": ("cat", np.array([0, 0, 1, MISSING_CODE]))}, 4
    )
    state = fit_imputer(ds)
    assert state.cat_modes["pfcp.kind"] == 0
    out = apply_imputer(state, ds)
    assert out.categorical[:, 0].tolist() == [0, 0, 1, 0]


def test_regression_imputation_learns_linear_relation():
    # y = 2x exactly on observed pairs; the missing y at x = 3 must come
    # back as 6 (closed-form least squares on the toy pairs)
    x = np.array([0.0, 1.0, 2.0, 4.0, 5.0, 3.0])
    y = np.array([0.0, 2.0, 4.0, 8.0, 10.0, np.nan])
    ds = make_dataset({"pfcp.x": ("num", x), "pfcp.y": ("num", y)}, 6)
    state = fit_imputer(ds, tol=1e-9)
    out = apply_imputer(state, ds)
    assert out.numerical[5, 1] == pytest.approx(6.0, abs=1e-6)


def test_imputer_identity_without_missing():
    ds = make_dataset({"pfcp.a": ("num", np.arange(5.0))}, 5)
    out = apply_imputer(fit_imputer(ds), ds)
    assert np.array_equal(out.numerical, ds.numerical)


def test_imputer_all_missing_fallback(caplog):
    ds = make_dataset(
        {"pfcp.a": ("num", np.full(3, np.nan)), "pfcp.b": ("num", np.arange(3.0))}, 3
    )
    with caplog.at_level("WARNING"):
        state = fit_imputer(ds)
    assert state.num_medians["pfcp.a"] == 0.0
    assert any("entirely missing" in r.message for r in caplog.records)


# --- scaling ---------------------------------------------------------------------


def test_scaler_median_iqr_convention():
    # train column [1..5]: median 3, IQR 2, so 5 -> 1.0
    ds = make_dataset({"pfcp.a": ("num", np.array([1.0, 2, 3, 4, 5]))}, 5)
    state = fit_scaler(ds)
    assert state.stats["pfcp.a"] == (3.0, 2.0, 4.0)
    out = apply_scaler(state, ds)
    assert out.numerical[:, 0].tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_scaler_degenerate_centers_only():
    ds = make_dataset({"pfcp.a": ("num", np.full(5, 4.0))}, 5)
    out = apply_scaler(fit_scaler(ds), ds)
    assert out.numerical[:, 0].tolist() == [0.0] * 5


def test_scaler_leaves_categoricals_untouched():
    ds = make_dataset(
        {"pfcp.kind": ("cat", np.array([0, 1, 2])), "pfcp.a": ("num", np.array([1.0, 2, 3]))}, 3
    )
    out = apply_scaler(fit_scaler(ds), ds)
    assert np.array_equal(out.categorical, ds.categorical)


# --- full pipeline ----------------------------------------------------------------


def test_pipeline_requires_benign_training():
    ds = make_dataset({"pfcp.a": ("num", np.arange(4.0))}, 4,
                      labels=[ClassLabel.NORMAL] * 3 + [ClassLabel.FLOOD])
    with pytest.raises(GuidelineViolation) as err:
        fit_pipeline(ds)
    assert err.value.guideline == "GT4"


def test_pipeline_rejects_empty_survivors():
    ds = make_dataset({"ip.src": ("cat", np.array([0, 1, 2]))}, 3, env={"ip.src": True})
    with pytest.raises(PipelineError):
        fit_pipeline(ds)


def test_pipeline_transform_deterministic_and_stateless():
    schema = default_schema()
    train = synth_benign(SynthConfig(n_benign=300, seed=3), schema)
    other = synth_benign(SynthConfig(n_benign=50, seed=4), schema)
    model = fit_pipeline(train)
    digest = model.state_hash()
    a = transform(model, other)
    b = transform(model, other)
    assert np.array_equal(a.numerical, b.numerical)
    assert np.array_equal(a.categorical, b.categorical)
    assert model.state_hash() == digest


def test_pipeline_output_is_clean_and_normalized():
    schema = default_schema()
    train = synth_benign(SynthConfig(n_benign=501, seed=3), schema)  # odd count
    model = fit_pipeline(train, scaling_enabled=True)
    out = transform(model, train)
    assert not np.isnan(out.numerical).any()
    assert (out.categorical != MISSING_CODE).all()
    med = np.quantile(out.numerical, 0.5, axis=0)
    iqr = np.quantile(out.numerical, 0.75, axis=0) - np.quantile(out.numerical, 0.25, axis=0)
    assert np.abs(med).max() < 1e-9
    assert np.abs(iqr - 1.0).max() < 1e-9
    # no environment-dependent name survives
    for name in out.schema.names:
        assert not name.startswith(("ip.src", "ip.dst"))
        assert not name.endswith(("srcport", "dstport"))
        assert "time_epoch" not in name


def test_pipeline_scaling_toggle():
    schema = default_schema()
    train = synth_benign(SynthConfig(n_benign=200, seed=3), schema)
    model = fit_pipeline(train, scaling_enabled=False)
    assert model.scaling_enabled is False
    assert model.scaler_state is None
    out = transform(model, train)
    kept_numeric = [n for n in model.kept_features
                    if model.output_schema.descriptor(n).kind == "numerical"]
    src_cols = [train.schema.numerical_positions.index(train.schema.position(n))
                for n in kept_numeric]
    assert np.array_equal(out.numerical, train.numerical[:, src_cols])


def test_pipeline_model_roundtrip(tmp_path):
    schema = default_schema()
    train = synth_benign(SynthConfig(n_benign=120, seed=6), schema)
    model = fit_pipeline(train)
    path = tmp_path / "pipeline.json"
    model.save(path)
    loaded = PipelineModel.load(path)
    assert loaded.state_hash() == model.state_hash()
    out_a = transform(model, train)
    out_b = transform(loaded, train)
    assert np.array_equal(out_a.numerical, out_b.numerical)
