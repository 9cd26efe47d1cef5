import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfcpbench.errors import SchemaError
from pfcpbench.traffic import (
    MISSING_CODE,
    UNKNOWN_CODE,
    CategoricalDomain,
    ClassLabel,
    FeatureDescriptor,
    FeatureSchema,
    FeatureVector,
    LabeledDataset,
    NumericDomain,
    decode_vector,
    encode_categorical,
    parse_label,
    validate_vector,
)


def test_categorical_codes_are_sorted_positions():
    domain = CategoricalDomain(("C", "A", "B"))
    assert domain.labels == ("A", "B", "C")
    assert domain.code_of("B") == 1


def test_encode_missing_and_unknown(tiny_schema):
    x = encode_categorical(tiny_schema, {"proto.kind": "B", "proto.len": "4.5", "proto.count": "1"})
    assert x.categorical[0] == 1
    assert x.numerical.tolist() == [4.5, 1.0]

    missing = encode_categorical(tiny_schema, {"proto.kind": "", "proto.len": "", "proto.count": "0"})
    assert missing.categorical[0] == MISSING_CODE
    assert np.isnan(missing.numerical[0])

    unknown = encode_categorical(tiny_schema, {"proto.kind": "Z", "proto.len": "1", "proto.count": "0"})
    assert unknown.categorical[0] == UNKNOWN_CODE


def test_encode_requires_every_feature(tiny_schema):
    with pytest.raises(SchemaError):
        encode_categorical(tiny_schema, {"proto.kind": "A"})


def test_validate_vector_cases(tiny_schema):
    ok = FeatureVector(np.array([0]), np.array([1.0, 0.0]))
    assert validate_vector(tiny_schema, ok) == []

    nan = FeatureVector(np.array([0]), np.array([np.nan, 0.0]))
    assert any("non-finite" in v for v in validate_vector(tiny_schema, nan))

    out_of_domain = FeatureVector(np.array([3]), np.array([1.0, 0.0]))  # |domain| == 3
    assert any("out-of-domain" in v for v in validate_vector(tiny_schema, out_of_domain))

    breach = FeatureVector(np.array([0]), np.array([200.0, 0.0]))
    assert any("outside" in v for v in validate_vector(tiny_schema, breach))

    short = FeatureVector(np.array([0]), np.array([1.0]))
    assert any("length mismatch" in v for v in validate_vector(tiny_schema, short))


def test_roundtrip_in_domain(tiny_schema):
    raw = {"proto.kind": "C", "proto.len": repr(42.25), "proto.count": repr(-3.0)}
    assert decode_vector(tiny_schema, encode_categorical(tiny_schema, raw)) == raw


@settings(max_examples=50, deadline=None, derandomize=True)
@given(
    label=st.sampled_from(["A", "B", "C"]),
    length=st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
    count=st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
)
def test_roundtrip_property(label, length, count):
    schema = FeatureSchema(
        features=(
            FeatureDescriptor(
                "proto.kind", "categorical", "pfcp", False, CategoricalDomain(("A", "B", "C"))
            ),
            FeatureDescriptor("proto.len", "numerical", "pfcp", False, NumericDomain(0.0, 100.0)),
            FeatureDescriptor("proto.count", "numerical", "pfcp", False, NumericDomain(-5.0, 5.0)),
        )
    )
    raw = {"proto.kind": label, "proto.len": repr(length), "proto.count": repr(count)}
    encoded = encode_categorical(schema, raw)
    assert decode_vector(schema, encoded) == raw
    assert validate_vector(schema, encoded) == []


@pytest.mark.parametrize("which", ["cat-too-big", "cat-missing", "num-nan", "num-breach"])
def test_validate_rejects_mutations(tiny_schema, which):
    cats, nums = np.array([1]), np.array([10.0, 2.0])
    if which == "cat-too-big":
        cats = np.array([len(tiny_schema.features[0].domain)])
    elif which == "cat-missing":
        cats = np.array([MISSING_CODE])
    elif which == "num-nan":
        nums = np.array([np.nan, 2.0])
    elif which == "num-breach":
        nums = np.array([10.0, 50.0])
    assert validate_vector(tiny_schema, FeatureVector(cats, nums)) != []


def test_schema_roundtrip(tmp_path, tiny_schema):
    path = tmp_path / "schema.json"
    tiny_schema.save(path)
    loaded = FeatureSchema.load(path)
    assert loaded.names == tiny_schema.names
    assert loaded.version == tiny_schema.version
    assert loaded.features[0].domain.labels == tiny_schema.features[0].domain.labels
    assert loaded.features[1].domain == tiny_schema.features[1].domain
    # serializing again produces identical bytes
    path2 = tmp_path / "schema2.json"
    loaded.save(path2)
    assert path.read_text() == path2.read_text()


def test_schema_rejects_duplicates():
    desc = FeatureDescriptor("x", "numerical", "meta", False, NumericDomain(0, 1))
    with pytest.raises(SchemaError):
        FeatureSchema(features=(desc, desc))


def test_vectors_are_immutable(tiny_schema):
    x = FeatureVector(np.array([0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        x.numerical[0] = 5.0
    ds = LabeledDataset.from_rows(tiny_schema, [x], [ClassLabel.NORMAL])
    with pytest.raises(ValueError):
        ds.numerical[0, 0] = 9.0


def test_dataset_row_alignment(tiny_schema):
    rows = [
        FeatureVector(np.array([i % 3]), np.array([float(i), 0.0])) for i in range(5)
    ]
    ds = LabeledDataset.from_rows(tiny_schema, rows, [ClassLabel.NORMAL] * 5)
    assert len(ds) == 5
    matrix = ds.to_matrix()
    # schema order: categorical first position, then the two numericals
    assert matrix.shape == (5, 3)
    assert matrix[:, 0].tolist() == [0, 1, 2, 0, 1]
    assert matrix[:, 1].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]
    with pytest.raises(SchemaError):
        LabeledDataset.from_rows(tiny_schema, rows, [ClassLabel.NORMAL] * 4)


def test_parse_label_aliases():
    assert parse_label("Normal") is ClassLabel.NORMAL
    assert parse_label("PFCP Restoration-TEID") is ClassLabel.RESTORATION_TEID
    assert parse_label("pdn0") is ClassLabel.PDN0_FAULT
    with pytest.raises(SchemaError):
        parse_label("mystery")


def test_json_schema_document_shape(tiny_schema):
    doc = tiny_schema.to_json_dict()
    assert set(doc) == {"version", "features"}
    assert set(doc["features"][0]) == {
        "name", "kind", "protocol", "environment_dependent", "domain",
    }
    json.dumps(doc)  # JSON-serializable
