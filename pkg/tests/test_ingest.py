# tests/test_ingest.py
import itertools
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from oracles import total_variation
from shared.errors import InputError, SchemaError
from shared.model import Dataset, DiscreteSpace, ModelParams, empirical_model, sample_dataset
from ingest.loader import (
    load_schema,
    load_table,
    read_dataset,
    read_table,
    split,
    write_dataset,
)
from ingest.schema import DiscretizationSchema, FeatureSpec, decode, encode

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"


def binary_schema():
    return DiscretizationSchema.from_dict({
        "features": [{"column": "f", "kind": "categorical", "categories": ["0", "1"]}],
        "sensitive": [{"column": "s", "kind": "categorical", "categories": ["0", "1"]}],
        "outcome": {"column": "y", "positive": "1"},
    })


def two_feature_schema():
    return DiscretizationSchema.from_dict({
        "features": [
            {"column": "f1", "kind": "categorical", "categories": ["a", "b"]},
            {"column": "f2", "kind": "binned", "edges": [10, 20]},
        ],
        "sensitive": [{"column": "s", "kind": "categorical", "categories": ["m", "f"]}],
        "outcome": {"column": "label", "positive": "yes", "negative": "no"},
        "n_x": 6,
        "n_z": 2,
    })


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestSchema:
    def test_binned_codes(self):
        spec = FeatureSpec(column="age", kind="binned", edges=(25, 45))
        codes, missing, bad = spec.discretize(pd.Series(["18", "25", "44.5", "70", None, "old"]))
        assert codes.tolist() == [0, 1, 1, 2, -1, -1]
        assert missing.tolist() == [False, False, False, False, True, False]
        assert bad.tolist() == [False, False, False, False, False, True]

    def test_mixed_radix(self):
        assert int(encode([np.array(1), np.array(2)], [2, 3])) == 5

    def test_encode_is_bijective(self):
        cards = [2, 3, 4]
        tuples = np.array(list(itertools.product(*[range(c) for c in cards])))
        index = encode(list(tuples.T), cards)
        assert sorted(index.tolist()) == list(range(24))
        np.testing.assert_array_equal(np.stack(decode(index, cards), axis=1), tuples)

    def test_declared_sizes_checked(self):
        d = two_feature_schema().to_dict()
        d["n_x"] = 7
        with pytest.raises(SchemaError):
            DiscretizationSchema.from_dict(d)

    def test_missing_field(self):
        with pytest.raises(SchemaError):
            DiscretizationSchema.from_dict({"features": []})

    def test_bad_edges(self):
        with pytest.raises(SchemaError):
            FeatureSpec(column="c", kind="binned", edges=(3, 1))

    def test_shipped_schema(self):
        schema = load_schema(SCHEMA_DIR / "compas_reconstruction.json")
        assert schema.space == DiscreteSpace(n_x=141, n_y=2, n_z=12, n_a=2)


class TestReadTable:
    def test_three_rows(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["f", "s", "y"], [[0, 1, 1], [1, 0, 0], [1, 1, 1]])
        dataset, report = read_table(path, binary_schema())
        assert list(dataset) == [(0, 1, 1), (1, 0, 0), (1, 1, 1)]
        assert report.rows_emitted == 3 and report.rows_dropped == 0

    def test_two_features(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["label", "s", "f2", "f1"],
                         [["yes", "f", 5, "b"], ["no", "m", 30, "a"]])
        dataset, _ = read_table(path, two_feature_schema())
        assert list(dataset) == [(3 * 1 + 0, 1, 1), (3 * 0 + 2, 0, 0)]

    def test_drops_are_counted(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["f", "s", "y"],
                         [[0, 1, 1], ["", 0, 0], [1, 7, 1], [1, 0, ""], [0, 0, 0]])
        dataset, report = read_table(path, binary_schema())
        assert report.rows_read == 5
        assert report.dropped_missing == 2
        assert report.dropped_unparseable == 1
        assert report.rows_emitted == len(dataset) == 2
        assert report.rows_emitted + report.rows_dropped == report.rows_read
        assert list(dataset) == [(0, 1, 1), (0, 0, 0)]

    def test_unknown_outcome_is_unparseable(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["f", "s", "y"],
                         [[0, 1, 1], [1, 0, "maybe"], [1, 1, 7], [0, 0, 0]])
        dataset, report = read_table(path, binary_schema())
        assert list(dataset) == [(0, 1, 1), (0, 0, 0)]
        assert report.dropped_unparseable == 2
        assert report.rows_emitted + report.rows_dropped == report.rows_read == 4

    def test_negative_label(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["label", "s", "f2", "f1"],
                         [["yes", "f", 5, "b"], ["no", "m", 30, "a"], ["0", "m", 30, "a"]])
        dataset, report = read_table(path, two_feature_schema())
        assert [y for _, y, _ in dataset] == [1, 0]
        assert report.dropped_unparseable == 1

    def test_outcome_labels_must_differ(self):
        with pytest.raises(SchemaError):
            DiscretizationSchema.from_dict({
                "features": [{"column": "f", "kind": "categorical", "categories": ["0", "1"]}],
                "sensitive": [{"column": "s", "kind": "categorical", "categories": ["0", "1"]}],
                "outcome": {"column": "y", "positive": "1", "negative": "1"},
            })

    def test_missing_column(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["f", "y"], [[0, 1]])
        with pytest.raises(SchemaError):
            read_table(path, binary_schema())

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_table(tmp_path / "absent.csv", binary_schema())

    def test_recovers_generating_model(self, tmp_path, rng):
        space = DiscreteSpace(n_x=2, n_y=2, n_z=2, n_a=2)
        theta = ModelParams(space=space, p_z=[0.4, 0.6],
                            p_x_given_z=[[0.7, 0.3], [0.2, 0.8]],
                            p_y_given_xz=[[[0.9, 0.1], [0.5, 0.5]], [[0.3, 0.7], [0.6, 0.4]]])
        records = sample_dataset(theta, 5000, rng)
        path = write_csv(tmp_path / "t.csv", ["f", "s", "y"],
                         [[x, z, y] for x, y, z in records])
        dataset = load_table(path, binary_schema())
        np.testing.assert_array_equal(dataset.records, records.records)
        estimate = empirical_model(dataset, smoothing=0.5)
        assert total_variation(estimate.joint, theta.joint) <= 0.05


class TestSplit:
    def setup_method(self):
        space = DiscreteSpace(n_x=3, n_y=2, n_z=2, n_a=2)
        self.data = Dataset(space, np.tile([1, 0, 1], (7214, 1)))

    def test_sizes(self):
        train, holdout = split(self.data, 6000)
        assert (len(train), len(holdout)) == (6000, 1214)

    def test_all_training(self):
        train, holdout = split(self.data, len(self.data))
        assert len(train) == len(self.data) and len(holdout) == 0

    def test_no_training(self):
        train, holdout = split(self.data, 0)
        assert len(train) == 0 and len(holdout) == len(self.data)

    def test_out_of_range(self):
        with pytest.raises(InputError):
            split(self.data, len(self.data) + 1)


def test_dataset_file_round_trip(tmp_path, theta422):
    data = sample_dataset(theta422, 25, 2)
    path = write_dataset(data, tmp_path / "d.csv")
    assert path.read_text().splitlines()[0] == "x,y,z"
    np.testing.assert_array_equal(read_dataset(path, theta422.space).records, data.records)


def test_dataset_file_header_checked(tmp_path, space422):
    path = write_csv(tmp_path / "d.csv", ["a", "b", "c"], [[0, 0, 0]])
    with pytest.raises(InputError):
        read_dataset(path, space422)
