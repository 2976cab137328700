import csv
import json

import numpy as np
import pytest

from conftest import random_curves
from funnet.basis import FunctionalCurve, make_fourier_basis
from funnet.cli import (
    ARCHIVE_FORMAT,
    build_basis,
    config_hash,
    export_dataset,
    format_number,
    ingest_longitudinal,
    load_dataset,
    load_model,
    main,
    save_model,
)
from funnet.dataset import dataset_from_curves
from funnet.errors import ConfigError, DataError
from funnet.flm import FlmModel, fit_flm, predict_flm
from funnet.network import FnnConfig, predict, train
from funnet.quadrature import feature_integrals


def write_csv(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_config(path, config):
    path.write_text(json.dumps(config))
    return str(path)


def read_table(path):
    """Split an output table into (metadata lines, header, rows)."""
    meta = []
    body = []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            meta.append(line[2:])
        else:
            body.append(line)
    parsed = list(csv.reader(body))
    return meta, parsed[0], parsed[1:]


def meta_value(meta, key):
    for line in meta:
        if line.startswith(key + "="):
            return line[len(key) + 1:]
    raise AssertionError(f"no metadata line {key}=")


def toy_long_rows(slopes, n_points=10):
    # one straight line x(t) = slope * t per observation
    rows = []
    t = np.linspace(0.0, 1.0, n_points)
    for i, slope in enumerate(slopes):
        for tj in t:
            rows.append([f"obs{i}", tj, slope * tj])
    return rows


BSPLINE3 = {"kind": "bspline", "size": 3, "order": 3}


class TestFormatNumber:
    def test_doubles_round_trip(self, rng):
        values = [1.0 / 3.0, np.pi, 1e-300, 1e300, -2.5, 0.1 + 0.2]
        values += list(rng.normal(size=20))
        for v in values:
            assert float(format_number(v)) == v

    def test_integers_and_bools(self):
        assert format_number(7) == "7"
        assert format_number(np.int64(-3)) == "-3"
        assert format_number(True) == "True"
        assert format_number(np.bool_(False)) == "False"


class TestBuildBasis:
    def test_half_period_doubles_the_domain_length(self):
        basis = build_basis({"kind": "fourier", "size": 5, "half_period": True},
                            (0.0, 1.0))
        assert basis.period == 2.0

    def test_default_period_stays_unset(self):
        # None means the period follows the domain length
        basis = build_basis({"kind": "fourier", "size": 5}, (0.0, 2.0))
        assert basis.period is None

    def test_bspline_spec(self):
        basis = build_basis(BSPLINE3, (0.0, 1.0))
        assert basis.kind == "bspline"
        assert basis.size == 3
        assert basis.order == 3

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError, match="basis kind"):
            build_basis({"kind": "wavelet"}, (0.0, 1.0))


class TestIngestLong:
    def test_straight_lines_reproduced_at_sample_points(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], toy_long_rows([1.0, 2.0]))
        dataset, ids = ingest_longitudinal(path, {"basis": BSPLINE3})
        assert ids == ["obs0", "obs1"]
        assert dataset.n_observations == 2
        t = np.linspace(0.0, 1.0, 10)
        for i, slope in enumerate((1.0, 2.0)):
            curve = FunctionalCurve(basis=dataset.curve_bases[0],
                                    coefs=dataset.curve_coefs[0][i])
            assert np.allclose(curve(t), slope * t, atol=1e-8)

    def test_raw_samples_kept_verbatim(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], toy_long_rows([1.0]))
        dataset, _ = ingest_longitudinal(path, {"basis": BSPLINE3})
        sample = dataset.raw_samples[0][0]
        assert np.array_equal(sample.times, np.linspace(0.0, 1.0, 10))
        assert np.array_equal(sample.values, np.linspace(0.0, 1.0, 10))

    def test_unsorted_rows_give_the_same_curve(self, tmp_path):
        rows = toy_long_rows([1.5])
        shuffled = [rows[i] for i in np.random.default_rng(3).permutation(len(rows))]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a, ["id", "time", "value"], rows)
        write_csv(b, ["id", "time", "value"], shuffled)
        ds_a, _ = ingest_longitudinal(a, {"basis": BSPLINE3})
        ds_b, _ = ingest_longitudinal(b, {"basis": BSPLINE3})
        assert np.array_equal(ds_a.curve_coefs[0], ds_b.curve_coefs[0])

    def test_covariate_column_splits_series(self, tmp_path):
        rows = []
        for cov in ("temp", "flow"):
            for tj in np.linspace(0.0, 1.0, 6):
                rows.append(["a", cov, tj, tj if cov == "temp" else 2 * tj])
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "covariate", "time", "value"], rows)
        dataset, _ = ingest_longitudinal(path, {"basis": BSPLINE3})
        assert dataset.functional_names == ("temp", "flow")
        assert dataset.n_functional == 2

    def test_duplicate_time_names_the_observation(self, tmp_path):
        rows = toy_long_rows([1.0]) + [["obs0", 0.0, 5.0]]
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], rows)
        with pytest.raises(DataError, match="obs0"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_missing_covariate_for_an_observation(self, tmp_path):
        rows = [["a", "u", 0.0, 1.0], ["a", "u", 0.5, 1.0], ["a", "u", 1.0, 1.0],
                ["a", "v", 0.0, 1.0], ["a", "v", 0.5, 1.0], ["a", "v", 1.0, 1.0],
                ["b", "u", 0.0, 1.0], ["b", "u", 0.5, 1.0], ["b", "u", 1.0, 1.0]]
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "covariate", "time", "value"], rows)
        with pytest.raises(DataError, match="'b'.*'v'"):
            ingest_longitudinal(path, {"basis": {"kind": "bspline", "size": 2,
                                                 "order": 2}})

    def test_missing_column_is_named(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "t", "value"], [["a", 0.0, 1.0]])
        with pytest.raises(DataError, match="'time'"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        rows = toy_long_rows([1.0])
        rows[3][2] = "oops"
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], rows)
        with pytest.raises(DataError, match="'oops'.*row 5.*'value'"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_non_finite_cell_rejected(self, tmp_path):
        rows = toy_long_rows([1.0])
        rows[0][2] = "nan"
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], rows)
        with pytest.raises(DataError, match="non-finite"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_too_few_points_names_the_observation(self, tmp_path):
        rows = toy_long_rows([1.0]) + [["short", 0.0, 0.0], ["short", 1.0, 1.0]]
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], rows)
        with pytest.raises(DataError, match="'short'.*2 points"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text("id,time,value\na,0.0\n")
        with pytest.raises(DataError, match="row 2"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text("")
        with pytest.raises(DataError, match="no rows"):
            ingest_longitudinal(path, {"basis": BSPLINE3})

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="format"):
            ingest_longitudinal(tmp_path / "x.csv", {"format": "tall"})


class TestIngestWide:
    def spectra_file(self, tmp_path, rng, n=215, n_points=100):
        # spectrometer-style layout: one row per sample, one column per
        # wavelength, plus a scalar column and the response
        times = 850.0 + 2.0 * np.arange(n_points)
        header = ["id", "water", "fat"] + [format_number(t) for t in times]
        rows = []
        for i in range(n):
            values = rng.normal(size=n_points)
            rows.append([f"s{i}", rng.uniform(40, 70), rng.uniform(5, 50),
                         *values])
        path = tmp_path / "spectra.csv"
        write_csv(path, header, rows)
        return path

    def test_spectrometer_layout(self, tmp_path, rng):
        path = self.spectra_file(tmp_path, rng)
        schema = {
            "format": "wide",
            "scalar_cols": ["water"],
            "response_col": "fat",
            "covariate_name": "absorbance",
            "basis": {"kind": "fourier", "size": 29},
        }
        dataset, ids = ingest_longitudinal(path, schema)
        assert dataset.n_observations == 215
        assert dataset.n_functional == 1
        assert dataset.n_scalar == 1
        assert dataset.functional_names == ("absorbance",)
        assert dataset.scalar_names == ("water",)
        assert dataset.response.shape == (215,)
        assert len(ids) == 215
        assert dataset.curve_bases[0].size == 29
        assert dataset.curve_bases[0].domain == (850.0, 850.0 + 2.0 * 99)

    def test_columns_ordered_by_time_not_position(self, tmp_path, rng):
        header = ["id", "1", "0", "0.5"]
        rows = [["a", 10.0, 0.0, 5.0]]
        path = tmp_path / "wide.csv"
        write_csv(path, header, rows)
        dataset, _ = ingest_longitudinal(
            path, {"format": "wide", "basis": {"kind": "bspline", "size": 3,
                                               "order": 3}})
        sample = dataset.raw_samples[0][0]
        assert np.array_equal(sample.times, [0.0, 0.5, 1.0])
        assert np.array_equal(sample.values, [0.0, 5.0, 10.0])

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "wide.csv"
        write_csv(path, ["id", "0", "0.5", "1"],
                  [["a", 0, 0, 0], ["a", 1, 1, 1]])
        with pytest.raises(DataError, match="duplicate observation id='a'"):
            ingest_longitudinal(path, {"format": "wide",
                                       "basis": {"kind": "bspline", "size": 2,
                                                 "order": 2}})

    def test_undeclared_text_header_rejected(self, tmp_path):
        path = tmp_path / "wide.csv"
        write_csv(path, ["id", "0", "1", "notes"], [["a", 0, 1, "x"]])
        with pytest.raises(DataError, match="'notes'"):
            ingest_longitudinal(path, {"format": "wide"})

    def test_duplicate_time_column_rejected(self, tmp_path):
        path = tmp_path / "wide.csv"
        write_csv(path, ["id", "0", "0.5", "0.5"], [["a", 0, 1, 1]])
        with pytest.raises(DataError, match="duplicate time column"):
            ingest_longitudinal(path, {"format": "wide"})

    def test_too_few_measurement_columns(self, tmp_path):
        path = tmp_path / "wide.csv"
        write_csv(path, ["id", "0"], [["a", 0]])
        with pytest.raises(DataError, match="fewer than 2"):
            ingest_longitudinal(path, {"format": "wide"})


class TestScalarAndResponseFiles:
    def curve_file(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_csv(path, ["id", "time", "value"], toy_long_rows([1.0, 2.0, 3.0]))
        return path

    def data_config(self, tmp_path, scalars=None, response=None):
        config = {"curves": {"path": str(self.curve_file(tmp_path)),
                             "basis": BSPLINE3}}
        if scalars is not None:
            path = tmp_path / "scalars.csv"
            write_csv(path, ["id", "name", "value"], scalars)
            config["scalars"] = {"path": str(path)}
        if response is not None:
            path = tmp_path / "response.csv"
            write_csv(path, ["id", "y"], response)
            config["response"] = {"path": str(path)}
        return config

    def test_scalars_aligned_to_curve_ids(self, tmp_path):
        scalars = [["obs1", "age", 30.0], ["obs0", "age", 20.0],
                   ["obs2", "age", 40.0], ["obs0", "bmi", 21.0],
                   ["obs1", "bmi", 22.0], ["obs2", "bmi", 23.0]]
        dataset, ids = load_dataset(self.data_config(tmp_path, scalars=scalars))
        assert ids == ["obs0", "obs1", "obs2"]
        assert dataset.scalar_names == ("age", "bmi")
        assert np.array_equal(dataset.scalars,
                              [[20.0, 21.0], [30.0, 22.0], [40.0, 23.0]])

    def test_response_aligned_to_curve_ids(self, tmp_path):
        response = [["obs2", 3.0], ["obs0", 1.0], ["obs1", 2.0]]
        dataset, _ = load_dataset(self.data_config(tmp_path, response=response))
        assert np.array_equal(dataset.response, [1.0, 2.0, 3.0])

    def test_duplicate_scalar_rejected(self, tmp_path):
        scalars = [["obs0", "age", 1.0], ["obs0", "age", 2.0],
                   ["obs1", "age", 3.0], ["obs2", "age", 4.0]]
        with pytest.raises(DataError, match="duplicate scalar"):
            load_dataset(self.data_config(tmp_path, scalars=scalars))

    def test_missing_scalar_rejected(self, tmp_path):
        scalars = [["obs0", "age", 1.0], ["obs1", "age", 3.0]]
        with pytest.raises(DataError, match="missing scalar 'age' for id='obs2'"):
            load_dataset(self.data_config(tmp_path, scalars=scalars))

    def test_duplicate_response_rejected(self, tmp_path):
        response = [["obs0", 1.0], ["obs0", 2.0], ["obs1", 3.0], ["obs2", 4.0]]
        with pytest.raises(DataError, match="duplicate response"):
            load_dataset(self.data_config(tmp_path, response=response))

    def test_missing_response_rejected(self, tmp_path):
        response = [["obs0", 1.0], ["obs1", 2.0]]
        with pytest.raises(DataError, match="missing response for id='obs2'"):
            load_dataset(self.data_config(tmp_path, response=response))

    def test_missing_curves_entry_rejected(self):
        with pytest.raises(ConfigError, match="curves"):
            load_dataset({})


class TestExportRoundTrip:
    def test_reingest_reproduces_features_exactly(self, tmp_path, rng):
        curves = tmp_path / "curves.csv"
        rows = []
        for i in range(4):
            t = np.linspace(0.0, 2.0, 9)
            v = rng.normal(size=9)
            for tj, vj in zip(t, v):
                rows.append([f"p{i}", tj, vj])
        write_csv(curves, ["id", "time", "value"], rows)
        scalars = tmp_path / "scalars.csv"
        write_csv(scalars, ["id", "name", "value"],
                  [[f"p{i}", "dose", rng.uniform()] for i in range(4)])
        response = tmp_path / "response.csv"
        write_csv(response, ["id", "y"], [[f"p{i}", rng.normal()]
                                          for i in range(4)])
        schema = {"basis": {"kind": "bspline", "size": 5, "order": 4}}
        config = {"curves": {"path": str(curves), **schema},
                  "scalars": {"path": str(scalars)},
                  "response": {"path": str(response)}}
        dataset, ids = load_dataset(config)

        out = tmp_path / "export"
        out.mkdir()
        export_dataset(dataset, ids, out / "c.csv", out / "s.csv", out / "r.csv")
        config2 = {"curves": {"path": str(out / "c.csv"), **schema},
                   "scalars": {"path": str(out / "s.csv")},
                   "response": {"path": str(out / "r.csv")}}
        again, ids2 = load_dataset(config2)

        assert ids2 == ids
        basis = make_fourier_basis(dataset.curve_bases[0].domain, 7)
        first = feature_integrals(dataset, (basis,))
        second = feature_integrals(again, (basis,))
        assert np.array_equal(first.matrix, second.matrix)
        assert np.array_equal(dataset.scalars, again.scalars)
        assert np.array_equal(dataset.response, again.response)

    def test_export_needs_raw_samples(self, rng):
        basis = make_fourier_basis((0.0, 1.0), 3)
        dataset = dataset_from_curves([random_curves(rng, 2, basis)])
        with pytest.raises(ConfigError, match="raw samples"):
            export_dataset(dataset, ["a", "b"], "unused.csv")


class TestArchives:
    def small_fnn(self, rng, record_weights=False):
        basis = make_fourier_basis((0.0, 1.0), 3)
        curves = random_curves(rng, 12, basis)
        y = rng.normal(size=12)
        dataset = dataset_from_curves([curves], response=y)
        config = FnnConfig(weight_basis_sizes=(3,), hidden_sizes=(4,),
                           epochs=3, batch_size=6, early_stopping=None,
                           record_weights=record_weights, seed=5)
        model, record = train(dataset, config)
        return dataset, model, record

    def test_fnn_round_trip_preserves_predictions_exactly(self, tmp_path, rng):
        dataset, model, record = self.small_fnn(rng)
        path = tmp_path / "model.json"
        save_model(path, model, record)
        loaded, extras = load_model(path)
        assert np.array_equal(predict(loaded, dataset), predict(model, dataset))
        assert extras["best_epoch"] == record.best_epoch
        assert extras["stopped_epoch"] == record.stopped_epoch

    def test_snapshots_round_trip(self, tmp_path, rng):
        _, model, record = self.small_fnn(rng, record_weights=True)
        path = tmp_path / "model.json"
        save_model(path, model, record)
        _, extras = load_model(path)
        assert np.array_equal(extras["snapshot_epochs"], np.arange(4))
        for stored, original in zip(extras["snapshots"],
                                    record.weight_snapshots):
            assert np.array_equal(stored[0], original[0])

    def test_flm_round_trip_preserves_predictions_exactly(self, tmp_path, rng):
        basis = make_fourier_basis((0.0, 1.0), 5)
        curves = random_curves(rng, 20, basis)
        y = rng.normal(size=20)
        dataset = dataset_from_curves([curves], response=y)
        model = fit_flm(dataset, (basis,), 0.5)
        path = tmp_path / "model.json"
        save_model(path, model)
        loaded, _ = load_model(path)
        assert isinstance(loaded, FlmModel)
        assert np.array_equal(predict_flm(loaded, dataset),
                              predict_flm(model, dataset))

    def test_tampered_payload_fails_the_checksum(self, tmp_path, rng):
        _, model, record = self.small_fnn(rng)
        path = tmp_path / "model.json"
        save_model(path, model, record)
        archive = json.loads(path.read_text())
        archive["payload"]["y_center"] = 99.0
        path.write_text(json.dumps(archive))
        with pytest.raises(DataError, match="checksum"):
            load_model(path)

    def test_wrong_format_tag_rejected(self, tmp_path, rng):
        _, model, record = self.small_fnn(rng)
        path = tmp_path / "model.json"
        save_model(path, model, record)
        archive = json.loads(path.read_text())
        archive["format"] = "other-archive-9"
        path.write_text(json.dumps(archive))
        with pytest.raises(ConfigError, match=ARCHIVE_FORMAT):
            load_model(path)

    def test_missing_file_is_a_data_error(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_model(tmp_path / "absent.json")

    def test_invalid_json_is_a_data_error(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(DataError, match="not valid JSON"):
            load_model(path)


def make_regression_files(tmp_path, rng, n=30, n_points=41, basis_size=5,
                          noise_sd=0.0, with_response=True):
    """Wide file whose curves and response follow a known linear functional."""
    basis = make_fourier_basis((0.0, 1.0), basis_size)
    beta = rng.normal(size=basis_size)
    t = np.linspace(0.0, 1.0, n_points)
    header = ["id"] + (["y"] if with_response else [])
    header += [format_number(tj) for tj in t]
    rows = []
    for i in range(n):
        coefs = rng.normal(size=basis_size)
        curve = FunctionalCurve(basis=basis, coefs=coefs)
        # orthonormal basis: the integral is the coefficient dot product
        y = coefs @ beta
        if noise_sd:
            y += rng.normal(scale=noise_sd)
        row = [f"s{i}"] + ([y] if with_response else [])
        rows.append(row + list(curve(t)))
    path = tmp_path / "data.csv"
    write_csv(path, header, rows)
    schema = {
        "path": str(path),
        "format": "wide",
        "basis": {"kind": "fourier", "size": basis_size},
    }
    if with_response:
        schema["response_col"] = "y"
    return {"curves": schema}, beta


FAST_FNN_MODEL = {
    "type": "fnn",
    "weight_basis_sizes": [3],
    "hidden_sizes": [4],
    "activations": ["relu"],
    "epochs": 3,
    "batch_size": 8,
    "early_stopping": None,
}


class TestCmdFit:
    def test_fnn_outputs_and_metadata(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng, n=20, n_points=17,
                                        noise_sd=0.1)
        out = tmp_path / "out"
        config = {"seed": 4, "data": data, "model": FAST_FNN_MODEL}
        cfg = write_config(tmp_path / "run.json", config)
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0

        model, extras = load_model(out / "model.json")
        assert model.config.epochs == 3
        meta, header, rows = read_table(out / "train_record.csv")
        assert header == ["epoch", "train_loss_mean", "train_loss_sum",
                          "val_loss_mean"]
        assert len(rows) == 3
        assert [r[0] for r in rows] == ["1", "2", "3"]
        assert meta[0] == "funnet fit"
        assert meta_value(meta, "seed") == "4"
        assert meta_value(meta, "stopped_epoch") == "3"
        assert meta_value(meta, "best_epoch") == "3"
        expected = dict(config, output_dir=str(out))
        assert meta_value(meta, "config_hash") == config_hash(expected)

    def test_seed_override_changes_the_hash(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng, n=20, n_points=17,
                                        noise_sd=0.1)
        out = tmp_path / "out"
        config = {"seed": 4, "data": data, "model": FAST_FNN_MODEL}
        cfg = write_config(tmp_path / "run.json", config)
        assert main(["fit", "--config", cfg, "--out", str(out),
                     "--seed", "11"]) == 0
        meta, _, _ = read_table(out / "train_record.csv")
        assert meta_value(meta, "seed") == "11"
        expected = dict(config, seed=11, output_dir=str(out))
        assert meta_value(meta, "config_hash") == config_hash(expected)

    def test_flm_cv_table_and_model(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng, noise_sd=0.05)
        out = tmp_path / "out"
        config = {
            "seed": 0,
            "data": data,
            "model": {"type": "flm",
                      "basis": {"kind": "fourier", "size": 5},
                      "lambda_grid": [1e-8, 1e-4, 1.0],
                      "folds": 3},
        }
        cfg = write_config(tmp_path / "run.json", config)
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        meta, header, rows = read_table(out / "cv_lambda.csv")
        assert header == ["lambda", "mspe"]
        assert len(rows) == 3
        chosen = float(meta_value(meta, "chosen_lambda"))
        best_row = min(rows, key=lambda r: float(r[1]))
        assert chosen == float(best_row[0])
        model, _ = load_model(out / "model.json")
        assert model.lam == chosen

    def test_flm_fixed_lambda_skips_the_cv_table(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng)
        out = tmp_path / "out"
        config = {"data": data,
                  "model": {"type": "flm",
                            "basis": {"kind": "fourier", "size": 5},
                            "lambda": 0.25}}
        cfg = write_config(tmp_path / "run.json", config)
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        assert not (out / "cv_lambda.csv").exists()
        model, _ = load_model(out / "model.json")
        assert model.lam == 0.25

    def test_fit_without_response_is_a_config_error(self, tmp_path, rng,
                                                    capsys):
        data, _ = make_regression_files(tmp_path, rng, n=10, n_points=17,
                                        with_response=False)
        cfg = write_config(tmp_path / "run.json",
                           {"data": data, "model": FAST_FNN_MODEL})
        assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
        assert "response" in capsys.readouterr().err


class TestCmdPredict:
    def fit_exact_flm(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng)
        fit_out = tmp_path / "fit"
        cfg = write_config(tmp_path / "fit.json", {
            "data": data,
            "model": {"type": "flm",
                      "basis": {"kind": "fourier", "size": 5},
                      "lambda": 0.0},
        })
        assert main(["fit", "--config", cfg, "--out", str(fit_out)]) == 0
        return data, fit_out / "model.json"

    def test_perfect_predictions_score_perfectly(self, tmp_path, rng):
        # noiseless response in the model span: y_hat matches y, so the
        # error metrics sit at their ideal values
        data, archive = self.fit_exact_flm(tmp_path, rng)
        out = tmp_path / "pred"
        cfg = write_config(tmp_path / "pred.json", {
            "data": data, "predict": {"archive": str(archive)},
        })
        assert main(["predict", "--config", cfg, "--out", str(out)]) == 0
        meta, header, rows = read_table(out / "predictions.csv")
        assert header == ["id", "y_true", "y_pred"]
        assert len(rows) == 30
        assert float(meta_value(meta, "mspe")) < 1e-12
        assert abs(float(meta_value(meta, "r_squared")) - 1.0) < 1e-9
        assert float(meta_value(meta, "mep")) < 1e-9
        assert "variance_convention=population" in meta
        y_true = np.array([float(r[1]) for r in rows])
        y_pred = np.array([float(r[2]) for r in rows])
        assert np.allclose(y_pred, y_true, atol=1e-6)

    def test_mean_predictor_scores_zero_r_squared(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng)
        dataset, _ = load_dataset(data)
        basis = make_fourier_basis((0.0, 1.0), 5)
        constant = FlmModel(
            intercept=float(np.mean(dataset.response)),
            beta_coefs=(np.zeros(5),),
            scalar_coefs=np.zeros(0),
            lam=0.0,
            penalty_order=2,
            weight_bases=(basis,),
            grid_resolution=1001,
        )
        archive = tmp_path / "constant.json"
        save_model(archive, constant)
        out = tmp_path / "pred"
        cfg = write_config(tmp_path / "pred.json", {
            "data": data, "predict": {"archive": str(archive)},
        })
        assert main(["predict", "--config", cfg, "--out", str(out)]) == 0
        meta, _, _ = read_table(out / "predictions.csv")
        assert abs(float(meta_value(meta, "r_squared"))) < 1e-12
        assert abs(float(meta_value(meta, "mep")) - 1.0) < 1e-12

    def test_without_response_no_metrics_are_written(self, tmp_path, rng):
        _, archive = self.fit_exact_flm(tmp_path, rng)
        new = tmp_path / "new"
        new.mkdir()
        data, _ = make_regression_files(new, rng, with_response=False)
        out = tmp_path / "pred"
        cfg = write_config(tmp_path / "pred.json", {
            "data": data, "predict": {"archive": str(archive)},
        })
        assert main(["predict", "--config", cfg, "--out", str(out)]) == 0
        meta, header, rows = read_table(out / "predictions.csv")
        assert header == ["id", "y_pred"]
        assert len(rows) == 30
        assert not any(line.startswith("mspe=") for line in meta)

    def test_archive_round_trip_preserves_predictions(self, tmp_path, rng):
        data, archive = self.fit_exact_flm(tmp_path, rng)
        out1, out2 = tmp_path / "p1", tmp_path / "p2"
        cfg = write_config(tmp_path / "pred.json", {
            "data": data, "predict": {"archive": str(archive)},
        })
        assert main(["predict", "--config", cfg, "--out", str(out1)]) == 0
        # second run goes through a fresh load of the same archive; only the
        # embedded hash may differ because --out is part of the config
        assert main(["predict", "--config", cfg, "--out", str(out2)]) == 0
        strip = lambda p: [l for l in p.read_text().splitlines()
                           if not l.startswith("# config_hash=")]
        assert strip(out1 / "predictions.csv") == strip(out2 / "predictions.csv")

    def test_predict_needs_an_archive(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng)
        cfg = write_config(tmp_path / "pred.json", {"data": data})
        assert main(["predict", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 2


class TestCmdTune:
    def test_table_and_best_config(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng, n=24, n_points=17,
                                        noise_sd=0.1)
        out = tmp_path / "out"
        config = {
            "seed": 1,
            "data": data,
            "model": {"weight_basis_sizes": [3], "epochs": 4, "batch_size": 8,
                      "early_stopping": None},
            "tune": {"candidates": {"hidden_sizes": [[2], [4]],
                                    "learning_rate": [0.05, 0.01]},
                     "folds": 3},
        }
        cfg = write_config(tmp_path / "run.json", config)
        assert main(["tune", "--config", cfg, "--out", str(out)]) == 0

        meta, header, rows = read_table(out / "tune_table.csv")
        assert header == ["hidden_sizes", "learning_rate", "mspe", "error"]
        assert len(rows) == 4
        assert meta[0] == "funnet tune"
        best = json.loads((out / "best_config.json").read_text())
        best_row = min(rows, key=lambda r: float(r[2]))
        assert str(tuple(best["hidden_sizes"])) == best_row[0]
        assert best["learning_rate"] == float(best_row[1])
        assert best["epochs"] == 4

    def test_tune_needs_a_tune_section(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng, n=10, n_points=17)
        cfg = write_config(tmp_path / "run.json",
                           {"data": data, "model": FAST_FNN_MODEL})
        assert main(["tune", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 2


SIM_OVERRIDES = {"n_observations": 40, "sample_points": 16,
                 "smoothing_basis_size": 5}
SIM_FNN = {"weight_basis_sizes": [5], "hidden_sizes": [4],
           "activations": ["relu"], "dropout_rates": [0.0], "epochs": 3,
           "batch_size": 16, "early_stopping": None}
SIM_FLM = {"basis_size": 5, "lambda_grid": [1e-3, 1e-1], "folds": 2}


class TestCmdSimulate:
    def recovery_config(self, out):
        return {
            "seed": 0,
            "output_dir": str(out),
            "simulate": {"scenario": 1, "kind": "recovery", "replicates": 2,
                         "overrides": SIM_OVERRIDES, "fnn": SIM_FNN,
                         "flm": SIM_FLM},
        }

    def test_recovery_runs_are_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cfg1 = write_config(tmp_path / "s1.json", self.recovery_config(out1))
        cfg2 = write_config(tmp_path / "s2.json", self.recovery_config(out2))
        assert main(["simulate", "--config", cfg1]) == 0
        assert main(["simulate", "--config", cfg2]) == 0
        first = (out1 / "recovery_sim1.csv").read_text()
        second = (out2 / "recovery_sim1.csv").read_text()
        # the embedded hash covers the whole config, output_dir included
        strip = [line for line in first.splitlines()
                 if not line.startswith("# config_hash=")]
        strip2 = [line for line in second.splitlines()
                  if not line.startswith("# config_hash=")]
        assert strip == strip2

    def test_threads_do_not_change_the_output(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cfg1 = write_config(tmp_path / "s1.json", self.recovery_config(out1))
        cfg2 = write_config(tmp_path / "s2.json", self.recovery_config(out2))
        assert main(["simulate", "--config", cfg1, "--threads", "1"]) == 0
        assert main(["simulate", "--config", cfg2, "--threads", "4"]) == 0
        strip = lambda p: [l for l in p.read_text().splitlines()
                           if not l.startswith("# config_hash=")]
        assert strip(out1 / "recovery_sim1.csv") == strip(out2 / "recovery_sim1.csv")

    def test_recovery_table_shape_and_metadata(self, tmp_path):
        out = tmp_path / "r"
        cfg = write_config(tmp_path / "s.json", self.recovery_config(out))
        assert main(["simulate", "--config", cfg]) == 0
        meta, header, rows = read_table(out / "recovery_sim1.csv")
        assert header == ["replicate", "imse_flm", "root_imse_flm",
                          "imse_fnn", "root_imse_fnn"]
        assert len(rows) == 2
        assert meta[0] == "funnet simulate"
        assert meta_value(meta, "scenario") == "1"
        assert meta_value(meta, "kind") == "recovery"
        assert meta_value(meta, "replicates") == "2"
        assert any(line.startswith("flm: mean_root_imse=") for line in meta)
        assert any(line.startswith("fnn: mean_root_imse=") for line in meta)
        for row in rows:
            imse, root = float(row[3]), float(row[4])
            assert np.isclose(root, np.sqrt(imse))

    def test_prediction_kind_with_timings_sidecar(self, tmp_path):
        out = tmp_path / "p"
        config = {
            "seed": 0,
            "output_dir": str(out),
            "simulate": {"scenario": 2, "kind": "prediction", "replicates": 2,
                         "overrides": SIM_OVERRIDES, "fnn": SIM_FNN,
                         "flm": SIM_FLM, "include_timings": True},
        }
        cfg = write_config(tmp_path / "s.json", config)
        assert main(["simulate", "--config", cfg]) == 0
        meta, header, rows = read_table(out / "prediction_sim2.csv")
        assert header[0] == "replicate"
        assert "mspe_fnn" in header and "rmspe_fnn" in header
        assert "mspe_flm" in header and "mspe_mlr" in header
        assert len(rows) == 2
        sidecar = out / "prediction_sim2_timings.csv"
        t_meta, t_header, t_rows = read_table(sidecar)
        assert "timings are wall-clock and not reproducible" in t_meta
        assert len(t_rows) == 2
        assert all(float(cell) >= 0.0 for row in t_rows for cell in row[1:])

    def test_replicates_flag_overrides_config_and_hash(self, tmp_path):
        out = tmp_path / "r"
        config = self.recovery_config(out)
        cfg = write_config(tmp_path / "s.json", config)
        assert main(["simulate", "--config", cfg, "--replicates", "1"]) == 0
        meta, _, rows = read_table(out / "recovery_sim1.csv")
        assert len(rows) == 1
        assert meta_value(meta, "replicates") == "1"
        expected = dict(config)
        expected["simulate"] = dict(config["simulate"], replicates=1)
        assert meta_value(meta, "config_hash") == config_hash(expected)

    def test_unknown_kind_is_a_config_error(self, tmp_path):
        config = self.recovery_config(tmp_path / "r")
        config["simulate"]["kind"] = "forecast"
        cfg = write_config(tmp_path / "s.json", config)
        assert main(["simulate", "--config", cfg]) == 2


class TestCmdWeights:
    def fit_archive(self, tmp_path, rng, record_weights):
        data, _ = make_regression_files(tmp_path, rng, n=16, n_points=17,
                                        noise_sd=0.1)
        out = tmp_path / "fit"
        model = dict(FAST_FNN_MODEL, record_weights=record_weights)
        cfg = write_config(tmp_path / "fit.json",
                           {"data": data, "model": model})
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        return out / "model.json"

    def test_snapshot_trajectory_covers_every_epoch(self, tmp_path, rng):
        archive = self.fit_archive(tmp_path, rng, record_weights=True)
        out = tmp_path / "w"
        cfg = write_config(tmp_path / "w.json", {
            "weights": {"archive": str(archive), "grid_resolution": 21},
        })
        assert main(["weights", "--config", cfg, "--out", str(out)]) == 0
        _, header, rows = read_table(out / "weights.csv")
        assert header == ["covariate", "epoch", "t", "value"]
        # initial state plus one snapshot per epoch, each on the 21-point grid
        assert len(rows) == (3 + 1) * 21
        assert sorted({r[1] for r in rows}) == ["0", "1", "2", "3"]
        assert {r[0] for r in rows} == {"x0"}

    def test_final_estimate_only_without_snapshots(self, tmp_path, rng):
        archive = self.fit_archive(tmp_path, rng, record_weights=False)
        out = tmp_path / "w"
        cfg = write_config(tmp_path / "w.json", {
            "weights": {"archive": str(archive), "grid_resolution": 21},
        })
        assert main(["weights", "--config", cfg, "--out", str(out)]) == 0
        _, _, rows = read_table(out / "weights.csv")
        assert len(rows) == 21
        assert {r[1] for r in rows} == {"3"}

    def test_flm_archive_is_rejected(self, tmp_path, rng):
        basis = make_fourier_basis((0.0, 1.0), 3)
        curves = random_curves(rng, 10, basis)
        dataset = dataset_from_curves([curves], response=rng.normal(size=10))
        archive = tmp_path / "flm.json"
        save_model(archive, fit_flm(dataset, (basis,), 0.1))
        cfg = write_config(tmp_path / "w.json",
                           {"weights": {"archive": str(archive)}})
        assert main(["weights", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 2


class TestExitCodes:
    def test_missing_config_file_is_a_data_error(self, tmp_path, capsys):
        assert main(["fit", "--config", str(tmp_path / "absent.json")]) == 3
        assert "data error" in capsys.readouterr().err

    def test_invalid_json_config_is_a_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        assert main(["fit", "--config", str(path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_non_object_config_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        assert main(["fit", "--config", str(path)]) == 2

    def test_unknown_model_type_is_a_config_error(self, tmp_path, rng):
        data, _ = make_regression_files(tmp_path, rng, n=10, n_points=17)
        cfg = write_config(tmp_path / "run.json",
                           {"data": data, "model": {"type": "tree"}})
        assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_bad_data_file_is_a_data_error(self, tmp_path, capsys):
        curves = tmp_path / "curves.csv"
        write_csv(curves, ["id", "time", "value"],
                  toy_long_rows([1.0]) + [["obs0", 0.0, 9.0]])
        cfg = write_config(tmp_path / "run.json", {
            "data": {"curves": {"path": str(curves), "basis": BSPLINE3}},
            "model": FAST_FNN_MODEL,
        })
        assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
        assert "obs0" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
    def test_divergent_training_is_a_numeric_error(self, tmp_path, rng,
                                                   capsys):
        data, _ = make_regression_files(tmp_path, rng, n=20, n_points=17,
                                        noise_sd=0.1)
        model = dict(FAST_FNN_MODEL, optimizer="sgd", learning_rate=1e12,
                     epochs=50)
        cfg = write_config(tmp_path / "run.json",
                           {"data": data, "model": model})
        assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 4
        err = capsys.readouterr().err
        assert "numeric error" in err
        assert "diverged" in err
