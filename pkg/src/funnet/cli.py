"""Command-line interface: ingestion, serialization, and subcommands.

Subcommands fit / predict / tune / simulate / weights are driven by a
JSON run-config file. Every output embeds the SHA-256 of the canonical
config (after command-line overrides) and the master seed, tabular
output is comma-delimited text with '#' metadata lines, and floats are
printed with 17 significant digits so files round-trip exactly. Files
are written atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .basis import (
    BasisSystem,
    FunctionalCurve,
    LongitudinalSample,
    make_bspline_basis,
    make_fourier_basis,
    smooth_curve,
)
from .dataset import FunctionalDataset
from .errors import (
    ConfigError,
    DataError,
    FunnetError,
    NumericError,
    UnderdeterminedError,
)
from .flm import FlmModel, FlmSettings, cv_lambda, fit_flm, predict_flm
from .funweights import extract_weights, weight_trajectory
from .metrics import mep, mspe, r_squared
from .network import EarlyStopping, FnnConfig, FnnModel, predict, train
from .quadrature import DEFAULT_GRID_RESOLUTION, make_grid
from .simulate import (
    default_fnn_config,
    make_scenario,
    run_prediction_study,
    run_recovery_study,
)
from .tune import TuneGrid, grid_search

ARCHIVE_FORMAT = "funnet-archive-1"


# ---------------------------------------------------------------------------
# formatting and atomic file output

def format_number(value) -> str:
    """17 significant digits: enough to reproduce any double exactly."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, rows, metadata=()) -> None:
    """CSV with '#' metadata lines; numeric cells at full precision."""
    buffer = io.StringIO()
    for line in metadata:
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([
            format_number(cell) if isinstance(cell, (int, float, np.integer,
                                                     np.floating, np.bool_))
            else str(cell)
            for cell in row
        ])
    atomic_write_text(path, buffer.getvalue())


# ---------------------------------------------------------------------------
# basis and model serialization

def basis_to_dict(basis: BasisSystem) -> dict:
    return {
        "kind": basis.kind,
        "domain": [basis.domain[0], basis.domain[1]],
        "size": basis.size,
        "order": basis.order,
        "period": basis.period,
        "knots": None if basis.knots is None else list(map(float, basis.knots)),
    }


def basis_from_dict(spec: dict) -> BasisSystem:
    return BasisSystem(
        kind=spec["kind"],
        domain=(float(spec["domain"][0]), float(spec["domain"][1])),
        size=int(spec["size"]),
        order=int(spec.get("order", 0)),
        knots=None if spec.get("knots") is None else np.asarray(spec["knots"]),
        period=None if spec.get("period") is None else float(spec["period"]),
    )


def build_basis(spec: dict, domain) -> BasisSystem:
    """Construct a basis from a config spec over a data domain."""
    kind = spec.get("kind", "fourier")
    size = int(spec.get("size", 11))
    domain = spec.get("domain", list(domain))
    if kind == "fourier":
        period = spec.get("period")
        length = float(domain[1]) - float(domain[0])
        if spec.get("half_period", False):
            period = 2.0 * length
        return make_fourier_basis(domain, size,
                                  None if period is None else float(period))
    if kind == "bspline":
        return make_bspline_basis(domain, size, int(spec.get("order", 4)))
    raise ConfigError(f"unknown basis kind {kind!r}")


def _fnn_config_to_dict(config: FnnConfig) -> dict:
    payload = asdict(config)
    payload["early_stopping"] = (
        None if config.early_stopping is None else asdict(config.early_stopping)
    )
    return payload


def _fnn_config_from_dict(payload: dict) -> FnnConfig:
    payload = dict(payload)
    stopping = payload.get("early_stopping", "default")
    if stopping is None:
        payload["early_stopping"] = None
    elif isinstance(stopping, dict):
        payload["early_stopping"] = EarlyStopping(**stopping)
    elif stopping == "default":
        payload.pop("early_stopping", None)
    known = set(FnnConfig.__dataclass_fields__)
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown FnnConfig fields: {sorted(unknown)}")
    if "weight_basis_sizes" not in payload:
        raise ConfigError("model config needs weight_basis_sizes")
    return FnnConfig(**payload)


def save_model(path, model, record=None) -> None:
    """Write a model archive (JSON, versioned, checksummed)."""
    if isinstance(model, FnnModel):
        payload = {
            "config": _fnn_config_to_dict(model.config),
            "n_scalar": model.n_scalar,
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "weight_bases": None if model.weight_bases is None
            else [basis_to_dict(b) for b in model.weight_bases],
            "grid_resolution": model.grid_resolution,
            "y_center": model.y_center,
            "y_scale": model.y_scale,
            "scalar_center": None if model.scalar_center is None
            else model.scalar_center.tolist(),
            "scalar_scale": None if model.scalar_scale is None
            else model.scalar_scale.tolist(),
        }
        if record is not None:
            payload["best_epoch"] = record.best_epoch
            payload["stopped_epoch"] = record.stopped_epoch
            if record.weight_snapshots is not None:
                payload["snapshots"] = [
                    [c.tolist() for c in per_epoch]
                    for per_epoch in record.weight_snapshots
                ]
                payload["snapshot_epochs"] = record.snapshot_epochs.tolist()
        model_type = "fnn"
    elif isinstance(model, FlmModel):
        payload = {
            "intercept": model.intercept,
            "beta_coefs": [c.tolist() for c in model.beta_coefs],
            "scalar_coefs": model.scalar_coefs.tolist(),
            "lambda": model.lam,
            "penalty_order": model.penalty_order,
            "weight_bases": [basis_to_dict(b) for b in model.weight_bases],
            "grid_resolution": model.grid_resolution,
        }
        model_type = "flm"
    else:
        raise ConfigError(f"cannot archive a {type(model).__name__}")
    archive = {
        "format": ARCHIVE_FORMAT,
        "model_type": model_type,
        "payload": payload,
        "checksum": hashlib.sha256(canonical_json(payload).encode()).hexdigest(),
    }
    atomic_write_text(path, json.dumps(archive, indent=1, sort_keys=True) + "\n")


def load_model(path):
    """Read an archive back; returns (model, payload extras)."""
    try:
        with open(path) as handle:
            archive = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read archive {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"archive {path} is not valid JSON: {exc}") from exc
    if archive.get("format") != ARCHIVE_FORMAT:
        raise ConfigError(
            f"archive format {archive.get('format')!r} is not {ARCHIVE_FORMAT!r}"
        )
    payload = archive["payload"]
    digest = hashlib.sha256(canonical_json(payload).encode()).hexdigest()
    if digest != archive.get("checksum"):
        raise DataError(f"archive {path} failed its checksum")
    extras = {
        "best_epoch": payload.get("best_epoch"),
        "stopped_epoch": payload.get("stopped_epoch"),
        "snapshots": None,
        "snapshot_epochs": None,
    }
    if archive["model_type"] == "flm":
        model = FlmModel(
            intercept=float(payload["intercept"]),
            beta_coefs=tuple(np.asarray(c) for c in payload["beta_coefs"]),
            scalar_coefs=np.asarray(payload["scalar_coefs"]),
            lam=float(payload["lambda"]),
            penalty_order=int(payload["penalty_order"]),
            weight_bases=tuple(basis_from_dict(b) for b in payload["weight_bases"]),
            grid_resolution=int(payload["grid_resolution"]),
        )
        return model, extras
    config = _fnn_config_from_dict(payload["config"])
    model = FnnModel(
        config=config,
        n_scalar=int(payload["n_scalar"]),
        weights=[np.asarray(w) for w in payload["weights"]],
        biases=[np.asarray(b) for b in payload["biases"]],
        activation_codes=tuple(
            {"identity": 0, "relu": 1, "sigmoid": 2}[a] for a in config.activations
        ) + (0,),
        weight_bases=None if payload["weight_bases"] is None
        else tuple(basis_from_dict(b) for b in payload["weight_bases"]),
        grid_resolution=payload["grid_resolution"],
        y_center=float(payload["y_center"]),
        y_scale=float(payload["y_scale"]),
        scalar_center=None if payload["scalar_center"] is None
        else np.asarray(payload["scalar_center"]),
        scalar_scale=None if payload["scalar_scale"] is None
        else np.asarray(payload["scalar_scale"]),
    )
    if "snapshots" in payload:
        extras["snapshots"] = tuple(
            tuple(np.asarray(c) for c in per_epoch)
            for per_epoch in payload["snapshots"]
        )
        extras["snapshot_epochs"] = np.asarray(payload["snapshot_epochs"])
    return model, extras


# ---------------------------------------------------------------------------
# delimited-text ingestion

def _read_rows(path, delimiter=","):
    try:
        with open(path, newline="") as handle:
            rows = [
                row for row in csv.reader(handle, delimiter=delimiter)
                if row and not row[0].lstrip().startswith("#")
            ]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} holds no rows")
    return rows[0], rows[1:]


def _column(header, name, path, required=True):
    try:
        return header.index(name)
    except ValueError:
        if required:
            raise DataError(f"missing column {name!r} in {path}") from None
        return None


def _parse_float(cell, path, line, column):
    try:
        value = float(cell)
    except ValueError:
        raise DataError(
            f"non-numeric value {cell!r} in {path} row {line}, column {column!r}"
        ) from None
    if not np.isfinite(value):
        raise DataError(
            f"non-finite value {cell!r} in {path} row {line}, column {column!r}"
        )
    return value


def _smooth_series(sample_id, covariate, times, values, basis):
    order = np.argsort(times, kind="stable")
    times = np.asarray(times)[order]
    values = np.asarray(values)[order]
    dup = np.nonzero(np.diff(times) == 0)[0]
    if dup.size:
        raise DataError(
            f"duplicate measurement for id={sample_id!r} covariate={covariate!r} "
            f"time={times[dup[0]]:g}"
        )
    sample = LongitudinalSample(times, values)
    try:
        return sample, smooth_curve(sample, basis)
    except UnderdeterminedError as exc:
        raise DataError(
            f"observation id={sample_id!r} covariate={covariate!r} has "
            f"{times.size} points, fewer than the {basis.size} basis functions"
        ) from exc


def _resolve_basis_spec(schema, covariate):
    # either one flat spec for every covariate or a per-covariate mapping
    spec = schema.get("basis", {})
    if isinstance(spec.get(covariate), dict):
        return spec[covariate]
    return spec


def ingest_longitudinal(path, schema) -> tuple:
    """Read a curve file and smooth it into a dataset.

    Long format has columns id / covariate / time / value (the covariate
    column may be omitted for a single covariate); wide format has one
    row per observation with measurement columns whose header names are
    the time points. Wide files may also carry scalar and response
    columns, named by the schema. Returns (dataset, observation ids).
    """
    fmt = schema.get("format", "long")
    if fmt == "long":
        return _ingest_long(path, schema)
    if fmt == "wide":
        return _ingest_wide(path, schema)
    raise ConfigError(f"unknown curve file format {fmt!r}")


def _ingest_long(path, schema) -> tuple:
    delimiter = schema.get("delimiter", ",")
    header, rows = _read_rows(path, delimiter)
    id_col = _column(header, schema.get("id_col", "id"), path)
    time_col = _column(header, schema.get("time_col", "time"), path)
    value_col = _column(header, schema.get("value_col", "value"), path)
    cov_name_col = schema.get("covariate_col", "covariate")
    cov_col = _column(header, cov_name_col, path, required=False)
    default_name = schema.get("covariate_name", "x0")

    series = {}
    ids = []
    covariates = []
    for line, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path} row {line} has {len(row)} cells, "
                            f"expected {len(header)}")
        obs = row[id_col]
        cov = row[cov_col] if cov_col is not None else default_name
        t = _parse_float(row[time_col], path, line, header[time_col])
        v = _parse_float(row[value_col], path, line, header[value_col])
        if obs not in series:
            series[obs] = {}
            ids.append(obs)
        if cov not in series[obs]:
            series[obs][cov] = ([], [])
            if cov not in covariates:
                covariates.append(cov)
        series[obs][cov][0].append(t)
        series[obs][cov][1].append(v)

    for obs in ids:
        for cov in covariates:
            if cov not in series[obs]:
                raise DataError(
                    f"observation id={obs!r} has no measurements for "
                    f"covariate {cov!r}"
                )

    coef_blocks = []
    bases = []
    raw = []
    for cov in covariates:
        times_all = np.concatenate([series[obs][cov][0] for obs in ids])
        spec = _resolve_basis_spec(schema, cov)
        basis = build_basis(spec, (times_all.min(), times_all.max()))
        coefs = []
        samples = []
        for obs in ids:
            t, v = series[obs][cov]
            sample, curve = _smooth_series(obs, cov, t, v, basis)
            samples.append(sample)
            coefs.append(curve.coefs)
        coef_blocks.append(np.vstack(coefs))
        bases.append(basis)
        raw.append(tuple(samples))

    dataset = FunctionalDataset(
        curve_coefs=tuple(coef_blocks),
        curve_bases=tuple(bases),
        functional_names=tuple(covariates),
        scalars=np.zeros((len(ids), 0)),
        scalar_names=(),
        response=None,
        raw_samples=tuple(raw),
    )
    return dataset, ids


def _ingest_wide(path, schema) -> tuple:
    delimiter = schema.get("delimiter", ",")
    header, rows = _read_rows(path, delimiter)
    id_name = schema.get("id_col", "id")
    id_col = _column(header, id_name, path)
    scalar_names = list(schema.get("scalar_cols", []))
    response_name = schema.get("response_col")
    special = {id_name, *scalar_names}
    if response_name:
        special.add(response_name)
    scalar_cols = [_column(header, name, path) for name in scalar_names]
    response_col = _column(header, response_name, path) if response_name else None

    time_cols = []
    for i, name in enumerate(header):
        if name in special:
            continue
        try:
            time_cols.append((float(name), i))
        except ValueError:
            raise DataError(
                f"column {name!r} in {path} is neither a declared scalar/"
                f"response column nor a numeric time point"
            ) from None
    if len(time_cols) < 2:
        raise DataError(f"{path} has fewer than 2 measurement columns")
    time_cols.sort(key=lambda pair: pair[0])
    times = np.array([t for t, _ in time_cols])
    if np.any(np.diff(times) == 0):
        raise DataError(f"duplicate time column in {path}")

    cov = schema.get("covariate_name", "x0")
    spec = _resolve_basis_spec(schema, cov)
    basis = build_basis(spec, (times[0], times[-1]))

    ids = []
    coefs = []
    samples = []
    scalars = []
    response = []
    for line, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path} row {line} has {len(row)} cells, "
                            f"expected {len(header)}")
        obs = row[id_col]
        if obs in ids:
            raise DataError(f"duplicate observation id={obs!r} in {path}")
        ids.append(obs)
        values = [_parse_float(row[i], path, line, header[i]) for _, i in time_cols]
        sample, curve = _smooth_series(obs, cov, times.copy(), values, basis)
        samples.append(sample)
        coefs.append(curve.coefs)
        scalars.append([_parse_float(row[i], path, line, header[i])
                        for i in scalar_cols])
        if response_col is not None:
            response.append(_parse_float(row[response_col], path, line,
                                         response_name))

    dataset = FunctionalDataset(
        curve_coefs=(np.vstack(coefs),),
        curve_bases=(basis,),
        functional_names=(cov,),
        scalars=np.asarray(scalars, dtype=np.float64).reshape(len(ids), -1),
        scalar_names=tuple(scalar_names),
        response=np.asarray(response) if response_col is not None else None,
        raw_samples=(tuple(samples),),
    )
    return dataset, ids


def _read_scalar_file(path, schema, ids):
    header, rows = _read_rows(path, schema.get("delimiter", ","))
    id_col = _column(header, schema.get("id_col", "id"), path)
    name_col = _column(header, schema.get("name_col", "name"), path)
    value_col = _column(header, schema.get("value_col", "value"), path)
    names = []
    table = {}
    for line, row in enumerate(rows, start=2):
        obs, name = row[id_col], row[name_col]
        if name not in names:
            names.append(name)
        key = (obs, name)
        if key in table:
            raise DataError(f"duplicate scalar value for id={obs!r} name={name!r}")
        table[key] = _parse_float(row[value_col], path, line, header[value_col])
    matrix = np.empty((len(ids), len(names)))
    for i, obs in enumerate(ids):
        for j, name in enumerate(names):
            if (obs, name) not in table:
                raise DataError(f"missing scalar {name!r} for id={obs!r} in {path}")
            matrix[i, j] = table[(obs, name)]
    return matrix, tuple(names)


def _read_response_file(path, schema, ids):
    header, rows = _read_rows(path, schema.get("delimiter", ","))
    id_col = _column(header, schema.get("id_col", "id"), path)
    y_col = _column(header, schema.get("response_col", "y"), path)
    table = {}
    for line, row in enumerate(rows, start=2):
        obs = row[id_col]
        if obs in table:
            raise DataError(f"duplicate response for id={obs!r} in {path}")
        table[obs] = _parse_float(row[y_col], path, line, header[y_col])
    try:
        return np.array([table[obs] for obs in ids])
    except KeyError as exc:
        raise DataError(f"missing response for id={exc.args[0]!r} in {path}") from None


def load_dataset(data_config: dict) -> tuple:
    """Assemble a dataset from the run config's data section."""
    if "curves" not in data_config:
        raise ConfigError("data section needs a 'curves' entry")
    curves_cfg = dict(data_config["curves"])
    path = curves_cfg.pop("path", None)
    if path is None:
        raise ConfigError("curves entry needs a 'path'")
    dataset, ids = ingest_longitudinal(path, curves_cfg)

    if data_config.get("scalars"):
        scalars_cfg = dict(data_config["scalars"])
        matrix, names = _read_scalar_file(scalars_cfg.pop("path"), scalars_cfg, ids)
        dataset = replace(dataset, scalars=matrix, scalar_names=names)
    if data_config.get("response"):
        response_cfg = dict(data_config["response"])
        y = _read_response_file(response_cfg.pop("path"), response_cfg, ids)
        dataset = replace(dataset, response=y)
    order = int(data_config.get("derivative_order", 0))
    if order:
        dataset = dataset.with_derivative_curves(order)
    return dataset, ids


def export_dataset(dataset: FunctionalDataset, ids, curve_path,
                   scalar_path=None, response_path=None, metadata=()) -> None:
    """Write a dataset back out in the long layout, raw samples verbatim."""
    if dataset.raw_samples is None:
        raise ConfigError("dataset carries no raw samples to export")
    rows = []
    for k, name in enumerate(dataset.functional_names):
        for i, obs in enumerate(ids):
            sample = dataset.raw_samples[k][i]
            for t, v in zip(sample.times, sample.values):
                rows.append([obs, name, t, v])
    write_table(curve_path, ["id", "covariate", "time", "value"], rows, metadata)
    if scalar_path is not None and dataset.n_scalar:
        rows = []
        for i, obs in enumerate(ids):
            for j, name in enumerate(dataset.scalar_names):
                rows.append([obs, name, dataset.scalars[i, j]])
        write_table(scalar_path, ["id", "name", "value"], rows, metadata)
    if response_path is not None and dataset.response is not None:
        rows = [[obs, dataset.response[i]] for i, obs in enumerate(ids)]
        write_table(response_path, ["id", "y"], rows, metadata)


# ---------------------------------------------------------------------------
# subcommands

def _standard_metadata(config: dict, command: str):
    return [
        f"funnet {command}",
        f"config_hash={config_hash(config)}",
        f"seed={config.get('seed', 0)}",
    ]


def _build_weight_bases(model_cfg: dict, config_obj: FnnConfig, dataset):
    spec = model_cfg.get("weight_basis", {})
    bases = []
    for k, size in enumerate(config_obj.weight_basis_sizes):
        merged = {"kind": config_obj.weight_basis_kind,
                  "order": config_obj.bspline_order, **spec, "size": size}
        bases.append(build_basis(merged, dataset.curve_bases[k].domain))
    return tuple(bases)


def cmd_fit(config: dict, out_dir: Path, threads: int = 1) -> None:
    dataset, ids = load_dataset(config.get("data", {}))
    if dataset.response is None:
        raise ConfigError("fit needs a response file in the data section")
    model_cfg = dict(config.get("model", {}))
    model_type = model_cfg.pop("type", "fnn")
    meta = _standard_metadata(config, "fit")
    if model_type == "fnn":
        model_cfg.pop("weight_basis", None)
        fnn_config = _fnn_config_from_dict(
            {"seed": config.get("seed", 0), **model_cfg}
        )
        bases = _build_weight_bases(dict(config.get("model", {})), fnn_config,
                                    dataset)
        model, record = train(dataset, fnn_config, weight_bases=bases)
        save_model(out_dir / "model.json", model, record)
        rows = []
        for e in range(record.stopped_epoch):
            row = [e + 1, record.train_loss[e], record.train_loss_sum[e]]
            row.append(record.val_loss[e] if record.val_loss is not None else "")
            rows.append(row)
        write_table(
            out_dir / "train_record.csv",
            ["epoch", "train_loss_mean", "train_loss_sum", "val_loss_mean"],
            rows,
            meta + [f"best_epoch={record.best_epoch}",
                    f"stopped_epoch={record.stopped_epoch}"],
        )
    elif model_type == "flm":
        spec = model_cfg.get("basis", {})
        bases = tuple(
            build_basis(spec, b.domain) for b in dataset.curve_bases
        )
        penalty_order = int(model_cfg.get("penalty_order", 2))
        grid_resolution = int(model_cfg.get("grid_resolution",
                                            DEFAULT_GRID_RESOLUTION))
        if model_cfg.get("lambda") is not None:
            lam = float(model_cfg["lambda"])
        else:
            lam, table = cv_lambda(
                dataset,
                bases,
                model_cfg.get("lambda_grid"),
                folds=int(model_cfg.get("folds", 5)),
                seed=int(config.get("seed", 0)),
                penalty_order=penalty_order,
                grid_resolution=grid_resolution,
            )
            write_table(
                out_dir / "cv_lambda.csv",
                ["lambda", "mspe"],
                list(zip(table["lambda"], table["mspe"])),
                meta + [f"chosen_lambda={format_number(lam)}"],
            )
        model = fit_flm(dataset, bases, lam, penalty_order, grid_resolution)
        save_model(out_dir / "model.json", model)
    else:
        raise ConfigError(f"unknown model type {model_type!r}")


def cmd_predict(config: dict, out_dir: Path, threads: int = 1) -> None:
    predict_cfg = config.get("predict", {})
    archive = predict_cfg.get("archive")
    if archive is None:
        raise ConfigError("predict needs predict.archive in the config")
    model, _ = load_model(archive)
    dataset, ids = load_dataset(config.get("data", {}))
    if isinstance(model, FlmModel):
        yhat = predict_flm(model, dataset)
    else:
        yhat = predict(model, dataset)
    meta = _standard_metadata(config, "predict")
    header = ["id", "y_pred"]
    rows = [[obs, yhat[i]] for i, obs in enumerate(ids)]
    if dataset.response is not None:
        header = ["id", "y_true", "y_pred"]
        rows = [[obs, dataset.response[i], yhat[i]] for i, obs in enumerate(ids)]
        meta = meta + [
            f"mspe={format_number(mspe(dataset.response, yhat))}",
            f"r_squared={format_number(r_squared(dataset.response, yhat))}",
            f"mep={format_number(mep(dataset.response, yhat))}",
            "variance_convention=population",
        ]
    write_table(out_dir / "predictions.csv", header, rows, meta)


def cmd_tune(config: dict, out_dir: Path, threads: int = 1) -> None:
    dataset, _ = load_dataset(config.get("data", {}))
    tune_cfg = config.get("tune")
    if not tune_cfg:
        raise ConfigError("tune needs a 'tune' section in the config")
    model_cfg = dict(config.get("model", {}))
    model_cfg.pop("type", None)
    model_cfg.pop("weight_basis", None)
    base = _fnn_config_from_dict({"seed": config.get("seed", 0), **model_cfg})
    candidates = {
        key: [tuple(v) if isinstance(v, list) else v for v in values]
        for key, values in tune_cfg.get("candidates", {}).items()
    }
    grid = TuneGrid(
        candidates=candidates,
        folds=int(tune_cfg.get("folds", 5)),
        seed=int(config.get("seed", 0)),
        base=base,
    )
    best, table = grid_search(dataset, grid, threads=threads)
    keys = list(candidates.keys())
    rows = [[str(row[k]) for k in keys] + [row["mspe"], row["error"]]
            for row in table]
    write_table(
        out_dir / "tune_table.csv",
        keys + ["mspe", "error"],
        rows,
        _standard_metadata(config, "tune"),
    )
    atomic_write_text(
        out_dir / "best_config.json",
        json.dumps(_fnn_config_to_dict(best), indent=1, sort_keys=True) + "\n",
    )


def cmd_simulate(config: dict, out_dir: Path, threads: int = 1) -> None:
    sim_cfg = dict(config.get("simulate", {}))
    scenario_id = int(sim_cfg.get("scenario", 1))
    kind = sim_cfg.get("kind", "recovery")
    replicates = int(sim_cfg.get("replicates", 50 if kind == "recovery" else 30))
    scenario = make_scenario(
        scenario_id,
        seed=int(config.get("seed", 0)),
        **sim_cfg.get("overrides", {}),
    )
    fnn_config = default_fnn_config(scenario_id)
    if sim_cfg.get("fnn"):
        fnn_config = replace(
            fnn_config,
            **{k: tuple(v) if isinstance(v, list) else v
               for k, v in sim_cfg["fnn"].items()},
        )
    flm_settings = FlmSettings(**{
        k: tuple(v) if isinstance(v, list) else v
        for k, v in sim_cfg.get("flm", {}).items()
    })
    meta = _standard_metadata(config, "simulate") + [
        f"scenario={scenario_id}",
        f"kind={kind}",
        f"link={scenario.link}",
        f"generator={scenario.generator}",
        "m=" + ",".join(format_number(v) for v in scenario.m),
        f"alpha={format_number(scenario.alpha)}",
        f"replicates={replicates}",
    ]
    if kind == "recovery":
        result = run_recovery_study(scenario, replicates, fnn_config,
                                    flm_settings, threads=threads)
        rows = [
            [r, result.imse_values["flm"][r], np.sqrt(result.imse_values["flm"][r]),
             result.imse_values["fnn"][r], np.sqrt(result.imse_values["fnn"][r])]
            for r in range(replicates)
        ]
        agg_lines = []
        for name in result.models:
            agg = result.aggregates[name]
            agg_lines.append(
                f"{name}: mean_root_imse={format_number(agg['mean_root_imse'])} "
                f"sd_root_imse={format_number(agg['sd_root_imse'])} "
                f"root_mean_imse={format_number(agg['root_mean_imse'])} "
                f"failures={agg['failures']}"
            )
        write_table(
            out_dir / f"recovery_sim{scenario_id}.csv",
            ["replicate", "imse_flm", "root_imse_flm", "imse_fnn", "root_imse_fnn"],
            rows,
            meta + agg_lines,
        )
    elif kind == "prediction":
        result = run_prediction_study(
            scenario,
            replicates,
            split_fraction=float(sim_cfg.get("split_fraction", 2.0 / 3.0)),
            fnn_config=fnn_config,
            flm_settings=flm_settings,
            include_mlr=bool(sim_cfg.get("include_mlr", True)),
            threads=threads,
        )
        header = ["replicate"]
        for name in result.models:
            header += [f"mspe_{name}", f"rmspe_{name}"]
        rows = []
        for r in range(replicates):
            row = [r]
            for name in result.models:
                row += [result.mspe_values[name][r], result.rmspe_values[name][r]]
            rows.append(row)
        agg_lines = [
            f"{name}: median_rmspe={format_number(result.aggregates[name]['median_rmspe'])} "
            f"mean_mspe={format_number(result.aggregates[name]['mean_mspe'])} "
            f"failures={result.aggregates[name]['failures']}"
            for name in result.models
        ]
        write_table(
            out_dir / f"prediction_sim{scenario_id}.csv",
            header,
            rows,
            meta + agg_lines,
        )
    else:
        raise ConfigError(f"unknown simulation kind {kind!r}")
    if sim_cfg.get("include_timings", False):
        # wall-clock diagnostics; never byte-stable, hence a separate file
        rows = [
            [r] + [result.timings[name][r] for name in result.models]
            for r in range(replicates)
        ]
        write_table(
            out_dir / f"{kind}_sim{scenario_id}_timings.csv",
            ["replicate"] + [f"seconds_{name}" for name in result.models],
            rows,
            meta + ["timings are wall-clock and not reproducible"],
        )


def cmd_weights(config: dict, out_dir: Path, threads: int = 1) -> None:
    weights_cfg = config.get("weights", {})
    archive = weights_cfg.get("archive")
    if archive is None:
        raise ConfigError("weights needs weights.archive in the config")
    model, extras = load_model(archive)
    if not isinstance(model, FnnModel):
        raise ConfigError("weights export expects a network archive")
    resolution = int(weights_cfg.get("grid_resolution", DEFAULT_GRID_RESOLUTION))
    if model.weight_bases is None:
        raise ConfigError("archived model carries no weight bases")
    meta = _standard_metadata(config, "weights")
    rows = []
    if extras["snapshots"] is not None:
        for epoch, per_cov in zip(extras["snapshot_epochs"], extras["snapshots"]):
            for k, basis in enumerate(model.weight_bases):
                grid = make_grid(basis.domain, resolution)
                values = FunctionalCurve(basis=basis, coefs=per_cov[k])(grid.points)
                name = f"x{k}"
                for t, v in zip(grid.points, values):
                    rows.append([name, int(epoch), t, v])
    else:
        estimate = extract_weights(model)
        epoch = extras["best_epoch"] if extras["best_epoch"] is not None else 0
        for k, basis in enumerate(model.weight_bases):
            grid = make_grid(basis.domain, resolution)
            values = estimate.curve(k)(grid.points)
            for t, v in zip(grid.points, values):
                rows.append([f"x{k}", int(epoch), t, v])
    write_table(out_dir / "weights.csv", ["covariate", "epoch", "t", "value"],
                rows, meta)


# ---------------------------------------------------------------------------
# entry point

def load_run_config(path) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


_COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
    "weights": cmd_weights,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funnet",
        description="Scalar-on-function regression models and studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="run-config JSON path")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config's master seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads (never changes results)")
        cmd.add_argument("--replicates", type=int, default=None,
                         help="override simulation replicates")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config)
        if not isinstance(config, dict):
            raise ConfigError("run config must be a JSON object")
        if args.seed is not None:
            config["seed"] = args.seed
        if args.out is not None:
            config["output_dir"] = args.out
        if args.replicates is not None:
            config.setdefault("simulate", {})["replicates"] = args.replicates
        out_dir = Path(config.get("output_dir", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](config, out_dir, threads=max(1, args.threads))
    except ConfigError as exc:
        print(f"funnet: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"funnet: data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"funnet: numeric error: {exc}", file=sys.stderr)
        return 4
    except FunnetError as exc:
        print(f"funnet: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
