"""File formats for datasets, fitted models, and evaluation outputs.

Tables are written either as RFC-4180 CSV with a header row or as JSON
``{"columns": [...], "data": [[...]]}``; floats use ``repr`` so values
round-trip exactly.  Matrices inside JSON documents are stored row-major as
``{"rows": r, "cols": c, "data": [[...], ...]}``.  JSON documents are
serialized with sorted keys so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Any

import numpy as np

from .estimation import FitResult, Scaling
from .exceptions import FormatError, IoError
from .lorenz import LorenzConfig, SyntheticDataset
from .metrics import EvalReport, SweepCell
from .model import PredVarParams, WeightMatrices


# ---------------------------------------------------------------------------
# primitives

def matrix_to_obj(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise FormatError(f"expected a matrix, got ndim={a.ndim}")
    return {"rows": a.shape[0], "cols": a.shape[1], "data": a.tolist()}


def matrix_from_obj(obj: Any, name: str = "matrix") -> np.ndarray:
    try:
        rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    except (TypeError, KeyError) as exc:
        raise FormatError(f"{name}: expected rows/cols/data keys") from exc
    a = np.asarray(data, dtype=float)
    if a.ndim == 1 and rows in (0, a.size):  # tolerate empty
        a = a.reshape(rows, cols)
    if a.shape != (rows, cols):
        raise FormatError(f"{name}: data shape {a.shape} != declared ({rows}, {cols})")
    return a


def _fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_table(path: str, columns: list[str], rows, fmt: str = "csv") -> None:
    """Write a rectangular table as CSV or JSON."""
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_fmt(v) for v in row])
        elif fmt == "json":
            doc = {
                "columns": list(columns),
                "data": [[None if _is_nan(v) else _plain(v) for v in row] for row in rows],
            }
            write_json(path, doc)
        else:
            raise FormatError(f"unknown table format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _plain(v: Any) -> Any:
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _is_nan(v: Any) -> bool:
    return isinstance(v, (float, np.floating)) and math.isnan(v)


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    """Read a CSV or JSON table back as header plus string-valued rows."""
    try:
        if path.endswith(".json"):
            doc = read_json(path)
            try:
                cols = [str(c) for c in doc["columns"]]
                rows = [["" if v is None else _fmt(v) for v in row] for row in doc["data"]]
            except (TypeError, KeyError) as exc:
                raise FormatError(f"{path}: expected columns/data keys") from exc
            return cols, rows
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                columns = next(reader)
            except StopIteration as exc:
                raise FormatError(f"{path}: empty table") from exc
            return columns, [row for row in reader]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def read_float_table(path: str) -> tuple[list[str], np.ndarray]:
    columns, raw = read_table(path)
    if any(len(row) != len(columns) for row in raw):
        raise FormatError(f"{path}: ragged rows")
    try:
        data = np.asarray([[float(v) for v in row] for row in raw], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry ({exc})") from exc
    return columns, data.reshape(len(raw), len(columns))


def write_json(path: str, doc: Any) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}") from exc


def _series_path(directory: str, stem: str) -> str:
    for ext in ("csv", "json"):
        candidate = os.path.join(directory, f"{stem}.{ext}")
        if os.path.exists(candidate):
            return candidate
    raise IoError(f"no {stem}.csv or {stem}.json under {directory}")


# ---------------------------------------------------------------------------
# datasets

def save_dataset(dataset: SyntheticDataset, outdir: str, fmt: str = "csv") -> None:
    os.makedirs(outdir, exist_ok=True)
    p = dataset.y.shape[1]
    ell = dataset.v_true.shape[1]
    write_table(
        os.path.join(outdir, f"y.{fmt}"),
        [f"y{i}" for i in range(p)],
        dataset.y,
        fmt,
    )
    write_table(
        os.path.join(outdir, f"v_true.{fmt}"),
        [f"v{i}" for i in range(ell)],
        dataset.v_true,
        fmt,
    )
    params = dataset.params_true
    truth = {
        "case": dataset.case,
        "seed": dataset.seed,
        "n_samples": dataset.n_samples,
        "train_range": list(dataset.train_range),
        "test_range": list(dataset.test_range),
        "center_latent": dataset.center_latent,
        "noise_cov_mode": dataset.noise_cov_mode,
        "loadings": matrix_to_obj(params.loadings),
        "static_loadings": matrix_to_obj(params.static_loadings),
        "innovation_cov": matrix_to_obj(params.innovation_cov),
        "static_noise_cov": matrix_to_obj(params.static_noise_cov),
        "var_coeffs": None
        if params.var_coeffs is None
        else [matrix_to_obj(b) for b in params.var_coeffs],
        "lorenz": None
        if dataset.lorenz is None
        else {
            "sigma": dataset.lorenz.sigma,
            "rho": dataset.lorenz.rho,
            "beta": dataset.lorenz.beta,
            "dt": dataset.lorenz.dt,
            "initial_state": list(dataset.lorenz.initial_state),
            "discard": dataset.lorenz.discard,
            "integrator": dataset.lorenz.integrator,
        },
    }
    write_json(os.path.join(outdir, "truth.json"), truth)


def load_dataset(datadir: str) -> SyntheticDataset:
    _, y = read_float_table(_series_path(datadir, "y"))
    _, v = read_float_table(_series_path(datadir, "v_true"))
    doc = read_json(os.path.join(datadir, "truth.json"))
    try:
        params = PredVarParams(
            loadings=matrix_from_obj(doc["loadings"], "loadings"),
            static_loadings=matrix_from_obj(doc["static_loadings"], "static_loadings"),
            innovation_cov=matrix_from_obj(doc["innovation_cov"], "innovation_cov"),
            static_noise_cov=matrix_from_obj(doc["static_noise_cov"], "static_noise_cov"),
            var_coeffs=None
            if doc["var_coeffs"] is None
            else tuple(matrix_from_obj(b, "var_coeffs") for b in doc["var_coeffs"]),
        )
        lz = doc.get("lorenz")
        cfg = (
            None
            if lz is None
            else LorenzConfig(
                sigma=lz["sigma"],
                rho=lz["rho"],
                beta=lz["beta"],
                dt=lz["dt"],
                initial_state=tuple(lz["initial_state"]),
                discard=lz["discard"],
                integrator=lz["integrator"],
            )
        )
        return SyntheticDataset(
            y=y,
            v_true=v,
            params_true=params,
            train_range=tuple(doc["train_range"]),
            test_range=tuple(doc["test_range"]),
            seed=doc["seed"],
            case=doc["case"],
            lorenz=cfg,
            center_latent=doc.get("center_latent", True),
            noise_cov_mode=doc.get("noise_cov_mode", "per-channel"),
        )
    except KeyError as exc:
        raise FormatError(f"truth.json: missing key {exc}") from exc


# ---------------------------------------------------------------------------
# fitted models

def save_fit(fit: FitResult, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    params = fit.params
    doc = {
        "algorithm": fit.algorithm,
        "order": fit.order,
        "latent_dim": fit.latent_dim,
        "loadings": matrix_to_obj(params.loadings),
        "static_loadings": matrix_to_obj(params.static_loadings),
        "innovation_cov": matrix_to_obj(params.innovation_cov),
        "static_noise_cov": matrix_to_obj(params.static_noise_cov),
        "var_coeffs": [matrix_to_obj(b) for b in params.var_coeffs],
        "dlv_weights": matrix_to_obj(fit.weights.dlv),
        "static_weights": matrix_to_obj(fit.weights.static),
        "residual_cov": matrix_to_obj(fit.residual_cov),
        "scaling": {
            "center": list(map(float, fit.scaling.center)),
            "scale": list(map(float, fit.scaling.scale)),
        },
    }
    write_json(os.path.join(outdir, "model.json"), doc)
    first, second = fit.identity_residuals()
    diag = {
        "algorithm": fit.algorithm,
        "iterations": fit.iterations,
        "converged": bool(fit.converged),
        "duality_residual": first,
        "innovation_match_residual": second,
        "objective_trace": [[float(a), float(b)] for a, b in fit.objective_trace],
    }
    write_json(os.path.join(outdir, "diagnostics.json"), diag)


def load_fit(rundir: str) -> FitResult:
    doc = read_json(os.path.join(rundir, "model.json"))
    diag_path = os.path.join(rundir, "diagnostics.json")
    diag = read_json(diag_path) if os.path.exists(diag_path) else {}
    try:
        params = PredVarParams(
            loadings=matrix_from_obj(doc["loadings"], "loadings"),
            static_loadings=matrix_from_obj(doc["static_loadings"], "static_loadings"),
            innovation_cov=matrix_from_obj(doc["innovation_cov"], "innovation_cov"),
            static_noise_cov=matrix_from_obj(doc["static_noise_cov"], "static_noise_cov"),
            var_coeffs=tuple(
                matrix_from_obj(b, "var_coeffs") for b in doc["var_coeffs"]
            ),
        )
        weights = WeightMatrices(
            dlv=matrix_from_obj(doc["dlv_weights"], "dlv_weights"),
            static=matrix_from_obj(doc["static_weights"], "static_weights"),
        )
        scaling = Scaling(
            center=np.asarray(doc["scaling"]["center"], dtype=float),
            scale=np.asarray(doc["scaling"]["scale"], dtype=float),
        )
        return FitResult(
            algorithm=doc["algorithm"],
            order=int(doc["order"]),
            latent_dim=int(doc["latent_dim"]),
            params=params,
            weights=weights,
            residual_cov=matrix_from_obj(doc["residual_cov"], "residual_cov"),
            iterations=int(diag.get("iterations", 0)),
            converged=bool(diag.get("converged", True)),
            objective_trace=np.asarray(
                diag.get("objective_trace", []), dtype=float
            ).reshape(-1, 2),
            scaling=scaling,
        )
    except KeyError as exc:
        raise FormatError(f"model.json: missing key {exc}") from exc


# ---------------------------------------------------------------------------
# evaluation outputs

def save_report(report: EvalReport, outdir: str, fmt: str = "csv") -> None:
    os.makedirs(outdir, exist_ok=True)
    doc = {
        "projector_distance": float(report.projector_distance),
        "signal_angle_deg": float(report.signal_angle_deg),
        "signal_angle_max_deg": float(report.signal_angle_max_deg),
        "em_sig_pred_cov": matrix_to_obj(report.em_sig_pred_cov),
        "splits": {
            name: {
                "meas_recon_cov": matrix_to_obj(m.meas_recon_cov),
                "meas_pred_cov": matrix_to_obj(m.meas_pred_cov),
                "sig_recon_cov": matrix_to_obj(m.sig_recon_cov),
                "sig_pred_cov": matrix_to_obj(m.sig_pred_cov),
                "truth_noise_cov": matrix_to_obj(m.truth_noise_cov),
            }
            for name, m in report.splits.items()
        },
    }
    write_json(os.path.join(outdir, "report.json"), doc)

    rows = []
    for name, m in sorted(report.splits.items()):
        for figure, mat in (
            ("meas_recon", m.meas_recon_cov),
            ("meas_pred", m.meas_pred_cov),
            ("sig_recon", m.sig_recon_cov),
            ("sig_pred", m.sig_pred_cov),
            ("truth_ref", m.truth_noise_cov),
        ):
            rows.extend(
                (figure, name, i, j, mat[i, j])
                for i in range(mat.shape[0])
                for j in range(mat.shape[1])
            )
    em = report.em_sig_pred_cov
    rows.extend(
        ("em_sig_pred", "model", i, j, em[i, j])
        for i in range(em.shape[0])
        for j in range(em.shape[1])
    )
    write_table(
        os.path.join(outdir, f"fig_covariances.{fmt}"),
        ["figure", "split", "row", "col", "value"],
        rows,
        fmt,
    )


def save_traces(traces_by_key, outdir: str, fmt: str = "csv") -> None:
    """Write trace series; keys are (split, sensor) pairs."""
    os.makedirs(outdir, exist_ok=True)
    rows = []
    for (split, sensor), series_map in traces_by_key.items():
        for series_name, values in series_map.items():
            rows.extend(
                (split, sensor, k, series_name, float(val))
                for k, val in enumerate(values)
            )
    write_table(
        os.path.join(outdir, f"sensor_traces.{fmt}"),
        ["split", "sensor", "sample", "series", "value"],
        rows,
        fmt,
    )


def save_sweep(cells: list[SweepCell], outdir: str, fmt: str = "csv") -> None:
    os.makedirs(outdir, exist_ok=True)
    rows = [
        (
            c.samples,
            c.algorithm,
            c.seed,
            c.projector_distance,
            c.signal_angle_deg,
            c.converged,
            c.error,
        )
        for c in cells
    ]
    write_table(
        os.path.join(outdir, f"sweep.{fmt}"),
        [
            "samples",
            "algorithm",
            "seed",
            "projector_distance",
            "signal_angle_deg",
            "converged",
            "error",
        ],
        rows,
        fmt,
    )
