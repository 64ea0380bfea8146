"""Reading marginal datasets and writing fits and reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SamfitError
from .lattice import AveragedData
from .simulation import ReportTable


def _require(obj: dict, key: str):
    if key not in obj:
        raise SamfitError(f"dataset is missing field '{key}'")
    return obj[key]


def dataset_from_json(obj: dict) -> AveragedData:
    if not isinstance(obj, dict):
        raise SamfitError("dataset must be a JSON object")
    grid_sizes = _require(obj, "grid_sizes")
    marginals = _require(obj, "marginals")
    if not isinstance(grid_sizes, list) or not isinstance(marginals, list):
        raise SamfitError("fields 'grid_sizes' and 'marginals' must be lists")
    for j, m in enumerate(marginals):
        if not isinstance(m, list) or not all(isinstance(v, (int, float)) for v in m):
            raise SamfitError(f"field 'marginals[{j}]' must be a list of numbers")
    overall = _require(obj, "overall_mean")
    if not isinstance(overall, (int, float)):
        raise SamfitError("field 'overall_mean' must be a number")
    tau2 = obj.get("tau2")
    if tau2 is not None and not isinstance(tau2, (int, float)):
        raise SamfitError("field 'tau2' must be a number or null")
    return AveragedData.from_arrays(grid_sizes, marginals, overall, tau2)


def dataset_to_json(data: AveragedData) -> dict:
    return {
        "grid_sizes": list(data.design.grid_sizes),
        "marginals": [np.asarray(m).tolist() for m in data.marginals],
        "overall_mean": data.overall_mean,
        "tau2": data.tau2,
    }


def read_csv_dataset(path, overall_mean: Optional[float] = None, tau2: Optional[float] = None) -> AveragedData:
    """One column per axis with header ``x1,...,xd``; all axes share one grid size.

    Without ``overall_mean`` the mean of the column means is used, which is
    exact for marginals of a full lattice.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SamfitError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    expected = [f"x{j + 1}" for j in range(len(header))]
    if header != expected:
        raise SamfitError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
    try:
        values = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise SamfitError(f"{path}: non-numeric entry ({exc})") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise SamfitError(f"{path}: every row needs {len(header)} values")
    n = values.shape[0]
    if overall_mean is None:
        overall_mean = float(values.mean())
    return AveragedData.from_arrays([n] * len(header), values.T, overall_mean, tau2)


def load_dataset(path, overall_mean: Optional[float] = None, tau2: Optional[float] = None) -> AveragedData:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_dataset(path, overall_mean, tau2)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SamfitError(f"{path}: invalid JSON ({exc})") from None
    data = dataset_from_json(obj)
    if overall_mean is not None:
        data = AveragedData(data.design, data.marginals, float(overall_mean), data.tau2)
    return data


def _g(x) -> str:
    return "" if x is None else f"{x:.6g}"


def report_columns(n_active: int):
    return ["snr", "method", "lambda", "amse"] + [f"amse_{i + 1}" for i in range(n_active)] + ["amse_0", "d0_hat"]


def write_report_csv(table: ReportTable, path) -> None:
    n_active = max((len(r.amse_per_active) for r in table.rows), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(report_columns(n_active))
        for r in table.rows:
            w.writerow(
                [_g(r.snr), r.method, _g(r.lam), _g(r.amse_global)]
                + [_g(v) for v in r.amse_per_active]
                + [_g(r.amse_zero_avg), _g(r.d0_hat_mean)]
            )


def report_to_json(table: ReportTable, detail: bool = False) -> dict:
    out = {
        "rows": [
            {
                "snr": r.snr,
                "method": r.method,
                "lambda": r.lam,
                "amse": r.amse_global,
                "amse_active": list(r.amse_per_active),
                "amse_0": r.amse_zero_avg,
                "d0_hat": r.d0_hat_mean,
            }
            for r in table.rows
        ]
    }
    if table.curves:
        out["oracle"] = {
            str(snr): {"lambda_star": min(curve, key=lambda c: c["amse"])["lambda"], "curve": curve}
            for snr, curve in table.curves.items()
        }
    if detail:
        out["replications"] = table.detail
    return out


def write_json(obj, path) -> None:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, float) and math.isinf(o):
            return None
        raise TypeError(f"not serializable: {type(o).__name__}")

    Path(path).write_text(json.dumps(obj, indent=2, default=default) + "\n")
