"""CSV and JSON files: traces, tables, sampled mode fields and parameter documents."""
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from app.config.settings import settings
from app.models.coupling import SampledField
from app.models.errors import SchemaError
from app.models.spectrum import AxisKind, SpectrumTrace

FIELD_COLUMNS = ["x", "y", "z", "n", "ex_re", "ex_im", "ey_re", "ey_im", "ez_re", "ez_im", "cell_volume"]


def _header(path: Path) -> Dict[str, str]:
    """key=value pairs from the leading '#' comment lines"""
    meta: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
    return meta


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"cannot read {path}: {e}") from e


def read_trace(path, reference_hz: Optional[float] = None) -> SpectrumTrace:
    """Trace CSV with one abscissa column named after its axis, `intensity` and optional `uncertainty`"""
    path = Path(path)
    frame = _read_csv(path)
    axes = [kind for kind in AxisKind if kind.value in frame.columns]
    if len(axes) != 1 or "intensity" not in frame.columns:
        raise SchemaError(
            f"{path.name}: expected one of {[k.value for k in AxisKind]} and an intensity column, "
            f"found {list(frame.columns)}"
        )
    meta = _header(path)
    if reference_hz is None and "reference_hz" in meta:
        reference_hz = float(meta["reference_hz"])
    try:
        trace = SpectrumTrace(
            abscissa=frame[axes[0].value].to_numpy(dtype=float),
            intensity=frame["intensity"].to_numpy(dtype=float),
            uncertainty=frame["uncertainty"].to_numpy(dtype=float) if "uncertainty" in frame.columns else None,
            axis=axes[0],
            reference_hz=reference_hz,
        )
    except (ValidationError, ValueError) as e:
        raise SchemaError(f"{path.name}: {e}") from e
    logger.debug(f"read {len(trace)} samples from {path}")
    return trace


def write_table(path, frame: pd.DataFrame, comments: Optional[Dict[str, object]] = None) -> None:
    """CSV with the schema stamp and `key=value` comment lines on top"""
    path = Path(path)
    lines = [f"# schema={settings.schema_version}"]
    lines += [f"# {key}={value}" for key, value in (comments or {}).items()]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
        frame.to_csv(fh, index=False, float_format=settings.float_format, lineterminator="\n")
    logger.info(f"wrote {len(frame)} rows to {path}")


def write_trace(path, trace: SpectrumTrace, comments: Optional[Dict[str, object]] = None) -> None:
    frame = pd.DataFrame({trace.axis.value: trace.abscissa, "intensity": trace.intensity})
    if trace.uncertainty is not None:
        frame["uncertainty"] = trace.uncertainty
    meta = dict(comments or {})
    if trace.reference_hz is not None:
        meta.setdefault("reference_hz", repr(trace.reference_hz))
    write_table(path, frame, meta)


def read_sampled_field(path) -> SampledField:
    """FEM export: positions, refractive index, complex E components and cell volumes per row"""
    path = Path(path)
    frame = _read_csv(path)
    missing = [c for c in FIELD_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path.name}: missing columns {missing}")
    data = frame[FIELD_COLUMNS].to_numpy(dtype=float)
    field = np.stack([data[:, 4] + 1j * data[:, 5], data[:, 6] + 1j * data[:, 7], data[:, 8] + 1j * data[:, 9]], axis=1)
    try:
        return SampledField(positions=data[:, :3], index=data[:, 3], field=field, cell_volumes=data[:, 10])
    except (ValidationError, ValueError) as e:
        raise SchemaError(f"{path.name}: {e}") from e


def load_document(path) -> dict:
    """JSON document carrying the expected "schema" stamp"""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"{path.name}: top level must be a JSON object")
    if data.get("schema") != settings.schema_version:
        raise SchemaError(f"{path.name}: schema must be {settings.schema_version!r}, got {data.get('schema')!r}")
    return data


def write_document(path, data: dict) -> None:
    payload = {"schema": settings.schema_version, **data}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
    logger.info(f"wrote {path}")
