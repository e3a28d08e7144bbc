"""Binary model files.

Layout (all integers little-endian):

    8 bytes   magic ``BKITMODL``
    u32       format version (currently 1)
    u32       header length in bytes
    ...       header: UTF-8 JSON with the network specs, schedule, training
              config snapshot, and the ordered layer table (name + shape)
    ...       payload: float64 little-endian parameter values, in layer-table
              order (drift network first, then the correction network)
    32 bytes  SHA-256 over everything above

Round trips are bit-exact; any corruption fails the checksum and nothing is
returned.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ChecksumError, ModelFormatError, VersionError
from .nets import DoobNet, DriftNet, MlpSpec
from .sde import DiffusivitySchedule

MAGIC = b"BKITMODL"
FORMAT_VERSION = 1

KIND_PAIR = "pair"
KIND_DRIFT_ONLY = "drift_only"


@dataclass
class LoadedModel:
    kind: str
    drift: DriftNet
    doob: Optional[DoobNet]
    schedule: DiffusivitySchedule
    config: Optional[dict]


def _layer_table(prefix: str, net) -> list[list]:
    return [[f"{prefix}/{name}", list(shape)] for name, shape in net.params().shape_table]


def save_model(
    path,
    drift: DriftNet,
    doob: Optional[DoobNet],
    schedule: DiffusivitySchedule,
    config: Optional[dict] = None,
) -> None:
    kind = KIND_PAIR if doob is not None else KIND_DRIFT_ONLY
    table = _layer_table("drift", drift)
    arrays = list(drift.params().arrays)
    doob_spec = None
    if doob is not None:
        table += _layer_table("doob", doob)
        arrays += list(doob.params().arrays)
        doob_spec = doob.spec.to_dict()
    header = {
        "kind": kind,
        "drift_spec": drift.spec.to_dict(),
        "doob_spec": doob_spec,
        "schedule": schedule.to_dict(),
        "config": config,
        "layer_table": table,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    body = MAGIC + struct.pack("<II", FORMAT_VERSION, len(header_bytes)) + header_bytes + payload
    digest = hashlib.sha256(body).digest()
    with open(path, "wb") as fh:
        fh.write(body + digest)


def _take(buf: bytes, pos: int, n: int, what: str) -> tuple[bytes, int]:
    if pos + n > len(buf):
        raise ModelFormatError(f"truncated model file while reading {what}")
    return buf[pos : pos + n], pos + n


def load_model(path) -> LoadedModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    pos = 0
    magic, pos = _take(buf, pos, len(MAGIC), "magic")
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: not a bridgekit model file")
    raw, pos = _take(buf, pos, 8, "version header")
    version, header_len = struct.unpack("<II", raw)
    if version != FORMAT_VERSION:
        raise VersionError(
            f"{path}: unsupported model format version {version} (supported: {FORMAT_VERSION})"
        )
    header_bytes, pos = _take(buf, pos, header_len, "header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable model header ({exc})") from None

    table = header["layer_table"]
    n_values = sum(int(np.prod(shape)) for _, shape in table)
    payload, pos = _take(buf, pos, 8 * n_values, "parameter payload")
    digest, pos = _take(buf, pos, 32, "checksum")
    if pos != len(buf):
        raise ModelFormatError(f"{path}: {len(buf) - pos} trailing bytes after checksum")
    if hashlib.sha256(buf[:-32]).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch, file is corrupt")

    values = np.frombuffer(payload, dtype="<f8").astype(float)
    arrays = []
    offset = 0
    for _, shape in table:
        size = int(np.prod(shape))
        arrays.append(values[offset : offset + size].reshape([int(s) for s in shape]))
        offset += size

    drift_spec = MlpSpec.from_dict(header["drift_spec"])
    drift = DriftNet(drift_spec, rng=np.random.default_rng(0))
    n_drift = len(drift.params())
    drift.set_param_arrays(arrays[:n_drift])

    doob = None
    if header["kind"] == KIND_PAIR:
        if header["doob_spec"] is None:
            raise ModelFormatError(f"{path}: pair model without a correction-network spec")
        doob = DoobNet(MlpSpec.from_dict(header["doob_spec"]), rng=np.random.default_rng(0))
        doob.set_param_arrays(arrays[n_drift:])
    elif header["kind"] != KIND_DRIFT_ONLY:
        raise ModelFormatError(f"{path}: unknown model kind {header['kind']!r}")
    elif len(arrays) != n_drift:
        raise ModelFormatError(f"{path}: drift-only model carries extra parameter arrays")

    schedule = DiffusivitySchedule.from_dict(header["schedule"])
    return LoadedModel(
        kind=header["kind"],
        drift=drift,
        doob=doob,
        schedule=schedule,
        config=header.get("config"),
    )
