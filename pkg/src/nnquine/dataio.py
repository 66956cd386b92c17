"""File formats: MNIST IDX ingestion, checkpoints, CSV metric logs, PGM
heatmaps.

Checkpoints store the projection seed rather than the projection matrices,
so a file is about n_params * 8 bytes and the projections are rebuilt
bit-identically on load. All binary formats are fixed-endian and assertable
byte for byte.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .net import NetworkSpec, ONE_HOT, SCALAR, VANILLA, AUXILIARY, param_count
from .metrics import MetricsRecord

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

CHECKPOINT_MAGIC = b"NNQ1"
CHECKPOINT_VERSION = 1

CSV_HEADER = "epoch,l_sr,margin,srq,l_task,accuracy,seconds"

_VARIANT_CODE = {VANILLA: 0, AUXILIARY: 1}
_ENCODING_CODE = {ONE_HOT: 0, SCALAR: 1}
_VARIANT_NAME = {v: k for k, v in _VARIANT_CODE.items()}
_ENCODING_NAME = {v: k for k, v in _ENCODING_CODE.items()}


class MnistFormatError(ValueError):
    """Wrong magic number or malformed IDX header."""


class MnistConsistencyError(ValueError):
    """Image and label files disagree about the item count."""


class MnistTruncationError(EOFError):
    """File ends before the advertised payload."""


class CheckpointError(ValueError):
    """Unreadable, mismatched or tampered checkpoint file."""


@dataclass
class MnistSet:
    images: np.ndarray  # (N, pixels) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64
    split: str = ""


def _open_maybe_gz(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count, path):
    data = fh.read(count)
    if len(data) != count:
        raise MnistTruncationError(
            "%s: expected %d more bytes, got %d" % (path, count, len(data)))
    return data


def _read_u32s(fh, count, path):
    return struct.unpack(">%dI" % count, _read_exact(fh, 4 * count, path))


def load_idx_images(path):
    """Big-endian IDX image file -> (N, rows*cols) array scaled by 1/255."""
    with _open_maybe_gz(path) as fh:
        magic, n, rows, cols = _read_u32s(fh, 4, path)
        if magic != IMAGE_MAGIC:
            raise MnistFormatError(
                "%s: image magic %d, expected %d" % (path, magic, IMAGE_MAGIC))
        raw = _read_exact(fh, n * rows * cols, path)
    pixels = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(n, rows * cols)


def load_idx_labels(path):
    with _open_maybe_gz(path) as fh:
        magic, n = _read_u32s(fh, 2, path)
        if magic != LABEL_MAGIC:
            raise MnistFormatError(
                "%s: label magic %d, expected %d" % (path, magic, LABEL_MAGIC))
        raw = _read_exact(fh, n, path)
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_mnist(images_path, labels_path, split=""):
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise MnistConsistencyError(
            "%d images but %d labels" % (len(images), len(labels)))
    return MnistSet(images=images, labels=labels, split=split)


# -------------------------------------------------------------- checkpoints

def save_checkpoint(path, spec, seed, epoch, params):
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (param_count(spec),):
        raise CheckpointError("params length %d does not match spec (%d)"
                              % (params.size, param_count(spec)))
    header = CHECKPOINT_MAGIC + struct.pack(
        "<9I", CHECKPOINT_VERSION, _VARIANT_CODE[spec.variant],
        spec.embed_dim, spec.hidden_dim, spec.coord_embed_dim,
        spec.image_embed_dim, spec.image_dim, spec.n_classes,
        _ENCODING_CODE[spec.encoding])
    header += struct.pack("<QQ", int(seed), int(epoch))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(params.astype("<f8").tobytes())


def load_checkpoint(path):
    """-> (spec, projection seed, epoch, params); validates everything."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("%s: bad magic %r" % (path, blob[:4]))
    if len(blob) < 4 + 36 + 16:
        raise CheckpointError("%s: truncated header" % path)
    fields = struct.unpack("<9I", blob[4:40])
    version, variant_code = fields[0], fields[1]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError("%s: version %d, expected %d"
                              % (path, version, CHECKPOINT_VERSION))
    if variant_code not in _VARIANT_NAME or fields[8] not in _ENCODING_NAME:
        raise CheckpointError("%s: unknown variant/encoding code" % path)
    seed, epoch = struct.unpack("<QQ", blob[40:56])
    try:
        spec = NetworkSpec(variant=_VARIANT_NAME[variant_code],
                           embed_dim=fields[2], hidden_dim=fields[3],
                           coord_embed_dim=fields[4], image_embed_dim=fields[5],
                           image_dim=fields[6], n_classes=fields[7],
                           encoding=_ENCODING_NAME[fields[8]])
    except ValueError as exc:
        raise CheckpointError("%s: inconsistent spec fields (%s)" % (path, exc))
    body = blob[56:]
    n = param_count(spec)
    if len(body) != 8 * n:
        raise CheckpointError("%s: payload is %d bytes, spec needs %d"
                              % (path, len(body), 8 * n))
    params = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return spec, seed, epoch, params


# ---------------------------------------------------------------- CSV logs

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def append_metrics_csv(path, record):
    """Append one row, writing the header first on a fresh file.

    Hill-climb records (record.accepted set) get an extra trailing
    `accepted` column; floats are serialized with repr so they parse back
    exactly.
    """
    cells = [str(record.epoch), _cell(record.l_sr), _cell(record.margin),
             _cell(record.srq), _cell(record.l_task), _cell(record.accuracy),
             _cell(record.seconds)]
    header = CSV_HEADER
    if record.accepted is not None:
        cells.append(str(record.accepted))
        header += ",accepted"
    with open(path, "a") as fh:
        if fh.tell() == 0:
            fh.write(header + "\n")
        fh.write(",".join(cells) + "\n")


def read_metrics_csv(path):
    """Parse a metrics CSV back into records; empty cells become None."""
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = line.strip().split(",")
            row = dict(zip(header, cells))

            def opt(key, cast=float):
                val = row.get(key, "")
                return cast(val) if val != "" else None

            records.append(MetricsRecord(
                epoch=int(row["epoch"]), l_sr=float(row["l_sr"]),
                margin=float(row["margin"]), srq=float(row["srq"]),
                l_task=opt("l_task"), accuracy=opt("accuracy"),
                seconds=opt("seconds"), accepted=opt("accepted", int)))
    return records


# ------------------------------------------------------------ PGM heatmaps

def export_heatmap(values, path):
    """Log-normalized grayscale dump of a matrix as binary PGM (P5).

    pixel = round(255 * (g - min g) / (max g - min g)) with
    g = log10(|v| + 1e-12); a constant matrix maps to all-zero pixels.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("heatmap input must be a 2-d matrix")
    if not np.isfinite(values).all():
        raise ValueError("heatmap input must be finite")
    g = np.log10(np.abs(values) + 1e-12)
    lo, hi = g.min(), g.max()
    if hi == lo:
        pixels = np.zeros(values.shape, dtype=np.uint8)
    else:
        pixels = np.rint(255.0 * (g - lo) / (hi - lo)).astype(np.uint8)
    header = "P5\n%d %d\n255\n" % (values.shape[1], values.shape[0])
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pixels.tobytes())
