"""Training data for the power-control networks and its on-disk format.

Binary layout (little endian): ``b"CFD1"``, u32 rows, u32 input columns,
u32 output columns, then each row's inputs followed by its labels as float64.
Metadata sits next to the file as ``<path>.json``.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from ..heuristics import fpc_dl, fpc_ul_raw
from ..scenario import SystemConfig, ranked_association

__all__ = [
    "Dataset",
    "MAGIC",
    "split_tags",
    "dl_features",
    "ul_features",
    "gather_links",
    "scatter_links",
    "write_dataset",
    "read_dataset",
    "sidecar_path",
]

MAGIC = b"CFD1"
_HEADER = struct.Struct("<4sIII")
SPLITS = ("train", "val", "test")


def split_tags(n):
    """Contiguous 80/10/10 train/val/test tags for ``n`` rows."""
    n_train = int(np.floor(0.8 * n))
    n_val = int(np.floor(0.1 * n))
    tags = np.full(n, "test", dtype=object)
    tags[:n_train] = "train"
    tags[n_train:n_train + n_val] = "val"
    return tags


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("inputs and labels differ in row count")

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def tags(self):
        return split_tags(self.n_rows)

    def split(self, name):
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        mask = self.tags == name
        return self.X[mask], self.Y[mask]

    def indices(self, name):
        return np.flatnonzero(self.tags == name)


# features -------------------------------------------------------------------

def gather_links(matrix, ranking):
    """Flatten the (K, M) entries of each UE's serving APs, strongest first."""
    K = ranking.shape[0]
    return np.asarray(matrix)[np.arange(K)[:, None], ranking].ravel()


def scatter_links(vec, ranking, num_aps):
    """Inverse of :func:`gather_links`; non-serving entries are zero."""
    K, N = ranking.shape
    out = np.zeros((K, num_aps))
    out[np.arange(K)[:, None], ranking] = np.asarray(vec, dtype=float).reshape(K, N)
    return out


def dl_features(alpha, association, cfg: SystemConfig, kappa=0.5):
    """FPC powers on the serving links, ordered per UE by decreasing gain."""
    ranking = ranked_association(alpha, association)
    return gather_links(fpc_dl(alpha, association, cfg, kappa).p, ranking), ranking


def ul_features(alpha, association, cfg: SystemConfig, kappa=-0.5):
    """FPC UE powers before SAR scaling."""
    return fpc_ul_raw(alpha, association, cfg, kappa)


# file I/O ---------------------------------------------------------------------

def sidecar_path(path):
    return f"{path}.json"


def write_dataset(path, ds: Dataset):
    """Write ``ds`` atomically; a failed write leaves no partial file behind."""
    rows, n_in = ds.X.shape
    n_out = ds.Y.shape[1]
    body = np.ascontiguousarray(np.hstack([ds.X, ds.Y]), dtype="<f8")
    meta = dict(ds.meta)
    meta.update({"rows": rows, "in_cols": n_in, "out_cols": n_out,
                 "split": {"train": 0.8, "val": 0.1, "test": 0.1}})
    tmp, tmp_meta = f"{path}.part", f"{sidecar_path(path)}.part"
    try:
        with open(tmp, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, rows, n_in, n_out))
            fh.write(body.tobytes())
        with open(tmp_meta, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        os.replace(tmp_meta, sidecar_path(path))
    except BaseException:
        for leftover in (tmp, tmp_meta):
            if os.path.exists(leftover):
                os.remove(leftover)
        raise


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, n_in, n_out = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * rows * (n_in + n_out)
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    body = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(rows, n_in + n_out)
    meta = {}
    if os.path.exists(sidecar_path(path)):
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
    return Dataset(X=body[:, :n_in].astype(float), Y=body[:, n_in:].astype(float), meta=meta)
