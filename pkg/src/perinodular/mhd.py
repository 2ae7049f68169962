"""MetaImage-style two-file volume IO.

A ``.mhd`` text header describes the grid; the raw payload lives in a
sibling file, little-endian, x-fastest. CT intensity volumes are stored as
MET_SHORT, masks as MET_UCHAR.
"""

from __future__ import annotations

import os

import numpy as np

from .grid import Mask, Spacing, Volume

_DTYPES = {"MET_SHORT": np.dtype("<i2"), "MET_UCHAR": np.dtype("u1")}


class HeaderError(ValueError):
    """Raised for malformed or unsupported headers."""


def write_image(path: str, img: Volume) -> None:
    """Write a Volume (MET_SHORT) or Mask (MET_UCHAR) as ``path``.mhd + .raw."""
    path = str(path)
    if not path.endswith(".mhd"):
        path = path + ".mhd"
    raw_name = os.path.basename(path)[:-4] + ".raw"
    if isinstance(img, Mask):
        elem, payload = "MET_UCHAR", img.data.astype("u1")
    else:
        elem, payload = "MET_SHORT", img.data.astype("<i2")
    nx, ny, nz = img.shape
    sx, sy, sz = img.spacing
    ox, oy, oz = img.origin
    header = (
        "ObjectType = Image\n"
        "NDims = 3\n"
        f"DimSize = {nx} {ny} {nz}\n"
        f"ElementSpacing = {sx:g} {sy:g} {sz:g}\n"
        f"Offset = {ox:g} {oy:g} {oz:g}\n"
        "BinaryDataByteOrderMSB = False\n"
        f"ElementType = {elem}\n"
        f"ElementDataFile = {raw_name}\n"
    )
    with open(path, "w") as fh:
        fh.write(header)
    with open(os.path.join(os.path.dirname(path), raw_name), "wb") as fh:
        fh.write(payload.ravel(order="F").tobytes())


def read_image(path: str) -> Volume:
    """Read an .mhd/.raw pair; returns a Mask for MET_UCHAR, else a Volume."""
    keys = _read_header(path)
    dims = tuple(int(v) for v in keys["DimSize"].split())
    if len(dims) != 3:
        raise HeaderError(f"expected 3 dims, got {keys['DimSize']!r}")
    spacing = Spacing.of(tuple(float(v) for v in keys["ElementSpacing"].split()))
    origin = tuple(float(v) for v in keys.get("Offset", "0 0 0").split())
    elem = keys["ElementType"]
    if elem not in _DTYPES:
        raise HeaderError(f"unsupported ElementType {elem!r}")
    raw_path = os.path.join(os.path.dirname(os.path.abspath(path)), keys["ElementDataFile"])
    data = np.fromfile(raw_path, dtype=_DTYPES[elem])
    if data.size != np.prod(dims):
        raise HeaderError(
            f"payload has {data.size} elements, header promises {int(np.prod(dims))}"
        )
    arr = data.reshape(dims, order="F")
    if elem == "MET_UCHAR":
        return Mask(arr, spacing=spacing, origin=origin)
    return Volume(arr, spacing=spacing, origin=origin)


def _read_header(path: str) -> dict[str, str]:
    keys: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            k, v = line.split("=", 1)
            keys[k.strip()] = v.strip()
    for required in ("NDims", "DimSize", "ElementSpacing", "ElementType", "ElementDataFile"):
        if required not in keys:
            raise HeaderError(f"missing header key {required}")
    if keys["NDims"] != "3":
        raise HeaderError(f"only NDims = 3 supported, got {keys['NDims']}")
    if keys.get("BinaryDataByteOrderMSB", "False").lower() == "true":
        raise HeaderError("big-endian payloads are not supported")
    return keys
