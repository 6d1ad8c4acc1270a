"""Volume and slice file IO.

Volumes: NIfTI-1 (.nii, .nii.gz) via a self-contained header parser, plus a
canonical raw format (little-endian float32 row-major + JSON sidecar with
dims, spacing and id). Slices: 16-bit grayscale PNG or raw float32 (.npy).
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .imagecore import Slice2D, Volume3D

PNG_MAX = 65535

# NIfTI-1 datatype codes -> numpy dtypes
_NIFTI_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}


def _read_maybe_gzipped(path: Path) -> bytes:
    blob = path.read_bytes()
    if blob[:2] == b"\x1f\x8b":
        return gzip.decompress(blob)
    return blob


def read_nifti(path: str | Path, volume_id: str | None = None) -> Volume3D:
    """Read a single-file NIfTI-1 volume (.nii or .nii.gz).

    Parses the 348-byte header directly: dims, pixdim spacing, datatype,
    vox_offset and the scl_slope/scl_inter intensity scaling.
    """
    path = Path(path)
    blob = _read_maybe_gzipped(path)
    if len(blob) < 352:
        raise ValueError(f"{path}: too short to be a NIfTI-1 file")

    for bo in ("<", ">"):
        sizeof_hdr = struct.unpack_from(bo + "i", blob, 0)[0]
        if sizeof_hdr == 348:
            break
    else:
        raise ValueError(f"{path}: bad NIfTI-1 header (sizeof_hdr != 348)")
    magic = blob[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise ValueError(f"{path}: unrecognized NIfTI magic {magic!r}")

    dim = struct.unpack_from(bo + "8h", blob, 40)
    datatype = struct.unpack_from(bo + "h", blob, 70)[0]
    pixdim = struct.unpack_from(bo + "8f", blob, 76)
    vox_offset = int(struct.unpack_from(bo + "f", blob, 108)[0])
    scl_slope = struct.unpack_from(bo + "f", blob, 112)[0]
    scl_inter = struct.unpack_from(bo + "f", blob, 116)[0]

    ndim = dim[0]
    if ndim < 3:
        raise ValueError(f"{path}: expected a 3D volume, header says {ndim}D")
    nx, ny, nz = dim[1], dim[2], dim[3]
    extra = int(np.prod([d for d in dim[4:1 + ndim] if d > 0])) if ndim > 3 else 1
    if extra != 1:
        raise ValueError(f"{path}: {ndim}D volume with non-singleton higher dims is unsupported")
    if datatype not in _NIFTI_DTYPES:
        raise ValueError(f"{path}: unsupported NIfTI datatype code {datatype}")

    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder(bo)
    count = nx * ny * nz
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=vox_offset)
    # NIfTI stores the first dimension fastest
    data = data.reshape((nx, ny, nz), order="F").astype(np.float64)
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        slope = scl_slope if scl_slope != 0.0 else 1.0
        data = data * slope + scl_inter

    spacing = tuple(abs(float(p)) or 1.0 for p in pixdim[1:4])
    vid = volume_id if volume_id is not None else path.name.removesuffix(".gz").removesuffix(".nii")
    return Volume3D(data=data, spacing=spacing, id=vid)


def write_nifti(vol: Volume3D, path: str | Path) -> None:
    """Write a volume as single-file NIfTI-1 (float32), gzipped for .gz paths."""
    path = Path(path)
    nx, ny, nz = vol.dims
    hdr = bytearray(348)
    struct.pack_into("<i", hdr, 0, 348)
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 16)  # float32
    struct.pack_into("<h", hdr, 72, 32)  # bitpix
    struct.pack_into("<8f", hdr, 76, 1.0, *vol.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)  # vox_offset
    struct.pack_into("<f", hdr, 112, 1.0)  # scl_slope
    # sform: plain scaling so other tools place the volume sensibly
    struct.pack_into("<h", hdr, 254, 1)
    struct.pack_into("<4f", hdr, 280, vol.spacing[0], 0, 0, 0)
    struct.pack_into("<4f", hdr, 296, 0, vol.spacing[1], 0, 0)
    struct.pack_into("<4f", hdr, 312, 0, 0, vol.spacing[2], 0)
    hdr[344:348] = b"n+1\x00"

    body = bytes(hdr) + b"\x00" * 4 + np.asfortranarray(vol.data.astype("<f4")).tobytes(order="F")
    if path.suffix == ".gz":
        # fixed mtime so identical volumes produce identical files
        path.write_bytes(gzip.compress(body, mtime=0))
    else:
        path.write_bytes(body)


def read_raw_volume(json_path: str | Path) -> Volume3D:
    """Read the canonical raw format: JSON sidecar + little-endian float32
    row-major data file next to it."""
    json_path = Path(json_path)
    meta = json.loads(json_path.read_text())
    for key in ("dims", "spacing", "id"):
        if key not in meta:
            raise ValueError(f"{json_path}: sidecar missing required key {key!r}")
    dims = tuple(int(d) for d in meta["dims"])
    data_path = json_path.with_suffix(".f32")
    raw = np.frombuffer(data_path.read_bytes(), dtype="<f4")
    if raw.size != int(np.prod(dims)):
        raise ValueError(f"{data_path}: expected {int(np.prod(dims))} float32 values, found {raw.size}")
    data = raw.reshape(dims).astype(np.float64)
    return Volume3D(data=data, spacing=tuple(float(s) for s in meta["spacing"]), id=str(meta["id"]))


def write_raw_volume(vol: Volume3D, json_path: str | Path) -> None:
    json_path = Path(json_path)
    json_path.with_suffix(".f32").write_bytes(vol.data.astype("<f4").tobytes(order="C"))
    meta = {"dims": list(vol.dims), "spacing": list(vol.spacing), "id": vol.id}
    json_path.write_text(json.dumps(meta, indent=2) + "\n")


def load_volume(path: str | Path) -> Volume3D:
    """Dispatch on extension: .nii/.nii.gz or raw .json sidecar."""
    path = Path(path)
    name = path.name
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return read_nifti(path)
    if name.endswith(".json"):
        return read_raw_volume(path)
    raise ValueError(f"{path}: unrecognized volume format (expected .nii, .nii.gz or .json sidecar)")


def find_volumes(directory: str | Path) -> list[Path]:
    """All volume files in a directory, sorted for stable ordering."""
    directory = Path(directory)
    found = [p for p in sorted(directory.iterdir())
             if p.name.endswith((".nii", ".nii.gz"))
             or (p.suffix == ".json" and p.with_suffix(".f32").exists())]
    if not found:
        raise ValueError(f"no volumes found in {directory}")
    return found


def save_slice_png(s: Slice2D, path: str | Path) -> None:
    """16-bit grayscale PNG; pixel value = round(p * 65535)."""
    arr = np.round(s.pixels * PNG_MAX).astype(np.uint16)
    Image.fromarray(arr).save(Path(path), format="PNG")  # uint16 -> I;16


def load_slice_png(path: str | Path) -> Slice2D:
    img = Image.open(Path(path))
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:  # tolerate RGB inputs by averaging channels
        arr = arr.mean(axis=2)
    maxval = float(PNG_MAX if img.mode in ("I;16", "I") else 255)
    return Slice2D(np.clip(arr / maxval, 0.0, 1.0))


def save_slice_raw(s: Slice2D, path: str | Path) -> None:
    np.save(Path(path), s.pixels.astype(np.float32))


def load_slice_raw(path: str | Path) -> Slice2D:
    return Slice2D(np.load(Path(path)).astype(np.float64))
