"""Model file format.

8-byte magic "MSTKMDL1", a uint32 little-endian manifest length, a JSON
manifest (layer specs, tensor shapes, seed, format version, optional config
echo), then the raw little-endian IEEE-754 float32 weight blob in manifest
order. Round-trips are bit-exact.
"""

import json
import struct
from pathlib import Path

import numpy as np

from microstack.nn.core import LayerSpec, Network

MAGIC = b"MSTKMDL1"
FORMAT_VERSION = 1


def save_model(net, path, extra=None):
    """Write the network; `extra` is an optional JSON-safe config echo."""
    tensors = []
    blobs = []
    for i, group in enumerate(net.params):
        for name, tensor in zip(("weight", "bias"), group):
            arr = np.ascontiguousarray(tensor.data.astype("<f4"))
            tensors.append({"layer": i, "name": name, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": net.seed,
        "layers": [spec.to_dict() for spec in net.specs],
        "tensors": tensors,
        "extra": extra or {},
    }
    payload = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(Path(path), "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(payload)))
        f.write(payload)
        for blob in blobs:
            f.write(blob)


def load_model(path):
    """Read a model file back into a Network (float32)."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"not a microstack model: {path}")
    offset = len(MAGIC)
    (mlen,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if len(raw) < offset + mlen:
        raise ValueError(f"truncated manifest in {path}")
    manifest = json.loads(raw[offset : offset + mlen].decode("utf-8"))
    offset += mlen
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    specs = [LayerSpec(**d) for d in manifest["layers"]]
    net = Network(specs, seed=manifest.get("seed", 0), init=False)
    flat = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        n_bytes = int(np.prod(shape)) * 4
        if len(raw) < offset + n_bytes:
            raise ValueError(f"blob length mismatch in {path}")
        arr = np.frombuffer(raw, dtype="<f4", count=int(np.prod(shape)), offset=offset)
        flat[(entry["layer"], entry["name"])] = arr.reshape(shape)
        offset += n_bytes
    if offset != len(raw):
        raise ValueError(f"blob length mismatch in {path}")
    for i, group in enumerate(net.params):
        for name, tensor in zip(("weight", "bias"), group):
            arr = flat.get((i, name))
            if arr is None:
                raise ValueError(f"manifest missing tensor layer={i} name={name}")
            if arr.shape != tensor.data.shape:
                raise ValueError(
                    f"shape mismatch for layer {i} {name}: "
                    f"manifest {arr.shape}, expected {tensor.data.shape}"
                )
            tensor.data[...] = arr
    net.extra = manifest.get("extra", {})
    return net
