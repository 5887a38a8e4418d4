"""Versioned binary checkpoints.

Layout: an 8-byte magic, a little-endian uint64 header length, a UTF-8
JSON header, then the raw little-endian float64 bytes of every parameter
block in the order the header lists them.  The header carries the format
version, the training config, the epoch, the RNG state, and arbitrary
metadata (input digests, language tags), so a run can be resumed or
audited without the original command line.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .autoencoder import Autoencoder
from .nn import DiscriminatorNet, LinearMap
from .training import ModelState, TrainConfig

MAGIC = b"BLXCKPT\x00"
FORMAT_VERSION = 1


def save_checkpoint(path, state: ModelState, cfg: TrainConfig,
                    epoch: int = 0, rng_state: dict | None = None,
                    meta: dict | None = None) -> None:
    blocks = state.param_blocks()
    header = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "epoch": int(epoch),
        "rng_state": rng_state,
        "meta": meta or {},
        "emb_dim": state.ae_src.emb_dim,
        "code_dim": state.code_dim,
        "lang_src": state.ae_src.lang_tag,
        "lang_tgt": state.ae_tgt.lang_tag,
        "blocks": [{"name": k, "shape": list(v.shape)} for k, v in blocks.items()],
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for arr in blocks.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (state, cfg, epoch, rng_state, meta)."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint version "
                f"{header['format_version']}")
        arrays = {}
        for spec in header["blocks"]:
            shape = tuple(spec["shape"])
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated block {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

    cfg = TrainConfig.from_dict(header["config"])
    ae_src = Autoencoder(LinearMap(arrays["ae_src.encoder.weight"]),
                         LinearMap(arrays["ae_src.decoder.weight"]),
                         header.get("lang_src", "src"))
    ae_tgt = Autoencoder(LinearMap(arrays["ae_tgt.encoder.weight"]),
                         LinearMap(arrays["ae_tgt.decoder.weight"]),
                         header.get("lang_tgt", "tgt"))

    def disc(tag):
        return DiscriminatorNet.from_layers(
            LinearMap(arrays[f"{tag}.layer1.weight"], arrays[f"{tag}.layer1.bias"]),
            LinearMap(arrays[f"{tag}.layer2.weight"], arrays[f"{tag}.layer2.bias"]),
            LinearMap(arrays[f"{tag}.layer3.weight"], arrays[f"{tag}.layer3.bias"]),
            cfg.leaky_slope, cfg.disc_dropout)

    state = ModelState(ae_src, ae_tgt,
                       LinearMap(arrays["to_tgt.weight"]),
                       LinearMap(arrays["to_src.weight"]),
                       disc("disc_src"), disc("disc_tgt"))
    return state, cfg, header["epoch"], header["rng_state"], header["meta"]
