"""Versioned JSON checkpoints: architecture, input scaling and flat weights."""

import json
from pathlib import Path

import numpy as np

from .dataset import InputKind, NormalizationParams
from .errors import DimensionMismatch, FormatError
from .network import NetworkArchitecture, NetworkWeights

FORMAT = "beamdetect-checkpoint"
VERSION = 1


def save_checkpoint(path, net, params, input_kind, meta=None):
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "input_kind": InputKind(input_kind).value,
        "architecture": {
            "input_size": net.arch.input_size,
            "hidden_sizes": list(net.arch.hidden_sizes),
            "output_size": net.arch.output_size,
            "hidden_activation": net.arch.hidden_activation,
            "output_activation": net.arch.output_activation,
        },
        "normalization": {
            "input_min": params.input_min.tolist(),
            "input_max": params.input_max.tolist(),
            "target_min": params.target_min.tolist(),
            "target_max": params.target_max.tolist(),
        },
        "weights": net.flatten().tolist(),
        "meta": meta or {},
    }
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_checkpoint(path, expected_arch=None):
    """Returns ``(net, params, input_kind, meta)``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc.msg})", line=exc.lineno) from None
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise FormatError(f"{path}: not a {FORMAT} v{VERSION} file")
    try:
        arch = NetworkArchitecture(**doc["architecture"])
        norm = doc["normalization"]
        params = NormalizationParams(*(np.array(norm[k], dtype=float) for k in
                                       ("input_min", "input_max", "target_min", "target_max")))
        net = NetworkWeights.unflatten(arch, doc["weights"])
        input_kind = InputKind(doc["input_kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if params.input_min.shape != (arch.input_size,):
        raise FormatError(f"{path}: normalization does not match input size {arch.input_size}")
    if expected_arch is not None and expected_arch != arch:
        raise DimensionMismatch(
            f"checkpoint architecture {arch.layer_sizes} != expected {expected_arch.layer_sizes}")
    return net, params, input_kind, doc.get("meta", {})
