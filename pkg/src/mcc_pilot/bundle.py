"""JSON observation bundles written by ``simulate`` and read by ``recover``.

Complex arrays are nested lists whose leaves are ``[re, im]`` pairs of
decimal floats (``repr`` precision, so values round-trip exactly).
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .channel import DDChannel, ObservationWindow, SimConfig

FORMAT = "mcc-pilot-observation/1"


def encode_complex(a) -> list:
    a = np.asarray(a, dtype=np.complex128)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return pairs.tolist()


def decode_complex(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1:] != (2,):
        raise ValueError("complex arrays must end in [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def to_bundle(window: ObservationWindow, config: SimConfig, pattern=None, shift=0,
              channel: DDChannel | None = None) -> dict:
    out = {
        "format": FORMAT,
        "config": asdict(config),
        "pattern": None if pattern is None else list(pattern.schedule),
        "shift": int(shift),
        "window": {
            "times": window.times.tolist(),
            "subbands": window.subbands.tolist(),
            "sigma_sq": [float(s) for s in window.sigma_sq],
            "y": encode_complex(window.y),
        },
    }
    if channel is not None:
        out["truth"] = {
            "support": [[l, m, [g.real, g.imag]] for l, m, g in channel.support],
            "h": encode_complex(channel.h),
        }
    return out


def from_bundle(d: dict):
    """``(config, window, channel_or_None)`` from a bundle dictionary."""
    if d.get("format") != FORMAT:
        raise ValueError(f"unsupported bundle format {d.get('format')!r}")
    config = SimConfig(**d["config"])
    w = d["window"]
    window = ObservationWindow(
        times=np.asarray(w["times"], dtype=np.int64),
        subbands=np.asarray(w["subbands"], dtype=np.int64),
        y=decode_complex(w["y"]).reshape(len(w["times"]), config.M),
        sigma_sq=np.asarray(w["sigma_sq"], dtype=np.float64),
        M=config.M,
    )
    channel = None
    if d.get("truth"):
        h = decode_complex(d["truth"]["h"]).reshape(config.N_tau, config.N_nu)
        support = tuple((int(l), int(m), complex(g[0], g[1])) for l, m, g in d["truth"]["support"])
        channel = DDChannel(h, support)
    return config, window, channel


def save_bundle(bundle: dict, path) -> None:
    Path(path).write_text(json.dumps(bundle))


def load_bundle(path):
    return from_bundle(json.loads(Path(path).read_text()))
