"""Model file format v1.

A header line, then named blocks::

    #GMMN v1 cond=1 noise=10 hidden=128x3 residual=1 seed=0
    @glu0.W_lin 128 11
    <row of hexadecimal floats>
    ...

Weights are written with ``float.hex`` so a save/load round trip is exact.
Blocks named ``norm.*`` and ``stft`` carry the MS normaliser and analysis
settings the model was trained with.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import FormatError, VersionError
from ..f0core import PathLike
from ..modspec import MsNormalizer, StftConfig
from .network import GmmnModel, expected_shapes

MAGIC = "#GMMN"
VERSION = "v1"


def _block(name: str, arr: np.ndarray) -> list[str]:
    mat = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    lines = [f"@{name} {mat.shape[0]} {mat.shape[1]}"]
    lines += [" ".join(float(v).hex() for v in row) for row in mat]
    return lines


def save_model(path: PathLike, model: GmmnModel, normalizer: Optional[MsNormalizer] = None,
               stft: Optional[StftConfig] = None) -> None:
    lines = [
        f"{MAGIC} {VERSION} cond={model.cond_dim} noise={model.noise_dim} "
        f"hidden={model.hidden}x{model.n_layers} residual={int(model.residual)} seed={int(model.seed)}"
    ]
    for name in expected_shapes(model.cond_dim, model.noise_dim, model.hidden, model.n_layers):
        lines += _block(name, model.params[name])
    if normalizer is not None:
        lines += _block("norm.lo", normalizer.lo)
        lines += _block("norm.hi", normalizer.hi)
        lines += _block("norm.bins", np.array(normalizer.bins, dtype=np.float64))
    if stft is not None:
        lines += _block("stft", np.array([stft.window_frames, stft.hop_frames], dtype=np.float64))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line: str) -> dict:
    parts = line.split()
    if not parts or parts[0] != MAGIC:
        raise FormatError("missing '#GMMN' header")
    if len(parts) < 2 or parts[1] != VERSION:
        raise VersionError(f"unsupported model version {parts[1] if len(parts) > 1 else '?'!r}; expected {VERSION}")
    fields = dict(tok.partition("=")[::2] for tok in parts[2:])
    try:
        hidden, n_layers = (int(v) for v in fields["hidden"].split("x"))
        return {
            "cond_dim": int(fields["cond"]),
            "noise_dim": int(fields["noise"]),
            "hidden": hidden,
            "n_layers": n_layers,
            "residual": fields["residual"] == "1",
            "seed": int(fields["seed"]),
        }
    except (KeyError, ValueError) as e:
        raise FormatError(f"bad model header: {e}") from None


def _parse_blocks(lines: list[str]) -> dict[str, np.ndarray]:
    blocks = {}
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if len(head) != 3 or not head[0].startswith("@"):
            raise FormatError(f"line {i + 2}: expected a block header")
        try:
            rows, cols = int(head[1]), int(head[2])
        except ValueError:
            raise FormatError(f"line {i + 2}: bad block shape") from None
        body = lines[i + 1:i + 1 + rows]
        if len(body) != rows:
            raise FormatError(f"block {head[0][1:]} truncated")
        try:
            mat = np.array([[float.fromhex(t) for t in ln.split()] for ln in body], dtype=np.float64)
        except ValueError:
            raise FormatError(f"block {head[0][1:]}: malformed number") from None
        if mat.shape != (rows, cols):
            raise FormatError(f"block {head[0][1:]}: expected {rows}x{cols} values")
        blocks[head[0][1:]] = mat
        i += 1 + rows
    return blocks


def load_model(path: PathLike, with_assets: bool = False):
    """Load a model; with ``with_assets`` also return (normalizer, stft) or Nones."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty model file")
    meta = _parse_header(lines[0])
    blocks = _parse_blocks(lines[1:])
    shapes = expected_shapes(meta["cond_dim"], meta["noise_dim"], meta["hidden"], meta["n_layers"])
    params = {}
    for name, shape in shapes.items():
        if name not in blocks:
            raise FormatError(f"missing weight block {name}")
        params[name] = blocks[name].reshape(shape)
    model = GmmnModel(meta["cond_dim"], meta["noise_dim"], meta["hidden"], meta["n_layers"],
                      params, meta["seed"], meta["residual"])
    if not with_assets:
        return model
    normalizer = None
    if "norm.lo" in blocks:
        try:
            normalizer = MsNormalizer(blocks["norm.lo"].ravel(), blocks["norm.hi"].ravel(),
                                      tuple(int(b) for b in blocks["norm.bins"].ravel()))
        except (KeyError, ValueError) as e:
            raise FormatError(f"bad normaliser blocks: {e}") from None
    stft = None
    if "stft" in blocks:
        w, h = (int(v) for v in blocks["stft"].ravel())
        stft = StftConfig(w, h)
    return model, normalizer, stft
