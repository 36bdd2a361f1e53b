"""Map-file helpers for the training-loop snippet.

Native `.gamestate` files are a binary container (TNGS magic); the
canonical loop loads map files with `pickle.load`, so this module converts
a folder of native files into pickle-wrapped payloads with the same names.
`pickle.load` then yields the raw container bytes, which `build_simulator`
accepts directly.
"""

from __future__ import annotations

import os
import pickle

GAMESTATE_MAGIC = b"TNGS"


def wrap_gamestate(raw: bytes) -> bytes:
    if raw[:4] != GAMESTATE_MAGIC:
        raise ValueError("not a native .gamestate container")
    return pickle.dumps(raw, protocol=4)


def convert_map_folder(src_dir: str, dst_dir: str) -> list[str]:
    """Pickle-wrap every native .gamestate file; returns written paths.
    Files are written in sorted name order."""
    os.makedirs(dst_dir, exist_ok=True)
    written = []
    for name in sorted(os.listdir(src_dir)):
        if ".gamestate" not in name:
            continue
        with open(os.path.join(src_dir, name), "rb") as f:
            raw = f.read()
        out = os.path.join(dst_dir, name)
        with open(out, "wb") as f:
            f.write(wrap_gamestate(raw))
        written.append(out)
    return written
