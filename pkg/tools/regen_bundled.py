#!/usr/bin/env python3
"""Regenerate the bundled scenario files from their builders."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fabricsim import scenario as sc  # noqa: E402

data_dir = pathlib.Path(__file__).resolve().parents[1] \
    / "src" / "fabricsim" / "data"
data_dir.mkdir(parents=True, exist_ok=True)
for name, builder in sc._BUILDERS.items():
    payload = sc.serialize_scenario(builder())
    (data_dir / f"{name}.json").write_bytes(payload)
    print(f"wrote {name}.json ({len(payload)} bytes)")
