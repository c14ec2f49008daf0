# Copyright 2026 The lqer-toolkit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Convert 2-D NumPy arrays to/from the .lqmx matrix container.

Usage:
    python npy_to_lqmx.py to-lqmx  input.npy  output.lqmx [--f32]
    python npy_to_lqmx.py to-npy   input.lqmx output.npy
"""

import argparse
import struct
import sys

import numpy as np

MAGIC = b"LQMX"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_lqmx(array: np.ndarray, path: str, use_f32: bool) -> None:
    if array.ndim != 2:
        sys.exit(f"expected a 2-D array, got shape {array.shape}")
    dtype_code = 0 if use_f32 else 1
    payload = np.ascontiguousarray(array, dtype=DTYPES[dtype_code])
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<HBQQ", VERSION, dtype_code, *array.shape))
        out.write(payload.tobytes())


def read_lqmx(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            sys.exit(f"{path}: bad magic")
        version, dtype_code, rows, cols = struct.unpack("<HBQQ", f.read(19))
        if version != VERSION:
            sys.exit(f"{path}: unsupported version {version}")
        if dtype_code not in DTYPES:
            sys.exit(f"{path}: unknown dtype code {dtype_code}")
        data = np.frombuffer(f.read(), dtype=DTYPES[dtype_code], count=rows * cols)
        return data.reshape(rows, cols)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    to_lqmx = sub.add_parser("to-lqmx")
    to_lqmx.add_argument("input")
    to_lqmx.add_argument("output")
    to_lqmx.add_argument("--f32", action="store_true", help="store as float32")

    to_npy = sub.add_parser("to-npy")
    to_npy.add_argument("input")
    to_npy.add_argument("output")

    args = parser.parse_args()
    if args.command == "to-lqmx":
        write_lqmx(np.load(args.input), args.output, args.f32)
    else:
        np.save(args.output, read_lqmx(args.input))


if __name__ == "__main__":
    main()
