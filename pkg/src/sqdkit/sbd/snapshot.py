"""Text snapshots of (configuration, coefficient) pairs for carryover checkpoints."""

from __future__ import annotations

from pathlib import Path
from typing import TextIO

import numpy as np

from ..configs import format_config_row, parse_spin_string
from ..errors import ParseError


def write_snapshot(configs: np.ndarray, coeffs: np.ndarray, norb: int, stream: TextIO | str | Path) -> None:
    if isinstance(stream, (str, Path)):
        with open(stream, "w") as fh:
            return write_snapshot(configs, coeffs, norb, fh)
    for (a, b), c in zip(configs, coeffs):
        stream.write(f"{format_config_row(a, b, norb)} {c:.16e}\n")


def read_snapshot(stream: TextIO | str | Path, norb: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(stream, (str, Path)):
        with open(stream) as fh:
            return read_snapshot(fh, norb)
    rows, coeffs = [], []
    for lineno, line in enumerate(stream, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 3:
            raise ParseError(f"expected '<alpha> <beta> <coeff>', got {line.rstrip()!r}", lineno)
        try:
            rows.append((parse_spin_string(fields[0], norb), parse_spin_string(fields[1], norb)))
            coeffs.append(float(fields[2]))
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        except ValueError:
            raise ParseError(f"bad coefficient {fields[2]!r}", lineno) from None
    return np.array(rows, dtype=np.uint64).reshape(-1, 2), np.array(coeffs)
