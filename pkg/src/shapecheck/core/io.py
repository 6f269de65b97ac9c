"""Pmf and sample-count serialization.

Pmf files are either JSON ``{"dims": [...], "mass": [...]}`` or plain text with one
probability per line (blank lines and ``#`` comments ignored). Count files are JSON
``{"m": ..., "m_actual": ..., "counts": [...], "dims": [...]}``; a raw sample
``{"n": ..., "samples": [i, ...]}`` is accepted as well.
"""

import json
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..errors import ValidationError
from .models import Pmf, SampleCounts


def pmf_to_dict(pmf: Pmf) -> dict:
    return {"dims": list(pmf.dims) if pmf.dims is not None else None, "mass": pmf.mass.tolist()}


def pmf_from_dict(data: dict, renormalize: bool = False) -> Pmf:
    if not isinstance(data, dict) or "mass" not in data:
        raise ValidationError("Pmf JSON must be an object with a 'mass' list")
    dims = data.get("dims")
    if renormalize:
        return Pmf.from_weights(data["mass"], dims=dims, clip_tol=1e-12)
    return Pmf(np.asarray(data["mass"], dtype=float), dims=dims)


def parse_pmf_text(text: str, renormalize: bool = False) -> Pmf:
    """Parse one probability per line."""
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValidationError(f"Line {lineno}: not a number: {line!r}")
    if renormalize:
        return Pmf.from_weights(values, clip_tol=1e-12)
    return Pmf(np.asarray(values, dtype=float))


def load_pmf(path: Path, renormalize: bool = False) -> Pmf:
    """Load a pmf from a JSON or plain-text file.

    Args:
        path: File to read; JSON is detected by content, not extension
        renormalize: Rescale entries that do not sum to 1 instead of rejecting them

    Returns:
        The parsed Pmf

    Raises:
        ValidationError: If the file is missing, unreadable, or not a valid pmf
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"Cannot read pmf file {path}: {e}")
    stripped = text.lstrip()
    try:
        if stripped.startswith("{"):
            return pmf_from_dict(json.loads(text), renormalize=renormalize)
        return parse_pmf_text(text, renormalize=renormalize)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Invalid JSON in {path}: {e}")
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}")


def dump_pmf(pmf: Pmf, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(pmf_to_dict(pmf), indent=2)
    if fmt == "text":
        return "\n".join(repr(float(x)) for x in pmf.mass) + "\n"
    raise ValidationError(f"Unknown pmf format: {fmt}")


def counts_to_dict(counts: SampleCounts) -> dict:
    return {
        "m": counts.m_nominal,
        "m_actual": counts.m_actual,
        "counts": counts.counts.tolist(),
        "dims": list(counts.dims) if counts.dims is not None else None,
    }


def counts_from_dict(data: dict) -> SampleCounts:
    if not isinstance(data, dict):
        raise ValidationError("Counts JSON must be an object")
    dims: Optional[Any] = data.get("dims")
    if "counts" in data:
        counts = np.asarray(data["counts"])
        m = data.get("m", int(counts.sum()))
        return SampleCounts(counts, int(m), dims=dims)
    if "samples" in data:
        if "n" not in data and dims is None:
            raise ValidationError("A raw sample needs 'n' or 'dims'")
        n = int(data["n"]) if "n" in data else int(np.prod(dims))
        samples = np.asarray(data["samples"], dtype=np.int64)
        if samples.size and (samples.min() < 0 or samples.max() >= n):
            raise ValidationError(f"Sample symbols must lie in [0, {n})")
        return SampleCounts(np.bincount(samples, minlength=n), int(samples.size), dims=dims)
    raise ValidationError("Counts JSON needs 'counts' or 'samples'")


def load_counts(path: Path) -> SampleCounts:
    try:
        return counts_from_dict(json.loads(Path(path).read_text()))
    except OSError as e:
        raise ValidationError(f"Cannot read counts file {path}: {e}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"Invalid JSON in {path}: {e}")


def dump_counts(counts: SampleCounts) -> str:
    return json.dumps(counts_to_dict(counts), indent=2)
