"""JSON helpers: matrices, certificates and a 17-significant-digit writer."""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import MalformedInputError


def matrix_to_dict(M):
    M = np.asarray(M, dtype=complex)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def matrix_from_dict(data):
    try:
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInputError(f"bad matrix record: {exc}") from exc
    if re.ndim != 2 or re.shape[0] != re.shape[1] or re.shape != im.shape:
        raise MalformedInputError(f"matrix must be square, got shapes {re.shape} / {im.shape}")
    return re + 1j * im


def _format_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = f"{x:.17g}"
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def _encode(obj, indent, level, out):
    pad = " " * (indent * (level + 1)) if indent else ""
    end = " " * (indent * level) if indent else ""
    nl = "\n" if indent else ""
    sep = ", " if not indent else ","
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{" + nl)
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(pad + json.dumps(str(k)) + ": ")
            _encode(v, indent, level + 1, out)
            if i < len(items) - 1:
                out.append(sep)
            out.append(nl)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            out.append("[]")
            return
        flat = all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in seq)
        if flat or not indent:
            out.append("[")
            for i, v in enumerate(seq):
                _encode(v, 0, 0, out)
                if i < len(seq) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[" + nl)
        for i, v in enumerate(seq):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            if i < len(seq) - 1:
                out.append(sep)
            out.append(nl)
        out.append(end + "]")
    elif isinstance(obj, complex):
        raise TypeError("complex values must be split into re/im before serialization")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 1) -> str:
    """JSON text with every float written with 17 significant digits."""
    out = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def loads(text: str):
    return json.loads(text)
