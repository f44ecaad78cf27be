"""Deterministic text serialization: floats always carry 17 significant digits."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np


def fmt_float(x) -> str:
    # adding 0.0 folds -0.0 into 0.0
    return "none" if x is None else format(float(x) + 0.0, ".17g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "null" if not math.isfinite(x) else fmt_float(x)
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with non-finite floats as ``null`` and a trailing newline."""
    return _encode(obj, indent, 0) + "\n"


def loads(text: str) -> Any:
    return json.loads(text)


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_table(columns: Sequence[str], rows, comments: Sequence[str] = (),
              footer: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    for c in footer:
        buf.write(f"# {c}\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(float(v)) else fmt_float(v)
    return str(v)


def parse_csv_table(text: str) -> Tuple[List[str], List[str], np.ndarray]:
    """``(comments, columns, values)``; empty cells become NaN."""
    comments, body = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    vals = [[float(c) if c != "" else math.nan for c in row] for row in reader]
    return comments, columns, np.asarray(vals, dtype=float).reshape(-1, len(columns))


def parse_header(comment: str) -> Dict[str, str]:
    """``key=value,key=value`` comment line as a dict."""
    out = {}
    for part in comment.split(","):
        if "=" in part:
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def profile_to_text(profile) -> str:
    """``key=value`` lines; gridded profiles also carry ``t`` and ``u`` arrays."""
    if profile.kind == "custom" and not profile.is_gridded:
        raise ValueError("callable profiles have no text form; sample them onto a grid first")
    lines = [f"kind={profile.kind}", f"alpha={fmt_float(profile.alpha)}",
             f"beta={fmt_float(profile.beta)}", f"t0={fmt_float(profile.t0)}",
             f"r0={fmt_float(profile.r0)}"]
    if profile.kind == "custom":
        lines.append("t=" + " ".join(fmt_float(v) for v in profile.t_grid))
        lines.append("u=" + " ".join(fmt_float(v) for v in profile.u_grid))
    return "\n".join(lines) + "\n"


def profile_from_text(text: str):
    from .schedule import named_profile, profile_from_samples

    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
    kind = kv["kind"]
    if kind != "custom":
        alpha = None if kv.get("alpha", "none") == "none" else float(kv["alpha"])
        return named_profile(kind, alpha if alpha is not None else 1.0, float(kv.get("beta", 0.0)))
    t = np.array([float(v) for v in kv["t"].split()])
    u = np.array([float(v) for v in kv["u"].split()])
    return profile_from_samples(t, u, float(kv["t0"]))


def conjugate_to_csv(cp) -> str:
    """Columns ``s, I, I_prime``; jumps and flats as footer records."""
    footer = [f"jump,s={fmt_float(s)},size={fmt_float(m)}" for s, m in cp.jumps]
    footer += [f"flat,s_lo={fmt_float(a)},s_hi={fmt_float(b)},level={fmt_float(v)}" for a, b, v in cp.flats]
    return csv_table(["s", "I", "I_prime"], zip(cp.s_grid, cp.I_values, cp.left_deriv), footer=footer)
