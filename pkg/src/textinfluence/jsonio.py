"""JSON output with every float written at 17 significant digits.

The stdlib encoder uses the shortest repr; downstream diffing tools in this
project expect a fixed width, so floats are formatted explicitly.
"""

import json
import math

import numpy as np


def _fmt_float(x):
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent, level):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = [f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return _join("{", "}", items, indent, level)
    if isinstance(obj, (list, tuple)):
        items = [_encode(v, indent, level + 1) for v in obj]
        return _join("[", "]", items, indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _join(open_, close, items, indent, level):
    if not items:
        return open_ + close
    if indent is None:
        return open_ + ", ".join(items) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + i for i in items) + "\n" + end + close


def dumps(obj, indent=None):
    return _encode(obj, indent, 0)


def dump(obj, path, indent=2):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj, indent=indent))
        fh.write("\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
