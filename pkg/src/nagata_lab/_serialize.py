from __future__ import annotations

import dataclasses
import json
import math

import numpy as np


def jsonable(obj):
    """Convert dataclasses, numpy values and complex numbers to JSON-ready data.

    Complex numbers become ``[re, im]``; non-finite floats become strings
    (``"inf"``, ``"-inf"``, ``"nan"``) so the output stays strict JSON.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_") and f.metadata.get("serialize", True)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return obj


def _num(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True)
