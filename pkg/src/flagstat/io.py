"""JSON file formats for flag sets, motion sets and weights.

Flag set::

    {"signature": [d1, ..., dk], "ambient": d, "points": [[row-major d*dk reals], ...]}

Motion set::

    {"motions": [{"rotation": [9 row-major reals], "translation": [3 reals]}, ...]}

Floats are written with 17 significant digits so reading a written file
reproduces the same doubles.
"""
import json
import os
import tempfile

import numpy as np

from .errors import FlagstatError, InvalidInput
from .flag import FlagSignature, make_flag
from .motion import SO_TOL, RigidMotion, check_special_orthogonal, orthogonality_defect
from .numerics import polar_factor

MOTION_FILE_TOL = 1e-6


class FormatError(InvalidInput):
    """Malformed input file; the message names the offending field."""


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from exc


def _real_list(value, where, length=None):
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise FormatError(f"{where}: expected a list of numbers")
    if length is not None and len(value) != length:
        raise FormatError(f"{where}: expected {length} numbers, got {len(value)}")
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{where}: non-finite entry")
    return arr


def parse_flag_set(doc, source="<flag set>"):
    if not isinstance(doc, dict):
        raise FormatError(f"{source}: top level must be an object")
    for key in ("signature", "ambient", "points"):
        if key not in doc:
            raise FormatError(f"{source}: missing field '{key}'")
    dims = doc["signature"]
    if not isinstance(dims, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in dims):
        raise FormatError(f"{source}: field 'signature' must be a list of integers")
    if not isinstance(doc["ambient"], int) or isinstance(doc["ambient"], bool):
        raise FormatError(f"{source}: field 'ambient' must be an integer")
    try:
        sig = FlagSignature(tuple(dims), doc["ambient"])
    except InvalidInput as exc:
        raise FormatError(f"{source}: field 'signature': {exc}") from exc
    if not isinstance(doc["points"], list) or not doc["points"]:
        raise FormatError(f"{source}: field 'points' must be a nonempty list")
    points = []
    for i, raw in enumerate(doc["points"]):
        where = f"{source}: points[{i}]"
        arr = _real_list(raw, where, sig.ambient * sig.dk)
        try:
            points.append(make_flag(arr.reshape(sig.ambient, sig.dk), sig))
        except FlagstatError as exc:
            raise FormatError(f"{where}: {exc}") from exc
    return sig, points


def read_flag_set(path):
    return parse_flag_set(_load_json(path), str(path))


def flag_set_doc(points):
    sig = points[0].signature
    return {
        "signature": list(sig.dims),
        "ambient": sig.ambient,
        "points": [[float(v) for v in p.rep.reshape(-1)] for p in points],
    }


def write_flag_set(path, points):
    write_json(path, flag_set_doc(points))


def parse_motion_set(doc, source="<motion set>", tol=MOTION_FILE_TOL):
    """Motions whose rotation blocks are within ``tol`` of SO(3), snapped onto it."""
    if not isinstance(doc, dict) or "motions" not in doc:
        raise FormatError(f"{source}: missing field 'motions'")
    if not isinstance(doc["motions"], list) or not doc["motions"]:
        raise FormatError(f"{source}: field 'motions' must be a nonempty list")
    motions = []
    for i, raw in enumerate(doc["motions"]):
        where = f"{source}: motions[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(f"{where}: expected an object")
        for key in ("rotation", "translation"):
            if key not in raw:
                raise FormatError(f"{where}: missing field '{key}'")
        r = _real_list(raw["rotation"], f"{where}.rotation", 9).reshape(3, 3)
        t = _real_list(raw["translation"], f"{where}.translation", 3)
        try:
            check_special_orthogonal(r, 3, tol, name=f"{where}.rotation")
        except FlagstatError as exc:
            raise FormatError(str(exc)) from exc
        # files within tol of SO(3) are accepted and snapped; exact rotations pass through untouched
        motions.append(RigidMotion(r if orthogonality_defect(r) <= SO_TOL else polar_factor(r), t))
    return motions


def read_motion_set(path):
    return parse_motion_set(_load_json(path), str(path))


def motion_set_doc(motions):
    return {
        "motions": [
            {"rotation": [float(v) for v in g.rotation.reshape(-1)], "translation": [float(v) for v in g.translation]}
            for g in motions
        ]
    }


def write_motion_set(path, motions):
    write_json(path, motion_set_doc(motions))


def read_weights(path, count):
    """Weights file: a JSON list of reals, or {"weights": [...]}."""
    doc = _load_json(path)
    if isinstance(doc, dict):
        if "weights" not in doc:
            raise FormatError(f"{path}: missing field 'weights'")
        doc = doc["weights"]
    arr = _real_list(doc, f"{path}: weights", count)
    if np.any(arr < 0) or not np.any(arr > 0):
        raise FormatError(f"{path}: weights must be nonnegative with at least one positive entry")
    return arr


def format_real(x):
    return format(float(x), ".17g")


def dumps(doc, indent=0):
    """JSON text with every float at 17 significant digits; numeric lists stay on one line."""
    pad = " " * (indent + 1)
    if isinstance(doc, bool) or doc is None or isinstance(doc, str):
        return json.dumps(doc)
    if isinstance(doc, int):
        return str(doc)
    if isinstance(doc, float):
        if not np.isfinite(doc):
            raise InvalidInput("cannot write a non-finite number")
        return format_real(doc)
    if isinstance(doc, dict):
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in doc.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}" if items else "{}"
    if isinstance(doc, (list, tuple)):
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in doc):
            return "[" + ", ".join(dumps(v) for v in doc) + "]"
        items = [pad + dumps(v, indent + 1) for v in doc]
        return "[\n" + ",\n".join(items) + "\n" + " " * indent + "]" if items else "[]"
    raise TypeError(f"cannot serialize {type(doc).__name__}")


def write_json(path, doc):
    write_text(path, dumps(doc) + "\n")


def write_text(path, text):
    """Write atomically: temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
