"""JSON and CSV serialization with lossless floats.

Floats are written with 17 significant digits, which round-trips every
double exactly.  Non-finite floats are rejected because JSON has no
spelling for them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .agd import IterateLog
from .errors import ConfigError, NonFiniteInput
from .mdp import Mdp


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteInput(f"cannot serialize non-finite value {x!r}")
    text = "%.17g" % x
    if "e" not in text and "." not in text:
        text += ".0"  # keep floats recognisably floats
    return text


def dumps(obj: Any, indent: int | None = 2, _level: int = 0) -> str:
    """Deterministic JSON text; keys keep insertion order."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + ",".join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, None) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[" + ",".join(items) + end + "]"
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec, indent=None) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def content_hash(obj) -> str:
    """SHA-256 of the canonical compact serialization."""
    return hashlib.sha256(dumps(obj, indent=None).encode("utf-8")).hexdigest()


def mdp_to_dict(m: Mdp) -> dict:
    return {
        "n_states": m.n_states,
        "n_actions": m.n_actions,
        "discount": m.discount,
        "transition": m.transition,
        "reward": m.reward,
        "initial": m.initial,
    }


def mdp_from_dict(d: dict) -> Mdp:
    try:
        m = Mdp(np.array(d["transition"], dtype=float), np.array(d["reward"], dtype=float),
                np.array(d["initial"], dtype=float), float(d["discount"]))
    except KeyError as exc:
        raise ConfigError(f"MDP document lacks field {exc}") from exc
    if (m.n_states, m.n_actions) != (d.get("n_states", m.n_states), d.get("n_actions", m.n_actions)):
        raise ConfigError("declared sizes disagree with the arrays")
    return m


def save_mdp(path, m: Mdp) -> None:
    write_json(path, mdp_to_dict(m))


def load_mdp(path) -> Mdp:
    return mdp_from_dict(read_json(path))


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format_float(x)


def write_log_csv(path, log: IterateLog) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(log.columns)
        for row in log.rows:
            w.writerow([_cell(x) for x in row])


def read_log_csv(path) -> IterateLog:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        columns = tuple(next(reader))
        log = IterateLog(columns=columns)
        for row in reader:
            log.append(*(int(x) if x.lstrip("-").isdigit() else float(x) for x in row))
    return log
