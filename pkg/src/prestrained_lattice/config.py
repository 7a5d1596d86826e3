"""INI run configuration: parsing, validation and construction of the model objects.

Every section and key is checked against a fixed schema; unknown ones are
rejected with the line they appear on.
"""

import configparser
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .discrete import Cutoff
from .functionals import CASES, AnalyticMap
from .geometry import Box, ConvexPolygon, regular_polygon
from .metric import (
    bilinear_angle,
    constant_metric,
    example1_from_initial_data,
    example1_metric,
    example2_metric,
    identity_metric,
)

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "default_workers", "WORKERS_ENV"]

WORKERS_ENV = "PRESTRAINED_WORKERS"

SCHEMA = {
    "domain": {"type", "lower", "upper", "vertices", "sides", "radius", "center"},
    "metric": {"name", "g", "a", "b", "g0", "g1", "w0", "c"},
    "cutoff": None,  # keys are squared radii
    "deformation": {"name", "m", "c", "amplitude", "noise"},
    "run": {"epsilon", "epsilons", "case", "resolution", "seed", "workers", "tol", "max_iter",
            "output", "plot", "delta", "target", "grid", "h"},
}


class ConfigError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


def default_workers():
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw.strip() else 1
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")


def _key_lines(text):
    """Map ``(section, key)`` to ``(line, column)`` of its definition."""
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            out[(section, None)] = (no, line.index("[") + 1)
            continue
        m = re.match(r"(\s*)([^=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(2).strip().lower())] = (no, len(m.group(1)) + 1)
    return out


def _floats(text, name, count=None):
    try:
        vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}")
    if count is not None and len(vals) != count:
        raise ConfigError(f"{name}: expected {count} numbers, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{name}: values must be finite")
    return vals


@dataclass
class RunConfig:
    sections: Dict[str, Dict[str, str]]
    source: Optional[str] = None
    lines: Dict[Tuple[str, Optional[str]], Tuple[int, int]] = field(default_factory=dict)

    def _get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def _err(self, section, key, message):
        line, col = self.lines.get((section, key), (None, None))
        return ConfigError(f"[{section}] {key}: {message}", line, col)

    def _float(self, section, key, default=None, positive=False, nonneg=False):
        raw = self._get(section, key)
        if raw is None:
            if default is None:
                raise self._err(section, key, "missing required value")
            return default
        try:
            v = float(raw)
        except ValueError:
            raise self._err(section, key, f"expected a number, got {raw!r}")
        if not math.isfinite(v) or (positive and v <= 0) or (nonneg and v < 0):
            raise self._err(section, key, f"value {raw!r} out of range")
        return v

    def _int(self, section, key, default, minimum=None):
        raw = self._get(section, key)
        if raw is None:
            return default
        try:
            v = int(raw)
        except ValueError:
            raise self._err(section, key, f"expected an integer, got {raw!r}")
        if minimum is not None and v < minimum:
            raise self._err(section, key, f"must be >= {minimum}")
        return v

    def _vector(self, section, key, count=None, default=None):
        raw = self._get(section, key)
        if raw is None:
            if default is None:
                raise self._err(section, key, "missing required value")
            return list(default)
        try:
            return _floats(raw, key, count)
        except ConfigError as exc:
            raise self._err(section, key, str(exc))

    # builders -----------------------------------------------------------

    def domain(self):
        kind = self._get("domain", "type", "box").lower()
        if kind == "box":
            lower = self._vector("domain", "lower", default=[0.0, 0.0])
            upper = self._vector("domain", "upper", count=len(lower), default=[1.0] * len(lower))
            try:
                return Box(tuple(lower), tuple(upper))
            except ValueError as exc:
                raise self._err("domain", "upper", str(exc))
        if kind == "polygon":
            if self._get("domain", "vertices") is not None:
                v = self._vector("domain", "vertices")
                if len(v) % 2 or len(v) < 6:
                    raise self._err("domain", "vertices", "need at least three x,y pairs")
                try:
                    return ConvexPolygon(tuple(zip(v[::2], v[1::2])))
                except ValueError as exc:
                    raise self._err("domain", "vertices", str(exc))
            sides = self._int("domain", "sides", 64, minimum=3)
            radius = self._float("domain", "radius", 1.0, positive=True)
            center = self._vector("domain", "center", count=2, default=[0.0, 0.0])
            return regular_polygon(sides, radius, tuple(center))
        raise self._err("domain", "type", f"unknown domain type {kind!r} (box, polygon)")

    def metric(self, dim=2):
        name = self._get("metric", "name", "identity").lower()
        try:
            if name == "identity":
                return identity_metric(dim)
            if name == "constant":
                g = self._vector("metric", "g", count=dim * dim)
                return constant_metric(np.array(g).reshape(dim, dim))
            if name == "example1":
                if self._get("metric", "g0") is not None:
                    g0 = self._float("metric", "g0")
                    g1 = self._float("metric", "g1")
                    return example1_from_initial_data(g0, g1)
                return example1_metric(self._float("metric", "a", positive=True), self._float("metric", "b"))
            if name == "example2":
                w0 = self._float("metric", "w0", math.pi / 4)
                c = self._float("metric", "c", 0.1)
                return example2_metric(*bilinear_angle(w0, c))
        except ConfigError:
            raise
        except ValueError as exc:
            raise self._err("metric", "name", str(exc))
        raise self._err("metric", "name", f"unknown metric {name!r} (identity, constant, example1, example2)")

    def cutoff(self):
        table = self.sections.get("cutoff")
        if not table:
            return Cutoff.nearest()
        weights = {}
        for k, v in table.items():
            try:
                r2 = int(k)
            except ValueError:
                raise self._err("cutoff", k, "keys must be integer squared radii")
            try:
                weights[r2] = float(v)
            except ValueError:
                raise self._err("cutoff", k, f"expected a number, got {v!r}")
        try:
            return Cutoff(weights)
        except ValueError as exc:
            raise self._err("cutoff", next(iter(table)), str(exc))

    def deformation(self, dim=2):
        name = self._get("deformation", "name", "identity").lower()
        if name == "identity":
            return AnalyticMap.identity(dim)
        if name == "linear":
            M = np.array(self._vector("deformation", "m", count=dim * dim)).reshape(dim, dim)
            c = self._vector("deformation", "c", count=dim, default=[0.0] * dim)
            return AnalyticMap.linear(M, np.array(c))
        if name == "shear":
            return AnalyticMap.shear(self._float("deformation", "amplitude", 0.1))
        raise self._err("deformation", "name", f"unknown deformation {name!r} (identity, linear, shear)")

    def noise(self):
        return self._float("deformation", "noise", 0.0, nonneg=True)

    def epsilons(self):
        if self._get("run", "epsilons") is not None:
            eps = self._vector("run", "epsilons")
        else:
            eps = [self._float("run", "epsilon", 0.125, positive=True)]
        if any(e <= 0 for e in eps):
            raise self._err("run", "epsilons", "all values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise self._err("run", "epsilons", "must be strictly decreasing")
        return eps

    def case(self):
        case = self._get("run", "case", "nearest-2d").lower()
        if case not in CASES:
            raise self._err("run", "case", f"unknown case {case!r} {CASES}")
        return case

    def seed(self):
        return self._int("run", "seed", 0, minimum=0)

    def workers(self):
        return self._int("run", "workers", default_workers(), minimum=1)

    def resolution(self):
        return self._int("run", "resolution", 32, minimum=1)

    def tol(self, default):
        return self._float("run", "tol", default, positive=True)

    def max_iter(self):
        return self._int("run", "max_iter", 5000, minimum=1)

    def delta(self):
        return self._float("run", "delta", 0.0, nonneg=True)

    def target(self):
        t = self._get("run", "target", "discrete").lower()
        if t not in ("discrete", "continuum"):
            raise self._err("run", "target", "must be 'discrete' or 'continuum'")
        return t

    def grid(self):
        return self._int("run", "grid", 10, minimum=1)

    def h(self):
        return self._float("run", "h", 1e-3, positive=True)

    def output(self):
        return self._get("run", "output")

    def plot(self):
        return self._get("run", "plot")

    def resolved(self):
        """Canonical dictionary of every section, used for hashing and logging."""
        return {s: dict(sorted(kv.items())) for s, kv in sorted(self.sections.items())}

    def digest(self):
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_config(text, source=None):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", exc.lineno, 1)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", lineno, 1)
    lines = _key_lines(text)
    sections = {}
    for sec in parser.sections():
        name = sec.strip().lower()
        if name not in SCHEMA:
            line, col = lines.get((name, None), (None, None))
            raise ConfigError(f"unknown section [{sec}]", line, col)
        allowed = SCHEMA[name]
        items = {}
        for key, value in parser.items(sec):
            if allowed is not None and key not in allowed:
                line, col = lines.get((name, key), (None, None))
                raise ConfigError(f"unknown key {key!r} in [{name}]", line, col)
            items[key] = value.strip()
        sections[name] = items
    return RunConfig(sections, source, lines)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}")
    return parse_config(text, source=str(path))
