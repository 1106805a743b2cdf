"""Experiment config: ``key = value`` lines under ``[section]`` headers.

Values are Python literals where they parse as one (numbers, lists, dicts,
True/False) and plain strings otherwise. The ``[run]`` section carries the
experiment name and numeric knobs; construction sections ([A], [B], [E],
[mu]) carry a ``kind`` plus its parameters.
"""
from __future__ import annotations

import ast
import configparser
import hashlib

EXPERIMENTS = (
    "construct", "dims", "energy", "fourier", "hyperplane",
    "intersect-translate", "intersect-rotate", "intersect-dilate",
    "levelset", "maximal", "two-surface", "inverse", "count", "average-slope", "report",
)


class ConfigError(ValueError):
    pass


def _value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip()


class Config:
    """Parsed config. ``get(section, key, default)`` returns literal values."""

    def __init__(self, sections: dict, source: str = "<string>"):
        self.sections = sections
        self.source = source

    @classmethod
    def parse(cls, text: str, source: str = "<string>") -> "Config":
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except (configparser.MissingSectionHeaderError, configparser.DuplicateOptionError,
                configparser.DuplicateSectionError) as e:
            msg = str(e).splitlines()[0].split("]: ")[-1]
            raise ConfigError(f"{source}: line {e.lineno}: {msg}") from None
        except configparser.ParsingError as e:
            where = "; ".join(f"line {n}: {line}" for n, line in e.errors)
            raise ConfigError(f"{source}: {where}: expected 'key = value' or '[section]'") from None
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from None
        secs = {}
        for name in cp.sections():
            secs[name] = {k: _value(v) for k, v in cp.items(name)}
        if "run" not in secs:
            raise ConfigError(f"{source}: missing [run] section")
        exp = secs["run"].get("experiment")
        if exp is not None and exp not in EXPERIMENTS:
            raise ConfigError(f"{source}: [run] experiment: unknown experiment {exp!r}")
        return cls(secs, source)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), str(path))

    def has(self, section: str) -> bool:
        return section in self.sections

    def section(self, name: str) -> dict:
        if name not in self.sections:
            raise ConfigError(f"{self.source}: missing [{name}] section")
        return dict(self.sections[name])

    def get(self, section: str, key: str, default=...):
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        if default is ...:
            raise ConfigError(f"{self.source}: [{section}] {key}: required field missing")
        return default

    def typed(self, section: str, key: str, kind, default=...):
        v = self.get(section, key, default)
        if v is None:
            return None
        try:
            if kind is int and (isinstance(v, bool) or int(v) != v):
                raise ValueError
            return kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{self.source}: [{section}] {key}: expected {kind.__name__}, got {v!r}") from None

    def canonical(self) -> str:
        """Order-independent text used for hashing."""
        lines = []
        for name in sorted(self.sections):
            lines.append(f"[{name}]")
            for k in sorted(self.sections[name]):
                lines.append(f"{k} = {self.sections[name][k]!r}")
        return "\n".join(lines)

    def digest(self, *extra) -> str:
        h = hashlib.sha256(self.canonical().encode())
        for e in extra:
            h.update(b"\0" + str(e).encode())
        return h.hexdigest()
