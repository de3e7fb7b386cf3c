"""Run configuration and reproducibility plumbing.

Pipelines are driven by an INI-style config file (section headers, one
``key = value`` per line); every command-line flag overrides its config
key.  All randomness flows from one global seed through named derivations,
and outputs are written atomically so interrupted runs never leave partial
files.
"""

from __future__ import annotations

import configparser
import hashlib
import os
import tempfile

ENV_CONFIG = "CRFTAG_CONFIG"


def derive_seed(seed: int, label: str) -> int:
    """Stable per-purpose seed derived from the global seed and a name."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


class PipelineConfig:
    """Typed view over an INI config with flag-override semantics."""

    def __init__(self, parser: configparser.ConfigParser | None = None, source: str | None = None) -> None:
        self._parser = parser if parser is not None else configparser.ConfigParser()
        self.source = source

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        parser = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        return cls(parser, source=os.fspath(path))

    @classmethod
    def default(cls, path_from_args=None) -> "PipelineConfig":
        """Config from an explicit path, the environment, or empty."""
        path = path_from_args or os.environ.get(ENV_CONFIG)
        if path:
            return cls.load(path)
        return cls()

    def get(self, section: str, key: str, override=None, default=None, type=str):
        """Override value if given, else the config entry, else the default."""
        if override is not None:
            return override
        if self._parser.has_option(section, key):
            raw = self._parser.get(section, key)
            if type is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return type(raw)
        return default

    def items(self) -> list[tuple[str, str, str]]:
        entries = []
        for section in sorted(self._parser.sections()):
            for key, value in sorted(self._parser.items(section)):
                entries.append((section, key, value))
        return entries

    def hash(self, overrides: dict[str, object] | None = None) -> str:
        """Short digest of the effective configuration for run logs."""
        parts = [f"[{s}] {k} = {v}" for s, k, v in self.items()]
        for key in sorted(overrides or {}):
            value = overrides[key]
            if value is not None:
                parts.append(f"<flag> {key} = {value}")
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:12]
