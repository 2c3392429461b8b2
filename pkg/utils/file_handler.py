"""
utils/file_handler.py
Reading and writing of checkpoint bundles and report files.
"""

import json
import os
from typing import Optional

import numpy as np
import pandas as pd

from config.app_config import CODE_VERSION
from utils.errors import InputError, IntegrityError
from utils.integrity import digest_file, fingerprint_config, verify_file
from utils.logger import get_logger
from utils.path_utils import PathResolver

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")


def dumps(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True, default=_default)


def write_json(path: str, content: dict, config: Optional[dict] = None) -> str:
    """Write ``content`` stamped with the config echo and code version."""
    document = {"code_version": CODE_VERSION, "config": config or {}}
    document.update(content)
    directory = os.path.dirname(path)
    if directory:
        PathResolver.ensure_directory(directory)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(document))
    return path


def write_table(path: str, frame: pd.DataFrame, config: Optional[dict] = None) -> str:
    """CSV preceded by two "#" stamp lines (code version, config echo)."""
    directory = os.path.dirname(path)
    if directory:
        PathResolver.ensure_directory(directory)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# code_version: {CODE_VERSION}\n")
        f.write(f"# config: {json.dumps(config or {}, sort_keys=True, default=_default)}\n")
        frame.to_csv(f, index=False)
    return path


def read_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, comment="#")
    except FileNotFoundError as e:
        raise InputError(f"file not found: '{path}'") from e


def read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise InputError(f"file not found: '{path}'") from e
    except json.JSONDecodeError as e:
        raise InputError(f"'{path}' is not valid JSON: {e}") from e


class BundleHandler:
    """A directory of JSON documents plus a manifest of their SHA-256 digests."""

    def __init__(self, directory: str, config: Optional[dict] = None):
        self.directory = PathResolver.get_writable_path(directory)
        self.config = config or {}
        self._written = []

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    # ------------------------------------------------------------------
    # Writing
    # ------------------------------------------------------------------
    def write_document(self, name: str, content: dict) -> str:
        PathResolver.ensure_directory(self.directory)
        write_json(self.path(name), content, self.config)
        self._written.append(name)
        return self.path(name)

    def finalize(self) -> str:
        """Write manifest.json covering every document written so far."""
        digests = {name: digest_file(self.path(name)) for name in sorted(set(self._written))}
        write_json(
            self.path(MANIFEST_NAME),
            {"files": digests, "config_fingerprint": fingerprint_config(self.config)},
            self.config,
        )
        logger.info(f"Bundle written to {self.directory} ({len(digests)} files)")
        return self.directory

    # ------------------------------------------------------------------
    # Reading
    # ------------------------------------------------------------------
    @classmethod
    def open(cls, directory: str) -> "BundleHandler":
        """Open an existing bundle and verify every file listed in its manifest."""
        handler = cls(directory)
        manifest_path = handler.path(MANIFEST_NAME)
        if not os.path.isfile(manifest_path):
            raise InputError(f"'{directory}' is not a bundle (no {MANIFEST_NAME})")
        manifest = read_json(manifest_path)
        files = manifest.get("files", {})
        for name, expected in files.items():
            if not os.path.isfile(handler.path(name)):
                raise IntegrityError(f"bundle file '{name}' listed in the manifest is missing")
            verify_file(handler.path(name), expected)
        handler.config = manifest.get("config", {})
        handler._written = list(files)
        return handler

    def read_document(self, name: str) -> dict:
        if name not in self._written:
            raise InputError(f"bundle has no document '{name}'")
        return read_json(self.path(name))
