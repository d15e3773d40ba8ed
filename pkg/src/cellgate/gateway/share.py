"""Shared-folder store: per-owner directories under one root.

Any authenticated client reads every owner's files; writes are restricted to
the gateway's own owner space.  Paths are confined under the root: traversal
or absolute forms are rejected before touching the filesystem.
"""

from __future__ import annotations

import json
import mimetypes
import os
import threading
import time
from dataclasses import dataclass
from typing import Optional

from ..errors import CellgateError

_META_NAME = ".meta.json"


class SharePathError(CellgateError):
    pass


class ShareForbidden(CellgateError):
    pass


@dataclass
class ShareEntry:
    owner: str
    path: str
    size: int
    content_type: str
    updated_at: float

    def as_dict(self) -> dict:
        return {
            "owner": self.owner,
            "path": self.path,
            "size": self.size,
            "content_type": self.content_type,
            "updated_at": self.updated_at,
        }


def _validate_component(component: str, what: str) -> None:
    if not component:
        raise SharePathError(f"empty {what}")
    if "\x00" in component or "\\" in component or ":" in component:
        raise SharePathError(f"illegal character in {what}")
    if component.startswith("/"):
        raise SharePathError(f"absolute {what} not allowed")
    parts = component.split("/")
    if any(p in ("", ".", "..") for p in parts):
        raise SharePathError(f"traversal in {what}")


class ShareStore:
    def __init__(self, root: str, own_owner: str = "default"):
        self.root = os.path.abspath(root)
        self.own_owner = own_owner
        os.makedirs(self.root, exist_ok=True)
        self._lock = threading.Lock()

    def _resolve(self, owner: str, path: str) -> str:
        _validate_component(owner, "owner")
        if "/" in owner:
            raise SharePathError("owner must be a single name")
        _validate_component(path, "path")
        if path.startswith("/"):
            raise SharePathError("absolute path not allowed")
        full = os.path.abspath(os.path.join(self.root, owner, path))
        if not full.startswith(self.root + os.sep):
            raise SharePathError("path escapes the share root")
        return full

    def _meta_path(self, owner: str) -> str:
        return os.path.join(self.root, owner, _META_NAME)

    def _load_meta(self, owner: str) -> dict:
        try:
            with open(self._meta_path(owner), "r", encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError):
            return {}

    def _save_meta(self, owner: str, meta: dict) -> None:
        path = self._meta_path(owner)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(meta, fh)
        os.replace(tmp, path)

    def put(self, owner: str, path: str, data: bytes, content_type: Optional[str] = None) -> ShareEntry:
        full = self._resolve(owner, path)
        if owner != self.own_owner:
            raise ShareForbidden(f"writes are limited to owner {self.own_owner!r}")
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "wb") as fh:
            fh.write(data)
        if content_type is None:
            content_type = mimetypes.guess_type(path)[0] or "application/octet-stream"
        with self._lock:
            meta = self._load_meta(owner)
            meta[path] = {"content_type": content_type}
            self._save_meta(owner, meta)
        return ShareEntry(
            owner=owner,
            path=path,
            size=len(data),
            content_type=content_type,
            updated_at=time.time(),
        )

    def get(self, owner: str, path: str) -> "tuple[bytes, str]":
        full = self._resolve(owner, path)
        try:
            with open(full, "rb") as fh:
                data = fh.read()
        except FileNotFoundError:
            raise KeyError(path) from None
        meta = self._load_meta(owner)
        content_type = meta.get(path, {}).get("content_type") or (
            mimetypes.guess_type(path)[0] or "application/octet-stream"
        )
        return data, content_type

    def list(self, owner: str) -> "list[ShareEntry]":
        _validate_component(owner, "owner")
        base = os.path.join(self.root, owner)
        if not os.path.isdir(base):
            return []
        meta = self._load_meta(owner)
        entries = []
        for dirpath, _, filenames in os.walk(base):
            for name in filenames:
                if name == _META_NAME or name.endswith(".tmp"):
                    continue
                full = os.path.join(dirpath, name)
                rel = os.path.relpath(full, base).replace(os.sep, "/")
                stat = os.stat(full)
                entries.append(
                    ShareEntry(
                        owner=owner,
                        path=rel,
                        size=stat.st_size,
                        content_type=meta.get(rel, {}).get("content_type")
                        or (mimetypes.guess_type(rel)[0] or "application/octet-stream"),
                        updated_at=stat.st_mtime,
                    )
                )
        return sorted(entries, key=lambda e: e.path)

    def owners(self) -> "list[str]":
        return sorted(
            name
            for name in os.listdir(self.root)
            if os.path.isdir(os.path.join(self.root, name))
        )
