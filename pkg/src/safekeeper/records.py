"""Password record storage.

One JSON object per line, append-only on updates; the newest line for a
user wins. That keeps writes crash-safe (a torn last line is dropped on
load) and lets migration rewrite records without rewriting the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class Scheme(str, Enum):
    LEGACY_MD5 = "LEGACY_MD5"
    SAFEKEEPER = "SAFEKEEPER"
    ONION = "ONION"


@dataclass(frozen=True)
class PasswordRecord:
    user_id: str
    salt: bytes
    tag: bytes
    scheme: Scheme

    def to_line(self) -> str:
        return json.dumps(
            {
                "user_id": self.user_id,
                "salt": self.salt.hex(),
                "tag": self.tag.hex(),
                "scheme": self.scheme.value,
            }
        )

    @classmethod
    def from_line(cls, line: str) -> "PasswordRecord":
        raw = json.loads(line)
        return cls(
            user_id=raw["user_id"],
            salt=bytes.fromhex(raw["salt"]),
            tag=bytes.fromhex(raw["tag"]),
            scheme=Scheme(raw["scheme"]),
        )


class RecordStore:
    """In-memory index over an optional append-only file."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._records: dict[str, PasswordRecord] = {}
        if self._path is not None and self._path.exists():
            for line in self._path.read_text().splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    record = PasswordRecord.from_line(line)
                except (ValueError, KeyError):
                    continue
                self._records[record.user_id] = record

    def put(self, record: PasswordRecord) -> None:
        self._records[record.user_id] = record
        if self._path is not None:
            with self._path.open("a") as fh:
                fh.write(record.to_line() + "\n")

    def get(self, user_id: str) -> PasswordRecord | None:
        return self._records.get(user_id)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._records

    def __len__(self) -> int:
        return len(self._records)

    def all(self) -> list[PasswordRecord]:
        return list(self._records.values())

    def raw_bytes(self) -> bytes:
        """Everything an attacker gets by stealing the database."""
        if self._path is not None and self._path.exists():
            return self._path.read_bytes()
        return "\n".join(r.to_line() for r in self._records.values()).encode()
