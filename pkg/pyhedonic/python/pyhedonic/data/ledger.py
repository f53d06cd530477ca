"""Hash-chained, append-only session ledger

File format: a sequence of frames, each a little-endian uint32 length followed
by that many bytes of canonical block JSON (compact separators, sorted keys,
ASCII only, integers and strings only). See ``doc/ledger-format.md``.
"""

import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, BinaryIO, Iterator, List, Mapping, Optional, Tuple, Union

import pandas as pd
import structlog

from pyhedonic.errors import StorageFailure

logger = structlog.get_logger(__name__)

ZERO_HASH = "0" * 64
_FRAME = struct.Struct("<I")


class PayloadKind(Enum):
    SESSION_OPEN = "SessionOpen"
    ORDERS = "Orders"
    COALITIONS = "Coalitions"
    TRANSACTIONS = "Transactions"
    SETTLEMENT = "Settlement"


def canonical_json(value: Any) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")


def block_hash(index: int, prev_hash: str, kind: PayloadKind, payload: bytes) -> str:
    header = f"{index}|{prev_hash}|{kind.value}|".encode("ascii")
    return hashlib.sha256(header + payload).hexdigest()


@dataclass(frozen=True)
class LedgerBlock:
    index: int
    prev_hash: str
    kind: PayloadKind
    payload: bytes
    hash: str

    @classmethod
    def seal(cls, index: int, prev_hash: str, kind: PayloadKind, payload: Mapping[str, Any]) -> "LedgerBlock":
        body = canonical_json(payload)
        return cls(index, prev_hash, kind, body, block_hash(index, prev_hash, kind, body))

    @property
    def data(self) -> Any:
        return json.loads(self.payload)

    def to_bytes(self) -> bytes:
        return canonical_json(
            {
                "hash": self.hash,
                "index": self.index,
                "kind": self.kind.value,
                "payload": self.data,
                "prev_hash": self.prev_hash,
            }
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "LedgerBlock":
        doc = json.loads(raw.decode("ascii"))
        if not isinstance(doc, dict) or set(doc) != {"hash", "index", "kind", "payload", "prev_hash"}:
            raise ValueError("block fields do not match the ledger schema")
        if not isinstance(doc["index"], int) or not isinstance(doc["hash"], str) or not isinstance(doc["prev_hash"], str):
            raise ValueError("block header has wrong types")
        return cls(doc["index"], doc["prev_hash"], PayloadKind(doc["kind"]), canonical_json(doc["payload"]), doc["hash"])


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    n_blocks: int
    first_bad: Optional[int] = None
    reason: str = ""


LedgerSource = Union[str, Path, bytes, "Ledger"]


def _frames(data: bytes) -> Iterator[Tuple[int, Optional[bytes]]]:
    """(position, frame bytes) pairs; ``None`` marks a truncated frame"""
    offset, position = 0, 0
    while offset < len(data):
        if offset + _FRAME.size > len(data):
            yield position, None
            return
        (length,) = _FRAME.unpack_from(data, offset)
        start = offset + _FRAME.size
        if start + length > len(data):
            yield position, None
            return
        yield position, data[start : start + length]
        offset = start + length
        position += 1


def _load(source: LedgerSource) -> bytes:
    if isinstance(source, Ledger):
        return source.getvalue()
    if isinstance(source, bytes):
        return source
    try:
        return Path(source).read_bytes()
    except OSError as e:
        raise StorageFailure(f"cannot read ledger {source}: {e}") from e


class Ledger:
    """Single-writer ledger over a file or an in-memory buffer"""

    def __init__(self, stream: BinaryIO, path: Optional[Path] = None):
        self._stream = stream
        self.path = path
        self.head = ZERO_HASH
        self.size = 0

    @classmethod
    def in_memory(cls) -> "Ledger":
        return cls(io.BytesIO())

    @classmethod
    def open(cls, path: Union[str, Path]) -> "Ledger":
        """Open a ledger file for appending once its whole chain verifies"""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            stream = path.open("a+b")
            stream.seek(0)
            existing = stream.read()
        except OSError as e:
            raise StorageFailure(f"cannot open ledger {path}: {e}") from e

        report = verify_chain(existing)
        if not report.ok:
            stream.close()
            raise StorageFailure(f"ledger {path} fails verification at block {report.first_bad}: {report.reason}")
        ledger = cls(stream, path)
        ledger.size = report.n_blocks
        for _, raw in _frames(existing):
            ledger.head = LedgerBlock.from_bytes(raw).hash
        logger.debug("ledger_opened", path=str(path), blocks=ledger.size)
        return ledger

    def append(self, kind: PayloadKind, payload: Mapping[str, Any]) -> LedgerBlock:
        block = LedgerBlock.seal(self.size, self.head, kind, payload)
        raw = block.to_bytes()
        try:
            self._stream.seek(0, io.SEEK_END)
            self._stream.write(_FRAME.pack(len(raw)) + raw)
            self._stream.flush()
            if self.path is not None:
                os.fsync(self._stream.fileno())
        except (OSError, ValueError) as e:
            raise StorageFailure(f"append of block {block.index} failed: {e}") from e
        self.head = block.hash
        self.size += 1
        return block

    def getvalue(self) -> bytes:
        if isinstance(self._stream, io.BytesIO):
            return self._stream.getvalue()
        self._stream.flush()
        return _load(self.path)

    def close(self):
        if self.path is not None and not self._stream.closed:
            self._stream.close()

    def __enter__(self) -> "Ledger":
        return self

    def __exit__(self, *_):
        self.close()

    def __len__(self) -> int:
        return self.size


def verify_chain(source: LedgerSource) -> ChainReport:
    """Single scan; reports the first block that fails any check"""
    data = _load(source)
    prev_hash = ZERO_HASH
    count = 0
    for position, raw in _frames(data):
        count = position + 1
        if raw is None:
            return ChainReport(False, count, position, "truncated frame")
        try:
            block = LedgerBlock.from_bytes(raw)
        except (ValueError, UnicodeDecodeError) as e:
            return ChainReport(False, count, position, f"unreadable block: {e}")
        if block.to_bytes() != raw:
            return ChainReport(False, count, position, "block is not in canonical form")
        if block.index != position:
            return ChainReport(False, count, position, f"index {block.index} out of sequence")
        if block.prev_hash != prev_hash:
            return ChainReport(False, count, position, "prev_hash does not link to the previous block")
        if block_hash(block.index, block.prev_hash, block.kind, block.payload) != block.hash:
            return ChainReport(False, count, position, "hash mismatch")
        prev_hash = block.hash
    return ChainReport(True, count)


def read_blocks(source: LedgerSource) -> List[LedgerBlock]:
    blocks = []
    for position, raw in _frames(_load(source)):
        if raw is None:
            raise StorageFailure(f"truncated frame at block {position}")
        try:
            blocks.append(LedgerBlock.from_bytes(raw))
        except (ValueError, UnicodeDecodeError) as e:
            raise StorageFailure(f"block {position} is unreadable: {e}") from e
    return blocks


def ledger_frame(source: LedgerSource) -> pd.DataFrame:
    rows = []
    for block in read_blocks(source):
        data = block.data
        rows.append(
            {
                "index": block.index,
                "kind": block.kind.value,
                "hour": data.get("hour") if isinstance(data, dict) else None,
                "payload_bytes": len(block.payload),
                "hash": block.hash,
                "prev_hash": block.prev_hash,
            }
        )
    return pd.DataFrame(rows, columns=["index", "kind", "hour", "payload_bytes", "hash", "prev_hash"])
