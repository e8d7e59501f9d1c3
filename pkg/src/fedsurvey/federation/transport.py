"""In-process message channels with truthful byte accounting.

Every message is encoded to its wire frame on send and decoded on receive,
so what a RoundLog reports is exactly what a network would carry.
"""
from __future__ import annotations

import csv
import io
import threading
from collections import deque
from dataclasses import dataclass

from .wire import FRAME_HEADER, decode_frame, encode_frame

TRANSPORT_KINDS = ("in_process",)


@dataclass(frozen=True)
class LogEntry:
    round: int
    message_type: str
    sender: str
    bytes: int
    seq: int


class RoundLog:
    """Per-message traffic record: round, message type, sender, payload bytes.

    ``bytes`` excludes the 4-byte length prefix, so a Done frame logs 0.
    """

    def __init__(self, keep_frames: bool = False):
        self.round = 0
        self.keep_frames = keep_frames
        self.frames: list[bytes] = []
        self._entries: list[LogEntry] = []
        self._seq: dict[str, int] = {}
        self._lock = threading.Lock()

    def next_round(self) -> int:
        self.round += 1
        return self.round

    def record(self, sender: str, message_type: str, frame: bytes) -> None:
        with self._lock:
            seq = self._seq.get(sender, 0)
            self._seq[sender] = seq + 1
            self._entries.append(LogEntry(self.round, message_type, sender, len(frame) - FRAME_HEADER.size, seq))
            if self.keep_frames:
                self.frames.append(frame)

    @property
    def entries(self) -> list[LogEntry]:
        # sender-local sequence numbers make the order independent of thread timing
        return sorted(self._entries, key=lambda e: (e.round, e.sender != "aggregator", e.sender, e.seq))

    @property
    def rounds(self) -> int:
        return self.round

    def total_bytes(self, sender: str | None = None) -> int:
        return sum(e.bytes for e in self._entries if sender is None or e.sender == sender)

    def message_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for e in self._entries:
            counts[e.round] = counts.get(e.round, 0) + 1
        return counts

    def to_csv(self, extra: dict | None = None) -> str:
        extra = extra or {}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(extra) + ["round", "message_type", "sender", "bytes"])
        for e in self.entries:
            writer.writerow(list(extra.values()) + [e.round, e.message_type, e.sender, e.bytes])
        return buf.getvalue()


class Endpoint:
    """One side of a reliable, ordered, loss-free channel."""

    def __init__(self, name: str, inbox: deque, outbox: deque, log: RoundLog):
        self.name = name
        self._inbox = inbox
        self._outbox = outbox
        self._log = log

    def send(self, msg) -> int:
        frame = encode_frame(msg)
        self._log.record(self.name, type(msg).__name__, frame)
        self._outbox.append(frame)
        return len(frame)

    def recv(self):
        return decode_frame(self._inbox.popleft())

    def pending(self) -> int:
        return len(self._inbox)

    def drain(self) -> list:
        out = []
        while self._inbox:
            out.append(self.recv())
        return out


def transport(kind: str = "in_process", *, names=("aggregator", "client"), log: RoundLog | None = None):
    """A connected (first, second) endpoint pair sharing ``log``."""
    if kind not in TRANSPORT_KINDS:
        raise ValueError(f"unknown transport kind {kind!r}")
    log = log if log is not None else RoundLog()
    a_to_b: deque = deque()
    b_to_a: deque = deque()
    return Endpoint(names[0], b_to_a, a_to_b, log), Endpoint(names[1], a_to_b, b_to_a, log)
