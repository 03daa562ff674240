"""In-process synchronous network of honest-but-curious clients.

Clients are numbered 1..N; id 0 is the offline triple dealer. Messages queued
during a round are delivered together at the barrier in (sender, receiver,
send order) order, so a run is a deterministic function of its seed.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidArgument, ProtocolViolation
from .numerics import client_rng
from .sharing import Share

DEALER = 0

# spawn-key prefixes for the seeded streams
STREAM_CLIENT = 1
STREAM_DEALER = 2
STREAM_SCHEDULE = 3
STREAM_INIT = 4


class Tag(str, Enum):
    DATA_SHARE = "data-share"
    TRIPLE_SHARE = "triple-share"
    DIFF_SHARE = "diff-share"
    OPENED_VALUE = "opened-value"
    RESULT_SHARE = "result-share"


_SHARE_TAGS = {Tag.DATA_SHARE, Tag.TRIPLE_SHARE, Tag.DIFF_SHARE, Tag.RESULT_SHARE}


def payload_bytes(payload) -> bytes:
    if isinstance(payload, Share):
        return payload.to_bytes()
    a = np.ascontiguousarray(payload, dtype="<f8")
    return np.array(a.shape, dtype="<u4").tobytes() + a.tobytes()


@dataclass(frozen=True)
class Message:
    round: int
    sender: int
    receiver: int
    tag: Tag
    label: str
    payload: object
    digest: str

    def record(self, with_payload: bool = False) -> dict:
        rec = {
            "round": self.round,
            "sender": self.sender,
            "receiver": self.receiver,
            "tag": self.tag.value,
            "label": self.label,
            "payload_digest": self.digest,
        }
        if with_payload and self.payload is not None:
            if isinstance(self.payload, Share):
                rec["payload"] = self.payload.to_dict()
            else:
                rec["payload"] = np.asarray(self.payload).tolist()
        return rec


@dataclass
class ClientState:
    id: int
    rng: np.random.Generator
    memory: dict = field(default_factory=dict)


@dataclass
class CollusionView:
    colluders: frozenset
    messages: list
    local_states: dict

    def shares_of(self, secret_id: str) -> list[Share]:
        """Distinct evaluations of ``secret_id`` visible to the coalition."""
        seen = {}
        for m in self.messages:
            p = m.payload
            if isinstance(p, Share) and p.secret_id == secret_id:
                seen.setdefault(p.index, p)
        return [seen[i] for i in sorted(seen)]


class Network:
    def __init__(self, N: int, T: int, seed: int, record_payloads: bool = True):
        if not (1 <= T <= N - 1):
            raise InvalidArgument(f"need 1 <= T <= N-1, got N={N}, T={T}")
        self.N = N
        self.T = T
        self.seed = int(seed)
        self.record_payloads = record_payloads
        self.clients = {i: ClientState(i, client_rng(seed, STREAM_CLIENT, i)) for i in range(1, N + 1)}
        self.dealer_rng = client_rng(seed, STREAM_DEALER)
        self.round = 0
        self.transcript: list[Message] = []
        self._queue: list[tuple[int, int, int, Message]] = []
        self._seq = 0
        self.last_delivery: dict[int, list[Message]] = {}

    @property
    def ids(self) -> range:
        return range(1, self.N + 1)

    def rng(self, client: int) -> np.random.Generator:
        return self.dealer_rng if client == DEALER else self.clients[client].rng

    def send(self, sender: int, receiver: int, tag: Tag, label: str, payload, round: int | None = None):
        if round is not None and round != self.round:
            raise ProtocolViolation(f"message for round {round} sent during round {self.round}")
        if sender != DEALER and sender not in self.clients:
            raise InvalidArgument(f"unknown sender {sender}")
        if receiver not in self.clients:
            raise InvalidArgument(f"unknown receiver {receiver}")
        tag = Tag(tag)
        if (tag in _SHARE_TAGS) != isinstance(payload, Share):
            raise ProtocolViolation(f"payload type {type(payload).__name__} does not match tag {tag.value}")
        digest = hashlib.sha256(payload_bytes(payload)).hexdigest()
        msg = Message(self.round, sender, receiver, tag, label, payload, digest)
        self._queue.append((sender, receiver, self._seq, msg))
        self._seq += 1

    def deliver_round(self) -> dict[int, list[Message]]:
        """Barrier: deliver everything queued this round and advance."""
        self._queue.sort(key=lambda item: item[:3])
        inbox: dict[int, list[Message]] = defaultdict(list)
        for _, receiver, _, msg in self._queue:
            inbox[receiver].append(msg)
            kept = msg if self.record_payloads else Message(
                msg.round, msg.sender, msg.receiver, msg.tag, msg.label, None, msg.digest
            )
            self.transcript.append(kept)
        self._queue = []
        self.round += 1
        self.last_delivery = dict(inbox)
        return self.last_delivery

    def collusion_view(self, colluders) -> CollusionView:
        colluders = frozenset(int(c) for c in colluders)
        if len(colluders) > self.T:
            raise InvalidArgument(f"coalition of {len(colluders)} exceeds T={self.T}")
        if not colluders <= set(self.clients):
            raise InvalidArgument(f"unknown clients in coalition {sorted(colluders)}")
        msgs = [m for m in self.transcript if m.sender in colluders or m.receiver in colluders]
        return CollusionView(colluders, msgs, {c: self.clients[c].memory for c in sorted(colluders)})

    def transcript_lines(self, with_payloads: bool = False) -> list[str]:
        return [json.dumps(m.record(with_payloads), sort_keys=True) for m in self.transcript]

    def dump_transcript(self, path, with_payloads: bool = False) -> None:
        with open(path, "w") as fh:
            for line in self.transcript_lines(with_payloads):
                fh.write(line + "\n")


def spawn(N: int, T: int, seed: int, record_payloads: bool = True) -> Network:
    return Network(N, T, seed, record_payloads=record_payloads)


def by_label(inbox: dict[int, list[Message]]) -> dict[tuple[int, str], list]:
    """Payloads grouped by (receiver, label), in delivery order."""
    out: dict[tuple[int, str], list] = defaultdict(list)
    for receiver, msgs in inbox.items():
        for m in msgs:
            out[receiver, m.label].append(m.payload)
    return out
