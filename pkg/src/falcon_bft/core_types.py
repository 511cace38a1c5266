"""Shared domain vocabulary: identities, blocks, message envelopes, addressing.

All types here are immutable values, safe to copy between nodes.  The
canonical encoding is length-prefixed everywhere so that no two distinct
values encode to the same bytes; it doubles as the on-disk fixture format
for unit tests (hex-dumped) and as the wire format whose round-trip the
envelope tests pin down.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from .crypto import PartialSig, ThresholdSig, sha256


def u32(value: int) -> bytes:
    return value.to_bytes(4, "big")


def read_u32(data: bytes, off: int) -> Tuple[int, int]:
    return int.from_bytes(data[off : off + 4], "big"), off + 4


def lp(data: bytes) -> bytes:
    """Length-prefix a byte string."""
    return u32(len(data)) + data


def read_lp(data: bytes, off: int) -> Tuple[bytes, int]:
    n, off = read_u32(data, off)
    return data[off : off + n], off + n


@dataclass(frozen=True)
class SystemParams:
    """Node count and fault tolerance; quorums derive from these."""

    n: int
    f: int

    def __post_init__(self):
        if self.f < 0 or self.n < 3 * self.f + 1:
            raise ValueError(f"need n >= 3f+1, got n={self.n} f={self.f}")

    @property
    def quorum(self) -> int:
        return self.n - self.f

    @property
    def small_quorum(self) -> int:
        return self.f + 1

    def node_ids(self) -> range:
        return range(1, self.n + 1)


@dataclass(frozen=True)
class Transaction:
    payload: bytes
    txid: bytes = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "txid", sha256(self.payload))


@dataclass(frozen=True)
class Block:
    """Unit proposed by a node in one ACSQ instance."""

    creator: int
    instance: int
    txs: Tuple[Transaction, ...]
    digest: bytes = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "digest", sha256(encode_block(self)))


def encode_block(block: Block) -> bytes:
    """Injective canonical encoding: fixed-width header, length-prefixed txs."""
    out = [u32(block.creator), u32(block.instance), u32(len(block.txs))]
    for tx in block.txs:
        out.append(lp(tx.payload))
    return b"".join(out)


def decode_block(data: bytes, off: int = 0) -> Tuple[Block, int]:
    creator, off = read_u32(data, off)
    instance, off = read_u32(data, off)
    count, off = read_u32(data, off)
    txs = []
    for _ in range(count):
        payload, off = read_lp(data, off)
        txs.append(Transaction(payload))
    return Block(creator, instance, tuple(txs)), off


def block_digest(block: Block) -> bytes:
    return sha256(encode_block(block))


class Proto(enum.Enum):
    GBC = 1
    AABA = 2


@dataclass(frozen=True)
class InstanceAddr:
    """Routing address: ACSQ instance id plus sub-protocol slot.

    Assist/query traffic for slot j rides the AABA(j) address.
    """

    acsq_id: int
    proto: Proto
    index: int

    def encode(self) -> bytes:
        return u32(self.acsq_id) + bytes([self.proto.value]) + u32(self.index)


def decode_addr(data: bytes, off: int) -> Tuple[InstanceAddr, int]:
    acsq_id, off = read_u32(data, off)
    proto = Proto(data[off])
    off += 1
    index, off = read_u32(data, off)
    return InstanceAddr(acsq_id, proto, index), off


@dataclass(frozen=True)
class GradedDelivery:
    """A delivered block with its grade and quorum certificate."""

    block: Block
    grade: int
    proof: ThresholdSig


# --- message bodies ---------------------------------------------------------


@dataclass(frozen=True)
class Propose:
    block: Block


@dataclass(frozen=True)
class Echo1:
    partial: PartialSig


@dataclass(frozen=True)
class Echo2:
    partial: PartialSig


@dataclass(frozen=True)
class Amp:
    bit: int
    digest: Optional[bytes] = None
    proof: Optional[ThresholdSig] = None


@dataclass(frozen=True)
class Sho1:
    bit: int
    # bit=1 carries the grade-1 certificate along so every node that helps
    # amplify a 1 also learns which digest it is amplifying.
    digest: Optional[bytes] = None
    proof: Optional[ThresholdSig] = None


@dataclass(frozen=True)
class Sho2:
    bit: int


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class Bval:
    round: int
    bit: int


@dataclass(frozen=True)
class Aux:
    round: int
    bit: int


@dataclass(frozen=True)
class AbaDecided:
    bit: int


@dataclass(frozen=True)
class Assist:
    delivery: GradedDelivery


@dataclass(frozen=True)
class Query:
    digest: bytes


@dataclass(frozen=True)
class QueryResp:
    block: Block


Body = Union[
    Propose, Echo1, Echo2, Amp, Sho1, Sho2, Stop, Bval, Aux, AbaDecided,
    Assist, Query, QueryResp,
]

GBC_BODIES = (Propose, Echo1, Echo2)
AABA_BODIES = (Amp, Sho1, Sho2, Stop, Bval, Aux, AbaDecided, Assist, Query, QueryResp)
# Bodies that count as "AABA_j protocol traffic" for the delivery-assistance
# peek; assist/query recovery traffic itself must not re-trigger assists.
AABA_PEEK_BODIES = (Amp, Sho1, Sho2, Stop, Bval, Aux, AbaDecided)


@dataclass(frozen=True)
class Envelope:
    sender: int
    recipient: int
    addr: InstanceAddr
    body: Body

    def __post_init__(self):
        ok = (
            isinstance(self.body, GBC_BODIES)
            if self.addr.proto is Proto.GBC
            else isinstance(self.body, AABA_BODIES)
        )
        if not ok:
            raise ValueError(
                f"body {type(self.body).__name__} inconsistent with {self.addr.proto}"
            )


# --- canonical envelope codec ----------------------------------------------

_BODY_TAGS = {
    Propose: 1, Echo1: 2, Echo2: 3, Amp: 4, Sho1: 5, Sho2: 6, Stop: 7,
    Bval: 8, Aux: 9, AbaDecided: 10, Assist: 11, Query: 12, QueryResp: 13,
}
_TAG_BODIES = {v: k for k, v in _BODY_TAGS.items()}


def _enc_partial(ps: PartialSig) -> bytes:
    return u32(ps.signer) + lp(ps.tagged) + lp(ps.mac)


def _dec_partial(data: bytes, off: int) -> Tuple[PartialSig, int]:
    signer, off = read_u32(data, off)
    tagged, off = read_lp(data, off)
    mac, off = read_lp(data, off)
    return PartialSig(signer, tagged, mac), off


def _enc_threshold(ts: ThresholdSig) -> bytes:
    out = [lp(ts.tagged), u32(len(ts.parts))]
    for signer, mac in ts.parts:
        out.append(u32(signer) + lp(mac))
    return b"".join(out)


def _dec_threshold(data: bytes, off: int) -> Tuple[ThresholdSig, int]:
    tagged, off = read_lp(data, off)
    count, off = read_u32(data, off)
    parts = []
    for _ in range(count):
        signer, off = read_u32(data, off)
        mac, off = read_lp(data, off)
        parts.append((signer, mac))
    return ThresholdSig(tagged, tuple(parts)), off


def _enc_delivery(gd: GradedDelivery) -> bytes:
    return lp(encode_block(gd.block)) + u32(gd.grade) + _enc_threshold(gd.proof)


def _dec_delivery(data: bytes, off: int) -> Tuple[GradedDelivery, int]:
    raw, off = read_lp(data, off)
    block, _ = decode_block(raw)
    grade, off = read_u32(data, off)
    proof, off = _dec_threshold(data, off)
    return GradedDelivery(block, grade, proof), off


def _enc_opt(data: Optional[bytes]) -> bytes:
    return b"\x00" if data is None else b"\x01" + lp(data)


def _dec_opt(data: bytes, off: int) -> Tuple[Optional[bytes], int]:
    flag = data[off]
    off += 1
    if flag == 0:
        return None, off
    return read_lp(data, off)


def encode_body(body: Body) -> bytes:
    tag = bytes([_BODY_TAGS[type(body)]])
    if isinstance(body, Propose):
        return tag + lp(encode_block(body.block))
    if isinstance(body, (Echo1, Echo2)):
        return tag + _enc_partial(body.partial)
    if isinstance(body, (Amp, Sho1)):
        proof = None if body.proof is None else _enc_threshold(body.proof)
        return tag + u32(body.bit) + _enc_opt(body.digest) + _enc_opt(proof)
    if isinstance(body, Sho2):
        return tag + u32(body.bit)
    if isinstance(body, Stop):
        return tag
    if isinstance(body, (Bval, Aux)):
        return tag + u32(body.round) + u32(body.bit)
    if isinstance(body, AbaDecided):
        return tag + u32(body.bit)
    if isinstance(body, Assist):
        return tag + _enc_delivery(body.delivery)
    if isinstance(body, Query):
        return tag + lp(body.digest)
    if isinstance(body, QueryResp):
        return tag + lp(encode_block(body.block))
    raise TypeError(f"unknown body {body!r}")


def decode_body(data: bytes, off: int) -> Tuple[Body, int]:
    cls = _TAG_BODIES[data[off]]
    off += 1
    if cls is Propose:
        raw, off = read_lp(data, off)
        return Propose(decode_block(raw)[0]), off
    if cls in (Echo1, Echo2):
        ps, off = _dec_partial(data, off)
        return cls(ps), off
    if cls in (Amp, Sho1):
        bit, off = read_u32(data, off)
        digest, off = _dec_opt(data, off)
        raw_proof, off = _dec_opt(data, off)
        proof = None if raw_proof is None else _dec_threshold(raw_proof, 0)[0]
        return cls(bit, digest, proof), off
    if cls is Sho2:
        bit, off = read_u32(data, off)
        return Sho2(bit), off
    if cls is Stop:
        return Stop(), off
    if cls in (Bval, Aux):
        rnd, off = read_u32(data, off)
        bit, off = read_u32(data, off)
        return cls(rnd, bit), off
    if cls is AbaDecided:
        bit, off = read_u32(data, off)
        return AbaDecided(bit), off
    if cls is Assist:
        gd, off = _dec_delivery(data, off)
        return Assist(gd), off
    if cls is Query:
        digest, off = read_lp(data, off)
        return Query(digest), off
    if cls is QueryResp:
        raw, off = read_lp(data, off)
        return QueryResp(decode_block(raw)[0]), off
    raise TypeError(f"unknown tag at {off}")


def encode_envelope(env: Envelope) -> bytes:
    return (
        u32(env.sender)
        + u32(env.recipient)
        + env.addr.encode()
        + encode_body(env.body)
    )


def decode_envelope(data: bytes) -> Envelope:
    sender, off = read_u32(data, 0)
    recipient, off = read_u32(data, off)
    addr, off = decode_addr(data, off)
    body, off = decode_body(data, off)
    if off != len(data):
        raise ValueError("trailing bytes in envelope")
    return Envelope(sender, recipient, addr, body)


# --- emissions from state machines ------------------------------------------


@dataclass(frozen=True)
class Send:
    """Outbound message request; recipient None means broadcast to all n."""

    addr: InstanceAddr
    body: Body
    to: Optional[int] = None
