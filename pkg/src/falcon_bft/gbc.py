"""Graded broadcast: one broadcaster, deliveries at grade 1 then grade 2.

Receivers echo a partial signature over the block digest tagged with the
grade; n-f matching tag-1 partials yield a grade-1 delivery plus the node's
tag-2 echo, and n-f tag-2 partials yield a grade-2 delivery.  A correct node
echoes the first proposal only, which with quorum intersection gives
consistency under an equivocating broadcaster.  The tag-2 echo is gated on
the node's own grade-1 delivery; that ordering is what makes grade-2
delivery imply that f+1 correct nodes already delivered at grade 1.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from .core_types import (
    Block,
    Echo1,
    Echo2,
    GradedDelivery,
    InstanceAddr,
    Propose,
    Send,
    SystemParams,
)
from .crypto import KeyRegistry, PartialSig, tagged_digest


class AlreadyStarted(Exception):
    pass


class Deliver:
    """Local emission: this node just delivered at the given grade."""

    __slots__ = ("delivery",)

    def __init__(self, delivery: GradedDelivery):
        self.delivery = delivery


class BodyReceived:
    """Local emission: the block body became known at this node."""

    __slots__ = ("block",)

    def __init__(self, block: Block):
        self.block = block


def gbc_message(addr: InstanceAddr, digest: bytes) -> bytes:
    """Signed payload for echoes: instance address bound to the block digest."""
    return addr.encode() + digest


def verify_delivery(
    gd: GradedDelivery, addr: InstanceAddr, params: SystemParams, registry: KeyRegistry
) -> bool:
    """Check a ⟨B, g, σ⟩ triple: well-formed grade, block binding, quorum cert."""
    if gd.grade not in (1, 2):
        return False
    if gd.block.creator != addr.index or gd.block.instance != addr.acsq_id:
        return False
    msg = gbc_message(addr, gd.block.digest)
    return registry.verify_threshold(gd.proof, msg, gd.grade, params.quorum)


class GbcInstance:
    """Per-node state machine for one graded-broadcast instance.

    `silenced` covers both the pre-activation passive mode and the post-trigger
    mute: no new partial signatures are emitted, but pools still accumulate and
    deliveries still complete.  echo2_requires_grade1 is a mutation hook for
    the acceptance suite's detector-sanity check.
    """

    def __init__(
        self,
        addr: InstanceAddr,
        node_id: int,
        params: SystemParams,
        registry: KeyRegistry,
        silenced: bool = False,
        echo2_requires_grade1: bool = True,
    ):
        self.addr = addr
        self.node_id = node_id
        self.params = params
        self.registry = registry
        self.silenced = silenced
        self.echo2_requires_grade1 = echo2_requires_grade1

        self.started = False
        self.received_block: Optional[Block] = None
        self.echoed1 = False
        self.echoed2 = False
        # pools keyed by the partial's tagged digest; signer -> partial
        self.pool1: Dict[bytes, Dict[int, PartialSig]] = {}
        self.pool2: Dict[bytes, Dict[int, PartialSig]] = {}
        self.delivered1: Optional[GradedDelivery] = None
        self.delivered2: Optional[GradedDelivery] = None
        self.ignored_proposals = 0

    # -- broadcaster ---------------------------------------------------------

    def start(self, block: Block) -> List[object]:
        if self.started:
            raise AlreadyStarted(f"GBC {self.addr} already started")
        self.started = True
        return [Send(self.addr, Propose(block))]

    # -- receiver ------------------------------------------------------------

    def on_propose(self, sender: int, block: Block) -> List[object]:
        if sender != self.addr.index:
            return []  # only the broadcaster may propose in its own instance
        if block.creator != self.addr.index or block.instance != self.addr.acsq_id:
            return []
        if self.received_block is not None:
            self.ignored_proposals += 1
            return []
        self.received_block = block
        out: List[object] = [BodyReceived(block)]
        out.extend(self._maybe_echo1())
        if not self.echo2_requires_grade1:
            out.extend(self._maybe_echo2())
        out.extend(self._try_deliveries())
        return out

    def _maybe_echo1(self) -> List[object]:
        if self.echoed1 or self.silenced or self.received_block is None:
            return []
        self.echoed1 = True
        msg = gbc_message(self.addr, self.received_block.digest)
        ps = self.registry.partial_sign(self.node_id, msg, 1)
        return [Send(self.addr, Echo1(ps))]

    def _maybe_echo2(self) -> List[object]:
        if self.echoed2 or self.silenced:
            return []
        if self.echo2_requires_grade1:
            if self.delivered1 is None:
                return []
            digest = self.delivered1.block.digest
        else:
            if self.received_block is None:
                return []
            digest = self.received_block.digest
        self.echoed2 = True
        ps = self.registry.partial_sign(self.node_id, gbc_message(self.addr, digest), 2)
        return [Send(self.addr, Echo2(ps))]

    def unsilence(self) -> List[object]:
        """Activation catch-up: emit the echoes withheld while passive."""
        if not self.silenced:
            return []
        self.silenced = False
        out = self._maybe_echo1()
        out.extend(self._maybe_echo2())
        return out

    def on_echo1(self, ps: PartialSig) -> List[object]:
        if not self.registry.verify_partial(ps):
            return []
        self.pool1.setdefault(ps.tagged, {})[ps.signer] = ps
        return self._try_deliveries()

    def on_echo2(self, ps: PartialSig) -> List[object]:
        if not self.registry.verify_partial(ps):
            return []
        self.pool2.setdefault(ps.tagged, {})[ps.signer] = ps
        return self._try_deliveries()

    def learn_body(self, block: Block) -> List[object]:
        """Adopt a block body learned out of band (assist or query response)."""
        if block.creator != self.addr.index or block.instance != self.addr.acsq_id:
            return []
        if self.received_block is None:
            self.received_block = block
            return [BodyReceived(block)] + self._try_deliveries()
        return self._try_deliveries()

    # -- delivery ------------------------------------------------------------

    def _try_deliveries(self) -> List[object]:
        out: List[object] = []
        block = self.received_block
        if block is None:
            return out
        msg = gbc_message(self.addr, block.digest)
        if self.delivered1 is None:
            t1 = tagged_digest(msg, 1)
            pool = self.pool1.get(t1, {})
            if len(pool) >= self.params.quorum:
                sig = self.registry.combine(pool.values(), self.params.quorum)
                self.delivered1 = GradedDelivery(block, 1, sig)
                out.append(Deliver(self.delivered1))
                out.extend(self._maybe_echo2())
        if self.delivered2 is None and (
            self.delivered1 is not None or not self.echo2_requires_grade1
        ):
            t2 = tagged_digest(msg, 2)
            pool = self.pool2.get(t2, {})
            if len(pool) >= self.params.quorum:
                sig = self.registry.combine(pool.values(), self.params.quorum)
                self.delivered2 = GradedDelivery(block, 2, sig)
                out.append(Deliver(self.delivered2))
        return out
