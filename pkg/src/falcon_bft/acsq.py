"""One ACSQ instance at one node: n graded broadcasts, agreement fill-in,
delivery assistance, and block-query recovery.

The broadcast stage runs until either all n blocks are grade-2 delivered
(agreement skipped entirely) or the driver fires this instance's trigger,
after which the node waits for a grade-2 quorum, mutes its broadcast-stage
partial signatures, and opens one AABA instance per missing index: input
⟨1, digest, cert⟩ when the block was grade-1 delivered, 0 otherwise.

Any grade-2 certificate adopted later, from a peer's assistance message or
from pools completing after the mute, immediately decides that index and
halts its AABA instance.  A node that outputs 1 without holding the block
body recovers it by digest query; peers answer from whatever body they hold,
deferring the answer until they hold one.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional, Set, Tuple

from .aaba import AabaInput, AabaInstance, Output
from .core_types import (
    AABA_PEEK_BODIES,
    Assist,
    Block,
    Echo1,
    Echo2,
    Envelope,
    GradedDelivery,
    InstanceAddr,
    Propose,
    Proto,
    Query,
    QueryResp,
    Send,
    SystemParams,
)
from .crypto import KeyRegistry
from .gbc import BodyReceived, Deliver, GbcInstance, verify_delivery


class AcsqInstance:
    def __init__(
        self,
        k: int,
        node_id: int,
        params: SystemParams,
        registry: KeyRegistry,
        log: Callable,
        input_policy: Optional[Callable] = None,
        echo2_requires_grade1: bool = True,
        q_check_enabled: bool = True,
    ):
        self.k = k
        self.node_id = node_id
        self.params = params
        self.registry = registry
        self.log = log
        self.input_policy = input_policy or self.default_input_policy
        self.echo2_requires_grade1 = echo2_requires_grade1
        self.q_check_enabled = q_check_enabled

        self.active = False
        self.muted = False
        self.trigger_active = False
        self.agreement_started = False
        self.returned = False

        self.gbc: Dict[int, GbcInstance] = {}
        self.aaba: Dict[int, AabaInstance] = {}
        self.M1: Dict[int, GradedDelivery] = {}
        self.M2: Dict[int, GradedDelivery] = {}
        self.M_acs: Dict[int, Block] = {}
        self.S_a: Set[int] = set()
        self.S_ex: Set[int] = set()
        self.known_blocks: Dict[bytes, Block] = {}
        self.assist_sent: Set[Tuple[int, int]] = set()  # (index, peer)
        self.pending_queries: Dict[bytes, List[int]] = {}  # digest -> requesters
        self.pending_includes: Dict[int, Optional[bytes]] = {}  # j -> digest if known
        self.queried: Set[bytes] = set()

    # -- sub-instance access ------------------------------------------------------

    def gbc_addr(self, j: int) -> InstanceAddr:
        return InstanceAddr(self.k, Proto.GBC, j)

    def aaba_addr(self, j: int) -> InstanceAddr:
        return InstanceAddr(self.k, Proto.AABA, j)

    def gbc_for(self, j: int) -> GbcInstance:
        if j not in self.gbc:
            self.gbc[j] = GbcInstance(
                self.gbc_addr(j),
                self.node_id,
                self.params,
                self.registry,
                silenced=(not self.active) or self.muted,
                echo2_requires_grade1=self.echo2_requires_grade1,
            )
        return self.gbc[j]

    def aaba_for(self, j: int) -> AabaInstance:
        if j not in self.aaba:
            self.aaba[j] = AabaInstance(
                self.aaba_addr(j),
                self.node_id,
                self.params,
                self.registry,
                q_check_enabled=self.q_check_enabled,
            )
        return self.aaba[j]

    @property
    def m2_count(self) -> int:
        return len(self.M2)

    def include_map(self) -> Dict[int, Block]:
        return dict(self.M_acs)

    # -- activation ----------------------------------------------------------------

    def activate(
        self, own_block: Optional[Block], propose_sends: Optional[List[Send]] = None
    ) -> List[Send]:
        """Go active: catch up withheld echoes and broadcast our own block.

        `propose_sends` lets a fault plugin replace the single broadcast with
        its own per-recipient proposals (equivocation).
        """
        if self.active:
            return []
        self.active = True
        self.log("activate", k=self.k)
        out: List[Send] = []
        for j in sorted(self.gbc):
            sub = [] if self.muted else self.gbc[j].unsilence()
            out.extend(self._absorb(j, sub))
        if propose_sends is not None:
            self.gbc_for(self.node_id).started = True
            out.extend(propose_sends)
        elif own_block is not None:
            out.extend(self._absorb(self.node_id, self.gbc_for(self.node_id).start(own_block)))
        out.extend(self._check_stage())
        return out

    def set_trigger(self) -> List[Send]:
        if self.trigger_active or self.returned:
            return []
        self.trigger_active = True
        self.log("trigger", k=self.k)
        return self._check_stage()

    # -- envelope routing --------------------------------------------------------------

    def handle(self, env: Envelope) -> List[Send]:
        if env.addr.proto is Proto.GBC:
            return self._handle_gbc(env)
        return self._handle_aaba(env)

    def _handle_gbc(self, env: Envelope) -> List[Send]:
        j = env.addr.index
        g = self.gbc_for(j)
        body = env.body
        if isinstance(body, Propose):
            sub = g.on_propose(env.sender, body.block)
        elif isinstance(body, Echo1):
            sub = g.on_echo1(body.partial)
        elif isinstance(body, Echo2):
            sub = g.on_echo2(body.partial)
        else:
            sub = []
        return self._absorb(j, sub)

    def _handle_aaba(self, env: Envelope) -> List[Send]:
        j = env.addr.index
        out: List[Send] = []
        body = env.body
        # delivery assistance: answer AABA_j traffic from anyone still running
        # it once we hold the grade-2 certificate (once per peer per index)
        if isinstance(body, AABA_PEEK_BODIES) and env.sender != self.node_id:
            if j in self.M2 and (j, env.sender) not in self.assist_sent:
                self.assist_sent.add((j, env.sender))
                self.log("assist_sent", k=self.k, j=j, to=env.sender)
                out.append(Send(self.aaba_addr(j), Assist(self.M2[j]), to=env.sender))
        if isinstance(body, Assist):
            out.extend(self._on_assist(j, body.delivery))
        elif isinstance(body, Query):
            out.extend(self._on_query(env.sender, body.digest))
        elif isinstance(body, QueryResp):
            out.extend(self._on_query_resp(j, body.block))
        else:
            out.extend(self._absorb(j, self.aaba_for(j).handle(env.sender, body)))
        return out

    def _absorb(self, j: int, sub: List[object]) -> List[Send]:
        """Interpret sub-machine emissions; local events update instance state."""
        out: List[Send] = []
        for item in sub:
            if isinstance(item, Send):
                out.append(item)
            elif isinstance(item, Deliver):
                out.extend(self._on_deliver(j, item.delivery))
            elif isinstance(item, BodyReceived):
                out.extend(self._note_body(item.block, via="gbc"))
            elif isinstance(item, Output):
                out.extend(self._on_aaba_output(j, item.bit, item.source))
        return out

    # -- broadcast-stage results -----------------------------------------------------

    def _on_deliver(self, j: int, gd: GradedDelivery) -> List[Send]:
        if gd.grade == 1:
            if j not in self.M1:
                self.M1[j] = gd
                self.log("gbc_deliver", k=self.k, j=j, grade=1, digest=gd.block.digest.hex())
            return []
        return self._adopt_grade2(j, gd, via="gbc")

    def _adopt_grade2(self, j: int, gd: GradedDelivery, via: str) -> List[Send]:
        if j in self.M2:
            return []
        self.M2[j] = gd
        kind = "gbc_deliver" if via == "gbc" else "da_adopt"
        self.log(kind, k=self.k, j=j, grade=2, digest=gd.block.digest.hex())
        out = self._note_body(gd.block, via=via)
        if j in self.S_ex:
            # excluded by an earlier 0-output; the decision stands (the observer
            # surfaces this, it cannot arise from correct-node schedules)
            self.log("late_grade2_after_exclusion", k=self.k, j=j)
        elif j not in self.M_acs:
            self.M_acs[j] = gd.block
            self.log("decide", k=self.k, j=j, outcome="include", source=via)
        self.pending_includes.pop(j, None)
        if j in self.aaba:
            self.aaba[j].halt()
        out.extend(self._check_stage())
        out.extend(self._resolve_check())
        return out

    def _note_body(self, block: Block, via: str) -> List[Send]:
        out: List[Send] = []
        if block.digest not in self.known_blocks:
            self.known_blocks[block.digest] = block
            self.log(
                "body_received",
                k=self.k,
                j=block.creator,
                digest=block.digest.hex(),
                via=via,
            )
            # serve held-back queries now that we can
            for requester in self.pending_queries.pop(block.digest, []):
                self.log("query_resp_sent", k=self.k, to=requester, digest=block.digest.hex())
                out.append(
                    Send(self.aaba_addr(block.creator), QueryResp(block), to=requester)
                )
            if via != "gbc":
                # let buffered echo pools complete deliveries on this body
                out.extend(self._absorb(block.creator, self.gbc_for(block.creator).learn_body(block)))
        out.extend(self._advance_includes())
        return out

    # -- stage transitions -------------------------------------------------------------

    def _check_stage(self) -> List[Send]:
        if self.returned or not self.active or self.agreement_started:
            return []
        if len(self.M2) == self.params.n:
            self._do_return()
            return []
        if self.trigger_active and len(self.M2) >= self.params.quorum:
            return self._enter_agreement()
        return []

    def _enter_agreement(self) -> List[Send]:
        self.agreement_started = True
        self.muted = True
        for g in self.gbc.values():
            g.silenced = True
        self.log("agreement_enter", k=self.k, m2=len(self.M2))
        out: List[Send] = []
        for j in range(1, self.params.n + 1):
            if j in self.M2:
                continue
            self.S_a.add(j)
            out.extend(self.input_policy(self, j))
        out.extend(self._resolve_check())
        return out

    @staticmethod
    def default_input_policy(inst: "AcsqInstance", j: int) -> List[Send]:
        """Honest input rule: grade-1 delivery turns into a certified one-input."""
        m1 = inst.M1.get(j)
        if m1 is not None:
            value = AabaInput.one(m1.block.digest, m1.proof)
        else:
            value = AabaInput.zero()
        inst.log("aaba_input", k=inst.k, j=j, bit=value.bit, q_valid=value.bit == 1)
        return inst._absorb(j, inst.aaba_for(j).give_input(value))

    # -- agreement results ----------------------------------------------------------------

    def _on_aaba_output(self, j: int, bit: int, source: str) -> List[Send]:
        self.log("aaba_output", k=self.k, j=j, bit=bit, source=source)
        if j in self.M_acs or j in self.S_ex:
            return []
        out: List[Send] = []
        if bit == 0:
            self.S_ex.add(j)
            self.log("decide", k=self.k, j=j, outcome="exclude", source="aaba")
        else:
            self.pending_includes[j] = None
            out.extend(self._advance_includes())
        out.extend(self._resolve_check())
        return out

    def _advance_includes(self) -> List[Send]:
        """Push every pending 1-output toward inclusion: learn digest, fetch body."""
        out: List[Send] = []
        for j in sorted(self.pending_includes):
            digest = self.pending_includes[j]
            if digest is None:
                if j in self.M1:
                    digest = self.M1[j].block.digest
                elif j in self.aaba and self.aaba[j].known_proof is not None:
                    digest = self.aaba[j].known_proof[0]
                else:
                    continue  # certificate not seen yet; its broadcast will arrive
                self.pending_includes[j] = digest
            block = self.known_blocks.get(digest)
            if block is not None:
                del self.pending_includes[j]
                self.M_acs[j] = block
                self.log("decide", k=self.k, j=j, outcome="include", source="aaba")
                out.extend(self._resolve_check())
            elif digest not in self.queried:
                self.queried.add(digest)
                self.log("query_sent", k=self.k, j=j, digest=digest.hex())
                out.append(Send(self.aaba_addr(j), Query(digest)))
        return out

    # -- recovery traffic ---------------------------------------------------------------------

    def _on_assist(self, j: int, gd: GradedDelivery) -> List[Send]:
        if gd.grade != 2 or not verify_delivery(gd, self.gbc_addr(j), self.params, self.registry):
            self.log("drop", k=self.k, j=j, reason="bad_assist")
            return []
        return self._adopt_grade2(j, gd, via="assist")

    def _on_query(self, sender: int, digest: bytes) -> List[Send]:
        if sender == self.node_id:
            return []
        block = self.known_blocks.get(digest)
        if block is not None:
            self.log("query_resp_sent", k=self.k, to=sender, digest=digest.hex())
            return [Send(self.aaba_addr(block.creator), QueryResp(block), to=sender)]
        waiting = self.pending_queries.setdefault(digest, [])
        if sender not in waiting:
            waiting.append(sender)
        return []

    def _on_query_resp(self, j: int, block: Block) -> List[Send]:
        if block.instance != self.k or block.creator != j:
            self.log("drop", k=self.k, j=j, reason="bad_query_resp")
            return []
        return self._note_body(block, via="query_resp")

    # -- completion ------------------------------------------------------------------------------

    def _resolve_check(self) -> List[Send]:
        if (
            self.agreement_started
            and not self.returned
            and all(j in self.S_ex or j in self.M_acs for j in self.S_a)
        ):
            self._do_return()
        return []

    def _do_return(self) -> None:
        self.returned = True
        self.log(
            "instance_return",
            k=self.k,
            acs_size=len(self.M_acs),
            excluded=sorted(self.S_ex),
        )
