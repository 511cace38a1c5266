"""Deterministic discrete-event network with programmable adversaries.

Time is an integer tick count.  Every message delivery is scheduled as
(deliver_time, sequence_number, envelope) in a priority queue; the sequence
number is assigned at send time, so equal-time deliveries replay in send
order and a (config, seed) pair maps to exactly one event log, byte for
byte.  Lockstep mode delivers every message one tick after it was sent,
which makes a tick equal to one communication round; random mode draws
per-message delays from the seeded generator; delay rules (standalone or
attached to a fault) add extra ticks to matching messages.

Fault plugins act strictly through their own node's keys and the delay
knobs: crash silences a node from a given tick, equivocation sends
per-recipient contradictory proposals, silence withholds the node's own
proposals, and wrong-bit inverts the node's agreement inputs (its forged
one-inputs carry junk certificates that verifiers reject).
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .aaba import AabaInput
from .acsq import AcsqInstance
from .core_types import (
    Amp,
    Block,
    Envelope,
    Propose,
    Send,
    SystemParams,
    Transaction,
)
from .crypto import KeyRegistry, ThresholdSig, sha256
from .node import Node, NodeConfig


class InvalidConfig(Exception):
    pass


class NotLockstep(Exception):
    pass


FAULT_KINDS = ("crash", "equivocate", "silent", "wrong_aaba_bit", "delay_target")
# delay_target only attaches delay rules to one node's traffic; the node
# itself keeps following the protocol and stays in the correct set
BYZANTINE_KINDS = ("crash", "equivocate", "silent", "wrong_aaba_bit")


@dataclass(frozen=True)
class DelayRule:
    """Extra delay for matching messages; None fields are wildcards."""

    sender: Optional[int] = None
    recipient: Optional[int] = None
    body: Optional[str] = None  # body class name, e.g. "Echo1"
    acsq_id: Optional[int] = None
    proto: Optional[str] = None  # "gbc" | "aaba"
    index: Optional[int] = None
    delay: int = 0

    def matches(self, env: Envelope) -> bool:
        if self.sender is not None and env.sender != self.sender:
            return False
        if self.recipient is not None and env.recipient != self.recipient:
            return False
        if self.body is not None and type(env.body).__name__ != self.body:
            return False
        if self.acsq_id is not None and env.addr.acsq_id != self.acsq_id:
            return False
        if self.proto is not None and env.addr.proto.name.lower() != self.proto:
            return False
        if self.index is not None and env.addr.index != self.index:
            return False
        return True


@dataclass(frozen=True)
class FaultSpec:
    node: int
    kind: str
    at_time: int = 0
    rules: Tuple[DelayRule, ...] = ()


@dataclass
class SimConfig:
    params: SystemParams
    seed: int = 0
    mode: str = "lockstep"  # lockstep | random | adversarial
    delay_min: int = 1
    delay_max: int = 3
    rules: Tuple[DelayRule, ...] = ()
    faults: Tuple[FaultSpec, ...] = ()
    num_instances: int = 1
    tx_load: int = 4
    tx_size: int = 8
    block_cap: int = 32
    integral_sort: bool = False
    disable_echo2_gate: bool = False
    disable_q_check: bool = False
    disable_sort_gate: bool = False

    def validate(self) -> None:
        if self.mode not in ("lockstep", "random", "adversarial"):
            raise InvalidConfig(f"unknown mode {self.mode!r}")
        if not 1 <= self.delay_min <= self.delay_max:
            raise InvalidConfig("need 1 <= delay_min <= delay_max")
        if self.num_instances < 1:
            raise InvalidConfig("need at least one instance")
        seen = set()
        byzantine = set()
        for fs in self.faults:
            if fs.kind not in FAULT_KINDS:
                raise InvalidConfig(f"unknown fault kind {fs.kind!r}")
            if not 1 <= fs.node <= self.params.n:
                raise InvalidConfig(f"fault node {fs.node} out of range")
            if fs.node in seen:
                raise InvalidConfig(f"duplicate fault for node {fs.node}")
            seen.add(fs.node)
            if fs.kind in BYZANTINE_KINDS:
                byzantine.add(fs.node)
        if len(byzantine) > self.params.f:
            raise InvalidConfig("more faulty nodes than the tolerance f")
        for rule in self.rules:
            if rule.delay < 0:
                raise InvalidConfig("rule delays must be finite and non-negative")

    def faulty_nodes(self) -> Tuple[int, ...]:
        return tuple(
            sorted(fs.node for fs in self.faults if fs.kind in BYZANTINE_KINDS)
        )

    def correct_nodes(self) -> Tuple[int, ...]:
        bad = set(self.faulty_nodes())
        return tuple(i for i in self.params.node_ids() if i not in bad)


# -- fault plugins ----------------------------------------------------------------


class SilentNode(Node):
    """Never broadcasts its own block; participates normally otherwise."""

    def _own_block(self, k: int) -> Optional[Block]:
        return None


class EquivocatingNode(Node):
    """Sends contradictory proposals: one variant to each half of the nodes."""

    def _propose_sends(self, inst: AcsqInstance, block: Optional[Block]):
        if block is None:
            return None
        marker = Transaction(b"equiv:%d:%d" % (self.node_id, inst.k))
        twin = Block(self.node_id, inst.k, block.txs + (marker,))
        self.log("equivocate", k=inst.k, a=block.digest.hex(), b=twin.digest.hex())
        sends = []
        for r in self.params.node_ids():
            pick = block if r % 2 == self.node_id % 2 else twin
            sends.append(Send(inst.gbc_addr(self.node_id), Propose(pick), to=r))
        return sends


class WrongBitNode(Node):
    """Inverts its agreement inputs: certified deliveries become zero votes,
    unseen blocks become forged one votes (rejected by the validity check)."""

    def _input_policy(self):
        def policy(inst: AcsqInstance, j: int) -> List[Send]:
            m1 = inst.M1.get(j)
            if m1 is not None:
                inst.log("aaba_input", k=inst.k, j=j, bit=0, q_valid=False)
                return inst._absorb(j, inst.aaba_for(j).give_input(AabaInput.zero()))
            junk = sha256(b"forged:%d:%d:%d" % (self.node_id, inst.k, j))
            proof = ThresholdSig(tagged=junk, parts=((self.node_id, junk),))
            inst.log("aaba_input", k=inst.k, j=j, bit=1, q_valid=False)
            return [Send(inst.aaba_addr(j), Amp(1, junk, proof))]

        return policy


_FAULT_NODE_CLASSES = {
    "crash": Node,
    "delay_target": Node,
    "silent": SilentNode,
    "equivocate": EquivocatingNode,
    "wrong_aaba_bit": WrongBitNode,
}


# -- the simulation ------------------------------------------------------------------


class EventLog:
    """Append-only, totally ordered run record; exportable as canonical lines."""

    def __init__(self):
        self.records: List[dict] = []

    def append(self, record: dict) -> None:
        record["i"] = len(self.records)
        self.records.append(record)

    def to_lines(self) -> bytes:
        return b"".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")).encode() + b"\n"
            for r in self.records
        )

    def of_kind(self, kind: str) -> List[dict]:
        return [r for r in self.records if r["kind"] == kind]


class Simulation:
    MAX_EVENTS = 2_000_000

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        self.params = config.params
        self.registry = KeyRegistry(self.params.n, system_seed=b"%d" % config.seed)
        self.rng = random.Random(config.seed)
        self.log = EventLog()
        self.time = 0
        self._seq = 0
        self._queue: List[Tuple[int, int, Envelope]] = []

        self.rules: Tuple[DelayRule, ...] = config.rules + tuple(
            rule for fs in config.faults for rule in fs.rules
        )
        self.crashed_at: Dict[int, int] = {
            fs.node: fs.at_time for fs in config.faults if fs.kind == "crash"
        }
        node_config = NodeConfig(
            num_instances=config.num_instances,
            block_cap=config.block_cap,
            integral_sort=config.integral_sort,
            disable_echo2_gate=config.disable_echo2_gate,
            disable_q_check=config.disable_q_check,
            disable_sort_gate=config.disable_sort_gate,
        )
        kinds = {fs.node: fs.kind for fs in config.faults}
        self.nodes: Dict[int, Node] = {}
        for i in self.params.node_ids():
            cls = _FAULT_NODE_CLASSES.get(kinds.get(i, ""), Node)
            self.nodes[i] = cls(
                i, self.params, self.registry, node_config, log=self._logger(i)
            )
        self._batches_injected = 0
        self.injected: List[Tuple[Transaction, int, int]] = []  # tx, batch, time

    def _logger(self, node_id: int):
        def log(kind: str, **fields):
            rec = {"kind": kind, "t": self.time, "node": node_id}
            rec.update(fields)
            self.log.append(rec)

        return log

    def _crashed(self, node_id: int) -> bool:
        return node_id in self.crashed_at and self.time >= self.crashed_at[node_id]

    # -- scheduling ----------------------------------------------------------------

    def _delay_for(self, env: Envelope) -> int:
        if self.config.mode == "lockstep":
            base = 1
        else:
            base = self.rng.randint(self.config.delay_min, self.config.delay_max)
        extra = 0
        for rule in self.rules:
            if rule.matches(env):
                extra = rule.delay
                break
        return base + extra

    def _dispatch(self, envelopes: List[Envelope]) -> None:
        for env in envelopes:
            if self._crashed(env.sender):
                continue
            self.log.append(
                {
                    "kind": "send",
                    "t": self.time,
                    "node": env.sender,
                    "to": env.recipient,
                    "k": env.addr.acsq_id,
                    "proto": env.addr.proto.name,
                    "j": env.addr.index,
                    "body": type(env.body).__name__,
                }
            )
            self._seq += 1
            heapq.heappush(
                self._queue, (self.time + self._delay_for(env), self._seq, env)
            )

    # -- tx load --------------------------------------------------------------------

    def _inject_batch(self, batch: int) -> None:
        for t in range(self.config.tx_load):
            payload = b"tx:%d:%d:" % (batch, t) + bytes(self.config.tx_size)
            tx = Transaction(payload)
            self.injected.append((tx, batch, self.time))
            self.log.append(
                {
                    "kind": "inject",
                    "t": self.time,
                    "node": 0,
                    "batch": batch,
                    "txid": tx.txid.hex(),
                }
            )
            for i in self.params.node_ids():
                if not self._crashed(i):
                    self.nodes[i].inject_tx(tx)
        self._batches_injected = batch

    def _maybe_inject(self) -> None:
        if self._batches_injected >= self.config.num_instances:
            return
        nxt = self._batches_injected + 1
        if all(self.nodes[i].k >= nxt for i in self.config.correct_nodes()):
            self._inject_batch(nxt)

    # -- run -----------------------------------------------------------------------------

    def run(self) -> "RunResult":
        self._inject_batch(1)
        for i in self.params.node_ids():
            if not self._crashed(i):
                self._dispatch(self.nodes[i].start())
        processed = 0
        while self._queue:
            t, _, env = heapq.heappop(self._queue)
            self.time = t
            if self._crashed(env.recipient):
                self.log.append(
                    {"kind": "drop", "t": t, "node": env.recipient, "reason": "crashed"}
                )
                continue
            self._dispatch(self.nodes[env.recipient].handle(env))
            self._maybe_inject()
            processed += 1
            if processed > self.MAX_EVENTS:
                raise RuntimeError("simulation failed to quiesce")
        return RunResult(self.config, self.log, self.nodes, self.injected)


@dataclass
class RunResult:
    config: SimConfig
    log: EventLog
    nodes: Dict[int, Node]
    injected: List[Tuple[Transaction, int, int]]

    def snapshots(self) -> List[dict]:
        return [self.nodes[i].snapshot() for i in sorted(self.nodes)]

    def chains(self) -> Dict[int, List[str]]:
        return {
            i: [b.digest.hex() for b in self.nodes[i].chain.slots]
            for i in sorted(self.nodes)
        }


def schedule(config: SimConfig) -> Simulation:
    """Build a ready-to-run simulation; raises InvalidConfig on bad input."""
    return Simulation(config)


def run_simulation(config: SimConfig) -> RunResult:
    return schedule(config).run()


def round_of(record: dict, config: SimConfig) -> int:
    """Lockstep hop index of a log record; a hop is one communication round."""
    if config.mode != "lockstep":
        raise NotLockstep("round accounting needs lockstep mode")
    return record["t"]
