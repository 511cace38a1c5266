"""Per-node driver: runs consecutive ACSQ instances and owns the chain.

The driver keeps instance k and at most its successor alive: once k has a
grade-2 quorum the node activates k+1 (proposing its next block), and the
first grade-2 delivery inside k+1 fires k's agreement trigger.  Messages
for k+1 arriving before local activation are processed passively: pools
fill and deliveries can complete, but no partial signatures leave the node.
Messages beyond k+1 wait in a holding area.

One instance past the configured window is still activated so the last
measured instance has a successor to fire its trigger from; that extra
instance is never waited on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Set

from .acsq import AcsqInstance
from .core_types import Block, Envelope, Send, SystemParams, Transaction
from .crypto import KeyRegistry
from .sorter import Chain, SortCursor, SortView, partial_sort


@dataclass
class NodeConfig:
    num_instances: int = 1
    block_cap: int = 32
    retention: int = 2
    integral_sort: bool = False
    # detector-sanity mutation hooks; production value is False for all three
    disable_echo2_gate: bool = False
    disable_q_check: bool = False
    disable_sort_gate: bool = False


class Node:
    def __init__(
        self,
        node_id: int,
        params: SystemParams,
        registry: KeyRegistry,
        config: NodeConfig,
        log: Callable,
    ):
        self.node_id = node_id
        self.params = params
        self.registry = registry
        self.config = config
        self.log = log

        self.buffer: List[Transaction] = []
        self.buffer_ids: Set[bytes] = set()
        self.chain = Chain()
        self.cursor = SortCursor()
        self.k = 1
        self.instances: Dict[int, AcsqInstance] = {}
        self.held: Dict[int, List[Envelope]] = {}
        self.pruned_below = 1
        self.started = False

    # -- harness surface ---------------------------------------------------------

    def inject_tx(self, tx: Transaction) -> None:
        if tx.txid in self.buffer_ids or tx.txid in self.chain.committed_txids:
            return
        self.buffer_ids.add(tx.txid)
        self.buffer.append(tx)

    def start(self) -> List[Envelope]:
        self.started = True
        return self._wrap(self._drive())

    def handle(self, env: Envelope) -> List[Envelope]:
        k = env.addr.acsq_id
        if k > self.k + 1:
            self.held.setdefault(k, []).append(env)
            self.log("held", k=k, body=type(env.body).__name__)
            return []
        if k not in self.instances and k < self.pruned_below:
            self.log("drop", k=k, reason="pruned_instance")
            return []
        sends = self._instance(k).handle(env)
        sends.extend(self._drive())
        return self._wrap(sends)

    def snapshot(self) -> dict:
        return {
            "node": self.node_id,
            "k": self.k,
            "chain_digest": self.chain.digest().hex(),
            "chain_len": len(self.chain),
            "buffer_size": len(self.buffer),
        }

    # -- driver ---------------------------------------------------------------------

    def _instance(self, k: int) -> AcsqInstance:
        if k not in self.instances:
            self.instances[k] = AcsqInstance(
                k,
                self.node_id,
                self.params,
                self.registry,
                log=lambda kind, **f: self.log(kind, **f),
                input_policy=self._input_policy(),
                echo2_requires_grade1=not self.config.disable_echo2_gate,
                q_check_enabled=not self.config.disable_q_check,
            )
        return self.instances[k]

    def _input_policy(self) -> Callable:
        return AcsqInstance.default_input_policy

    def _drive(self) -> List[Send]:
        out: List[Send] = []
        cap = self.config.num_instances
        while True:
            if self.k > cap:
                break
            inst = self._instance(self.k)
            if not inst.active:
                out.extend(self._activate(self.k))
            nxt = self.instances.get(self.k + 1)
            if inst.m2_count >= self.params.quorum and self.k + 1 <= cap + 1:
                if nxt is None or not nxt.active:
                    out.extend(self._activate(self.k + 1))
                    nxt = self.instances[self.k + 1]
            if nxt is not None and nxt.m2_count >= 1 and not inst.trigger_active:
                out.extend(inst.set_trigger())
            if inst.returned:
                self.k += 1
                self.log("adopt", k=self.k)
                out.extend(self._release_held())
                continue
            break
        self._run_sorts()
        self._prune()
        return out

    def _activate(self, k: int) -> List[Send]:
        inst = self._instance(k)
        block = self._own_block(k)
        sends = self._propose_sends(inst, block)
        if sends is None:
            return inst.activate(block)
        return inst.activate(None, propose_sends=sends)

    def _own_block(self, k: int) -> Optional[Block]:
        txs = tuple(self.buffer[: self.config.block_cap])
        block = Block(self.node_id, k, txs)
        self.log("propose", k=k, digest=block.digest.hex(), txs=len(txs))
        return block

    def _propose_sends(self, inst: AcsqInstance, block: Optional[Block]):
        """Hook for fault plugins; None means broadcast the block normally."""
        return None

    def _release_held(self) -> List[Send]:
        out: List[Send] = []
        k = self.k + 1
        for env in self.held.pop(k, []):
            if k >= self.pruned_below:
                out.extend(self._instance(k).handle(env))
        return out

    # -- sorting -------------------------------------------------------------------------

    def _commit(self, k: int, blocks: List[Block]) -> None:
        base = len(self.chain.slots) - len(blocks)
        remove: Set[bytes] = set()
        for i, block in enumerate(blocks):
            remove.update(tx.txid for tx in block.txs)
            self.log(
                "commit",
                k=k,
                j=block.creator,
                slot=base + i + 1,
                digest=block.digest.hex(),
                txids=[tx.txid.hex() for tx in block.txs],
            )
        if remove:
            self.buffer = [t for t in self.buffer if t.txid not in remove]
            self.buffer_ids -= remove

    def _run_sorts(self) -> None:
        if self.config.disable_sort_gate:
            for k in sorted(self.instances):
                inst = self.instances[k]
                view = SortView(k, self.params.n, inst.include_map(), set(inst.S_ex))
                done = partial_sort(self.cursor, view, self.chain, instance_gate=False,
                                    integral=self.config.integral_sort)
                if done:
                    self._commit(k, done)
            return
        while True:
            k = self.cursor.done_id + 1
            inst = self.instances.get(k)
            if inst is None:
                break
            view = SortView(k, self.params.n, inst.include_map(), set(inst.S_ex))
            done = partial_sort(self.cursor, view, self.chain,
                                integral=self.config.integral_sort)
            if done:
                self._commit(k, done)
            if self.cursor.done_id < k:
                break

    def _prune(self) -> None:
        horizon = min(self.k - self.config.retention, self.cursor.done_id)
        for k in sorted(self.instances):
            if k >= horizon:
                break
            del self.instances[k]
            self.pruned_below = max(self.pruned_below, k + 1)

    # -- emission plumbing ------------------------------------------------------------------

    def _wrap(self, sends: List[Send]) -> List[Envelope]:
        out: List[Envelope] = []
        for send in sends:
            if send.to is None:
                for r in self.params.node_ids():
                    out.append(Envelope(self.node_id, r, send.addr, send.body))
            else:
                out.append(Envelope(self.node_id, send.to, send.addr, send.body))
        return out
