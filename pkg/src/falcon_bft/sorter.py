"""Partial sorting and the commit path into the append-only chain.

Within an instance, index j commits as soon as every smaller index is
decided (included or excluded); across instances, instance k may only
write to the chain once instance k-1 is fully sorted.  Slots keep whole
blocks so cross-node safety is byte-equality of slots; a separate
execution log records each transaction id once, skipping duplicates that
were already committed in an earlier block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Set

from .core_types import Block
from .crypto import sha256


@dataclass
class Chain:
    """Append-only committed-block vector plus the execution dedup log."""

    slots: List[Block] = field(default_factory=list)
    exec_log: List[bytes] = field(default_factory=list)
    committed_txids: Set[bytes] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.slots)

    def append(self, block: Block) -> List[bytes]:
        """Write the next slot; returns the txids newly added to the exec log."""
        self.slots.append(block)
        fresh = []
        for tx in block.txs:
            if tx.txid not in self.committed_txids:
                self.committed_txids.add(tx.txid)
                self.exec_log.append(tx.txid)
                fresh.append(tx.txid)
        return fresh

    def digest(self) -> bytes:
        return sha256(b"".join(b.digest for b in self.slots))


@dataclass
class SortCursor:
    """Cross-instance gate: instance k sorts only while done_id == k - 1."""

    done_id: int = 0
    idx: Dict[int, int] = field(default_factory=dict)


@dataclass
class SortView:
    """What the sorter needs to see of one instance's decisions."""

    k: int
    n: int
    included: Dict[int, Block]
    excluded: Set[int]


def partial_sort(
    cursor: SortCursor,
    view: SortView,
    chain: Chain,
    instance_gate: bool = True,
    integral: bool = False,
) -> List[Block]:
    """Advance the sort cursor for one instance; returns blocks committed now.

    `integral` is the foil mode used by the stability comparison: nothing
    commits until every index of the instance is decided.  `instance_gate`
    off is a mutation hook for the detector-sanity acceptance check.
    """
    if instance_gate and cursor.done_id != view.k - 1:
        return []
    idx = cursor.idx.get(view.k, 0)
    if integral:
        decided = sum(
            1 for j in range(1, view.n + 1) if j in view.included or j in view.excluded
        )
        if decided < view.n:
            return []
    committed = []
    while idx < view.n and (idx + 1 in view.included or idx + 1 in view.excluded):
        j = idx + 1
        if j in view.included:
            chain.append(view.included[j])
            committed.append(view.included[j])
        idx = j
    cursor.idx[view.k] = idx
    if idx == view.n and (not instance_gate or cursor.done_id == view.k - 1):
        cursor.done_id = max(cursor.done_id, view.k)
    return committed
