"""Shared test harnesses: tiny message buses for driving protocol clusters
outside the full node stack, plus certificate builders."""

from __future__ import annotations

import random
from typing import Callable, Dict, List, Optional, Tuple

from falcon_bft.core_types import InstanceAddr, Proto, Send, SystemParams
from falcon_bft.crypto import KeyRegistry, ThresholdSig
from falcon_bft.gbc import gbc_message


def make_registry(n: int, seed: bytes = b"test") -> KeyRegistry:
    return KeyRegistry(n, system_seed=seed)


def grade1_cert(
    registry: KeyRegistry, params: SystemParams, k: int, j: int, digest: bytes
) -> ThresholdSig:
    """A valid grade-1 quorum certificate for a digest in GBC (k, j)."""
    addr = InstanceAddr(k, Proto.GBC, j)
    msg = gbc_message(addr, digest)
    partials = [
        registry.partial_sign(i, msg, 1) for i in range(1, params.quorum + 1)
    ]
    return registry.combine(partials, params.quorum)


class LockstepBus:
    """Hop-synchronous delivery: sent during hop h, delivered at hop h+1.

    handlers: node -> handle(sender, body) -> emissions.  delay_fn can push
    individual messages extra hops into the future.
    """

    def __init__(
        self,
        n: int,
        handlers: Dict[int, Callable],
        delay_fn: Optional[Callable] = None,
    ):
        self.n = n
        self.handlers = handlers
        self.delay_fn = delay_fn or (lambda sender, recipient, body: 0)
        self.hop = 0
        self.queue: Dict[int, List[Tuple[int, int, object]]] = {}

    def post(self, sender: int, emissions: List[object]) -> None:
        for item in emissions:
            if not isinstance(item, Send):
                continue
            targets = range(1, self.n + 1) if item.to is None else [item.to]
            for r in targets:
                when = self.hop + 1 + self.delay_fn(sender, r, item.body)
                self.queue.setdefault(when, []).append((sender, r, item.body))

    def step(self) -> bool:
        if not self.queue:
            return False
        self.hop = min(self.queue)
        for sender, recipient, body in self.queue.pop(self.hop):
            if recipient in self.handlers:
                self.post(recipient, self.handlers[recipient](sender, body))
        return True

    def run(self, max_hops: int = 200) -> int:
        while self.queue and self.hop < max_hops:
            self.step()
        assert not self.queue, f"bus still busy after {max_hops} hops"
        return self.hop


class ShuffleBus:
    """Adversarial reordering: every step delivers one randomly chosen
    in-flight message (seeded, hence reproducible)."""

    def __init__(self, n: int, handlers: Dict[int, Callable], seed: int):
        self.n = n
        self.handlers = handlers
        self.rng = random.Random(seed)
        self.pool: List[Tuple[int, int, object]] = []

    def post(self, sender: int, emissions: List[object]) -> None:
        for item in emissions:
            if not isinstance(item, Send):
                continue
            targets = range(1, self.n + 1) if item.to is None else [item.to]
            for r in targets:
                self.pool.append((sender, r, item.body))

    def run(self, max_steps: int = 100_000) -> int:
        steps = 0
        while self.pool and steps < max_steps:
            idx = self.rng.randrange(len(self.pool))
            sender, recipient, body = self.pool.pop(idx)
            if recipient in self.handlers:
                self.post(recipient, self.handlers[recipient](sender, body))
            steps += 1
        assert not self.pool, f"bus still busy after {max_steps} deliveries"
        return steps
