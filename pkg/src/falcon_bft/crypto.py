"""Threshold-signature mock and deterministic common coin.

The scheme is a transparent stand-in for threshold BLS: each node holds a
per-node MAC key derived from a system seed, a partial signature is the MAC
over a tagged digest, and a "combined" signature is simply the canonical
multiset of at least quorum-many verified partials.  The verifier registry
knows every MAC key, so verification is exact and the only way to produce a
partial attributed to a node is to hold that node's key.  This preserves the
unforgeability assumption the protocol proofs rely on while staying
dependency-free and bit-for-bit deterministic.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Iterable, Tuple

DIGEST_LEN = 32


class CryptoError(Exception):
    pass


class TooFewPartials(CryptoError):
    pass


class MixedMessages(CryptoError):
    pass


def _u32(value: int) -> bytes:
    return value.to_bytes(4, "big")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def tagged_digest(message: bytes, tag: int) -> bytes:
    """Digest binding a message to a tag number (grade 1 or 2 in practice)."""
    return sha256(message + _u32(tag))


@dataclass(frozen=True)
class PartialSig:
    """One node's share: MAC over a tagged digest under the signer's key."""

    signer: int
    tagged: bytes
    mac: bytes


@dataclass(frozen=True)
class ThresholdSig:
    """Quorum certificate: canonical tuple of (signer, mac) partials.

    Parts are sorted by signer so equal certificates encode identically.
    """

    tagged: bytes
    parts: Tuple[Tuple[int, bytes], ...]

    @property
    def signer_count(self) -> int:
        return len(self.parts)


class KeyRegistry:
    """Holds every node's MAC key plus the shared coin secret.

    Desk-scale stand-in for PKI + threshold-key setup: everything is derived
    from (n, system_seed), so two registries built from the same inputs agree
    at every node.
    """

    def __init__(self, n: int, system_seed: bytes = b""):
        self.n = n
        self._keys = {
            i: sha256(b"falcon-share" + system_seed + _u32(i))
            for i in range(1, n + 1)
        }
        self.coin_secret = sha256(b"falcon-coin" + system_seed)

    def _mac(self, signer: int, tagged: bytes) -> bytes:
        return hmac.new(self._keys[signer], tagged, hashlib.sha256).digest()

    def partial_sign(self, signer: int, message: bytes, tag: int) -> PartialSig:
        t = tagged_digest(message, tag)
        return PartialSig(signer=signer, tagged=t, mac=self._mac(signer, t))

    def verify_partial(self, ps: PartialSig) -> bool:
        """Check the MAC only; binding to a concrete message needs verify_partial_for."""
        if not 1 <= ps.signer <= self.n or len(ps.tagged) != DIGEST_LEN:
            return False
        return hmac.compare_digest(ps.mac, self._mac(ps.signer, ps.tagged))

    def verify_partial_for(self, ps: PartialSig, message: bytes, tag: int) -> bool:
        return ps.tagged == tagged_digest(message, tag) and self.verify_partial(ps)

    def combine(self, partials: Iterable[PartialSig], quorum: int) -> ThresholdSig:
        """Combine verified partials over one tagged digest into a certificate.

        Raises MixedMessages if the partials disagree on the tagged digest and
        TooFewPartials if fewer than `quorum` distinct signers contributed.
        """
        by_signer = {}
        tagged = None
        for ps in partials:
            if tagged is None:
                tagged = ps.tagged
            elif ps.tagged != tagged:
                raise MixedMessages("partials cover different tagged digests")
            by_signer[ps.signer] = ps.mac
        if tagged is None or len(by_signer) < quorum:
            raise TooFewPartials(
                f"need {quorum} distinct signers, got {len(by_signer)}"
            )
        parts = tuple(sorted(by_signer.items()))
        return ThresholdSig(tagged=tagged, parts=parts)

    def verify_threshold(
        self, ts: ThresholdSig, message: bytes, tag: int, quorum: int
    ) -> bool:
        if ts.tagged != tagged_digest(message, tag):
            return False
        signers = {s for s, _ in ts.parts}
        if len(signers) != len(ts.parts) or len(signers) < quorum:
            return False
        return all(
            self.verify_partial(PartialSig(s, ts.tagged, m)) for s, m in ts.parts
        )


def coin(shared_secret: bytes, scope: bytes) -> int:
    """Deterministic common coin: low bit of a digest over secret and scope."""
    return sha256(shared_secret + scope)[-1] & 1
