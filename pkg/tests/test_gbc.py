import pytest

from falcon_bft.core_types import (
    Block,
    Echo1,
    Echo2,
    GradedDelivery,
    InstanceAddr,
    Propose,
    Proto,
    Send,
    SystemParams,
    Transaction,
)
from falcon_bft.gbc import (
    AlreadyStarted,
    BodyReceived,
    Deliver,
    GbcInstance,
    gbc_message,
    verify_delivery,
)

from support import make_registry

PARAMS = SystemParams(4, 1)
ADDR = InstanceAddr(1, Proto.GBC, 1)


def make_instance(node_id=2, **kwargs):
    return GbcInstance(ADDR, node_id, PARAMS, make_registry(4), **kwargs)


def make_block(creator=1, instance=1, payload=b"tx"):
    return Block(creator, instance, (Transaction(payload),))


def sends(emissions):
    return [e for e in emissions if isinstance(e, Send)]


def deliveries(emissions):
    return [e.delivery for e in emissions if isinstance(e, Deliver)]


def echo1_for(registry, signer, block):
    return registry.partial_sign(signer, gbc_message(ADDR, block.digest), 1)


def echo2_for(registry, signer, block):
    return registry.partial_sign(signer, gbc_message(ADDR, block.digest), 2)


def test_start_fans_out_once():
    g = make_instance(node_id=1)
    block = make_block()
    out = sends(g.start(block))
    assert len(out) == 1 and out[0].to is None  # broadcast reaches all 4
    assert isinstance(out[0].body, Propose)
    with pytest.raises(AlreadyStarted):
        g.start(block)


def test_first_propose_echoes():
    g = make_instance()
    block = make_block()
    out = g.on_propose(1, block)
    assert any(isinstance(e, BodyReceived) for e in out)
    echoes = [s for s in sends(out) if isinstance(s.body, Echo1)]
    assert len(echoes) == 1
    assert g.registry.verify_partial(echoes[0].body.partial)


def test_conflicting_propose_ignored():
    g = make_instance()
    g.on_propose(1, make_block(payload=b"a"))
    out = g.on_propose(1, make_block(payload=b"b"))
    assert out == []
    assert g.ignored_proposals == 1
    assert g.received_block.txs[0].payload == b"a"


def test_propose_from_non_broadcaster_dropped():
    g = make_instance()
    assert g.on_propose(3, make_block(creator=1)) == []
    assert g.on_propose(1, make_block(creator=3, instance=1)) == []


def test_muted_propose_records_but_stays_silent():
    g = make_instance(silenced=True)
    out = g.on_propose(1, make_block())
    assert sends(out) == []
    assert g.received_block is not None  # body still counts as received


def test_grade1_delivery_and_echo2():
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block = make_block()
    g.on_propose(1, block)
    out = []
    for signer in (1, 2, 3):
        out += g.on_echo1(echo1_for(registry, signer, block))
    got = deliveries(out)
    assert len(got) == 1 and got[0].grade == 1
    assert verify_delivery(got[0], ADDR, PARAMS, registry)
    echo2s = [s for s in sends(out) if isinstance(s.body, Echo2)]
    assert len(echo2s) == 1


def test_equivocation_split_never_delivers():
    # 2+1 echo split across two digests stays below the quorum of 3
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block_a = make_block(payload=b"a")
    block_b = make_block(payload=b"b")
    g.on_propose(1, block_a)
    out = []
    out += g.on_echo1(echo1_for(registry, 1, block_a))
    out += g.on_echo1(echo1_for(registry, 2, block_a))
    out += g.on_echo1(echo1_for(registry, 3, block_b))
    assert deliveries(out) == []


def test_duplicate_partial_does_not_advance_pool():
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block = make_block()
    g.on_propose(1, block)
    out = []
    for _ in range(3):
        out += g.on_echo1(echo1_for(registry, 1, block))
    assert deliveries(out) == []


def test_invalid_partial_dropped():
    registry = make_registry(4)
    other = make_registry(4, seed=b"other")
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block = make_block()
    g.on_propose(1, block)
    out = []
    for signer in (1, 2, 3):
        out += g.on_echo1(other.partial_sign(signer, gbc_message(ADDR, block.digest), 1))
    assert deliveries(out) == []


def test_grade2_delivery_after_grade1():
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block = make_block()
    g.on_propose(1, block)
    for signer in (1, 2, 3):
        g.on_echo1(echo1_for(registry, signer, block))
    out = []
    for signer in (1, 2, 3):
        out += g.on_echo2(echo2_for(registry, signer, block))
    got = deliveries(out)
    assert len(got) == 1 and got[0].grade == 2
    assert g.delivered1 is not None  # grade-2 implies local grade-1
    assert verify_delivery(got[0], ADDR, PARAMS, registry)


def test_echo2_quorum_before_body_buffers():
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block = make_block()
    out = []
    for signer in (1, 2, 3):
        out += g.on_echo1(echo1_for(registry, signer, block))
        out += g.on_echo2(echo2_for(registry, signer, block))
    assert deliveries(out) == []  # no body yet
    out = g.on_propose(1, block)
    grades = [d.grade for d in deliveries(out)]
    assert grades == [1, 2]


def test_at_most_one_echo_each():
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry)
    block = make_block()
    emitted = []
    emitted += g.on_propose(1, block)
    emitted += g.on_propose(1, block)
    for signer in (1, 2, 3):
        emitted += g.on_echo1(echo1_for(registry, signer, block))
    for signer in (1, 2, 3):
        emitted += g.on_echo2(echo2_for(registry, signer, block))
    echo1s = [s for s in sends(emitted) if isinstance(s.body, Echo1)]
    echo2s = [s for s in sends(emitted) if isinstance(s.body, Echo2)]
    assert len(echo1s) == 1 and len(echo2s) == 1


def test_unsilence_catches_up():
    registry = make_registry(4)
    g = GbcInstance(ADDR, 2, PARAMS, registry, silenced=True)
    block = make_block()
    assert sends(g.on_propose(1, block)) == []
    out = sends(g.unsilence())
    assert len(out) == 1 and isinstance(out[0].body, Echo1)


def test_verify_delivery_rejects_wrong_grade_and_subquorum():
    registry = make_registry(4)
    block = make_block()
    msg = gbc_message(ADDR, block.digest)
    sig1 = registry.combine(
        [registry.partial_sign(i, msg, 1) for i in (1, 2, 3)], 3
    )
    assert verify_delivery(GradedDelivery(block, 1, sig1), ADDR, PARAMS, registry)
    # grade-1 certificate presented as grade 2
    assert not verify_delivery(GradedDelivery(block, 2, sig1), ADDR, PARAMS, registry)
    # f+1 partials are not a quorum certificate
    small = registry.combine([registry.partial_sign(i, msg, 1) for i in (1, 2)], 2)
    assert not verify_delivery(GradedDelivery(block, 1, small), ADDR, PARAMS, registry)
    # certificate bound to a different instance address
    other_addr = InstanceAddr(2, Proto.GBC, 1)
    assert not verify_delivery(GradedDelivery(block, 1, sig1), other_addr, PARAMS, registry)
