import logging
import random

import pytest

from broadcast import (CrbEndpoint, BrbEndpoint, ProtocolMessage, SEND, RELAY, ECHO, READY)

class Network:
    """ in-memory message pool; crashed processes neither receive nor send """

    def __init__(self, n, t=None, seed=0):
        self.n = n
        self.queue = []
        self.crashed = set()
        self.rng = random.Random(seed)
        self.delivered = {i: [] for i in range(1, n + 1)}
        self.endpoints = {}
        for i in range(1, n + 1):
            deliver = (lambda i: lambda sender, sn, payload: self.delivered[i].append((sender, sn, payload)))(i)
            if t is None:
                self.endpoints[i] = CrbEndpoint(i, n, self.send, deliver)
            else:
                self.endpoints[i] = BrbEndpoint(i, n, t, self.send, deliver)

    def send(self, msg):
        if msg.src not in self.crashed:
            self.queue.append(msg)

    def run(self):
        while self.queue:
            msg = self.queue.pop(self.rng.randrange(len(self.queue)))
            if msg.dst not in self.crashed:
                self.endpoints[msg.dst].on_network_message(msg)

def test_crb_all_deliver_once():
    net = Network(4)
    net.endpoints[1].broadcast(1, 'm')
    net.run()
    assert all(net.delivered[i] == [(1, 1, 'm')] for i in range(1, 5))

def test_crb_relay_after_sender_crash():
    net = Network(4)
    net.endpoints[1].broadcast(1, 'm')
    net.queue = [m for m in net.queue if m.dst == 2]
    net.crashed.add(1)
    net.run()
    assert all(net.delivered[i] == [(1, 1, 'm')] for i in (2, 3, 4))

def test_crb_nothing_sent_nothing_delivered():
    net = Network(3)
    net.crashed.add(1)
    net.endpoints[1].broadcast(1, 'm')
    net.run()
    assert not any(net.delivered.values())

def test_crb_duplicate_relay_ignored():
    net = Network(3)
    ep = net.endpoints[2]
    ep.on_network_message(ProtocolMessage(RELAY, 1, 1, 'm', 3, 2))
    ep.on_network_message(ProtocolMessage(RELAY, 1, 1, 'm', 1, 2))
    assert net.delivered[2] == [(1, 1, 'm')]

@pytest.mark.parametrize('seed', range(10))
def test_brb_correct_sender(seed):
    net = Network(4, t=1, seed=seed)
    net.endpoints[2].broadcast(1, 'm')
    net.run()
    assert all(net.delivered[i] == [(2, 1, 'm')] for i in range(1, 5))

@pytest.mark.parametrize('seed', range(20))
def test_brb_equivocation_agreement(seed):
    net = Network(4, t=1, seed=seed)
    for dst in (1, 2):
        net.send(ProtocolMessage(SEND, 4, 1, 'm1', 4, dst))
    for dst in (3, 4):
        net.send(ProtocolMessage(SEND, 4, 1, 'm2', 4, dst))
    net.run()
    payloads = {p for i in (1, 2, 3) for (_, _, p) in net.delivered[i]}
    assert len(payloads) <= 1
    assert all(len(net.delivered[i]) <= 1 for i in (1, 2, 3))

def test_brb_partial_send_never_delivers():
    net = Network(4, t=1)
    net.send(ProtocolMessage(SEND, 4, 1, 'm', 4, 1))
    net.crashed.add(4)
    net.run()
    assert not any(net.delivered[i] for i in (1, 2, 3))

def test_brb_ready_amplification():
    sent = []
    ep = BrbEndpoint(1, 4, 1, sent.append)
    ep.on_network_message(ProtocolMessage(READY, 3, 1, 'm', 2, 1))
    assert not sent
    ep.on_network_message(ProtocolMessage(READY, 3, 1, 'm', 4, 1))
    assert {(m.phase, m.dst) for m in sent} == {(READY, d) for d in range(1, 5)}
    assert ep.delivered == set()

def test_brb_counts_distinct_sources():
    sent = []
    ep = BrbEndpoint(1, 4, 1, sent.append)
    for _ in range(3):
        ep.on_network_message(ProtocolMessage(ECHO, 2, 1, 'm', 3, 1))
    assert not sent
    assert ep.echo_quorum == 3
    ep.on_network_message(ProtocolMessage(ECHO, 2, 1, 'm', 2, 1))
    ep.on_network_message(ProtocolMessage(ECHO, 2, 1, 'm', 4, 1))
    assert [m.phase for m in sent] == [READY] * 4

def test_brb_send_must_come_from_sender():
    sent = []
    ep = BrbEndpoint(1, 4, 1, sent.append)
    ep.on_network_message(ProtocolMessage(SEND, 2, 1, 'm', 3, 1))
    assert not sent
    ep.on_network_message(ProtocolMessage(SEND, 2, 1, 'm', 2, 1))
    assert [m.phase for m in sent] == [ECHO] * 4

def test_malformed_messages_dropped(caplog):
    net = Network(4, t=1)
    ep = net.endpoints[1]
    with caplog.at_level(logging.WARNING):
        ep.on_network_message(ProtocolMessage(SEND, 9, 1, 'm', 9, 1))
        ep.on_network_message(ProtocolMessage('BOGUS', 2, 1, 'm', 2, 1))
        ep.on_network_message(ProtocolMessage(SEND, 2, 0, 'm', 2, 1))
        ep.on_network_message(ProtocolMessage(SEND, 2, 1, {'not': 'text'}, 2, 1))
    assert not net.queue
    assert len([r for r in caplog.records if 'malformed' in r.getMessage()]) == 4

def test_crb_rejects_brb_phases():
    net = Network(2)
    net.endpoints[1].on_network_message(ProtocolMessage(ECHO, 2, 1, 'm', 2, 1))
    assert not net.delivered[1]

def test_brb_needs_resilience():
    with pytest.raises(ValueError):
        BrbEndpoint(1, 3, 1, lambda msg: None)
