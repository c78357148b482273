# broadcast.py
"""
multi-shot reliable broadcast over the simulated network

CrbEndpoint relays every key on first receipt (crash model).
BrbEndpoint runs the send/echo/ready quorum protocol (byzantine model, n > 3t).
neither layer orders keys per sender; the replica's sequence gate does that.
"""
import logging
import math
from dataclasses import dataclass

log = logging.getLogger(__name__)

SEND = 'SEND'
RELAY = 'RELAY'
ECHO = 'ECHO'
READY = 'READY'

CRB_PHASES = (SEND, RELAY)
BRB_PHASES = (SEND, ECHO, READY)

@dataclass(frozen=True)
class ProtocolMessage:
    """
    one point-to-point message; src is stamped by the network, never by the sender
    """
    phase: str
    sender: int
    sn: int
    payload: str
    src: int
    dst: int

    @property
    def key(self):
        return (self.sender, self.sn)

    def to_json(self):
        return {'phase': self.phase, 'sender': self.sender, 'sn': self.sn,
            'from': self.src, 'to': self.dst, 'payload': self.payload}

    @classmethod
    def from_json(cls, d):
        return cls(d['phase'], d['sender'], d['sn'], d['payload'], d['from'], d['to'])

def _is_index(x):
    return isinstance(x, int) and not isinstance(x, bool)

class BroadcastEndpoint:
    """
    per-process protocol state; transport(msg) queues a message on the network,
    deliver(sender, sn, payload) hands a delivered key to the replica
    """
    PHASES = ()

    def __init__(self, pid, n, transport, deliver=None):
        self.id = pid
        self.n = n
        self.transport = transport
        self.deliver = deliver
        self.delivered = set()

    def processes(self):
        return range(1, self.n + 1)

    def send_all(self, phase, sender, sn, payload, include_self=True):
        for dst in self.processes():
            if dst != self.id or include_self:
                self.transport(ProtocolMessage(phase, sender, sn, payload, self.id, dst))

    def well_formed(self, msg):
        ok = (msg.phase in self.PHASES
            and _is_index(msg.sender) and 1 <= msg.sender <= self.n
            and _is_index(msg.sn) and msg.sn >= 1
            and isinstance(msg.payload, str))
        if not ok:
            log.warning('p%d dropped malformed %s from p%s (sender=%r, sn=%r)',
                self.id, msg.phase, msg.src, msg.sender, msg.sn)
        return ok

    def raise_delivery(self, sender, sn, payload):
        if (sender, sn) in self.delivered:
            return
        self.delivered.add((sender, sn))
        log.debug('p%d r-delivers (%d, %d)', self.id, sender, sn)
        if self.deliver is not None:
            self.deliver(sender, sn, payload)

    def broadcast(self, sn, payload):
        raise NotImplementedError

    def on_network_message(self, msg):
        raise NotImplementedError

class CrbEndpoint(BroadcastEndpoint):
    PHASES = CRB_PHASES

    def broadcast(self, sn, payload):
        self.send_all(SEND, self.id, sn, payload)

    def on_network_message(self, msg):
        if not self.well_formed(msg):
            return
        if msg.key in self.delivered:
            return
        # relay before delivering so a crash right after delivery cannot lose the key
        self.send_all(RELAY, msg.sender, msg.sn, msg.payload, include_self=False)
        self.raise_delivery(msg.sender, msg.sn, msg.payload)

class _KeyState:

    def __init__(self):
        self.echoed = False
        self.readied = False
        self.echoes = {}
        self.readies = {}

class BrbEndpoint(BroadcastEndpoint):
    PHASES = BRB_PHASES

    def __init__(self, pid, n, t, transport, deliver=None):
        super().__init__(pid, n, transport, deliver)
        if n <= 3 * t:
            raise ValueError('Byzantine broadcast needs n > 3t (n={0}, t={1}).'.format(n, t))
        self.t = t
        self.keys = {}

    @property
    def echo_quorum(self):
        return math.ceil((self.n + self.t + 1) / 2)

    @property
    def ready_amplify(self):
        return self.t + 1

    @property
    def delivery_quorum(self):
        return 2 * self.t + 1

    def state_for(self, key):
        if key not in self.keys:
            self.keys[key] = _KeyState()
        return self.keys[key]

    def broadcast(self, sn, payload):
        self.send_all(SEND, self.id, sn, payload)

    def send_ready(self, ks, msg):
        ks.readied = True
        self.send_all(READY, msg.sender, msg.sn, msg.payload)

    def on_network_message(self, msg):
        if not self.well_formed(msg):
            return
        ks = self.state_for(msg.key)

        if msg.phase == SEND:
            # only the sender itself may open its own instance
            if msg.src != msg.sender or ks.echoed:
                return
            ks.echoed = True
            self.send_all(ECHO, msg.sender, msg.sn, msg.payload)

        elif msg.phase == ECHO:
            ks.echoes.setdefault(msg.payload, set()).add(msg.src)
            if not ks.readied and len(ks.echoes[msg.payload]) >= self.echo_quorum:
                self.send_ready(ks, msg)

        elif msg.phase == READY:
            ks.readies.setdefault(msg.payload, set()).add(msg.src)
            count = len(ks.readies[msg.payload])
            if not ks.readied and count >= self.ready_amplify:
                self.send_ready(ks, msg)
            if count >= self.delivery_quorum:
                self.raise_delivery(msg.sender, msg.sn, msg.payload)

def make_endpoint(fault_model, pid, n, t, transport, deliver=None):
    if fault_model == 'byzantine':
        return BrbEndpoint(pid, n, t, transport, deliver)
    return CrbEndpoint(pid, n, transport, deliver)
