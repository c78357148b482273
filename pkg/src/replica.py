# replica.py
"""
generic replica for a process-commutative object

queries read the local state; an update is checked locally, broadcast with
the next sequence number, and returns once the replica has processed it.
delivered updates wait in per-sender buffers until they are authorized for
their sender, next in that sender's sequence, and legal on the local state.
"""
import json
import logging
from dataclasses import dataclass

from traces import AlphabetError, Operation, Trace, QUERY
from pcospec import canonical, value_to_json

log = logging.getLogger(__name__)

class Abort(Exception):
    pass

class Busy(Exception):
    pass

AUTHORIZATION = 'authorization'
FIFO = 'fifo'
LEGALITY = 'legality'

def encode_apply(op):
    return canonical({'apply': op.to_json()})

def decode_apply(payload):
    d = json.loads(payload)
    if not isinstance(d, dict) or 'apply' not in d:
        raise AlphabetError('Payload is not an APPLY message.')
    return Operation.from_json(d['apply'])

@dataclass
class PendingUpdate:
    op: Operation
    sn: int
    processed: bool = False
    pre_state: object = None

class Replica:

    def __init__(self, pid, spec, endpoint, emit=None):
        self.id = pid
        self.spec = spec
        self.endpoint = endpoint
        self.emit = emit or (lambda event: None)

        self.seq = Trace(spec.n)
        self.obj_state = spec.initial_state
        self.sn = 0
        self.del_count = {j: 0 for j in spec.alphabet.processes()}
        self.pending = {j: {} for j in spec.alphabet.processes()}
        self.inflight = None

        if endpoint is not None:
            endpoint.deliver = self.on_r_delivered

    @property
    def ready_to_complete(self):
        return self.inflight is not None and self.inflight.processed

    def invoke_query(self, q):
        if q.kind != QUERY or not self.spec.alphabet.contains(q):
            raise AlphabetError('Unknown query {}.'.format(q))
        value = self.spec.query_eval(self.obj_state, q)
        self.emit({'type': 'invoke', 'process': self.id, 'op': q.to_json()})
        self.emit({'type': 'return', 'process': self.id, 'op': q.to_json(), 'value': value_to_json(value)})
        return value

    def begin_update(self, up):
        if self.inflight is not None:
            raise Busy('p{0} still waits for update sn={1}.'.format(self.id, self.inflight.sn))
        self.emit({'type': 'invoke', 'process': self.id, 'op': up.to_json()})

        if not self.spec.alphabet.authorized(up, self.id):
            reason = AUTHORIZATION
        elif self.spec.step(self.obj_state, up) is None:
            reason = LEGALITY
        else:
            reason = None
        if reason is not None:
            self.emit({'type': 'abort', 'process': self.id, 'op': up.to_json(), 'reason': reason})
            raise Abort('{0} refused at p{1} ({2}).'.format(up, self.id, reason))

        self.sn += 1
        token = PendingUpdate(up, self.sn)
        self.inflight = token
        self.emit({'type': 'broadcast', 'process': self.id, 'sn': self.sn, 'op': up.to_json()})
        self.endpoint.broadcast(self.sn, encode_apply(up))
        return token

    def on_r_delivered(self, sender, sn, payload):
        try:
            op = decode_apply(payload)
        except (ValueError, AlphabetError) as e:
            log.warning('p%d dropped undecodable payload (%d, %d): %s', self.id, sender, sn, e)
            return
        buf = self.pending[sender]
        if sn <= self.del_count[sender] or sn in buf:
            log.debug('p%d ignores repeated delivery (%d, %d)', self.id, sender, sn)
            return
        buf[sn] = op
        self.drain_pending()

    def gate(self, sender, sn, op):
        """ first failing clause of the processing condition, or None """
        if not self.spec.alphabet.authorized(op, sender):
            return AUTHORIZATION
        if sn != self.del_count[sender] + 1:
            return FIFO
        if self.spec.step(self.obj_state, op) is None:
            return LEGALITY
        return None

    def drain_pending(self):
        processed = []
        progress = True
        while progress:
            progress = False
            for sender in sorted(self.pending):
                buf = self.pending[sender]
                sn = self.del_count[sender] + 1
                if sn not in buf or self.gate(sender, sn, buf[sn]) is not None:
                    continue
                op = buf.pop(sn)
                self.process(sender, sn, op)
                processed.append(op)
                progress = True
        return processed

    def process(self, sender, sn, op):
        pre = self.obj_state
        nxt = self.spec.step(pre, op)
        assert nxt is not None
        self.obj_state = nxt
        self.seq = self.seq.concat(op)
        self.del_count[sender] = sn
        log.debug('p%d processes %s from p%d sn=%d', self.id, op, sender, sn)
        self.emit({'type': 'process', 'process': self.id, 'sender': sender, 'sn': sn, 'op': op.to_json()})

        if sender == self.id and self.inflight is not None and self.inflight.sn == sn:
            self.inflight.pre_state = pre
            self.inflight.processed = True

    def complete_update(self, token):
        if not token.processed:
            raise Busy('Update sn={} has not been processed locally yet.'.format(token.sn))
        # outputs read the state just before the update itself
        value = self.spec.output_eval(token.op, token.pre_state)
        if self.inflight is token:
            self.inflight = None
        self.emit({'type': 'return', 'process': self.id, 'op': token.op.to_json(),
            'sn': token.sn, 'value': value_to_json(value)})
        return value

    def stuck_messages(self):
        stuck = []
        for sender in sorted(self.pending):
            for (sn, op) in sorted(self.pending[sender].items()):
                stuck.append({'sender': sender, 'sn': sn, 'op': op.to_json(),
                    'clause': self.gate(sender, sn, op) or LEGALITY})
        return stuck

    def final_json(self):
        return {'trace': self.seq.to_json(), 'state': self.spec.state_to_json(self.obj_state),
            'del': {str(j): k for (j, k) in self.del_count.items()}, 'stuck': self.stuck_messages()}
