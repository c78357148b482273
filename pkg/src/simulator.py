# simulator.py
"""
deterministic discrete-event simulation of n replicas over an asynchronous
network: seeded message delays, crash points (including crashes in the middle
of a broadcast), byzantine adversaries, workload drivers, and the jsonl
execution record
"""
import hashlib
import heapq
import json
import logging
import random

from traces import Operation, QUERY
from pcospec import (Verdict, PASS, FAIL, INCONCLUSIVE, PROPOSE_ATTEMPTS,
    propose, canonical)
from broadcast import ProtocolMessage, SEND, make_endpoint
from replica import Replica, Abort
from objectdefs import build_spec

log = logging.getLogger(__name__)

QUIESCENT = 'quiescent'
TRUNCATED = 'truncated'

DEFAULT_DELAYS = (1, 10)

STRATEGIES = ('equivocate', 'skip_sn', 'forge_unauthorized', 'inject_illegal',
    'silent', 'duplicate', 'sequence')

def dumps(d):
    return json.dumps(d, sort_keys=True, separators=(',', ':'))

def process_rng(seed, pid):
    return random.Random('{0}:{1}'.format(seed, pid))

class Pause:
    """ returned by a driver that has nothing to invoke before simulated time `until` """

    def __init__(self, until):
        self.until = until

class WorkloadDriver:
    """
    feeds one process its invocations: either an explicit list of operations
    or a seeded generator of locally legal updates mixed with queries
    """

    def __init__(self, pid, replica, ops=None, generate=None, rng=None):
        self.id = pid
        self.replica = replica
        self.ops = list(ops or [])
        self.generate = generate
        self.rng = rng
        self.updates_issued = 0
        self.returns = []

    def generated_op(self):
        spec = self.replica.spec
        queries = spec.all_queries()
        if queries and self.rng.random() < self.generate.get('query_ratio', 0):
            return self.rng.choice(queries)
        op = None
        for _ in range(PROPOSE_ATTEMPTS):
            candidate = propose(spec, self.rng, self.replica.obj_state, owner=self.id)
            if candidate is None:
                continue
            op = candidate
            if spec.step(self.replica.obj_state, op) is not None:
                break
        self.updates_issued += 1
        if op is None:
            # nothing proposable for this process, spend the slot on a query
            return self.rng.choice(queries) if queries else None
        return op

    def next_invocation(self, now):
        if self.generate is not None:
            if self.updates_issued >= self.generate.get('updates', 0):
                return None
            return self.generated_op()
        if self.ops:
            return self.ops.pop(0)
        return None

    def on_return(self, op, value):
        self.returns.append((op, value))

    def on_abort(self, op):
        self.returns.append((op, None))

    def wants_wake(self):
        return False

class ExecutionRecord:
    """
    header (scenario), ordered events, footer (final replica states, status,
    fault sets, event count and digest)
    """

    def __init__(self, header, events, footer):
        self.header = header
        self.events = events
        self.footer = footer

    @staticmethod
    def digest(events):
        h = hashlib.sha256()
        for e in events:
            h.update(dumps(e).encode('utf-8'))
            h.update(b'\n')
        return h.hexdigest()

    @property
    def scenario(self):
        return self.header['scenario']

    @property
    def n(self):
        return self.scenario['n']

    @property
    def truncated(self):
        return self.footer.get('status') == TRUNCATED

    @property
    def crashed(self):
        return set(self.footer.get('crashed', []))

    @property
    def byzantine(self):
        return set(self.footer.get('byzantine', []))

    def non_byzantine(self):
        return [i for i in range(1, self.n + 1) if i not in self.byzantine]

    def correct(self):
        return [i for i in self.non_byzantine() if i not in self.crashed]

    def final(self, pid):
        return self.footer['processes'][str(pid)]

    def events_of(self, kind, process=None):
        return [e for e in self.events if e['type'] == kind and (process is None or e.get('process') == process)]

    def lines(self):
        yield dumps(self.header)
        for e in self.events:
            yield dumps(e)
        yield dumps(self.footer)

    def to_jsonl(self):
        return '\n'.join(self.lines()) + '\n'

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as fobj:
            fobj.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text):
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if len(rows) < 2 or rows[0].get('type') != 'header' or rows[-1].get('type') != 'footer':
            raise ValueError('Execution log needs a header and a footer line.')
        return cls(rows[0], rows[1:-1], rows[-1])

    @classmethod
    def read(cls, path):
        with open(path, 'r', encoding='utf-8') as fobj:
            return cls.from_jsonl(fobj.read())

    def integrity(self):
        if self.footer.get('count') != len(self.events):
            return Verdict('log-integrity', FAIL, clause='event count',
                detail='footer says {0}, log has {1}'.format(self.footer.get('count'), len(self.events)))
        if self.footer.get('sha256') != self.digest(self.events):
            return Verdict('log-integrity', FAIL, clause='digest mismatch')
        return Verdict('log-integrity', PASS, trials=len(self.events))

def _raw_payload(item):
    # strings go out verbatim, anything else is wrapped as an APPLY without parsing
    if isinstance(item, str):
        return item
    return canonical({'apply': item})

def adversary_emit(strategy, context):
    """
    raw protocol messages for one byzantine process; the source field is
    always the byzantine process itself
    """
    b = context['pid']
    everyone = list(range(1, context['n'] + 1))
    kind = strategy['strategy']
    out = []

    def send(sn, payload, recipients=everyone):
        for dst in recipients:
            out.append(ProtocolMessage(SEND, b, sn, payload, b, dst))

    if kind == 'equivocate':
        sn = strategy.get('sn', 1)
        parts = strategy.get('partition') or [everyone[:len(everyone) // 2], everyone[len(everyone) // 2:]]
        for (payload, recipients) in zip(strategy['payloads'], parts):
            send(sn, _raw_payload(payload), recipients)
    elif kind == 'skip_sn':
        (first, later) = strategy['ops'][:2]
        send(1, _raw_payload(first))
        send(2 + strategy.get('gap', 1), _raw_payload(later))
    elif kind in ('forge_unauthorized', 'inject_illegal'):
        send(strategy.get('sn', 1), _raw_payload(strategy['op']))
    elif kind == 'duplicate':
        for _ in range(strategy.get('copies', 2)):
            send(strategy.get('sn', 1), _raw_payload(strategy['op']))
    elif kind == 'sequence':
        for (k, item) in enumerate(strategy['ops'], start=strategy.get('start_sn', 1)):
            send(k, _raw_payload(item))
    return out

def fairness_audit(record):
    if record.truncated:
        return Verdict('fairness', INCONCLUSIVE, detail='run truncated by max_steps')
    outstanding = {}
    for e in record.events:
        if e['type'] in ('send', 'receive', 'drop'):
            key = (e['phase'], e['sender'], e['sn'], e['from'], e['to'], e['payload'])
            outstanding[key] = outstanding.get(key, 0) + (1 if e['type'] == 'send' else -1)
    missing = [k for (k, c) in outstanding.items() if c > 0 and k[4] not in record.crashed]
    if missing:
        (phase, sender, sn, src, dst, _) = missing[0]
        return Verdict('fairness', FAIL, clause='undelivered message',
            witness={'phase': phase, 'sender': sender, 'sn': sn, 'from': src, 'to': dst},
            detail='{} messages never delivered'.format(len(missing)))
    return Verdict('fairness', PASS)

class Simulator:

    def __init__(self, scenario, spec=None, driver_factory=None):
        self.scenario = scenario
        self.n = scenario['n']
        self.t = scenario.get('t', 0)
        self.seed = scenario.get('seed', 0)
        self.fault_model = scenario.get('fault_model', 'crash')
        self.max_steps = scenario.get('max_steps', 200000)
        self.delays = tuple(scenario.get('delays', DEFAULT_DELAYS))
        obj = scenario['object']
        self.spec = spec or build_spec(obj['name'], self.n, obj.get('params'))

        self.rng = process_rng(self.seed, 'net')
        self.queue = []
        self.counter = 0
        self.now = 0
        self.steps = 0
        self.events = []

        faults = scenario.get('faults', {})
        self.crash_points = {int(c['process']): c for c in faults.get('crashes', [])}
        self.strategies = {int(pid): s for (pid, s) in faults.get('byzantine', {}).items()}
        self.crashed = set()
        self.handled = {i: 0 for i in range(1, self.n + 1)}
        self.wake_pending = set()

        self.endpoints = {}
        self.replicas = {}
        self.drivers = {}
        for pid in range(1, self.n + 1):
            transport = self.make_transport(pid)
            if pid in self.strategies:
                if self.strategies[pid]['strategy'] != 'silent':
                    self.endpoints[pid] = make_endpoint(self.fault_model, pid, self.n, self.t, transport)
                continue
            endpoint = make_endpoint(self.fault_model, pid, self.n, self.t, transport)
            self.endpoints[pid] = endpoint
            self.replicas[pid] = Replica(pid, self.spec, endpoint, self.emit)
            factory = driver_factory or self.workload_driver
            self.drivers[pid] = factory(pid, self.replicas[pid])

    def workload_driver(self, pid, replica):
        workload = self.scenario.get('workload', {})
        if 'generate' in workload:
            return WorkloadDriver(pid, replica, generate=workload['generate'], rng=process_rng(self.seed, pid))
        ops = [Operation.from_json(d) for d in workload.get(str(pid), [])]
        return WorkloadDriver(pid, replica, ops=ops)

    def emit(self, event):
        e = {'time': self.now}
        e.update(event)
        self.events.append(e)

    def push(self, when, kind, data):
        self.counter += 1
        heapq.heappush(self.queue, (when, self.counter, kind, data))

    def make_transport(self, pid):
        return lambda msg: self.transmit(pid, msg)

    def transmit(self, pid, msg):
        if pid in self.crashed:
            return
        cut = self.crash_points.get(pid)
        if (cut is not None and 'broadcast_sn' in cut and msg.phase == SEND
                and msg.sender == pid and msg.sn == cut['broadcast_sn']
                and msg.dst not in cut.get('recipients', [])):
            self.emit(dict(type='lost', **msg.to_json()))
            return
        self.emit(dict(type='send', **msg.to_json()))
        self.push(self.now + self.rng.randint(*self.delays), 'message', msg)

    def crash(self, pid):
        if pid in self.crashed:
            return
        self.crashed.add(pid)
        log.info('p%d crashes at time %d', pid, self.now)
        self.emit({'type': 'crash', 'process': pid})

    def count_handled(self, pid):
        self.handled[pid] += 1
        cut = self.crash_points.get(pid)
        if cut is not None and cut.get('after_events') == self.handled[pid]:
            self.crash(pid)

    def schedule_wake(self, pid, delay=1):
        if pid in self.wake_pending:
            return
        self.wake_pending.add(pid)
        self.push(self.now + delay, 'wake', pid)

    def start(self):
        for (pid, cut) in sorted(self.crash_points.items()):
            if cut.get('after_events') == 0:
                self.crash(pid)
        for pid in sorted(self.drivers):
            self.schedule_wake(pid)
        for (pid, strategy) in sorted(self.strategies.items()):
            self.push(self.now + self.rng.randint(*self.delays), 'adversary', pid)

    def on_message(self, msg):
        pid = msg.dst
        if pid in self.crashed or pid not in self.endpoints:
            self.emit(dict(type='drop', **msg.to_json()))
            return
        self.emit(dict(type='receive', **msg.to_json()))
        self.endpoints[pid].on_network_message(msg)
        if pid in self.replicas:
            self.after_activity(pid)
            self.count_handled(pid)

    def after_activity(self, pid):
        replica = self.replicas[pid]
        driver = self.drivers[pid]
        if replica.ready_to_complete:
            token = replica.inflight
            value = replica.complete_update(token)
            driver.on_return(token.op, value)
            self.schedule_wake(pid)
        elif replica.inflight is None and driver.wants_wake():
            self.schedule_wake(pid)

    def on_wake(self, pid, timer=False):
        if not timer:
            self.wake_pending.discard(pid)
        if pid in self.crashed:
            return
        replica = self.replicas[pid]
        if replica.inflight is not None:
            return
        driver = self.drivers[pid]
        op = driver.next_invocation(self.now)
        if op is None:
            return
        if isinstance(op, Pause):
            self.push(max(op.until, self.now + 1), 'timer', pid)
            return
        self.count_handled(pid)
        if pid in self.crashed:
            return
        if op.kind == QUERY:
            driver.on_return(op, replica.invoke_query(op))
            self.schedule_wake(pid)
            return
        try:
            token = replica.begin_update(op)
        except Abort:
            driver.on_abort(op)
            self.schedule_wake(pid)
            return
        cut = self.crash_points.get(pid)
        if cut is not None and cut.get('broadcast_sn') == token.sn:
            self.crash(pid)

    def on_adversary(self, pid):
        context = {'pid': pid, 'n': self.n, 'spec': self.spec}
        for msg in adversary_emit(self.strategies[pid], context):
            self.emit(dict(type='send', **msg.to_json()))
            self.push(self.now + self.rng.randint(*self.delays), 'message', msg)

    def run(self):
        self.start()
        status = QUIESCENT
        while self.queue:
            if self.steps >= self.max_steps:
                status = TRUNCATED
                log.warning('run stopped after %d steps with %d queued events', self.steps, len(self.queue))
                break
            (when, _, kind, data) = heapq.heappop(self.queue)
            self.now = when
            self.steps += 1
            if kind == 'message':
                self.on_message(data)
            elif kind == 'wake':
                self.on_wake(data)
            elif kind == 'timer':
                self.on_wake(data, timer=True)
            elif kind == 'adversary':
                self.on_adversary(data)
        return self.record(status)

    def record(self, status):
        processes = {}
        for (pid, replica) in sorted(self.replicas.items()):
            final = replica.final_json()
            final['crashed'] = pid in self.crashed
            final['pending_invocation'] = replica.inflight.op.to_json() if replica.inflight else None
            processes[str(pid)] = final
        footer = {
            'type': 'footer',
            'status': status,
            'steps': self.steps,
            'crashed': sorted(self.crashed),
            'byzantine': sorted(self.strategies),
            'processes': processes,
            'count': len(self.events),
            'sha256': ExecutionRecord.digest(self.events)
        }
        header = {'type': 'header', 'scenario': self.scenario}
        log.info('run finished: %s after %d steps, %d events', status, self.steps, len(self.events))
        return ExecutionRecord(header, self.events, footer)

def run_scenario(scenario, spec=None, driver_factory=None):
    return Simulator(scenario, spec, driver_factory).run()
