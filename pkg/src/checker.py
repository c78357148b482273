# checker.py
"""
offline verification of an execution record

histories are rebuilt from invocation events, corrected for crashed and
byzantine processes, turned into one serialization per non-byzantine
observer, and replayed against the object specification
"""
import logging
from collections import Counter
from dataclasses import dataclass, field

from traces import Operation, Trace, QUERY
from pcospec import Verdict, PASS, FAIL, INCONCLUSIVE, MASKED, canonical, value_to_json, is_masked
from simulator import fairness_audit

log = logging.getLogger(__name__)

class HistoryError(Exception):
    pass

AUTHORIZATION = 'process-authorization'
LEGALITY = 'update-legality'
VALIDITY = 'output-query-validity'

@dataclass
class Invocation:
    """
    value None means the invocation never returned (or was never observable)
    """
    process: int
    op: Operation
    value: object = None
    sn: int = None
    returned: bool = False

    def key(self):
        return (self.process, self.op.sort_key())

    def masked(self):
        return Invocation(self.process, self.op, MASKED.to_json(), self.sn, self.returned)

    def to_json(self):
        d = {'process': self.process, 'op': self.op.to_json()}
        if self.sn is not None:
            d['sn'] = self.sn
        if self.value is not None:
            d['value'] = self.value
        return d

@dataclass
class History:
    local: dict = field(default_factory=dict)
    opaque: set = field(default_factory=set)

    def updates(self, pid):
        return [e for e in self.local.get(pid, []) if e.op.kind != QUERY]

def extract_history(record):
    history = History(local={i: [] for i in record.non_byzantine()}, opaque=set(record.byzantine))
    open_call = {}
    for e in record.events:
        pid = e.get('process')
        if pid not in history.local:
            continue
        if e['type'] == 'invoke':
            inv = Invocation(pid, Operation.from_json(e['op']))
            history.local[pid].append(inv)
            open_call[pid] = inv
        elif e['type'] == 'broadcast':
            open_call[pid].sn = e['sn']
        elif e['type'] == 'return':
            inv = open_call.pop(pid)
            inv.value = e['value']
            inv.returned = True
        elif e['type'] == 'abort':
            # refused invocations never take effect
            open_call.pop(pid)
            history.local[pid].pop()
    return history

def processed_by(record, pid):
    return [e for e in record.events if e['type'] == 'process' and e['process'] == pid]

def successful_updates(record):
    """ (sender, sn) -> op json for updates processed by at least one correct process """
    done = {}
    for pid in record.correct():
        for e in processed_by(record, pid):
            done.setdefault((e['sender'], e['sn']), e['op'])
    return done

def crash_correct(record, history):
    successful = successful_updates(record)
    local = {}
    for (pid, entries) in history.local.items():
        entries = list(entries)
        if pid in record.crashed:
            failed = [k for (k, inv) in enumerate(entries)
                if inv.op.kind != QUERY and (pid, inv.sn) not in successful]
            if len(failed) > 1:
                raise HistoryError('p{0} has {1} unsuccessful updates, at most the last may be.'.format(pid, len(failed)))
            if failed:
                if failed[0] != len(entries) - 1:
                    raise HistoryError('p{} has an unsuccessful update that is not its last invocation.'.format(pid))
                log.debug('dropping unsuccessful last update %s of crashed p%d', entries[-1].op, pid)
                entries.pop()
        local[pid] = entries
    return History(local, set(history.opaque))

def mock_history(record, history):
    successful = successful_updates(record)
    local = {pid: list(entries) for (pid, entries) in history.local.items()}
    for b in sorted(history.opaque):
        mine = sorted((sn, op) for ((sender, sn), op) in successful.items() if sender == b)
        local[b] = [Invocation(b, Operation.from_json(op), None, sn) for (sn, op) in mine]
    return History(local, set())

def corrected_history(record):
    return mock_history(record, crash_correct(record, extract_history(record)))

def perceived_history(history, i):
    perceived = {}
    for (pid, entries) in history.local.items():
        if pid == i:
            perceived[pid] = list(entries)
        else:
            perceived[pid] = [inv.masked() for inv in entries if inv.op.kind != QUERY]
    return History(perceived, set())

def reference_order(record):
    """ processing order at the first correct process """
    correct = record.correct()
    if not correct:
        return []
    return [(e['sender'], e['sn']) for e in processed_by(record, correct[0])]

def build_serialization(record, history, i):
    if i in record.byzantine:
        raise HistoryError('No serialization is built for byzantine p{}.'.format(i))
    own_updates = {inv.sn: inv for inv in history.updates(i)}
    updates = {}
    for (pid, entries) in history.local.items():
        for inv in entries:
            if inv.op.kind != QUERY:
                updates[(pid, inv.sn)] = inv

    serialization = []
    seen = set()
    open_query = None
    for e in record.events:
        if e.get('process') != i:
            continue
        if e['type'] == 'invoke' and e['op']['kind'] == QUERY:
            open_query = e
        elif e['type'] == 'return' and open_query is not None:
            serialization.append(Invocation(i, Operation.from_json(e['op']), e['value'], returned=True))
            open_query = None
        elif e['type'] == 'process':
            key = (e['sender'], e['sn'])
            seen.add(key)
            if e['sender'] == i:
                inv = own_updates.get(e['sn'], Invocation(i, Operation.from_json(e['op']), sn=e['sn']))
                serialization.append(inv)
            else:
                inv = updates.get(key) or Invocation(e['sender'], Operation.from_json(e['op']), sn=e['sn'])
                serialization.append(inv.masked())

    # updates this process never processed, in an order a correct process used
    if i in record.crashed:
        order = reference_order(record)
        tail = [k for k in order if k not in seen and k in updates]
        tail += sorted(k for k in updates if k not in seen and k not in tail)
        for key in tail:
            inv = updates[key]
            serialization.append(inv if key[0] == i else inv.masked())
    return serialization

def _same_value(observed, expected):
    return canonical(observed) == canonical(value_to_json(expected))

def check_pco_legal(serialization, spec, observer=None):
    name = 'pco-legal' if observer is None else 'pco-legal[p{}]'.format(observer)
    state = spec.initial_state
    for (k, inv) in enumerate(serialization):
        op = inv.op
        allowed = spec.alphabet.contains(op) if op.kind == QUERY else spec.alphabet.authorized(op, inv.process)
        if not allowed:
            return Verdict(name, FAIL, trials=k, clause=AUTHORIZATION, witness={'index': k, 'event': inv.to_json()})
        if op.kind == QUERY:
            expected = spec.query_eval(state, op)
        else:
            expected = spec.output_eval(op, state)
        if inv.value is not None and not is_masked(inv.value) and not _same_value(inv.value, expected):
            return Verdict(name, FAIL, trials=k, clause=VALIDITY,
                witness={'index': k, 'event': inv.to_json(), 'expected': value_to_json(expected)})
        if op.kind != QUERY:
            state = spec.step(state, op)
            if state is None:
                return Verdict(name, FAIL, trials=k, clause=LEGALITY, witness={'index': k, 'event': inv.to_json()})
    return Verdict(name, PASS, trials=len(serialization))

def check_serialization_complete(serialization, perceived, i):
    expected = Counter(inv.key() for entries in perceived.local.values() for inv in entries)
    got = Counter(inv.key() for inv in serialization)
    name = 'serialization-complete[p{}]'.format(i)
    if expected != got:
        missing = list((expected - got).elements())
        extra = list((got - expected).elements())
        return Verdict(name, FAIL, clause='invocation sets differ',
            detail='{0} missing, {1} extra'.format(len(missing), len(extra)),
            witness={'missing': [list(k) for k in missing[:5]], 'extra': [list(k) for k in extra[:5]]})
    return Verdict(name, PASS, trials=len(serialization))

def replay(spec, record, pid):
    state = spec.initial_state
    trace = Trace(spec.n)
    for e in processed_by(record, pid):
        op = Operation.from_json(e['op'])
        state = spec.step(state, op)
        if state is None:
            return None, trace
        trace = trace.concat(op)
    return state, trace

def check_convergence(record, spec):
    if record.truncated:
        return Verdict('convergence', INCONCLUSIVE, detail='run did not reach quiescence')
    correct = record.correct()
    finals = {}
    for pid in correct:
        state, trace = replay(spec, record, pid)
        if state is None:
            return Verdict('convergence', FAIL, clause='processing log hits an undefined step', witness={'process': pid})
        stored = record.final(pid)
        if Trace.from_json(spec.n, stored['trace']) != trace or canonical(stored['state']) != canonical(spec.state_to_json(state)):
            return Verdict('convergence', FAIL, clause='final state differs from processing log', witness={'process': pid})
        finals[pid] = (state, trace)
    for (a, b) in zip(correct, correct[1:]):
        (sa, ta), (sb, tb) = finals[a], finals[b]
        if ta != tb:
            return Verdict('convergence', FAIL, clause='traces differ',
                witness={'processes': [a, b], 'traces': [ta.to_json(), tb.to_json()]})
        if canonical(spec.state_to_json(sa)) != canonical(spec.state_to_json(sb)):
            return Verdict('convergence', FAIL, clause='states differ', witness={'processes': [a, b]})
        for q in spec.all_queries():
            if canonical(value_to_json(spec.query_eval(sa, q))) != canonical(value_to_json(spec.query_eval(sb, q))):
                return Verdict('convergence', FAIL, clause='query results differ',
                    witness={'processes': [a, b], 'query': q.to_json()})
    return Verdict('convergence', PASS, trials=len(correct))

def check_pipeline_order(record):
    stuck = 0
    for i in record.non_byzantine():
        last = {}
        for e in processed_by(record, i):
            expected = last.get(e['sender'], 0) + 1
            if e['sn'] != expected:
                return Verdict('pipeline-order', FAIL, clause='out-of-order processing',
                    witness={'observer': i, 'sender': e['sender'], 'sn': e['sn'], 'expected': expected})
            last[e['sender']] = e['sn']
        stuck += len(record.final(i).get('stuck', []))
    detail = '{} stuck messages left pending'.format(stuck) if stuck else ''
    return Verdict('pipeline-order', PASS, detail=detail)

def check_termination(record):
    if record.truncated:
        return Verdict('termination', INCONCLUSIVE, detail='run did not reach quiescence')
    for pid in record.correct():
        pending = record.final(pid).get('pending_invocation')
        if pending is not None:
            return Verdict('termination', FAIL, clause='invocation never returned',
                witness={'process': pid, 'op': pending})
    return Verdict('termination', PASS)

def check_observer(record, spec, history, i):
    serialization = build_serialization(record, history, i)
    verdicts = [check_pco_legal(serialization, spec, observer=i)]
    complete = check_serialization_complete(serialization, perceived_history(history, i), i)
    if record.truncated and not complete.passed:
        complete = Verdict(complete.property, INCONCLUSIVE, detail='run did not reach quiescence')
    verdicts.append(complete)
    return verdicts

def run_checks(record, spec):
    verdicts = [record.integrity(), fairness_audit(record), check_termination(record),
        check_convergence(record, spec), check_pipeline_order(record)]
    try:
        history = corrected_history(record)
    except HistoryError as e:
        status = INCONCLUSIVE if record.truncated else FAIL
        verdicts.append(Verdict('history', status, clause='crash correction', detail=str(e)))
        return verdicts
    for i in record.non_byzantine():
        verdicts += check_observer(record, spec, history, i)
    for v in verdicts:
        if v.status in (FAIL, INCONCLUSIVE):
            log.warning('%s', v.summary())
    return verdicts
