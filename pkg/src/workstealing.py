# workstealing.py
"""
distributed work stealing on top of the work-stealing deque object

every process runs four blocks under one monitor: task submission, local
execution (pop the bottom task, run it, publish), stealing (run the top task
of some other non-empty deque and add its result), and harvesting (remove a
pending local task that already has a result, publish that result)
"""
import logging
from dataclasses import dataclass, field

from traces import owned, common, query
from pcospec import BOTTOM, Verdict, PASS, FAIL, INCONCLUSIVE
from objectdefs import execute_task, default_validity, default_tasks
from simulator import Simulator, Pause, process_rng

log = logging.getLogger(__name__)

ABORTED = object()

SUBMIT = 'submit'
LOCAL = 'local'
STEAL = 'steal'
HARVEST = 'harvest'

HANDLERS = (SUBMIT, LOCAL, STEAL, HARVEST)

# blocks that keep running while a relaxed monitor has a task executing
RELAXED_ALLOWED = (SUBMIT, HARVEST)

class WorkStealingApp:
    """
    driver for one process; handler bodies are generators that yield
    operations to invoke (or a Pause while a task executes) and receive
    the invocation results back
    """

    def __init__(self, pid, replica, submit, rng, relaxed=False, exec_delay=0):
        self.id = pid
        self.replica = replica
        self.spec = replica.spec
        self.to_submit = list(submit)
        self.rng = rng
        self.relaxed = relaxed
        self.exec_delay = exec_delay
        self.now = 0

        self.turn = 0
        self.current = None
        self.current_name = None
        self.reply = None
        self.wait_until = None
        self.parked = None
        self.parked_until = None
        self.published = {}

    # guards read the local replica without recording an invocation
    def peek(self, name, *args):
        return self.spec.query_eval(self.replica.obj_state, query(name, *args))

    def victims(self):
        """ also skips deques whose top task already has a result; harvest takes those """
        out = []
        for j in self.spec.alphabet.processes():
            if j == self.id:
                continue
            top = self.peek('getTop', j)
            if top != BOTTOM and not self.peek('getResults', top):
                out.append(j)
        return out

    def harvestable(self):
        return [t for t in self.peek('getPending', self.id) if self.peek('getResults', t)]

    def activated(self, name):
        if name == SUBMIT:
            return bool(self.to_submit)
        if name == LOCAL:
            return self.peek('getBottom', self.id) != BOTTOM
        if name == STEAL:
            return self.peek('getBottom', self.id) == BOTTOM and bool(self.victims())
        return bool(self.harvestable())

    def body(self, name):
        return getattr(self, 'run_' + name)()

    def run_submit(self):
        t = self.to_submit.pop(0)
        yield owned(self.id, 'pushBottom', t)

    def run_local(self):
        t = yield owned(self.id, 'popBottom')
        if t is ABORTED or t == BOTTOM:
            return
        r = yield from self.execute(t)
        self.publish(t, r)

    def run_steal(self):
        j = self.rng.choice(self.victims())
        t = yield query('getTop', j)
        if t == BOTTOM:
            return
        r = yield from self.execute(t)
        yield common('addResult', t, r)

    def run_harvest(self):
        t = self.harvestable()[0]
        yield owned(self.id, 'remove', t)
        results = yield query('getResults', t)
        if results:
            self.publish(t, self.rng.choice(sorted(results)))

    def execute(self, t):
        if self.exec_delay:
            yield Pause(self.now + self.exec_delay)
        r = execute_task(t)
        self.replica.emit({'type': 'execute', 'process': self.id, 'task': t, 'result': r})
        return r

    def publish(self, t, r):
        self.published.setdefault(t, []).append(r)
        log.debug('p%d publishes %s for %s', self.id, r, t)
        self.replica.emit({'type': 'publish', 'process': self.id, 'task': t, 'result': r})

    def pick_handler(self):
        allowed = RELAXED_ALLOWED if self.parked is not None else HANDLERS
        for k in range(len(HANDLERS)):
            name = HANDLERS[(self.turn + k) % len(HANDLERS)]
            if name in allowed and self.activated(name):
                self.turn = (self.turn + k + 1) % len(HANDLERS)
                return name
        return None

    def next_invocation(self, now):
        self.now = now
        while True:
            if self.wait_until is not None:
                if now < self.wait_until:
                    return Pause(self.wait_until)
                self.wait_until = None
            if self.current is None:
                if self.parked is not None and now >= self.parked_until:
                    (self.current, self.current_name) = self.parked
                    self.parked = None
                else:
                    name = self.pick_handler()
                    if name is None:
                        return Pause(self.parked_until) if self.parked is not None else None
                    self.current = self.body(name)
                    self.current_name = name
                    self.reply = None
            try:
                item = self.current.send(self.reply)
            except StopIteration:
                self.current = None
                self.reply = None
                continue
            self.reply = None
            if isinstance(item, Pause):
                if self.relaxed:
                    self.parked = (self.current, self.current_name)
                    self.parked_until = item.until
                    self.current = None
                else:
                    self.wait_until = item.until
                continue
            return item

    def on_return(self, op, value):
        self.reply = value

    def on_abort(self, op):
        self.reply = ABORTED

    def wants_wake(self):
        return True

@dataclass
class TaskOutcome:
    task: str
    owner: int
    executed_by: set = field(default_factory=set)
    published: list = field(default_factory=list)
    accepted_result: object = None

    def to_json(self):
        return {'task': self.task, 'owner': self.owner, 'executed_by': sorted(self.executed_by),
            'published': [list(p) for p in self.published], 'accepted_result': self.accepted_result}

def submissions(scenario):
    ws = scenario.get('workstealing', {})
    if 'submit' in ws:
        return {int(pid): list(ts) for (pid, ts) in ws['submit'].items()}
    return object_tasks(scenario)

def object_tasks(scenario):
    """ task lists the deque object is built from """
    tasks = scenario['object'].get('params', {}).get('tasks') or default_tasks(scenario['n'])
    return {int(pid): list(ts) for (pid, ts) in tasks.items()}

def drive_workstealing(scenario, spec=None):
    ws = scenario.get('workstealing', {})
    seed = scenario.get('seed', 0)
    submit = submissions(scenario)

    def factory(pid, replica):
        return WorkStealingApp(pid, replica, submit.get(pid, []), process_rng(seed, 'ws:{}'.format(pid)),
            relaxed=ws.get('relaxed', False), exec_delay=ws.get('exec_delay', 0))

    record = Simulator(scenario, spec, driver_factory=factory).run()
    return record, task_outcomes(record)

def task_outcomes(record):
    outcomes = {}
    for (pid, tasks) in submissions(record.scenario).items():
        for t in tasks:
            outcomes[t] = TaskOutcome(t, pid)
    for e in record.events:
        t = e.get('task')
        if t not in outcomes:
            continue
        if e['type'] == 'execute':
            outcomes[t].executed_by.add(e['process'])
        elif e['type'] == 'publish' and e['process'] == outcomes[t].owner:
            outcomes[t].published.append((e['result'], e['time']))
            outcomes[t].accepted_result = e['result']
    return outcomes

def check_work_stealing(outcomes, record, validity=default_validity):
    if record.truncated:
        return Verdict('work-stealing', INCONCLUSIVE, detail='run did not reach quiescence')
    correct = set(record.correct())
    checked = 0
    for (t, out) in sorted(outcomes.items()):
        if out.owner not in correct:
            continue
        checked += 1
        if not out.executed_by - record.byzantine:
            return Verdict('work-stealing', FAIL, clause='task never executed', witness=out.to_json())
        if len(out.published) != 1:
            return Verdict('work-stealing', FAIL, clause='result not published exactly once', witness=out.to_json())
        if not validity(t, out.accepted_result):
            return Verdict('work-stealing', FAIL, clause='invalid result published', witness=out.to_json())
        deque = record.final(out.owner)['state']['deques'][str(out.owner)]
        if t in deque:
            return Verdict('work-stealing', FAIL, clause='task left in owner deque', witness=out.to_json())
    if not checked and any(ts for (pid, ts) in object_tasks(record.scenario).items() if pid in correct):
        return Verdict('work-stealing', INCONCLUSIVE, detail='no task of a correct process was submitted')
    return Verdict('work-stealing', PASS, trials=checked)
