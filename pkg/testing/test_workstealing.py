import random

import pytest

from traces import owned, common, query
from pcospec import FAIL, PASS, INCONCLUSIVE
from objectdefs import build_spec, execute_task
from simulator import Pause
from replica import Replica
from checker import run_checks
from workstealing import (WorkStealingApp, drive_workstealing, task_outcomes, check_work_stealing,
    submissions, SUBMIT, LOCAL, HARVEST)

class Outbox:

    def __init__(self):
        self.sent = []
        self.deliver = None

    def broadcast(self, sn, payload):
        self.sent.append((sn, payload))

def ws_scenario(make_scenario, seed, n=3, **fields):
    return make_scenario('wsd', n=n, seed=seed, workload={}, **fields)

def assert_clean(record, outcomes, spec):
    assert not record.truncated
    failed = [v.summary() for v in run_checks(record, spec) if v.status == FAIL]
    assert not failed
    v = check_work_stealing(outcomes, record)
    assert v.status == PASS, v.summary()
    return v

def test_app_starts_with_submission(wsd):
    replica = Replica(1, wsd, Outbox())
    app = WorkStealingApp(1, replica, ['t1', 't2'], random.Random(0))
    assert app.activated(SUBMIT)
    assert not app.activated(LOCAL)
    assert not app.activated(HARVEST)
    assert app.next_invocation(0) == owned(1, 'pushBottom', 't1')

def test_local_execution_publishes(wsd):
    replica = Replica(1, wsd, Outbox())
    app = WorkStealingApp(1, replica, [], random.Random(0))
    replica.obj_state = wsd.step(wsd.initial_state, owned(1, 'pushBottom', 't1'))
    pop = app.next_invocation(0)
    assert pop == owned(1, 'popBottom')
    app.on_return(pop, 't1')
    replica.obj_state = wsd.step(replica.obj_state, pop)
    assert app.next_invocation(1) is None
    assert app.published == {'t1': [execute_task('t1')]}

def test_thief_adds_result(wsd):
    replica = Replica(1, wsd, Outbox())
    app = WorkStealingApp(1, replica, [], random.Random(0))
    replica.obj_state = wsd.step(wsd.initial_state, owned(2, 'pushBottom', 'u1'))
    op = app.next_invocation(0)
    assert op == query('getTop', 2)
    app.on_return(op, 'u1')
    assert app.next_invocation(1) == common('addResult', 'u1', execute_task('u1'))

def test_execution_delay_pauses(wsd):
    replica = Replica(1, wsd, Outbox())
    app = WorkStealingApp(1, replica, [], random.Random(0), exec_delay=5)
    replica.obj_state = wsd.step(wsd.initial_state, owned(2, 'pushBottom', 'u1'))
    op = app.next_invocation(0)
    app.on_return(op, 'u1')
    pause = app.next_invocation(1)
    assert isinstance(pause, Pause) and pause.until == 6
    assert isinstance(app.next_invocation(3), Pause)
    assert app.next_invocation(6).name == 'addResult'

def test_relaxed_monitor_keeps_submitting(wsd):
    replica = Replica(1, wsd, Outbox())
    app = WorkStealingApp(1, replica, ['t2'], random.Random(0), relaxed=True, exec_delay=5)
    replica.obj_state = wsd.step(wsd.initial_state, owned(1, 'pushBottom', 't1'))
    app.turn = 1
    pop = app.next_invocation(0)
    assert pop == owned(1, 'popBottom')
    app.on_return(pop, 't1')
    replica.obj_state = wsd.step(replica.obj_state, pop)
    assert app.next_invocation(1) == owned(1, 'pushBottom', 't2')
    assert app.parked is not None

def test_submissions_default_to_object_tasks(make_scenario):
    scenario = make_scenario('wsd', n=2, params={'tasks': {'1': ['a'], '2': ['b', 'c']}})
    assert submissions(scenario) == {1: ['a'], 2: ['b', 'c']}
    scenario['workstealing'] = {'submit': {'2': ['b']}}
    assert submissions(scenario) == {2: ['b']}
    scenario = make_scenario('wsd', n=2)
    assert submissions(scenario) == {1: ['t1.1', 't1.2', 't1.3'], 2: ['t2.1', 't2.2', 't2.3']}

@pytest.mark.parametrize('seed', range(50))
def test_no_faults(make_scenario, seed):
    scenario = ws_scenario(make_scenario, seed)
    spec = build_spec('wsd', 3)
    (record, outcomes) = drive_workstealing(scenario, spec)
    v = assert_clean(record, outcomes, spec)
    assert v.trials == len(spec.tasks) == 9
    assert all(len(out.published) == 1 for out in outcomes.values())

@pytest.mark.parametrize('seed', range(50))
def test_thief_crash(make_scenario, seed):
    rng = random.Random(seed)
    crash = {'process': rng.randint(1, 3), 'after_events': rng.randint(5, 40)}
    scenario = ws_scenario(make_scenario, seed, t=1, faults={'crashes': [crash]})
    spec = build_spec('wsd', 3)
    (record, outcomes) = drive_workstealing(scenario, spec)
    assert_clean(record, outcomes, spec)

@pytest.mark.parametrize('seed', range(50))
def test_byzantine_forged_result(make_scenario, seed):
    forged = common('addResult', 't1.1', 'bogus').to_json()
    faults = {'byzantine': {'4': {'strategy': 'sequence', 'ops': [forged]}}}
    scenario = ws_scenario(make_scenario, seed, n=4, t=1, fault_model='byzantine', faults=faults)
    spec = build_spec('wsd', 4)
    (record, outcomes) = drive_workstealing(scenario, spec)
    assert_clean(record, outcomes, spec)
    assert outcomes['t1.1'].accepted_result == execute_task('t1.1')

@pytest.mark.parametrize('seed', range(20))
def test_relaxed_monitor(make_scenario, seed):
    scenario = ws_scenario(make_scenario, seed, workstealing={'relaxed': True, 'exec_delay': 15})
    spec = build_spec('wsd', 3)
    (record, outcomes) = drive_workstealing(scenario, spec)
    assert_clean(record, outcomes, spec)

def test_double_publish_is_caught(make_scenario):
    (record, outcomes) = drive_workstealing(ws_scenario(make_scenario, 0), build_spec('wsd', 3))
    out = outcomes['t1.1']
    out.published.append(out.published[0])
    v = check_work_stealing(outcomes, record)
    assert (v.status, v.clause) == (FAIL, 'result not published exactly once')

def test_invalid_result_is_caught(make_scenario):
    (record, outcomes) = drive_workstealing(ws_scenario(make_scenario, 0), build_spec('wsd', 3))
    outcomes['t2.1'].accepted_result = 'bogus'
    v = check_work_stealing(outcomes, record)
    assert (v.status, v.clause) == (FAIL, 'invalid result published')

def test_outcomes_from_log(make_scenario):
    (record, outcomes) = drive_workstealing(ws_scenario(make_scenario, 1), build_spec('wsd', 3))
    again = task_outcomes(record)
    assert {t: o.to_json() for (t, o) in again.items()} == {t: o.to_json() for (t, o) in outcomes.items()}

def test_nothing_submitted_is_inconclusive(make_scenario):
    scenario = ws_scenario(make_scenario, 0, workstealing={'submit': {}})
    (record, outcomes) = drive_workstealing(scenario, build_spec('wsd', 3))
    assert outcomes == {}
    v = check_work_stealing(outcomes, record)
    assert v.status == INCONCLUSIVE

TEN_TASKS = {'1': ['t{}'.format(k) for k in range(1, 11)]}

def one_submitter(make_scenario, seed, faults):
    rng = random.Random(seed)
    if faults == 'crash':
        crash = {'process': rng.choice([2, 3, 4]), 'after_events': rng.randint(5, 60)}
        return make_scenario('wsd', n=4, t=1, seed=seed, workload={}, params={'tasks': TEN_TASKS},
            faults={'crashes': [crash]})
    if faults == 'byzantine':
        forged = [common('addResult', 't{}'.format(rng.randint(1, 10)), 'bogus').to_json() for _ in range(3)]
        return make_scenario('wsd', n=4, t=1, seed=seed, workload={}, params={'tasks': TEN_TASKS},
            fault_model='byzantine', faults={'byzantine': {'4': {'strategy': 'sequence', 'ops': forged}}})
    return make_scenario('wsd', n=4, seed=seed, workload={}, params={'tasks': TEN_TASKS})

@pytest.mark.parametrize('faults', ['none', 'crash', 'byzantine'])
@pytest.mark.parametrize('seed', range(50))
def test_ten_tasks_at_one_process(make_scenario, seed, faults):
    scenario = one_submitter(make_scenario, seed, faults)
    spec = build_spec('wsd', 4, {'tasks': TEN_TASKS})
    (record, outcomes) = drive_workstealing(scenario, spec)
    v = assert_clean(record, outcomes, spec)
    assert v.trials == 10
    for out in outcomes.values():
        assert out.accepted_result == execute_task(out.task)
