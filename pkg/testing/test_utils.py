import pytest

from utils import ScenarioConfig, InvalidScenario
from locations import SCENARIOS

def invalid_fields(scenario):
    (isvalid, _) = ScenarioConfig().validate(scenario)
    return sorted(k for (k, v) in isvalid.items() if not v)

def test_defaults_fill_in():
    config = ScenarioConfig({'n': 2, 'object': {'name': 'tokenring'}})
    assert config.current['t'] == 0
    assert config.current['delays'] == [1, 10]
    assert config.current['object'] == {'name': 'tokenring', 'params': {}}

def test_shipped_scenarios_load():
    for path in sorted(SCENARIOS.glob('*.json')):
        if path.stem == 'byzantine_n3t1':
            with pytest.raises(InvalidScenario):
                ScenarioConfig.from_file(path)
        else:
            assert ScenarioConfig.from_file(path).current['n'] >= 2

def test_seed_override(make_scenario):
    assert ScenarioConfig(make_scenario(), seed=42).current['seed'] == 42

def test_error_lists_fields(make_scenario):
    with pytest.raises(InvalidScenario, match='delays, max_steps'):
        ScenarioConfig(make_scenario(delays=[0, 3], max_steps=0))

def test_resilience_bounds(make_scenario):
    assert invalid_fields(make_scenario(n=3, t=1, fault_model='byzantine')) == ['t']
    assert invalid_fields(make_scenario(n=4, t=1, fault_model='byzantine')) == []
    assert invalid_fields(make_scenario(n=2, t=2)) == ['t']
    assert invalid_fields(make_scenario(fault_model='omission')) == ['fault_model']

def test_fault_declarations(make_scenario):
    crash = {'process': 1, 'after_events': 3}
    assert invalid_fields(make_scenario(t=1, faults={'crashes': [crash]})) == []
    # more crashes than the bound
    assert invalid_fields(make_scenario(t=0, faults={'crashes': [crash]})) == ['faults']
    # crash points belong to the crash model
    assert invalid_fields(make_scenario(t=1, fault_model='byzantine', faults={'crashes': [crash]})) == ['faults']
    assert invalid_fields(make_scenario(t=2, faults={'crashes': [crash, crash]})) == ['faults']
    assert invalid_fields(make_scenario(t=1, faults={'crashes': [{'process': 9, 'after_events': 1}]})) == ['faults']
    assert invalid_fields(make_scenario(t=1, faults={'crashes': [{'process': 1}]})) == ['faults']

def test_byzantine_strategies(make_scenario):
    def strategies(s):
        return make_scenario(t=1, fault_model='byzantine', faults={'byzantine': {'4': s}})
    assert invalid_fields(strategies({'strategy': 'silent'})) == []
    assert invalid_fields(strategies({'strategy': 'teleport'})) == ['faults']
    assert invalid_fields(strategies({'strategy': 'equivocate', 'payloads': ['x']})) == ['faults']
    assert invalid_fields(strategies({'strategy': 'forge_unauthorized'})) == ['faults']
    assert invalid_fields(make_scenario(t=1, faults={'byzantine': {'4': {'strategy': 'silent'}}})) == ['faults']

def test_workloads(make_scenario):
    assert invalid_fields(make_scenario(workload={'1': [{'kind': 'query', 'name': 'balance', 'args': [1]}]})) == []
    assert invalid_fields(make_scenario(workload={'7': []})) == ['workload']
    assert invalid_fields(make_scenario(workload={'1': [{'kind': 'owned', 'name': 'transfer'}]})) == ['workload']
    assert invalid_fields(make_scenario(workload={'generate': {'updates': 3, 'query_ratio': 1.5}})) == ['workload']

def test_object_checked_at_load(make_scenario):
    assert invalid_fields(make_scenario('tokenring', n=3)) == ['object']
    assert invalid_fields(make_scenario(params={'init': {'1': -5}})) == ['object']
    assert invalid_fields(make_scenario('wsd', workstealing={'exec_delay': -1})) == ['workstealing']
