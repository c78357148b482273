import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parents[1] / 'src'))

from objectdefs import build_spec

@pytest.fixture
def money():
    return build_spec('money', 3, {'init': {'1': 10, '2': 10, '3': 10}})

@pytest.fixture
def multiset():
    return build_spec('multiset', 2, {'universe': ['a', 'b'], 'ownership': {'a': 1, 'b': 2}})

@pytest.fixture
def tokenring():
    return build_spec('tokenring', 2)

@pytest.fixture
def wsd():
    return build_spec('wsd', 2, {'tasks': {'1': ['t1', 't2', 't3'], '2': ['u1']}})

@pytest.fixture
def make_scenario():
    def factory(name='money', n=4, **fields):
        scenario = {
            'n': n,
            't': 0,
            'fault_model': 'crash',
            'seed': 0,
            'max_steps': 200000,
            'delays': [1, 10],
            'object': {'name': name, 'params': fields.pop('params', {})},
            'workload': {'generate': {'updates': 5, 'query_ratio': 0.2}},
            'faults': {},
            'workstealing': {}
        }
        scenario.update(fields)
        return scenario
    return factory
