# utils.py
from pathlib import Path
import json
import logging

from traces import Operation, AlphabetError
from objectdefs import build_spec, object_type, InvalidObject
from simulator import STRATEGIES

log = logging.getLogger(__name__)

FAULT_MODELS = ('crash', 'byzantine')

class InvalidScenario(Exception):
    pass

def _is_int(x, low=None):
    return isinstance(x, int) and not isinstance(x, bool) and (low is None or x >= low)

def _pid(x, n):
    try:
        return 1 <= int(x) <= n
    except (TypeError, ValueError):
        return False

def _parses(opjs):
    try:
        Operation.from_json(opjs)
        return True
    except AlphabetError:
        return False

class ScenarioConfig:
    """
    Holds the settings for one simulated run:
    system size, fault bound and fault model
    object name and parameters
    seed, step bound and message delays
    workload
    crash points and byzantine strategies
    work-stealing options
    """

    DEFAULTS = {
        't': 0,
        'fault_model': 'crash',
        'seed': 0,
        'max_steps': 200000,
        'delays': [1, 10],
        'workload': {},
        'faults': {},
        'workstealing': {}
    }

    def __init__(self, candidates=None, seed=None):
        self.current = {}
        self.source = None
        if candidates is not None:
            self.apply(candidates, seed)

    @classmethod
    def from_file(cls, file, seed=None):
        config = cls()
        config.source = Path(file)
        config.apply(config.load_from_file(file), seed)
        return config

    def load_from_file(self, file):
        if not Path(file).is_file():
            raise InvalidScenario('Scenario file {} not found.'.format(file))
        try:
            with open(file, 'r') as fobj:
                j = json.load(fobj)
        except (OSError, ValueError) as e:
            raise InvalidScenario('Scenario file {0} unreadable: {1}'.format(file, e))
        if not isinstance(j, dict):
            raise InvalidScenario('Scenario file {} must hold a JSON object.'.format(file))
        return j

    def apply(self, candidates, seed=None):
        candidates = dict(candidates)
        if seed is not None:
            candidates['seed'] = seed
        (isvalid, validated) = self.validate(candidates)
        if not all(isvalid.values()):
            bad = sorted(k for (k, v) in isvalid.items() if not v)
            raise InvalidScenario('Invalid scenario field(s): {}.'.format(', '.join(bad)))
        self.current = validated
        log.info('scenario loaded: %s, n=%d, t=%d, %s model, seed %d', validated['object']['name'],
            validated['n'], validated['t'], validated['fault_model'], validated['seed'])
        return validated

    def validate(self, candidates):
        prefs = dict(self.DEFAULTS)
        prefs.update(candidates)
        isvalid = {}

        n = prefs.get('n')
        isvalid['n'] = _is_int(n, 1)
        if not isvalid['n']:
            n = 0

        isvalid['fault_model'] = prefs['fault_model'] in FAULT_MODELS
        byzantine = prefs['fault_model'] == 'byzantine'

        t = prefs['t']
        if byzantine:
            isvalid['t'] = _is_int(t, 0) and n > 3 * t
        else:
            isvalid['t'] = _is_int(t, 0) and t < max(n, 1)

        isvalid['seed'] = _is_int(prefs['seed'], 0)
        isvalid['max_steps'] = _is_int(prefs['max_steps'], 1)

        delays = prefs['delays']
        isvalid['delays'] = (isinstance(delays, list) and len(delays) == 2
            and all(_is_int(d, 1) for d in delays) and delays[0] <= delays[1])

        isvalid['object'] = self.validate_object(prefs.get('object'), n)
        if isvalid['object']:
            prefs['object'] = {'name': prefs['object']['name'], 'params': dict(prefs['object'].get('params', {}))}

        isvalid['workload'] = self.validate_workload(prefs['workload'], n)
        isvalid['faults'] = self.validate_faults(prefs['faults'], n, t if isvalid['t'] else 0, byzantine)

        ws = prefs['workstealing']
        isvalid['workstealing'] = isinstance(ws, dict) and (
            isinstance(ws.get('relaxed', False), bool)
            and _is_int(ws.get('exec_delay', 0), 0)
            and all(_pid(k, n) and isinstance(v, list) for (k, v) in ws.get('submit', {}).items()))

        return (isvalid, prefs)

    def validate_object(self, obj, n):
        if not isinstance(obj, dict) or not isinstance(obj.get('params', {}), dict):
            return False
        try:
            object_type(obj.get('name'))
            build_spec(obj['name'], n or None, obj.get('params'))
        except InvalidObject as e:
            log.warning('object rejected: %s', e)
            return False
        return True

    def validate_workload(self, workload, n):
        if not isinstance(workload, dict):
            return False
        if 'generate' in workload:
            g = workload['generate']
            return (isinstance(g, dict) and _is_int(g.get('updates', 0), 0)
                and isinstance(g.get('query_ratio', 0), (int, float)) and 0 <= g.get('query_ratio', 0) < 1)
        for (pid, ops) in workload.items():
            if not _pid(pid, n) or not isinstance(ops, list):
                return False
            if not all(_parses(op) for op in ops):
                return False
        return True

    def validate_faults(self, faults, n, t, byzantine):
        if not isinstance(faults, dict):
            return False
        crashes = faults.get('crashes', [])
        strategies = faults.get('byzantine', {})
        if not isinstance(crashes, list) or not isinstance(strategies, dict):
            return False
        if crashes and byzantine:
            return False
        if strategies and not byzantine:
            return False
        if len(crashes) > t or len(strategies) > t:
            return False

        crashed = set()
        for c in crashes:
            if not isinstance(c, dict) or not _pid(c.get('process'), n):
                return False
            if 'after_events' in c:
                if not _is_int(c['after_events'], 0):
                    return False
            elif 'broadcast_sn' in c:
                if not _is_int(c['broadcast_sn'], 1):
                    return False
                if not all(_pid(r, n) for r in c.get('recipients', [])):
                    return False
            else:
                return False
            crashed.add(int(c['process']))
        if len(crashed) != len(crashes):
            return False

        required = {'equivocate': 'payloads', 'skip_sn': 'ops', 'forge_unauthorized': 'op',
            'inject_illegal': 'op', 'duplicate': 'op', 'sequence': 'ops'}
        for (pid, s) in strategies.items():
            if not _pid(pid, n) or not isinstance(s, dict) or s.get('strategy') not in STRATEGIES:
                return False
            field = required.get(s['strategy'])
            if field is not None and field not in s:
                return False
            if s['strategy'] == 'equivocate' and len(s['payloads']) < 2:
                return False
            if s['strategy'] == 'skip_sn' and len(s['ops']) < 2:
                return False
        return True
