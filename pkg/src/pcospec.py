# pcospec.py
"""
state-machine form of a PCO specification, plus randomized validators for
the three closure properties of its trace language and brute-force oracles
"""
import json
import logging
import random
from dataclasses import dataclass, field

from traces import (COMMON, OWNED, Trace,
    enumerate_representatives)

log = logging.getLogger(__name__)

PASS = 'pass'
FAIL = 'fail'
INCONCLUSIVE = 'inconclusive'
SKIPPED = 'skipped'

DEFAULT_TRIALS = 1000
PROPOSE_ATTEMPTS = 25

class SamplerExhausted(Exception):
    pass

class Marker:
    """
    non-object values: silent update output, masked foreign output, empty read
    """

    def __init__(self, tag):
        self.tag = tag

    def to_json(self):
        return {'marker': self.tag}

    def __eq__(self, other):
        return isinstance(other, Marker) and other.tag == self.tag

    def __hash__(self):
        return hash(('marker', self.tag))

    def __repr__(self):
        return '<{}>'.format(self.tag)

SILENT = Marker('silent')
MASKED = Marker('masked')
BOTTOM = Marker('bottom')

def value_to_json(value):
    if isinstance(value, Marker):
        return value.to_json()
    if isinstance(value, dict):
        return {str(k): value_to_json(v) for (k, v) in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted((value_to_json(v) for v in value), key=lambda v: json.dumps(v, sort_keys=True))
    if isinstance(value, (list, tuple)):
        return [value_to_json(v) for v in value]
    return value

def canonical(value):
    return json.dumps(value_to_json(value), sort_keys=True, separators=(',', ':'))

def is_masked(value):
    return value == MASKED or value == MASKED.to_json()

@dataclass
class Verdict:
    """
    structured result of one property check
    """
    property: str
    status: str
    trials: int = 0
    seed: int = None
    witness: object = None
    clause: str = None
    detail: str = ''

    @property
    def passed(self):
        return self.status != FAIL

    def to_json(self):
        d = {'property': self.property, 'status': self.status, 'trials': self.trials, 'seed': self.seed}
        if self.clause is not None:
            d['clause'] = self.clause
        if self.witness is not None:
            d['witness'] = value_to_json(self.witness)
        if self.detail:
            d['detail'] = self.detail
        return d

    @classmethod
    def from_json(cls, d):
        return cls(d['property'], d['status'], d.get('trials', 0), d.get('seed'),
            d.get('witness'), d.get('clause'), d.get('detail', ''))

    def summary(self):
        text = '[{0}] {1}'.format(self.status.upper(), self.property)
        if self.trials:
            text += ' ({} trials'.format(self.trials)
            text += ', seed {})'.format(self.seed) if self.seed is not None else ')'
        if self.clause:
            text += ': {}'.format(self.clause)
        if self.detail:
            text += ' - {}'.format(self.detail)
        return text

@dataclass
class PcoSpec:
    """
    alphabet, initial state, partial transition function (None = undefined),
    query and output evaluators; the closed-form trace predicate and the op
    proposers are optional and only used by oracles and samplers
    """
    name: str
    alphabet: object
    initial_state: object
    transition: object = field(repr=False)
    query_eval: object = field(repr=False)
    output_eval: object = field(repr=False)
    trace_predicate: object = field(default=None, repr=False)
    propose_common: object = field(default=None, repr=False)
    propose_owned: object = field(default=None, repr=False)
    queries: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.alphabet.n

    def step(self, state, op):
        if state is None:
            return None
        return self.transition(state, op)

    def all_queries(self):
        return list(self.queries()) if self.queries else []

    def state_to_json(self, state):
        if state is None:
            return None
        return state.to_json() if hasattr(state, 'to_json') else value_to_json(state)

def step_word(spec, word):
    state = spec.initial_state
    for op in word:
        state = spec.step(state, op)
        if state is None:
            return None
    return state

def propose(spec, rng, state, kind=None, owner=None, exclude_owner=None):
    sources = []
    if kind in (None, COMMON) and spec.propose_common is not None:
        sources.append(COMMON)
    if kind in (None, OWNED) and spec.propose_owned is not None:
        for pid in spec.alphabet.processes():
            if pid != exclude_owner and owner in (None, pid):
                sources.append(pid)
    if not sources:
        return None
    source = rng.choice(sources)
    if source == COMMON:
        return spec.propose_common(rng, state)
    return spec.propose_owned(rng, state, source)

def _extend_legally(spec, rng, state, max_len, exclude_owner=None):
    word = []
    for _ in range(max_len):
        for _ in range(PROPOSE_ATTEMPTS):
            op = propose(spec, rng, state, exclude_owner=exclude_owner)
            if op is None:
                continue
            nxt = spec.step(state, op)
            if nxt is not None:
                word.append(op)
                state = nxt
                break
        else:
            # dead end, keep the shorter word
            break
    return tuple(word), state

def sample_legal_word(spec, rng, max_len):
    if spec.propose_common is None and spec.propose_owned is None:
        raise SamplerExhausted('Spec "{}" ships no operation proposers.'.format(spec.name))
    word, _ = _extend_legally(spec, rng, spec.initial_state, max_len)
    return word

def oracle_word_reachable(spec, t, limit):
    for w in enumerate_representatives(t, limit):
        if step_word(spec, w) is not None:
            return True
    return False

def check_representative_independence(spec, t, limit):
    reached = {}
    for w in enumerate_representatives(t, limit):
        s = step_word(spec, w)
        if s is not None:
            reached[w] = s
    states = {canonical(spec.state_to_json(s)) for s in reached.values()}
    if len(states) > 1:
        return Verdict('representative-independence', FAIL,
            witness={'trace': t.to_json(), 'states': sorted(states)})
    return Verdict('representative-independence', PASS, trials=len(reached))

def check_initial_emptiness(spec):
    if spec.initial_state is None:
        return Verdict('initial-emptiness', FAIL, clause='no initial state')
    if spec.trace_predicate is not None and not spec.trace_predicate(Trace(spec.n)):
        return Verdict('initial-emptiness', FAIL, clause='empty trace outside L',
            witness={'state': spec.state_to_json(spec.initial_state)})
    return Verdict('initial-emptiness', PASS)

def _word_json(word):
    return [op.to_json() for op in word]

def check_cstar_closure(spec, rng_seed, trials=DEFAULT_TRIALS, max_len=8):
    if spec.propose_common is None and spec.propose_owned is None:
        raise SamplerExhausted('Spec "{}" ships no operation proposers.'.format(spec.name))
    rng = random.Random(rng_seed)
    vacuous = 0
    for k in range(trials):
        word, state = _extend_legally(spec, rng, spec.initial_state, rng.randint(0, max_len))
        c = propose(spec, rng, state, kind=COMMON)
        if c is None:
            vacuous += 1
            continue
        if spec.step(state, c) is None:
            log.info('C*-closure violated for %s at trial %d', spec.name, k)
            return Verdict('cstar-closure', FAIL, trials=k + 1, seed=rng_seed,
                clause='common update refused',
                witness={'word': _word_json(word), 'op': c.to_json()})
    detail = '{} vacuous trials (no common updates)'.format(vacuous) if vacuous else ''
    return Verdict('cstar-closure', PASS, trials=trials, seed=rng_seed, detail=detail)

def check_idiamond_closure(spec, rng_seed, trials=DEFAULT_TRIALS, max_len=8, max_z=5):
    if spec.propose_owned is None:
        raise SamplerExhausted('Spec "{}" ships no owned-operation proposer.'.format(spec.name))
    rng = random.Random(rng_seed)
    vacuous = 0
    for k in range(trials):
        v, v_state = _extend_legally(spec, rng, spec.initial_state, rng.randint(0, max_len))
        pid = rng.choice(list(spec.alphabet.processes()))
        op_i = None
        for _ in range(PROPOSE_ATTEMPTS):
            candidate = propose(spec, rng, v_state, kind=OWNED, owner=pid)
            if candidate is not None and spec.step(v_state, candidate) is not None:
                op_i = candidate
                break
        if op_i is None:
            vacuous += 1
            continue
        z, z_state = _extend_legally(spec, rng, v_state, rng.randint(1, max_z), exclude_owner=pid)
        if spec.step(z_state, op_i) is None:
            log.info('I-diamond closure violated for %s at trial %d', spec.name, k)
            return Verdict('idiamond-closure', FAIL, trials=k + 1, seed=rng_seed,
                clause='owned update disabled by independent updates',
                witness={'v': _word_json(v), 'op': op_i.to_json(), 'z': _word_json(z)})
    detail = '{} vacuous trials (no legal owned update)'.format(vacuous) if vacuous else ''
    return Verdict('idiamond-closure', PASS, trials=trials, seed=rng_seed, detail=detail)

def equivalence_vs_predicate(spec, rng_seed, max_len=6, trials=2000):
    if spec.trace_predicate is None:
        return Verdict('predicate-equivalence', SKIPPED, detail='no closed-form predicate')
    rng = random.Random(rng_seed)
    if not spec.trace_predicate(Trace(spec.n)):
        return Verdict('predicate-equivalence', FAIL, seed=rng_seed, clause='empty trace rejected')
    for k in range(trials):
        word = []
        cursor = spec.initial_state
        for _ in range(rng.randint(0, max_len)):
            op = propose(spec, rng, cursor)
            if op is None:
                break
            word.append(op)
            nxt = spec.step(cursor, op)
            # keep proposing from the last defined state once the word turns illegal
            cursor = nxt if nxt is not None else cursor
        state = spec.initial_state
        t = Trace(spec.n)
        all_prefixes = True
        for (j, op) in enumerate(word):
            state = spec.step(state, op)
            t = t.concat(op)
            all_prefixes = all_prefixes and spec.trace_predicate(t)
            if (state is not None) != all_prefixes:
                return Verdict('predicate-equivalence', FAIL, trials=k + 1, seed=rng_seed,
                    clause='incremental state and trace predicate disagree',
                    witness={'word': _word_json(word[:j + 1]), 'step_defined': state is not None})
    return Verdict('predicate-equivalence', PASS, trials=trials, seed=rng_seed)

def validate_spec(spec, seed=0, trials=DEFAULT_TRIALS, equivalence_trials=2000):
    verdicts = [check_initial_emptiness(spec)]
    try:
        verdicts.append(check_cstar_closure(spec, seed, trials))
    except SamplerExhausted as e:
        verdicts.append(Verdict('cstar-closure', INCONCLUSIVE, detail=str(e)))
    try:
        verdicts.append(check_idiamond_closure(spec, seed, trials))
    except SamplerExhausted as e:
        verdicts.append(Verdict('idiamond-closure', INCONCLUSIVE, detail=str(e)))
    verdicts.append(equivalence_vs_predicate(spec, seed, trials=equivalence_trials))
    return verdicts
