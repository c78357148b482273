# objectdefs.py
"""
the shipped process-commutative objects: multiset with deletion rights,
shared petri net, money transfer, multiple idempotent work-stealing deque,
and the two-process token ring

each factory returns a PcoSpec with an incremental state, the closed-form
trace predicate and random operation proposers for the validators
"""
import logging
import zlib
from dataclasses import dataclass

from traces import Alphabet, common, owned, query, count_matching, OWNED, COMMON
from pcospec import PcoSpec, SILENT, BOTTOM

log = logging.getLogger(__name__)

class InvalidObject(Exception):
    pass

def _is_amount(x):
    return isinstance(x, int) and not isinstance(x, bool) and x >= 0

def _is_pid(i, n):
    return isinstance(i, int) and not isinstance(i, bool) and 1 <= i <= n

def _pid_keys(mapping, n, what):
    out = {}
    for (k, v) in mapping.items():
        try:
            pid = int(k)
        except (TypeError, ValueError):
            raise InvalidObject('{0}: "{1}" is not a process index.'.format(what, k))
        if not 1 <= pid <= n:
            raise InvalidObject('{0}: process {1} outside 1..{2}.'.format(what, pid, n))
        out[pid] = v
    return out

# ---------------------------------------------------------------- multiset

@dataclass(frozen=True)
class MultisetState:
    multiplicity: tuple
    ownership: tuple

    def count(self, e):
        return dict(self.multiplicity)[e]

    def to_json(self):
        return {'multiplicity': dict(self.multiplicity)}

def make_multiset(n, element_universe, ownership):
    universe = tuple(sorted(set(element_universe)))
    owner_of = {}
    for (e, pid) in ownership.items():
        if not _is_pid(pid, n):
            raise InvalidObject('Element "{0}" owned by invalid process {1!r}.'.format(e, pid))
        owner_of[e] = pid
    if set(owner_of) != set(universe):
        raise InvalidObject('Ownership must partition the element universe (missing {0}, extra {1}).'.format(
            sorted(set(universe) - set(owner_of)), sorted(set(owner_of) - set(universe))))

    def accepts(op):
        if op.name == 'get_set':
            return op.args == ()
        if len(op.args) != 1 or op.args[0] not in owner_of:
            return False
        if op.name == 'delete':
            return op.owner == owner_of[op.args[0]]
        return True

    alphabet = Alphabet(n, common={'add'}, owned={'delete'}, queries={'get_set'}, accepts=accepts)

    def transition(s, op):
        counts = dict(s.multiplicity)
        e = op.args[0] if op.args else None
        if e not in counts:
            return None
        if op.name == 'add':
            counts[e] += 1
        elif op.name == 'delete':
            if counts[e] < 1:
                return None
            counts[e] -= 1
        else:
            return None
        return MultisetState(tuple(sorted(counts.items())), s.ownership)

    def query_eval(s, q):
        return dict(s.multiplicity)

    def output_eval(op, s):
        return SILENT

    def predicate(t):
        for e in universe:
            adds = count_matching(t, lambda op: op.name == 'add' and op.args == (e,))
            deletes = count_matching(t, lambda op: op.name == 'delete' and op.args == (e,))
            if adds - deletes < 0:
                return False
        return True

    def propose_common(rng, s):
        return common('add', rng.choice(universe))

    def propose_owned(rng, s, pid):
        mine = [e for e in universe if owner_of[e] == pid]
        if not mine:
            return None
        return owned(pid, 'delete', rng.choice(mine))

    initial = MultisetState(tuple((e, 0) for e in universe), tuple(sorted(owner_of.items())))
    return PcoSpec('multiset', alphabet, initial, transition, query_eval, output_eval,
        trace_predicate=predicate, propose_common=propose_common, propose_owned=propose_owned,
        queries=lambda: [query('get_set')])

# ---------------------------------------------------------------- petri net

@dataclass
class PetriNetDef:
    """
    places, transitions, weighted arcs, initial marking, and the partition
    of transitions into common ones and per-process ones
    """
    places: list
    transitions: list
    arcs: list
    initial_marking: dict
    common: list
    owned: dict

    @classmethod
    def from_json(cls, d, n):
        try:
            arcs = [(a[0], a[1], a[2] if len(a) > 2 else 1) for a in d['arcs']]
            return cls(list(d['places']), list(d['transitions']), arcs,
                dict(d.get('initial_marking', {})), list(d.get('common', [])),
                {pid: list(ts) for (pid, ts) in _pid_keys(d.get('owned', {}), n, 'petri partition').items()})
        except (KeyError, TypeError, IndexError) as e:
            raise InvalidObject('Malformed petri net definition ({}).'.format(e))

    def inputs(self, t):
        return {src: w for (src, dst, w) in self.arcs if dst == t}

    def outputs(self, t):
        return {dst: w for (src, dst, w) in self.arcs if src == t}

    def conflict_classes(self):
        # union-find over transitions sharing an input place
        parent = {t: t for t in self.transitions}

        def find(t):
            while parent[t] != t:
                parent[t] = parent[parent[t]]
                t = parent[t]
            return t

        by_place = {}
        for t in self.transitions:
            for p in self.inputs(t):
                by_place.setdefault(p, []).append(t)
        for ts in by_place.values():
            for t in ts[1:]:
                parent[find(t)] = find(ts[0])

        classes = {}
        for t in self.transitions:
            classes.setdefault(find(t), set()).add(t)
        return list(classes.values())

    def validate(self, n):
        places, transitions = set(self.places), set(self.transitions)
        if places & transitions:
            raise InvalidObject('Places and transitions overlap: {}.'.format(sorted(places & transitions)))
        for (src, dst, w) in self.arcs:
            if not ((src in places and dst in transitions) or (src in transitions and dst in places)):
                raise InvalidObject('Arc {0}->{1} must join a place and a transition.'.format(src, dst))
            if not (isinstance(w, int) and w > 0):
                raise InvalidObject('Arc {0}->{1} has non-positive weight {2!r}.'.format(src, dst, w))
        for (p, m) in self.initial_marking.items():
            if p not in places or not _is_amount(m):
                raise InvalidObject('Bad initial marking {0}={1!r}.'.format(p, m))

        owner_of = {t: None for t in self.common}
        for (pid, ts) in self.owned.items():
            if not _is_pid(pid, n):
                raise InvalidObject('Transition set for process {0} outside 1..{1}.'.format(pid, n))
            for t in ts:
                if t in owner_of:
                    raise InvalidObject('Transition "{}" assigned twice.'.format(t))
                owner_of[t] = pid
        if set(owner_of) != transitions:
            raise InvalidObject('Partition does not cover the transitions exactly (missing {}).'.format(
                sorted(transitions - set(owner_of))))
        for t in self.common:
            if self.inputs(t):
                raise InvalidObject('Common transition "{}" has an input place.'.format(t))
        for cls in self.conflict_classes():
            owners = {owner_of[t] for t in cls}
            if len(owners) > 1:
                raise InvalidObject('Two conflicting transitions belong to different sets: {}.'.format(sorted(cls)))
        return owner_of

DEFAULT_NET = {
    'places': ['src1', 'src2', 'shared', 'done'],
    'transitions': ['gen', 'a', 'b', 'c', 'd'],
    'arcs': [
        ['gen', 'src1', 1], ['gen', 'src2', 1],
        ['src1', 'a', 1], ['a', 'shared', 1],
        ['src2', 'b', 1], ['b', 'shared', 2],
        ['shared', 'c', 2], ['c', 'done', 1],
        ['done', 'd', 1], ['d', 'src1', 1]
    ],
    'initial_marking': {'src1': 1, 'src2': 0, 'shared': 0, 'done': 0},
    'common': ['gen'],
    'owned': {'1': ['a'], '2': ['b'], '3': ['c', 'd']}
}

@dataclass(frozen=True)
class PetriState:
    marking: tuple

    def to_json(self):
        return {'marking': dict(self.marking)}

def make_petri(n, net):
    owner_of = net.validate(n)
    places = tuple(sorted(net.places))
    pre = {t: net.inputs(t) for t in net.transitions}
    post = {t: net.outputs(t) for t in net.transitions}

    def accepts(op):
        if op.name == 'marking':
            return op.args == ()
        if len(op.args) != 1 or op.args[0] not in owner_of:
            return False
        return owner_of[op.args[0]] == (op.owner if op.kind == OWNED else None)

    alphabet = Alphabet(n, common={'fire'}, owned={'fire_owned'}, queries={'marking'}, accepts=accepts)

    def transition(s, op):
        t = op.args[0] if op.args else None
        if t not in pre:
            return None
        marking = dict(s.marking)
        for (p, w) in pre[t].items():
            if marking[p] < w:
                return None
            marking[p] -= w
        for (p, w) in post[t].items():
            marking[p] += w
        return PetriState(tuple(sorted(marking.items())))

    def query_eval(s, q):
        return dict(s.marking)

    def output_eval(op, s):
        return SILENT

    def predicate(v):
        for p in places:
            total = net.initial_marking.get(p, 0)
            for t in net.transitions:
                fired = count_matching(v, lambda op: op.args == (t,))
                total += fired * (post[t].get(p, 0) - pre[t].get(p, 0))
            if total < 0:
                return False
        return True

    def propose_common(rng, s):
        if not net.common:
            return None
        return fire_op(rng.choice(sorted(net.common)), None)

    def propose_owned(rng, s, pid):
        mine = sorted(net.owned.get(pid, []))
        if not mine:
            return None
        return fire_op(rng.choice(mine), pid)

    initial = PetriState(tuple((p, net.initial_marking.get(p, 0)) for p in places))
    spec = PcoSpec('petrinet', alphabet, initial, transition, query_eval, output_eval,
        trace_predicate=predicate, propose_common=propose_common, propose_owned=propose_owned,
        queries=lambda: [query('marking')])
    spec.fire = lambda t: fire_op(t, owner_of.get(t))
    return spec

def fire_op(t, owner):
    # common and owned schemas need distinct names for the alphabet partition
    if owner is None:
        return common('fire', t)
    return owned(owner, 'fire_owned', t)

# ---------------------------------------------------------------- money

MUTATIONS = (None, 'refusing-mint', 'capped-credit')

@dataclass(frozen=True)
class MoneyState:
    accounts: tuple

    def balance(self, i):
        return self.accounts[i - 1]

    def to_json(self):
        return {'accounts': {str(i + 1): a for (i, a) in enumerate(self.accounts)}}

def make_money(n, init, mutation=None, cap=None, validate=True):
    init = _pid_keys(init, n, 'money init') if isinstance(init, dict) else dict(enumerate(init, start=1))
    accounts = tuple(init.get(i, 0) for i in range(1, n + 1))
    if validate:
        for (i, a) in enumerate(accounts, start=1):
            if not _is_amount(a):
                raise InvalidObject('init_{0} must be a non-negative integer, got {1!r}.'.format(i, a))
    if mutation not in MUTATIONS:
        raise InvalidObject('Unknown money mutation "{}".'.format(mutation))
    if cap is None:
        cap = sum(accounts)

    def accepts(op):
        if op.name == 'mint':
            return len(op.args) == 2 and _is_pid(op.args[0], n) and _is_amount(op.args[1])
        if op.name == 'transfer':
            return len(op.args) == 2 and _is_pid(op.args[0], n) and _is_amount(op.args[1])
        if op.name == 'balance':
            return len(op.args) == 1 and _is_pid(op.args[0], n)
        return False

    alphabet = Alphabet(n, common={'mint'}, owned={'transfer'}, queries={'balance'}, accepts=accepts)

    def transition(s, op):
        acc = list(s.accounts)
        if op.name == 'mint':
            (i, x) = op.args
            if mutation == 'refusing-mint' and x > acc[i - 1]:
                return None
            acc[i - 1] += x
        elif op.name == 'transfer':
            (j, x) = op.args
            i = op.owner
            if i == j:
                # every account stays as it is
                return s
            if acc[i - 1] < x:
                return None
            if mutation == 'capped-credit' and acc[j - 1] + x > cap:
                return None
            acc[i - 1] -= x
            acc[j - 1] += x
        else:
            return None
        return MoneyState(tuple(acc))

    def query_eval(s, q):
        return s.balance(q.args[0])

    def output_eval(op, s):
        return SILENT

    def acc(i, v):
        plus = sum(op.args[1] for op in v.operations()
            if (op.name == 'transfer' and op.args[0] == i) or (op.name == 'mint' and op.args[0] == i))
        minus = sum(op.args[1] for op in v.operations() if op.name == 'transfer' and op.owner == i)
        return init.get(i, 0) + plus - minus

    def predicate(v):
        return all(acc(i, v) >= 0 for i in range(1, n + 1))

    def propose_common(rng, s):
        return common('mint', rng.randint(1, n), rng.randint(0, 10))

    def propose_owned(rng, s, pid):
        balance = s.balance(pid) if s is not None else 10
        j = rng.randint(1, n)
        return owned(pid, 'transfer', j, rng.randint(0, balance + 3))

    spec = PcoSpec('money', alphabet, MoneyState(accounts), transition, query_eval, output_eval,
        trace_predicate=predicate, propose_common=propose_common, propose_owned=propose_owned,
        queries=lambda: [query('balance', i) for i in range(1, n + 1)])
    spec.acc = acc
    return spec

def transfer(i, j, x):
    return owned(i, 'transfer', j, x)

def mint(i, x):
    return common('mint', i, x)

# ---------------------------------------------------------------- work-stealing deque

def execute_task(t):
    return 'r-{:08x}'.format(zlib.crc32(str(t).encode('utf-8')))

def default_validity(t, r):
    return r == execute_task(t)

@dataclass(frozen=True)
class WsdState:
    deques: tuple
    pushed: frozenset
    results: tuple

    def deque(self, i):
        return self.deques[i - 1]

    def results_for(self, t):
        return dict(self.results).get(t, frozenset())

    def to_json(self):
        return {
            'deques': {str(i + 1): list(d) for (i, d) in enumerate(self.deques)},
            'pushed': sorted([i, t] for (i, t) in self.pushed),
            'results': {t: sorted(rs) for (t, rs) in self.results}
        }

def make_wsd(n, task_ownership, validity_predicate=None):
    valid = validity_predicate or default_validity
    owner_of = {}
    for (t, pid) in task_ownership.items():
        if not _is_pid(pid, n):
            raise InvalidObject('Task "{0}" owned by invalid process {1!r}.'.format(t, pid))
        owner_of[t] = pid
    tasks = tuple(sorted(owner_of))

    def accepts(op):
        a = op.args
        if op.name == 'addResult':
            return len(a) == 2 and a[0] in owner_of and bool(valid(a[0], a[1]))
        if op.name in ('pushBottom', 'remove'):
            return len(a) == 1 and owner_of.get(a[0]) == op.owner
        if op.name == 'popBottom':
            return a == ()
        if op.name in ('getTop', 'getBottom', 'getPending'):
            return len(a) == 1 and _is_pid(a[0], n)
        if op.name == 'getResults':
            return len(a) == 1 and a[0] in owner_of
        return False

    alphabet = Alphabet(n, common={'addResult'}, owned={'pushBottom', 'popBottom', 'remove'},
        queries={'getTop', 'getBottom', 'getPending', 'getResults'}, accepts=accepts)

    def transition(s, op):
        deques = list(s.deques)
        if op.name == 'addResult':
            (t, r) = op.args
            results = dict(s.results)
            results[t] = results.get(t, frozenset()) | {r}
            return WsdState(s.deques, s.pushed, tuple(sorted(results.items())))
        i = op.owner
        d = deques[i - 1]
        if op.name == 'pushBottom':
            t = op.args[0]
            if (i, t) in s.pushed:
                return None
            deques[i - 1] = d + (t,)
            return WsdState(tuple(deques), s.pushed | {(i, t)}, s.results)
        if op.name == 'popBottom':
            if not d:
                return None
            deques[i - 1] = d[1:]
        elif op.name == 'remove':
            deques[i - 1] = tuple(x for x in d if x != op.args[0])
        else:
            return None
        return WsdState(tuple(deques), s.pushed, s.results)

    def query_eval(s, q):
        if q.name == 'getResults':
            return sorted(s.results_for(q.args[0]))
        d = s.deque(q.args[0])
        if q.name == 'getTop':
            return d[-1] if d else BOTTOM
        if q.name == 'getBottom':
            return d[0] if d else BOTTOM
        return sorted(set(d))

    def output_eval(op, s):
        if op.name == 'popBottom':
            d = s.deque(op.owner)
            return d[0] if d else BOTTOM
        return SILENT

    def d_state(i, v):
        # None stands for the collapsed non-value
        d = ()
        for op in v.owned[i]:
            if op.name == 'pushBottom':
                d = d + op.args
            elif op.name == 'popBottom':
                if not d:
                    return None
                d = d[1:]
            elif op.name == 'remove':
                d = tuple(x for x in d if x != op.args[0])
        return d

    def predicate(v):
        for i in range(1, n + 1):
            for t in tasks:
                if count_matching(v, lambda op: op.name == 'pushBottom' and op.owner == i and op.args == (t,)) > 1:
                    return False
            if d_state(i, v) is None:
                return False
        return True

    def propose_common(rng, s):
        if not tasks:
            return None
        t = rng.choice(tasks)
        return common('addResult', t, execute_task(t))

    def propose_owned(rng, s, pid):
        mine = [t for t in tasks if owner_of[t] == pid]
        choices = ['popBottom'] + (['pushBottom', 'pushBottom', 'remove'] if mine else [])
        name = rng.choice(choices)
        if name == 'popBottom':
            return owned(pid, 'popBottom')
        return owned(pid, name, rng.choice(mine))

    def queries():
        qs = []
        for i in range(1, n + 1):
            qs += [query('getTop', i), query('getBottom', i), query('getPending', i)]
        return qs + [query('getResults', t) for t in tasks]

    initial = WsdState(tuple(() for _ in range(n)), frozenset(), ())
    spec = PcoSpec('wsd', alphabet, initial, transition, query_eval, output_eval,
        trace_predicate=predicate, propose_common=propose_common, propose_owned=propose_owned,
        queries=queries)
    spec.d_state = d_state
    spec.tasks = tasks
    spec.owner_of = owner_of
    return spec

# ---------------------------------------------------------------- token ring

TOKEN_AB = owned(1, 't_AB')
TOKEN_BA = owned(2, 't_BA')

@dataclass(frozen=True)
class TokenRingState:
    holder: str

    def to_json(self):
        return {'holder': self.holder}

def make_tokenring():
    alphabet = Alphabet(2, owned={'t_AB', 't_BA'}, queries={'holder'},
        accepts=lambda op: op.args == () and (op.kind != OWNED or op.owner == {'t_AB': 1, 't_BA': 2}.get(op.name)))

    def transition(s, op):
        if op.name == 't_AB' and s.holder == 'A':
            return TokenRingState('B')
        if op.name == 't_BA' and s.holder == 'B':
            return TokenRingState('A')
        return None

    def predicate(v):
        diff = count_matching(v, lambda op: op.name == 't_AB') - count_matching(v, lambda op: op.name == 't_BA')
        return 0 <= diff <= 1

    def propose_owned(rng, s, pid):
        return TOKEN_AB if pid == 1 else TOKEN_BA

    return PcoSpec('tokenring', alphabet, TokenRingState('A'), transition,
        lambda s, q: s.holder, lambda op, s: SILENT,
        trace_predicate=predicate, propose_owned=propose_owned,
        queries=lambda: [query('holder')])

# ---------------------------------------------------------------- registry

def default_tasks(n, per_process=3):
    return {str(i): ['t{0}.{1}'.format(i, k) for k in range(1, per_process + 1)] for i in range(1, n + 1)}

def task_ownership_from_lists(tasks, n):
    ownership = {}
    for (pid, ids) in _pid_keys(tasks, n, 'wsd tasks').items():
        for t in ids:
            if t in ownership:
                raise InvalidObject('Task id "{}" listed twice.'.format(t))
            ownership[t] = pid
    return ownership

def _build_multiset(n, params):
    universe = params.get('universe') or ['e{}'.format(k) for k in range(1, 2 * n + 1)]
    ownership = params.get('ownership') or {e: (k % n) + 1 for (k, e) in enumerate(sorted(universe))}
    return make_multiset(n, universe, ownership)

def _build_petri(n, params):
    return make_petri(n, PetriNetDef.from_json(params.get('net') or DEFAULT_NET, n))

def _build_money(n, params):
    init = params.get('init')
    if init is None:
        init = {str(i): 10 for i in range(1, n + 1)}
    return make_money(n, init, params.get('mutation'), params.get('cap'))

def _build_wsd(n, params):
    tasks = params.get('tasks') or default_tasks(n)
    return make_wsd(n, task_ownership_from_lists(tasks, n))

def _build_tokenring(n, params):
    if n != 2:
        raise InvalidObject('The token ring is defined for exactly 2 processes, got {}.'.format(n))
    return make_tokenring()

OBJECT_TYPES = [
    {'tag': 'multiset', 'displayname': 'Multiset with deletion rights', 'n': 3, 'factory': _build_multiset},
    {'tag': 'petrinet', 'displayname': 'Shared Petri net', 'n': 3, 'factory': _build_petri},
    {'tag': 'money', 'displayname': 'Money transfer', 'n': 3, 'factory': _build_money},
    {'tag': 'wsd', 'displayname': 'Idempotent work-stealing deques', 'n': 3, 'factory': _build_wsd},
    {'tag': 'tokenring', 'displayname': 'Two-process token ring', 'n': 2, 'factory': _build_tokenring},
]

def object_type(tag):
    for ot in OBJECT_TYPES:
        if ot['tag'] == tag:
            return ot
    raise InvalidObject('Unknown object "{0}" (known: {1}).'.format(tag, ', '.join(o['tag'] for o in OBJECT_TYPES)))

def build_spec(tag, n=None, params=None):
    ot = object_type(tag)
    n = n or ot['n']
    try:
        return ot['factory'](n, dict(params or {}))
    except (TypeError, ValueError, AttributeError) as e:
        raise InvalidObject('Bad parameters for "{0}": {1}'.format(tag, e))
