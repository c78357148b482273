# traces.py
"""
canonical mazurkiewicz traces for process-commutative alphabets

two updates are dependent iff they are owned by the same process, so a trace
is fully described by the multiset of its common updates plus one sequence of
owned updates per process.
"""
import json
import math
from collections import Counter
from dataclasses import dataclass, field

COMMON = 'common'
OWNED = 'owned'
QUERY = 'query'

KINDS = (COMMON, OWNED, QUERY)

class AlphabetError(Exception):
    pass

class TraceExplosion(Exception):
    pass

def freeze(value):
    # json arrays come back as lists; payloads must stay hashable
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, freeze(v)) for (k, v) in value.items()))
    return value

def thaw(value):
    if isinstance(value, tuple):
        return [thaw(v) for v in value]
    return value

@dataclass(frozen=True)
class Operation:
    """
    update or query symbol: kind, symbolic name, payload arguments
    owned operations carry exactly one owner
    """
    kind: str
    name: str
    args: tuple = ()
    owner: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AlphabetError('Unknown operation kind "{}".'.format(self.kind))
        if not isinstance(self.name, str):
            raise AlphabetError('Operation name must be a string, got {!r}.'.format(self.name))
        if (self.kind == OWNED) != (self.owner is not None):
            raise AlphabetError('Owner must be given for owned operations only ({}).'.format(self.name))
        if self.owner is not None and (isinstance(self.owner, bool) or not isinstance(self.owner, int)):
            raise AlphabetError('Owner must be a process index, got {!r}.'.format(self.owner))
        object.__setattr__(self, 'args', freeze(self.args))

    @property
    def is_update(self):
        return self.kind != QUERY

    def to_json(self):
        d = {'kind': self.kind}
        if self.kind == OWNED:
            d['owner'] = self.owner
        d['name'] = self.name
        d['args'] = thaw(self.args)
        return d

    @classmethod
    def from_json(cls, d):
        if not isinstance(d, dict):
            raise AlphabetError('Operation must be a JSON object, got {!r}.'.format(d))
        try:
            return cls(d['kind'], d['name'], tuple(d.get('args', ())), d.get('owner'))
        except (KeyError, TypeError) as e:
            raise AlphabetError('Malformed operation {!r} ({}).'.format(d, e))

    def sort_key(self):
        return json.dumps(self.to_json(), sort_keys=True)

    def __str__(self):
        inner = ','.join(str(a) for a in self.args)
        if self.kind == OWNED:
            return '{0}[{1}]({2})'.format(self.name, self.owner, inner)
        return '{0}({1})'.format(self.name, inner)

def common(name, *args):
    return Operation(COMMON, name, args)

def owned(owner, name, *args):
    return Operation(OWNED, name, args, owner)

def query(name, *args):
    return Operation(QUERY, name, args)

@dataclass
class Alphabet:
    """
    partition of operation schemas: common names, owned names, query names
    accepts is an optional object-specific payload check (amount ranges,
    deletion rights, result validity)
    """
    n: int
    common: frozenset = frozenset()
    owned: frozenset = frozenset()
    queries: frozenset = frozenset()
    accepts: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.common = frozenset(self.common)
        self.owned = frozenset(self.owned)
        self.queries = frozenset(self.queries)
        if self.n < 1:
            raise AlphabetError('System size must be positive, got {}.'.format(self.n))
        overlap = (self.common & self.owned) | (self.common & self.queries) | (self.owned & self.queries)
        if overlap:
            raise AlphabetError('Schema names used twice: {}.'.format(sorted(overlap)))

    def processes(self):
        return range(1, self.n + 1)

    def contains(self, op):
        if op.kind == COMMON:
            known = op.name in self.common
        elif op.kind == OWNED:
            known = op.name in self.owned and 1 <= op.owner <= self.n
        else:
            known = op.name in self.queries
        if not known:
            return False
        return self.accepts is None or bool(self.accepts(op))

    def authorized(self, op, pid):
        """ op in C u O_pid """
        if not op.is_update or not self.contains(op):
            return False
        return op.kind == COMMON or op.owner == pid

    def check_update(self, op):
        if not op.is_update:
            raise AlphabetError('Query {} cannot appear in a trace.'.format(op))
        if not self.contains(op):
            raise AlphabetError('Operation {} is not in the alphabet.'.format(op))

class Trace:
    """
    common multiset plus per-owner sequences; value semantics
    """

    def __init__(self, n, common_part=None, owned_part=None):
        self.n = n
        self.common = Counter(common_part or {})
        self.owned = {i: () for i in range(1, n + 1)}
        for (i, seq) in (owned_part or {}).items():
            seq = tuple(seq)
            for op in seq:
                if op.kind != OWNED or op.owner != i:
                    raise AlphabetError('Operation {0} cannot sit in the sequence of process {1}.'.format(op, i))
            self.owned[i] = seq

    def copy(self):
        return Trace(self.n, self.common, self.owned)

    @property
    def size(self):
        return sum(self.common.values()) + sum(len(s) for s in self.owned.values())

    def is_empty(self):
        return self.size == 0

    def concat(self, op):
        if op.kind == QUERY:
            raise AlphabetError('Query {} cannot be appended to a trace.'.format(op))
        t = self.copy()
        if op.kind == COMMON:
            t.common[op] += 1
        else:
            if op.owner not in t.owned:
                raise AlphabetError('Owner {0} outside 1..{1}.'.format(op.owner, self.n))
            t.owned[op.owner] = t.owned[op.owner] + (op,)
        return t

    def operations(self):
        for op in sorted(self.common, key=Operation.sort_key):
            for _ in range(self.common[op]):
                yield op
        for i in sorted(self.owned):
            yield from self.owned[i]

    def _same_system(self, other):
        if self.n != other.n:
            raise AlphabetError('Traces over different alphabets (n={0} vs n={1}).'.format(self.n, other.n))

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        self._same_system(other)
        return +self.common == +other.common and self.owned == other.owned

    def __hash__(self):
        return hash((frozenset((+self.common).items()), tuple(sorted(self.owned.items()))))

    def is_prefix_of(self, other):
        self._same_system(other)
        for (op, k) in self.common.items():
            if other.common[op] < k:
                return False
        for (i, seq) in self.owned.items():
            if other.owned[i][:len(seq)] != seq:
                return False
        return True

    def to_json(self):
        return {
            'common': [[op.to_json(), k] for (op, k) in sorted(self.common.items(), key=lambda item: item[0].sort_key()) if k > 0],
            'owned': {str(i): [op.to_json() for op in seq] for (i, seq) in sorted(self.owned.items())}
        }

    @classmethod
    def from_json(cls, n, d):
        common_part = Counter()
        for (opjs, k) in d.get('common', []):
            common_part[Operation.from_json(opjs)] += k
        owned_part = {int(i): [Operation.from_json(o) for o in seq] for (i, seq) in d.get('owned', {}).items()}
        return cls(n, common_part, owned_part)

    def __repr__(self):
        commons = ', '.join('{0}x{1}'.format(op, k) for (op, k) in self.common.items() if k)
        owneds = ', '.join('{0}:({1})'.format(i, ' '.join(str(o) for o in s)) for (i, s) in self.owned.items() if s)
        return '<Trace {{{0}}} [{1}]>'.format(commons, owneds)

def empty_trace(alphabet):
    return Trace(alphabet.n)

def independent(alphabet, a, b):
    alphabet.check_update(a)
    alphabet.check_update(b)
    return not (a.kind == OWNED and b.kind == OWNED and a.owner == b.owner)

def word_to_trace(alphabet, word):
    t = Trace(alphabet.n)
    for op in word:
        alphabet.check_update(op)
        t = t.concat(op)
    return t

def trace_concat(t, op):
    return t.concat(op)

def trace_equal(t1, t2):
    return t1 == t2

def is_trace_prefix(t1, t2):
    return t1.is_prefix_of(t2)

def count_matching(t, pattern):
    total = sum(k for (op, k) in t.common.items() if pattern(op))
    total += sum(1 for seq in t.owned.values() for op in seq if pattern(op))
    return total

def interleaving_count(t):
    # multinomial: identical common ops are indistinguishable, owned sequences are fixed
    total = math.factorial(t.size)
    for k in t.common.values():
        total //= math.factorial(k)
    for seq in t.owned.values():
        total //= math.factorial(len(seq))
    return total

def enumerate_representatives(t, limit):
    count = interleaving_count(t)
    if count > limit:
        raise TraceExplosion('{0} representative words exceed the limit of {1}.'.format(count, limit))

    words = set()
    remaining = +t.common
    positions = {i: 0 for i in t.owned}

    def extend(prefix):
        if len(prefix) == t.size:
            words.add(tuple(prefix))
            return
        for op in list(remaining):
            if remaining[op] > 0:
                remaining[op] -= 1
                prefix.append(op)
                extend(prefix)
                prefix.pop()
                remaining[op] += 1
        for (i, seq) in t.owned.items():
            k = positions[i]
            if k < len(seq):
                positions[i] = k + 1
                prefix.append(seq[k])
                extend(prefix)
                prefix.pop()
                positions[i] = k

    extend([])
    return words
