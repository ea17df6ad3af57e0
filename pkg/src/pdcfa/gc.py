"""Abstract garbage collection: root computation and store restriction.

Collection restricts a configuration's store to the addresses reachable
from its roots: the ranges of the current environment and of every frame
environment on the stack.  Only closures link addresses together; base
values are leaves.
"""

from __future__ import annotations

from .abstract import (
    AbsAddr, AbsClo, AbsConf, AbsStore, step, store_restrict,
)


def stack_root(kont) -> frozenset[AbsAddr]:
    """Addresses referenced by any frame environment on the stack."""
    out: set[AbsAddr] = set()
    for frame in kont:
        out |= frame.env.range()
    return frozenset(out)


def root(conf: AbsConf) -> frozenset[AbsAddr]:
    return conf.env.range() | stack_root(conf.kont)


def adjacent(addr: AbsAddr, store: AbsStore) -> frozenset[AbsAddr]:
    """Addresses reachable in one hop through a closure stored at ``addr``."""
    out: set[AbsAddr] = set()
    for v in store.get(addr):
        if isinstance(v, AbsClo):
            out |= v.env.range()
    return frozenset(out)


def reachable_from(roots, store: AbsStore) -> frozenset[AbsAddr]:
    """Transitive closure of the adjacency relation over the roots.

    Roots are included even when the store has no binding for them.
    """
    seen = set(roots)
    work = list(roots)
    while work:
        a = work.pop()
        for v in store.map.get(a, ()):  # Vals iterates its items
            if isinstance(v, AbsClo):
                for b in v.env.range():
                    if b not in seen:
                        seen.add(b)
                        work.append(b)
    return frozenset(seen)


def reachable_addrs(conf: AbsConf) -> frozenset[AbsAddr]:
    return reachable_from(root(conf), conf.store)


def collect(conf: AbsConf) -> AbsConf:
    """Stop-and-copy: restrict the store to the reachable addresses."""
    keep = reachable_addrs(conf)
    store = store_restrict(conf.store, keep)
    if store is conf.store:
        return conf
    return AbsConf(conf.exp, conf.env, store, conf.kont)


def gc_step(conf: AbsConf, policy, history=(), flow_sink=None):
    """Collect, then take every machine transition from the collected state."""
    return step(collect(conf), policy, history, flow_sink)
