"""Domain plugins: a seam through which a more precise (possibly relational)
domain can take over the evaluation of phrases it understands.

A plugin answers two questions about a phrase ``node`` evaluated in
environment ``env`` from abstract memory ``mem``:

* ``supported(env, node, mem)``: does the plugin handle it?
* ``eval(env, node, mem)``: the abstract terminal, in the same shape the
  analyzer uses for the phrase's category.

The analyzer still evaluates the phrase's premises (their side effects on the
report matter) and only replaces the conclusion.  A plugin must be sound:
whenever a concrete run from a memory described by ``mem`` ends in some
outcome, that outcome must be described by ``eval``'s result.  The
differential harness checks this empirically.
"""

from __future__ import annotations

from .absmem import a_read, vstate
from .domains import AbsVal, INF, Interval
from .syntax import Arith, Var


class DomainPlugin:
    """Default plugin: supports nothing."""

    def supported(self, env, node, mem) -> bool:
        return False

    def eval(self, env, node, mem):
        raise NotImplementedError


NoPlugin = DomainPlugin


class NotSupported(Exception):
    pass


def plugin_dispatch(plugin: DomainPlugin, env, node, mem):
    """The plugin's conclusion for ``node``; raises ``NotSupported`` otherwise."""
    if not plugin.supported(env, node, mem):
        raise NotSupported(type(node).__name__)
    return plugin.eval(env, node, mem)


class SquarePlugin(DomainPlugin):
    """Knows that ``x * x`` is never negative."""

    @staticmethod
    def _square_of(node):
        if (isinstance(node, Arith) and node.op == "*" and isinstance(node.left, Var)
                and isinstance(node.right, Var) and node.left.name == node.right.name):
            return node.left
        return None

    def supported(self, env, node, mem) -> bool:
        return self._square_of(node) is not None

    def eval(self, env, node, mem):
        var = self._square_of(node)
        cell = env[var.name]
        v, err = a_read(mem, cell.addr, cell.stype)
        if v is None:
            return None, err
        return vstate(AbsVal.of_int(Interval(0, INF)), v.mem), err
