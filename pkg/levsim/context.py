"""
Run-scoped settings namespace.

A single module-level :data:`settings` instance carries the knobs that
influence a run without being physics parameters (strict mode, worker
thread cap). Each attribute is stored in its own
:class:`contextvars.ContextVar`, so values are local to the current
context: a thread, an asyncio task, a call decorated with the namespace,
or a ``with settings:`` block.

Usage::

    from levsim.context import settings

    with settings:
        settings.strict = True
        run_something()        # sees strict=True
    # strict is back to its previous value here

"""

import os
import threading

from contextvars import ContextVar, copy_context
from functools import wraps

__all__ = ["RunSettings", "settings", "thread_count"]

_sentinel = object()


class RunSettings:
    """Context-local namespace with class-level defaults.

    Reads fall back to ``_et_defaults`` when an attribute was never set in
    the current context. Attributes prefixed with ``_et_`` are internal and
    live on the instance itself.
    """

    _et_defaults = {"strict": False, "threads": None}

    def __init__(self, **defaults):
        self._et_registry = {}
        self._et_stack = {}
        self._et_lock = threading.Lock()
        self._et_defaults = {**type(self)._et_defaults, **defaults}

    def __getattr__(self, name):
        if name.startswith("_et_"):
            raise AttributeError(name)
        var = self._et_registry.get(name, None)
        value = _sentinel if var is None else var.get(_sentinel)
        if value is _sentinel:
            try:
                return self._et_defaults[name]
            except KeyError:
                raise AttributeError(f"Attribute not set: {name}") from None
        return value

    def __setattr__(self, name, value):
        if name.startswith("_et_"):
            return super().__setattr__(name, value)
        with self._et_lock:
            var = self._et_registry.get(name, None)
            if var is None:
                var = self._et_registry[name] = ContextVar(name)
        var.set(value)

    def __delattr__(self, name):
        var = self._et_registry.get(name, None)
        if var is None or var.get(_sentinel) is _sentinel:
            raise AttributeError(f"Attribute not set: {name}")
        var.set(_sentinel)

    def __call__(self, callable_):
        @wraps(callable_)
        def wrapper(*args, **kw):
            return self._run(callable_, *args, **kw)

        return wrapper

    def _run(self, callable_, *args, **kw):
        """Runs callable in a copy of the current context"""
        return copy_context().run(callable_, *args, **kw)

    def _snapshot(self):
        return {name: var.get(_sentinel) for name, var in self._et_registry.items()}

    def __enter__(self):
        key = threading.get_ident()
        with self._et_lock:
            self._et_stack.setdefault(key, []).append(self._snapshot())
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        key = threading.get_ident()
        with self._et_lock:
            saved = self._et_stack[key].pop()
            if not self._et_stack[key]:
                self._et_stack.pop(key)
            names = list(self._et_registry)
        for name in names:
            self._et_registry[name].set(saved.get(name, _sentinel))

    def __dir__(self):
        names = set(self._et_defaults)
        names.update(
            name
            for name, var in self._et_registry.items()
            if var.get(_sentinel) is not _sentinel
        )
        return sorted(names)


settings = RunSettings()


def thread_count(requested=None):
    """Resolve the worker count: argument, then settings, then LEVSIM_THREADS."""
    for candidate in (requested, settings.threads, os.environ.get("LEVSIM_THREADS")):
        if candidate in (None, ""):
            continue
        try:
            value = int(candidate)
        except (TypeError, ValueError):
            continue
        if value >= 1:
            return value
    return 1
