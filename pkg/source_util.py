"""
Noise-source registry.

Each source kind registers a synthesizer producing one shot's field trace.
Decorators attach the batch phase kernel used by the pipeline and the
highest frequency the kind can put on a grid.

    @register("CoherentAC")
    @phase_kernel(coherent_integrals)
    @bandwidth(lambda spec: spec.carrier_f0)
    def coherent_ac(spec, shot_index, grid, master_seed):
        ...

The registry is only complete once ``sources`` has been imported;
``get_source`` takes care of that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

SOURCES: dict[str, SourceKind] = {}


@dataclass
class SourceKind:

    name: str
    synthesize: Callable
    label: str = field(init=False)
    kernel: Callable | None = None
    max_frequency: Callable | None = None
    draws_random: bool = True

    def __post_init__(self):
        if hasattr(self.synthesize, "__kernel__"):
            self.kernel = self.synthesize.__kernel__
        if hasattr(self.synthesize, "__fmax__"):
            self.max_frequency = self.synthesize.__fmax__
        if hasattr(self.synthesize, "__deterministic__"):
            self.draws_random = False
        self.label = self.synthesize.__name__


class _Attach(object):
    """Base for decorators that stash a value on a synthesizer function."""

    attr = ""

    def __init__(self, value):
        self.val = value

    def __call__(self, kind: Callable | SourceKind):
        # This could be applied before or after registration
        if isinstance(kind, SourceKind):
            func = kind.synthesize
        else:
            func = kind
        setattr(func, self.attr, self.val)
        if isinstance(kind, SourceKind):
            kind.__post_init__()
        return kind


class phase_kernel(_Attach):
    """Batch kernel: (spec, shots, starts, windows, master_seed, dt, n_samples) -> field integrals."""
    attr = "__kernel__"


class bandwidth(_Attach):
    """Callable giving the highest frequency (Hz) a spec of this kind synthesizes."""
    attr = "__fmax__"


def deterministic(func):
    """Mark a kind that draws no random numbers."""
    func.__deterministic__ = True
    return func


def register(name: str):
    """
    Source register function.

    Usage:  @register("Silence")
            def silence(...):
    """
    def wrap(func):
        if name in SOURCES:
            raise ValueError(f"source kind {name!r} registered twice")
        SOURCES[name] = SourceKind(name, func)
        return SOURCES[name]
    return wrap


def get_sources() -> dict[str, SourceKind]:
    import sources  # Force all registrations to occur.
    return SOURCES


def get_source(name: str) -> SourceKind:
    kinds = get_sources()
    name = getattr(name, "value", name)
    try:
        return kinds[name]
    except KeyError:
        raise ValueError(f"unknown source kind {name!r}; known: {sorted(kinds)}") from None
