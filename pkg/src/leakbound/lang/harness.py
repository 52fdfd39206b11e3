"""Leakage harness: which entry parameters are secret, public, or observed."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import HarnessError
from .parser import Pragma, parse_pragmas
from .typecheck import TypedProgram
from .types import TypeSpec, image_size

RETURN = "__return"

SCALAR_EQ = "scalar-equality"
BYTE_EQ = "byte-compare"


@dataclass
class Observable:
    name: str            # parameter name or RETURN
    ty: TypeSpec         # type of the observed object (pointee for output parameters)
    eq_kind: str
    byte_length: int = 0  # compared bytes for byte-compare observables

    @property
    def is_return(self) -> bool:
        return self.name == RETURN


@dataclass
class HarnessSpec:
    entry: str
    high_params: list = field(default_factory=list)   # [(name, TypeSpec)]
    low_params: list = field(default_factory=list)    # [(name, TypeSpec)]
    observables: list = field(default_factory=list)   # [Observable]
    other_params: list = field(default_factory=list)  # unannotated [(name, TypeSpec)]

    @property
    def high_names(self) -> list[str]:
        return [n for n, _ in self.high_params]

    @property
    def low_names(self) -> list[str]:
        return [n for n, _ in self.low_params]

    @property
    def observable_names(self) -> list[str]:
        return [o.name for o in self.observables]

    def observable(self, name: str) -> Observable:
        for o in self.observables:
            if o.name == name:
                return o
        raise KeyError(name)

    def role(self, param: str) -> str:
        if param in self.high_names:
            return "high"
        if param in self.low_names:
            return "low"
        if param in self.observable_names:
            return "observe"
        return "none"


def resolve_harness(prog: TypedProgram, pragmas=None) -> HarnessSpec:
    """Assign roles to the entry function's parameters from ``#pragma leak`` lines.

    Scalar observables are compared with ``==``; aggregate observables are
    compared byte-wise over their padded image.
    """
    if pragmas is None:
        pragmas = parse_pragmas(prog.source) if prog.source is not None else []
    info = prog.function()
    params = dict(info.params)
    path = prog.path
    roles: dict[str, tuple[str, Pragma]] = {}
    order: dict[str, list[str]] = {"high": [], "low": [], "observe": []}
    for p in pragmas:
        if p.role == "entry":
            continue
        if p.target != RETURN and p.target not in params:
            raise HarnessError(f"'{p.target}' is not a parameter of '{info.name}'", p.line, 1, path)
        if p.target in roles:
            prev = roles[p.target][0]
            what = "declared twice" if prev == p.role else f"is both {prev} and {p.role}"
            raise HarnessError(f"'{p.target}' {what}", p.line, 1, path)
        if p.target == RETURN and p.role != "observe":
            raise HarnessError("__return can only be observed", p.line, 1, path)
        roles[p.target] = (p.role, p)
        order[p.role].append(p.target)
    if not order["high"]:
        raise HarnessError(f"no high parameter declared for '{info.name}'", 0, 0, path)
    if not order["observe"]:
        raise HarnessError(f"no observable declared for '{info.name}'", 0, 0, path)

    spec = HarnessSpec(info.name)
    spec.high_params = [(n, params[n]) for n in order["high"]]
    spec.low_params = [(n, params[n]) for n in order["low"]]
    spec.other_params = [(n, t) for n, t in info.params if n not in roles]
    for name in order["observe"]:
        line = roles[name][1].line
        if name == RETURN:
            t = info.ret
            if t.kind == "void":
                raise HarnessError(f"'{info.name}' returns void; nothing to observe", line, 1, path)
        else:
            t = params[name]
            if t.kind != "ptr":
                raise HarnessError(f"observed parameter '{name}' must be a pointer (output) parameter",
                                   line, 1, path)
            t = t.elem
        if t.is_scalar:
            spec.observables.append(Observable(name, t, SCALAR_EQ))
        else:
            spec.observables.append(Observable(name, t, BYTE_EQ, image_size(t, prog.arch)))
    return spec
