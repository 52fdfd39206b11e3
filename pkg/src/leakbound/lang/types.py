"""Bit-precise types, record layout and the usual arithmetic conversions."""

from __future__ import annotations

from dataclasses import dataclass

from ..envmodels.padding import arch_align, padding_bytes

SCALAR_WIDTHS = (1, 8, 16, 32, 64)


@dataclass(frozen=True, repr=False)
class TypeSpec:
    kind: str  # 'int', 'bool', 'array', 'record', 'ptr', 'void'
    width: int = 0
    signed: bool = False
    elem: TypeSpec | None = None
    length: int = 0
    name: str = ""
    fields: tuple = ()  # ((name, TypeSpec), ...) for records

    def __post_init__(self):
        if self.kind == "int" and self.width not in SCALAR_WIDTHS[1:]:
            raise ValueError(f"bad integer width {self.width}")
        if self.kind == "array" and self.length < 1:
            raise ValueError("array length must be at least 1")
        if self.kind == "record":
            names = [f for f, _ in self.fields]
            if len(names) != len(set(names)):
                raise ValueError(f"duplicate field in struct {self.name}")

    @property
    def is_scalar(self) -> bool:
        return self.kind in ("int", "bool")

    @property
    def is_aggregate(self) -> bool:
        return self.kind in ("array", "record")

    @property
    def bits(self) -> int:
        """Width of a scalar value (bool is one bit)."""
        if self.kind == "bool":
            return 1
        if self.kind == "int":
            return self.width
        raise TypeError(f"{self} is not a scalar")

    def field(self, name: str) -> tuple[int, TypeSpec]:
        off = 0
        for fname, ftype in self.fields:
            if fname == name:
                return off, ftype
            off += sizeof(ftype)
        raise KeyError(name)

    def __str__(self) -> str:
        return type_name(self)

    def __repr__(self) -> str:
        return f"TypeSpec({type_name(self)})"


BOOL = TypeSpec("bool", 1)
VOID = TypeSpec("void")


def int_type(width: int, signed: bool) -> TypeSpec:
    return TypeSpec("int", width, signed)


INT = int_type(32, True)
UINT = int_type(32, False)
CHAR = int_type(8, True)
UCHAR = int_type(8, False)
LLONG = int_type(64, True)
SIZE_T = UINT


def array_of(elem: TypeSpec, length: int) -> TypeSpec:
    return TypeSpec("array", elem=elem, length=length)


def pointer_to(t: TypeSpec) -> TypeSpec:
    return TypeSpec("ptr", elem=t)


def record(name: str, fields) -> TypeSpec:
    return TypeSpec("record", name=name, fields=tuple(fields))


def type_name(t: TypeSpec) -> str:
    if t.kind == "int":
        return f"{'s' if t.signed else 'u'}{t.width}"
    if t.kind == "bool":
        return "bool"
    if t.kind == "void":
        return "void"
    if t.kind == "ptr":
        return f"{type_name(t.elem)}*"
    if t.kind == "array":
        return f"{type_name(t.elem)}[{t.length}]"
    return f"struct {t.name}"


def sizeof(t: TypeSpec) -> int:
    """Size in bytes as the model's ``sizeof`` reports it.

    Records are laid out packed: their size is the sum of the field sizes,
    with no alignment padding.
    """
    if t.kind == "bool":
        return 1
    if t.kind == "int":
        return t.width // 8
    if t.kind == "array":
        return t.length * sizeof(t.elem)
    if t.kind == "record":
        return sum(sizeof(ft) for _, ft in t.fields)
    if t.kind == "ptr":
        raise TypeError("pointers have no storage size in this language")
    raise TypeError(f"sizeof applied to {t}")


def image_size(t: TypeSpec, arch: int) -> int:
    """Bytes occupied by a standalone object, including trailing padding."""
    n = sizeof(t)
    if t.kind == "record":
        n += padding_bytes(n, arch_align(arch))
    return n


def storage_bits(t: TypeSpec, arch: int) -> int:
    """Width of the bit-vector holding a whole variable of type ``t``."""
    if t.is_scalar:
        return t.bits
    return 8 * image_size(t, arch)


def promote(t: TypeSpec) -> TypeSpec:
    """Integer promotion: anything narrower than int becomes signed int."""
    if t.kind == "bool" or (t.kind == "int" and t.width < 32):
        return INT
    return t


def common_type(a: TypeSpec, b: TypeSpec) -> TypeSpec:
    """Usual arithmetic conversions over width-ranked integer types."""
    a, b = promote(a), promote(b)
    if a == b:
        return a
    if a.width != b.width:
        return a if a.width > b.width else b
    return int_type(a.width, False)


def to_signed(value: int, width: int) -> int:
    value &= (1 << width) - 1
    if value >> (width - 1):
        return value - (1 << width)
    return value


def normalize(value: int, t: TypeSpec) -> int:
    """Map a bit pattern to the Python integer the type denotes."""
    if t.kind == "bool":
        return 1 if value else 0
    value &= (1 << t.width) - 1
    if t.signed:
        return to_signed(value, t.width)
    return value


def value_range(t: TypeSpec) -> range:
    if t.kind == "bool":
        return range(2)
    if t.signed:
        return range(-(1 << (t.width - 1)), 1 << (t.width - 1))
    return range(1 << t.width)
