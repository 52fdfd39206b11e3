def arch_align(arch: int) -> int:
    """Alignment the padding model uses for a target word size."""
    if arch == 32:
        return 4
    if arch == 64:
        return 8
    raise ValueError(f"unsupported architecture {arch}")


def padding_bytes(size: int, align: int) -> int:
    """Trailing padding needed to round ``size`` up to a multiple of ``align``.

    >>> padding_bytes(20, 8)
    4
    >>> padding_bytes(12, 4)
    0
    """
    if size < 1:
        raise ValueError("size must be at least one byte")
    if align not in (4, 8):
        raise ValueError(f"alignment must be 4 or 8, got {align}")
    pad = align - size % align
    if pad == align:
        return 0
    return pad
