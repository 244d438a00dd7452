"""Coercion of test-case values (int, name, or "0x" hex string) into field types."""


class InvalidValue(ValueError):
    pass


def is_hex(value):
    return isinstance(value, str) and value[:2].lower() == "0x"


def to_int(value, width, names=None):
    """Integer for a field ``width`` bytes wide; -1 means all bits set."""
    if isinstance(value, bool):
        raise InvalidValue(f"boolean is not a field value: {value!r}")
    if isinstance(value, str):
        if is_hex(value):
            try:
                value = int(value, 16)
            except ValueError:
                raise InvalidValue(f"bad hex literal {value!r}") from None
        elif names is not None and value in names:
            value = int(names[value])
        else:
            try:
                value = int(value, 10)
            except ValueError:
                raise InvalidValue(f"{value!r} is not a known name or number") from None
    if not isinstance(value, int):
        raise InvalidValue(f"expected an integer, got {value!r}")
    limit = 1 << (8 * width)
    if value == -1:
        return limit - 1
    if not 0 <= value < limit:
        raise InvalidValue(f"{value} does not fit in {width} byte(s)")
    return value


def to_bytes(value):
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    if is_hex(value):
        digits = value[2:]
        if len(digits) % 2:
            digits = "0" + digits
        try:
            return bytes.fromhex(digits)
        except ValueError:
            raise InvalidValue(f"bad hex literal {value!r}") from None
    if isinstance(value, str):
        return value.encode()
    if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
        return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
    raise InvalidValue(f"cannot turn {value!r} into octets")


def to_text(value):
    if isinstance(value, bool):
        raise InvalidValue(f"boolean is not a field value: {value!r}")
    if is_hex(value):
        return to_bytes(value).decode("utf-8", "replace")
    return str(value)
