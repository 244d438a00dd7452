import pytest
from hypothesis import given, strategies as st

from vowifi_advtest.values import InvalidValue, to_bytes, to_int, to_text


@given(st.integers(1, 8), st.data())
def test_int_forms_agree(width, data):
    v = data.draw(st.integers(0, (1 << 8 * width) - 1))
    assert to_int(v, width) == to_int(hex(v), width) == to_int(str(v), width) == v


@pytest.mark.parametrize("value,width", [(256, 1), (-2, 1), ("0xzz", 2), ("abc", 2), (True, 1), (1.5, 2)])
def test_int_rejects(value, width):
    with pytest.raises(InvalidValue):
        to_int(value, width)


def test_int_all_ones_and_names():
    assert to_int(-1, 2) == 0xFFFF
    assert to_int("X", 1, {"X": 7}) == 7


def test_bytes_forms():
    assert to_bytes("0xabc") == b"\x0a\xbc"
    assert to_bytes("hi") == b"hi"
    assert to_bytes(0) == b"\x00"
    assert to_bytes(b"x") == b"x"
    with pytest.raises(InvalidValue):
        to_bytes(-1)


def test_text_forms():
    assert to_text("0x6869") == "hi"
    assert to_text(5) == "5"
    with pytest.raises(InvalidValue):
        to_text(False)
