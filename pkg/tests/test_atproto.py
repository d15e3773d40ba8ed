import re

import pytest
from hypothesis import given, strategies as st

from cellgate.atproto import (
    AtCommand,
    CommandKind,
    FinalCode,
    LineKind,
    ResponseLine,
    Urc,
    parse_line,
    serialize,
)
from cellgate.errors import InvalidCommand

URCS = {"RING", "+CRING", "+CLIP", "+CMTI"}


def test_serialize_execute():
    assert serialize(AtCommand("+CSQ")) == b"AT+CSQ\r"


def test_serialize_read():
    assert serialize(AtCommand("+CREG", CommandKind.READ)) == b"AT+CREG?\r"


def test_serialize_test():
    assert serialize(AtCommand("+CPBS", CommandKind.TEST)) == b"AT+CPBS=?\r"


def test_serialize_set_mixed_args():
    cmd = AtCommand("+CPBW", CommandKind.SET, args=(1, "+331234", 145, "Alice"))
    assert serialize(cmd) == b'AT+CPBW=1,"+331234",145,"Alice"\r'


def test_serialize_dial_string():
    assert serialize(AtCommand("D*99#;")) == b"ATD*99#;\r"


@pytest.mark.parametrize("bad", ["", "X\rY", "X?"])
def test_invalid_names_rejected(bad):
    with pytest.raises(InvalidCommand):
        AtCommand(bad)


def test_args_with_cr_or_quote_rejected():
    with pytest.raises(InvalidCommand):
        serialize(AtCommand("+X", CommandKind.SET, args=("a\rb",)))
    with pytest.raises(InvalidCommand):
        serialize(AtCommand("+X", CommandKind.SET, args=('a"b',)))


_names = st.text(
    alphabet=st.sampled_from("+*ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789#;"),
    min_size=1,
    max_size=8,
)
_args = st.lists(
    st.one_of(
        st.integers(min_value=0, max_value=999),
        st.text(alphabet=st.sampled_from("abcXYZ019 .+-"), max_size=6),
    ),
    min_size=1,
    max_size=4,
)


@st.composite
def _commands(draw):
    kind = draw(st.sampled_from(list(CommandKind)))
    args = tuple(draw(_args)) if kind is CommandKind.SET else ()
    return AtCommand(draw(_names), kind, args)


@given(_commands())
def test_serialize_shape(cmd):
    out = serialize(cmd)
    assert re.fullmatch(rb"AT[^\r\n]*\r", out)


@given(_commands(), _commands())
def test_serialize_injective(a, b):
    if serialize(a) == serialize(b):
        assert a.name == b.name and a.kind == b.kind and tuple(a.args) == tuple(b.args)


def test_parse_final_ok():
    line = parse_line(b"OK", URCS)
    assert line.kind is LineKind.FINAL and line.final.code is FinalCode.OK


def test_parse_known_urc():
    urc = parse_line(b"+CRING: VOICE", URCS)
    assert isinstance(urc, Urc)
    assert urc.prefix == "+CRING" and urc.payload == "VOICE"


def test_parse_bare_urc():
    urc = parse_line(b"RING", URCS)
    assert isinstance(urc, Urc) and urc.payload == ""


def test_parse_info_line():
    line = parse_line(b"+CSQ: 18,99", URCS)
    assert line.kind is LineKind.INFO
    assert line.prefix == "+CSQ" and line.value == "18,99"


def test_parse_cme_cms_errors():
    line = parse_line(b"+CME ERROR: 16", URCS)
    assert line.final.code is FinalCode.CME_ERROR and line.final.error_code == 16
    line = parse_line(b"+CMS ERROR: 331", URCS)
    assert line.final.code is FinalCode.CMS_ERROR and line.final.error_code == 331


@pytest.mark.parametrize(
    "raw,code",
    [
        (b"NO CARRIER", FinalCode.NO_CARRIER),
        (b"BUSY", FinalCode.BUSY),
        (b"NO ANSWER", FinalCode.NO_ANSWER),
        (b"CONNECT", FinalCode.CONNECT),
        (b"CONNECT 9600", FinalCode.CONNECT),
    ],
)
def test_parse_other_finals(raw, code):
    assert parse_line(raw, URCS).final.code is code


def test_parse_prompt_and_empty():
    assert parse_line(b"> ", URCS).kind is LineKind.PROMPT
    assert parse_line(b"", URCS).kind is LineKind.EMPTY


def test_unknown_line_becomes_info():
    line = parse_line(b"whatever text", URCS)
    assert line.kind is LineKind.INFO and line.prefix == "" and line.value == "whatever text"


@given(st.binary(max_size=64))
def test_parse_never_raises(raw):
    raw = raw.replace(b"\r", b"").replace(b"\n", b"")
    result = parse_line(raw, URCS)
    assert isinstance(result, (ResponseLine, Urc))
