import json

import pytest

from cellgate.cli import main
from cellgate import sms as smslib
from cellgate.sms import Address, SmsSubmit


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_pdu_encode_decode_roundtrip_on_stdout(capsys):
    code, out, _ = run_cli(capsys, "pdu", "encode", "--to", "+33612345678", "--text", "salut")
    assert code == 0
    encoded = json.loads(out)
    assert encoded["segments"] == 1
    pdu_hex = encoded["parts"][0]["pdu_hex"]

    code, out, _ = run_cli(capsys, "pdu", "decode", pdu_hex)
    assert code == 0
    decoded = json.loads(out)
    assert decoded == {
        "type": "submit",
        "to": "+33612345678",
        "text": "salut",
        "alphabet": "gsm7",
        "message_ref": 0,
        "concat": None,
    }


def test_pdu_decode_known_deliver_vector(capsys):
    from cellgate.simulator import smscodec as simcodec

    pdu = simcodec.encode_deliver("+33699887766", "ping", timestamp=(2024, 6, 1, 10, 20, 30, 4))
    code, out, _ = run_cli(capsys, "pdu", "decode", pdu)
    assert code == 0
    decoded = json.loads(out)
    assert decoded["type"] == "deliver"
    assert decoded["from"] == "+33699887766"
    assert decoded["text"] == "ping"
    assert decoded["tz_hours"] == 1.0


def test_pdu_encode_multisegment(capsys):
    code, out, _ = run_cli(capsys, "pdu", "encode", "--to", "0611", "--text", "x" * 200)
    assert code == 0
    encoded = json.loads(out)
    assert encoded["segments"] == 2
    for part in encoded["parts"]:
        decoded = smslib.decode_submit(part["pdu_hex"])
        assert decoded.udh is not None


def test_mmspdu_encode_decode_roundtrip(capsys, tmp_path):
    spec = {
        "type": "notification_ind",
        "transaction_id": "tx9",
        "message_class": "personal",
        "message_size": 333,
        "expiry": 7200,
        "content_location": "http://mmsc/x9",
    }
    path = tmp_path / "mms.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run_cli(capsys, "mmspdu", "encode", "--json", str(path))
    assert code == 0
    pdu_hex = json.loads(out)["pdu_hex"]

    code, out, _ = run_cli(capsys, "mmspdu", "decode", pdu_hex)
    assert code == 0
    decoded = json.loads(out)
    assert decoded["type"] == "notification_ind"
    assert decoded["transaction_id"] == "tx9"
    assert decoded["content_location"] == "http://mmsc/x9"
    assert decoded["expiry"] == 7200


def test_usage_error_exit_code_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["sms"])  # missing subcommand
    assert err.value.code == 2


def test_connection_refused_exit_code_1(capsys):
    code, _, err = run_cli(
        capsys,
        "--url", "http://127.0.0.1:1",
        "--token", "whatever-token-123",
        "status",
    )
    assert code == 1
    assert "error:" in err


def test_offline_verbs_need_no_network(capsys, monkeypatch):
    # would explode if the codec verbs built an HTTP client
    monkeypatch.setenv("CELLGATE_URL", "http://127.0.0.1:1")
    pdu, _ = smslib.encode_submit(
        SmsSubmit(destination=Address.parse("+336"), user_data="hi")
    )
    code, out, _ = run_cli(capsys, "pdu", "decode", pdu)
    assert code == 0
