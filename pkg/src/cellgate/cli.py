"""Command-line client and process launcher.

API verbs talk to a running gateway (--url/--token or CELLGATE_URL /
CELLGATE_TOKEN); the pdu/mmspdu verbs are offline codec tools and never touch
the network.  JSON on stdout by default, --pretty for readable tables.
Exit codes: 0 success, 1 API or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
import time
from typing import Optional

from . import sms as smslib
from .errors import CellgateError
from .mms import codec as mmscodec


def _output(args, payload) -> None:
    if getattr(args, "pretty", False) and isinstance(payload, dict):
        for key, value in payload.items():
            print(f"{key:>18}: {value}")
    elif getattr(args, "pretty", False) and isinstance(payload, list):
        for item in payload:
            print(json.dumps(item, ensure_ascii=False))
    else:
        print(json.dumps(payload, ensure_ascii=False, indent=2))


class ApiClient:
    def __init__(self, url: str, token: str):
        import httpx

        if not url:
            raise CellgateError("no gateway URL (use --url or CELLGATE_URL)")
        if not token:
            raise CellgateError("no token (use --token or CELLGATE_TOKEN)")
        self.base = url.rstrip("/")
        self.http = httpx.Client(
            headers={"Authorization": f"Bearer {token}"}, timeout=30.0
        )

    def request(self, method: str, path: str, **kwargs):
        import httpx

        try:
            response = self.http.request(method, self.base + path, **kwargs)
        except httpx.HTTPError as exc:
            raise CellgateError(f"cannot reach gateway: {exc}") from exc
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail")
            except Exception:
                detail = response.text
            raise CellgateError(f"HTTP {response.status_code}: {detail}")
        if response.headers.get("content-type", "").startswith("application/json"):
            return response.json()
        return {"status": response.status_code}


def _client(args) -> ApiClient:
    url = args.url or os.environ.get("CELLGATE_URL", "")
    token = args.token or os.environ.get("CELLGATE_TOKEN", "")
    return ApiClient(url, token)


# --- verb implementations -------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    from .config import load_config
    from .gateway import create_app

    config = load_config(args.config)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_sim(args) -> int:
    import logging

    from .simulator import ModemSimulator, SimState

    logging.basicConfig(level=logging.INFO)
    state = SimState()
    if args.pin:
        state.pin_code = args.pin
        state.pin_locked = True
    sim = ModemSimulator(base_port=args.port, state=state).start()
    print(
        json.dumps(
            {
                "at": f"tcp:127.0.0.1:{sim.at_port}",
                "control": sim.ctl_url,
                "audio_port": sim.audio_port,
            }
        )
    )
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        sim.stop()
    return 0


def cmd_sms_send(args) -> int:
    result = _client(args).request("POST", "/v1/sms", json={"to": args.to, "text": args.text})
    _output(args, result)
    return 0


def cmd_sms_list(args) -> int:
    result = _client(args).request("GET", f"/v1/sms?box={args.box}")
    _output(args, result["messages"] if args.pretty else result)
    return 0


def cmd_mms_send(args) -> int:
    parts = []
    if args.text:
        parts.append({"content_type": "text/plain", "text": args.text})
    for spec in args.part or []:
        content_type, _, path = spec.partition("=")
        if not path:
            raise CellgateError(f"--part wants TYPE=PATH, got {spec!r}")
        with open(path, "rb") as fh:
            parts.append(
                {"content_type": content_type, "data_base64": base64.b64encode(fh.read()).decode()}
            )
    body = {"to": args.to, "subject": args.subject, "parts": parts}
    result = _client(args).request("POST", "/v1/mms", json=body)
    _output(args, result)
    return 0


def cmd_mms_status(args) -> int:
    _output(args, _client(args).request("GET", f"/v1/mms/{args.id}"))
    return 0


def cmd_call_dial(args) -> int:
    _output(args, _client(args).request("POST", "/v1/calls", json={"to": args.to}))
    return 0


def cmd_call_answer(args) -> int:
    _output(args, _client(args).request("POST", f"/v1/calls/{args.id}/answer"))
    return 0


def cmd_call_hangup(args) -> int:
    _output(args, _client(args).request("POST", f"/v1/calls/{args.id}/hangup"))
    return 0


def cmd_call_status(args) -> int:
    _output(args, _client(args).request("GET", f"/v1/calls/{args.id}"))
    return 0


def cmd_phonebook_list(args) -> int:
    result = _client(args).request("GET", "/v1/phonebook")
    _output(args, result["entries"] if args.pretty else result)
    return 0


def cmd_phonebook_add(args) -> int:
    _output(
        args,
        _client(args).request(
            "PUT", "/v1/phonebook", json={"number": args.number, "text": args.text}
        ),
    )
    return 0


def cmd_phonebook_find(args) -> int:
    result = _client(args).request("GET", f"/v1/phonebook?prefix={args.prefix}")
    _output(args, result)
    return 0


def cmd_events(args) -> int:
    import httpx

    url = (args.url or os.environ.get("CELLGATE_URL", "")).rstrip("/") + "/v1/events"
    token = args.token or os.environ.get("CELLGATE_TOKEN", "")
    headers = {"Authorization": f"Bearer {token}"}
    if args.from_seq is not None:
        headers["Last-Event-ID"] = str(args.from_seq)
    try:
        with httpx.stream("GET", url, headers=headers, timeout=None) as response:
            if response.status_code >= 400:
                raise CellgateError(f"HTTP {response.status_code}")
            for line in response.iter_lines():
                if line.startswith("data:"):
                    print(line[5:].strip(), flush=True)
    except KeyboardInterrupt:
        return 0
    except httpx.HTTPError as exc:
        raise CellgateError(f"stream failed: {exc}") from exc
    return 0


def cmd_status(args) -> int:
    _output(args, _client(args).request("GET", "/v1/modem/status"))
    return 0


def cmd_pdu_encode(args) -> int:
    alphabet = smslib.Alphabet.UCS2 if args.ucs2 else smslib.choose_alphabet(args.text)
    parts = smslib.segment(args.text, alphabet)
    rendered = []
    for index, (body, udh) in enumerate(parts):
        message = smslib.SmsSubmit(
            destination=smslib.Address.parse(args.to),
            user_data=body,
            message_ref=args.mr + index,
            alphabet=alphabet,
            udh=udh,
        )
        pdu_hex, tpdu_len = smslib.encode_submit(message)
        rendered.append({"pdu_hex": pdu_hex, "tpdu_len": tpdu_len})
    _output(args, {"segments": len(rendered), "parts": rendered})
    return 0


def _describe_address(addr: smslib.Address) -> str:
    return addr.dial_string()


def cmd_pdu_decode(args) -> int:
    pdu_hex = args.hex.strip().upper()
    try:
        deliver = smslib.decode_deliver(pdu_hex)
    except smslib.SmsCodecError:
        deliver = None
    if deliver is not None:
        ts = deliver.timestamp
        _output(
            args,
            {
                "type": "deliver",
                "from": _describe_address(deliver.originator),
                "text": deliver.user_data,
                "alphabet": deliver.alphabet.value,
                "timestamp": f"{ts.year:04d}-{ts.month:02d}-{ts.day:02d}T{ts.hour:02d}:{ts.minute:02d}:{ts.second:02d}",
                "tz_hours": ts.tz_hours,
                "concat": _concat_dict(deliver.udh),
            },
        )
        return 0
    submit = smslib.decode_submit(pdu_hex)
    _output(
        args,
        {
            "type": "submit",
            "to": _describe_address(submit.destination),
            "text": submit.user_data,
            "alphabet": submit.alphabet.value,
            "message_ref": submit.message_ref,
            "concat": _concat_dict(submit.udh),
        },
    )
    return 0


def _concat_dict(udh):
    if udh is None:
        return None
    return {"ref": udh.ref, "total": udh.total, "seq": udh.seq}


def cmd_mmspdu_encode(args) -> int:
    if args.json == "-":
        spec = json.load(sys.stdin)
    else:
        with open(args.json, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    mtype = mmscodec.MmsMessageType[spec["type"].upper()]
    headers = mmscodec.MmsHeaders(
        transaction_id=spec.get("transaction_id"),
        message_id=spec.get("message_id"),
        to=tuple(spec.get("to", ())),
        from_=spec.get("from"),
        subject=spec.get("subject"),
        message_class=(
            mmscodec.MessageClass[spec["message_class"].upper()]
            if spec.get("message_class")
            else None
        ),
        expiry=spec.get("expiry"),
        content_location=spec.get("content_location"),
        status=mmscodec.MmsStatus(spec["status"]) if spec.get("status") else None,
        message_size=spec.get("message_size"),
        date=spec.get("date"),
    )
    body = None
    if spec.get("parts") is not None:
        parts = tuple(
            mmscodec.MmsPart(
                content_type=p["content_type"],
                payload=(
                    base64.b64decode(p["data_base64"])
                    if "data_base64" in p
                    else p.get("text", "").encode("utf-8")
                ),
                content_id=p.get("content_id"),
            )
            for p in spec["parts"]
        )
        body = mmscodec.MmsBody(parts=parts)
    pdu = mmscodec.encode_pdu(mtype, headers, body)
    _output(args, {"pdu_hex": pdu.hex().upper()})
    return 0


def cmd_mmspdu_decode(args) -> int:
    data = bytes.fromhex(args.hex.strip())
    mtype, headers, body = mmscodec.decode_pdu(data)
    record = {
        "type": mtype.name.lower(),
        "transaction_id": headers.transaction_id,
        "message_id": headers.message_id,
        "version": list(headers.version),
        "from": headers.from_,
        "to": list(headers.to),
        "subject": headers.subject,
        "message_class": headers.message_class.name.lower() if headers.message_class else None,
        "expiry": headers.expiry,
        "content_location": headers.content_location,
        "status": headers.status.value if headers.status else None,
        "message_size": headers.message_size,
        "date": headers.date,
    }
    if body is not None:
        record["parts"] = [
            {
                "content_type": part.content_type,
                "content_id": part.content_id,
                "data_base64": base64.b64encode(part.payload).decode(),
            }
            for part in body.parts
        ]
    _output(args, record)
    return 0


def cmd_bench(args) -> int:
    from .gateway.bench import run_latency_probe

    url = args.url or os.environ.get("CELLGATE_URL", "")
    token = args.token or os.environ.get("CELLGATE_TOKEN", "")
    if not url or not token:
        raise CellgateError("bench needs --url and --token (or env)")
    report = run_latency_probe(url, token, endpoint=args.endpoint, n=args.n)
    _output(args, report)
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellgate", description=__doc__)
    parser.add_argument("--url", default=None, help="gateway base URL (env CELLGATE_URL)")
    parser.add_argument("--token", default=None, help="bearer token (env CELLGATE_TOKEN)")
    parser.add_argument("--pretty", action="store_true", help="human-readable output")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("serve", help="run the gateway")
    p.add_argument("--config", default=None, help="config file (env CELLGATE_CONFIG)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("sim", help="run the virtual modem")
    p.add_argument("--port", type=int, default=0, help="AT port (control +1, audio +2)")
    p.add_argument("--pin", default=None, help="start with a locked SIM using this PIN")
    p.set_defaults(func=cmd_sim)

    p_sms = sub.add_parser("sms", help="messaging").add_subparsers(dest="action", required=True)
    p = p_sms.add_parser("send")
    p.add_argument("--to", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_sms_send)
    p = p_sms.add_parser("list")
    p.add_argument("--box", default="inbox", choices=["inbox", "unread", "read"])
    p.set_defaults(func=cmd_sms_list)

    p_mms = sub.add_parser("mms", help="multimedia messaging").add_subparsers(dest="action", required=True)
    p = p_mms.add_parser("send")
    p.add_argument("--to", action="append", required=True)
    p.add_argument("--subject", default=None)
    p.add_argument("--text", default=None, help="inline text/plain part")
    p.add_argument("--part", action="append", help="TYPE=PATH attachment", default=None)
    p.set_defaults(func=cmd_mms_send)
    p = p_mms.add_parser("status")
    p.add_argument("id")
    p.set_defaults(func=cmd_mms_status)

    p_call = sub.add_parser("call", help="voice calls").add_subparsers(dest="action", required=True)
    p = p_call.add_parser("dial")
    p.add_argument("--to", required=True)
    p.set_defaults(func=cmd_call_dial)
    for action, func in (("answer", cmd_call_answer), ("hangup", cmd_call_hangup), ("status", cmd_call_status)):
        p = p_call.add_parser(action)
        p.add_argument("--id", required=True)
        p.set_defaults(func=func)

    p_pb = sub.add_parser("phonebook", help="phonebook").add_subparsers(dest="action", required=True)
    p = p_pb.add_parser("list")
    p.set_defaults(func=cmd_phonebook_list)
    p = p_pb.add_parser("add")
    p.add_argument("--number", required=True)
    p.add_argument("--text", default="")
    p.set_defaults(func=cmd_phonebook_add)
    p = p_pb.add_parser("find")
    p.add_argument("--prefix", required=True)
    p.set_defaults(func=cmd_phonebook_find)

    p = sub.add_parser("events", help="follow the live event stream")
    p.add_argument("--from-seq", type=int, default=None, dest="from_seq")
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("status", help="modem status")
    p.set_defaults(func=cmd_status)

    p_pdu = sub.add_parser("pdu", help="offline SMS codec").add_subparsers(dest="action", required=True)
    p = p_pdu.add_parser("encode")
    p.add_argument("--to", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--ucs2", action="store_true")
    p.add_argument("--mr", type=int, default=0)
    p.set_defaults(func=cmd_pdu_encode)
    p = p_pdu.add_parser("decode")
    p.add_argument("hex")
    p.set_defaults(func=cmd_pdu_decode)

    p_mp = sub.add_parser("mmspdu", help="offline MMS codec").add_subparsers(dest="action", required=True)
    p = p_mp.add_parser("encode")
    p.add_argument("--json", required=True, help="header/body description file, '-' for stdin")
    p.set_defaults(func=cmd_mmspdu_encode)
    p = p_mp.add_parser("decode")
    p.add_argument("hex")
    p.set_defaults(func=cmd_mmspdu_decode)

    p = sub.add_parser("bench", help="latency probe against a running gateway")
    p.add_argument("--endpoint", default="/v1/modem/status")
    p.add_argument("-n", type=int, default=1000)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional["list[str]"] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CellgateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
