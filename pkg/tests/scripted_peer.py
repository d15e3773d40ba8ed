"""A scripted line-oriented peer for driving the AT engine in tests."""

import threading


class ScriptedModem:
    """Answers each received command line via a handler callback.

    handler(line: str) -> list of response strings; the special entries
    "<prompt>" and "<none>" emit the bare prompt / nothing.  Payload bytes
    (after a prompt) are delivered to payload_handler(body: bytes) -> lines.
    """

    def __init__(self, transport, handler, payload_handler=None, echo=False):
        self.transport = transport
        self.handler = handler
        self.payload_handler = payload_handler
        self.echo = echo
        self.received = []
        self.payloads = []
        self._expect_payload = False
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def send_line(self, line: str):
        self.transport.write(b"\r\n" + line.encode("latin-1") + b"\r\n")

    def _emit(self, lines):
        for line in lines:
            if line == "<prompt>":
                self.transport.write(b"\r\n> ")
                self._expect_payload = True
            elif line == "<none>":
                pass
            else:
                self.transport.write(b"\r\n" + line.encode("latin-1") + b"\r\n")

    def _run(self):
        buf = b""
        while True:
            data = self.transport.read()
            if not data:
                return
            if self.echo:
                self.transport.write(data)
            buf += data
            while True:
                if self._expect_payload:
                    zi = buf.find(b"\x1a")
                    ei = buf.find(b"\x1b")
                    if zi < 0 and ei < 0:
                        break
                    if ei >= 0 and (zi < 0 or ei < zi):
                        body, buf = buf[:ei], buf[ei + 1:]
                        self._expect_payload = False
                        self.payloads.append((body, True))
                        self._emit(["OK"])
                    else:
                        body, buf = buf[:zi], buf[zi + 1:]
                        self._expect_payload = False
                        self.payloads.append((body, False))
                        self._emit(self.payload_handler(body) if self.payload_handler else ["OK"])
                    continue
                idx = buf.find(b"\r")
                if idx < 0:
                    break
                line, buf = buf[:idx], buf[idx + 1:]
                text = line.decode("latin-1").strip()
                if not text:
                    continue
                self.received.append(text)
                self._emit(self.handler(text))
