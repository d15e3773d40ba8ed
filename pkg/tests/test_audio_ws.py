"""Console audio relay: PCM frames over the per-call WebSocket."""

import time

import httpx
import pytest
from websockets.sync.client import connect as ws_connect

from cellgate.config import GatewayConfig
from cellgate.simulator import ModemSimulator

from live_server import LiveGateway

TOKEN = "ws-test-token-0123456789"


@pytest.fixture
def live(tmp_path):
    sim = ModemSimulator().start()
    config = GatewayConfig(
        transport=sim.transport_config,
        auth_token=TOKEN,
        share_root=str(tmp_path / "share"),
    )
    gateway = LiveGateway(config).start()
    client = httpx.Client(
        base_url=gateway.url, headers={"Authorization": f"Bearer {TOKEN}"}, timeout=10.0
    )
    yield sim, gateway, client
    client.close()
    gateway.stop()
    sim.stop()


def test_ws_rejects_bad_token(live):
    sim, gateway, client = live
    call = client.post("/v1/calls", json={"to": "+336111"}).json()
    url = f"ws://127.0.0.1:{gateway.port}/v1/calls/{call['call_id']}/audio?token=wrong"
    with pytest.raises(Exception):  # handshake refused before accept
        with ws_connect(url) as ws:
            ws.recv(timeout=2)
    client.post(f"/v1/calls/{call['call_id']}/hangup")


def test_ws_relays_pcm_frames(live):
    sim, gateway, client = live
    call = client.post("/v1/calls", json={"to": "+336111"}).json()
    call_id = call["call_id"]
    assert call["state"] == "active"
    url = f"ws://127.0.0.1:{gateway.port}/v1/calls/{call_id}/audio?token={TOKEN}"
    received = b""
    with ws_connect(url) as ws:
        deadline = time.time() + 5
        while len(received) < 320 * 10 and time.time() < deadline:
            frame = ws.recv(timeout=2)
            assert isinstance(frame, bytes)
            assert len(frame) == 320
            received += frame
        # inbound direction: gateway forwards to the sim audio channel
        before = sim.audio_bytes_discarded
        ws.send(b"\x00\x01" * 160)
        deadline = time.time() + 2
        while sim.audio_bytes_discarded <= before and time.time() < deadline:
            time.sleep(0.02)
        assert sim.audio_bytes_discarded > before
    assert len(received) >= 320 * 10
    client.post(f"/v1/calls/{call_id}/hangup")


def test_ws_single_relay_per_call(live):
    sim, gateway, client = live
    call = client.post("/v1/calls", json={"to": "+336111"}).json()
    call_id = call["call_id"]
    url = f"ws://127.0.0.1:{gateway.port}/v1/calls/{call_id}/audio?token={TOKEN}"
    with ws_connect(url) as first:
        first.recv(timeout=2)
        with pytest.raises(Exception):  # second relay refused at handshake
            with ws_connect(url) as second:
                second.recv(timeout=2)
        # first relay still works after the second was refused
        assert first.recv(timeout=2)
    client.post(f"/v1/calls/{call_id}/hangup")
