import { describe, expect, it } from "vitest";

import { bars, initialState, reduce, replay } from "../src/reducer.js";
import type { GatewayEvent } from "../src/types.js";

let seqCounter = 0;

function ev(kind: string, payload: Record<string, unknown>, seq?: number): GatewayEvent {
  seqCounter = seq ?? seqCounter + 1;
  return { seq: seqCounter, kind, at: 1700000000 + seqCounter, payload };
}

function sampleStream(): GatewayEvent[] {
  seqCounter = 0;
  return [
    ev("modem_status", { registration: "registered_home", rssi_dbm: -77, ber_class: null }),
    ev("sms_received", { from: "+33699887766", text: "hello", at: "2024-01-01T10:00:00", status: "unread" }),
    ev("incoming_call", { call_id: "c1", direction: "incoming", peer: "+33612345678", state: "ringing", cause: null }),
    ev("call_state", { call_id: "c1", direction: "incoming", peer: "+33612345678", state: "active", cause: null }),
    ev("sms_received", { from: "+33611111111", text: "second", at: "2024-01-01T10:01:00", status: "unread" }),
    ev("service_alert", { service: "surveillance", text: "Motion detected at 10:02", to: "+336" }),
    ev("call_state", { call_id: "c1", direction: "incoming", peer: "+33612345678", state: "terminated", cause: "remote-hangup" }),
    ev("mms_notification", { transaction_id: "t1", from: "+3367", size: 512 }),
    ev("mms_delivery", { message_id: "m1", status: "retrieved", correlated: true }),
    ev("modem_status", { registration: "registered_roaming", rssi_dbm: -51, ber_class: 0 }),
  ];
}

describe("bars mapping", () => {
  it("follows clamp(round((rssi+113)/12.4), 0, 5)", () => {
    expect(bars(-51)).toBe(5);
    expect(bars(-113)).toBe(0);
    expect(bars(-82)).toBe(Math.min(5, Math.max(0, Math.round((-82 + 113) / 12.4))));
    expect(bars(-200)).toBe(0);
    expect(bars(0)).toBe(5);
    expect(bars(null)).toBe("?");
  });
});

describe("reducer", () => {
  it("replay of events 1..n equals live delivery of 1..n", () => {
    const events = sampleStream();
    let live = initialState();
    for (const event of events) {
      live = reduce(live, event);
    }
    const replayed = replay(events);
    expect(replayed).toEqual(live);
  });

  it("is idempotent over duplicated and re-delivered events", () => {
    const events = sampleStream();
    const once = replay(events);
    // duplicate the whole stream (reconnect overlap) and each event twice
    const doubled = events.flatMap((event) => [event, event]);
    const overlapped = replay([...events, ...doubled]);
    expect(overlapped).toEqual(once);
  });

  it("prepends incoming SMS to the inbox unread", () => {
    const state = replay(sampleStream());
    expect(state.inbox.length).toBe(2);
    expect(state.inbox[0].text).toBe("second");
    expect(state.inbox[0].unread).toBe(true);
    expect(state.inbox[1].text).toBe("hello");
  });

  it("raises the answer modal on incoming_call and clears it when the call resolves", () => {
    seqCounter = 0;
    const ring = ev("incoming_call", { call_id: "c9", peer: "+336", state: "ringing", cause: null, direction: "incoming" });
    let state = reduce(initialState(), ring);
    expect(state.modal).toEqual({ visible: true, callId: "c9", peer: "+336" });
    expect(state.call.state).toBe("ringing");

    const active = ev("call_state", { call_id: "c9", peer: "+336", state: "active", cause: null, direction: "incoming" });
    state = reduce(state, active);
    expect(state.modal.visible).toBe(false);
    expect(state.call.state).toBe("active");
    expect(state.call.startedAt).not.toBeNull();

    const done = ev("call_state", { call_id: "c9", peer: "+336", state: "terminated", cause: "local-hangup", direction: "incoming" });
    state = reduce(state, done);
    expect(state.call.state).toBe("terminated");
    expect(state.call.cause).toBe("local-hangup");
    expect(state.call.startedAt).toBeNull();
  });

  it("tracks modem status into the bars widget", () => {
    const state = replay(sampleStream());
    expect(state.status.bars).toBe(5);
    expect(state.status.registration).toBe("registered_roaming");
  });

  it("keeps toasts and mms activity bounded and ordered", () => {
    const state = replay(sampleStream());
    expect(state.toasts[0].text).toContain("Motion detected");
    expect(state.mms.map((m) => m.kind)).toEqual(["delivery", "notification"]);
  });

  it("random interleavings replay deterministically", () => {
    // build a bigger stream with interleaved kinds and replay it twice
    seqCounter = 0;
    const kinds = ["sms_received", "modem_status", "service_alert", "mms_delivery"];
    const events: GatewayEvent[] = [];
    let x = 123456789;
    const rand = () => {
      // deterministic LCG so the test itself is reproducible
      x = (1103515245 * x + 12345) % 2147483648;
      return x / 2147483648;
    };
    for (let i = 0; i < 500; i++) {
      const kind = kinds[Math.floor(rand() * kinds.length)];
      events.push(
        ev(kind, {
          from: `+33${Math.floor(rand() * 1e9)}`,
          text: `msg ${i}`,
          at: `t${i}`,
          status: rand() > 0.5 ? "unread" : "read",
          registration: "registered_home",
          rssi_dbm: Math.floor(rand() * 63) - 113,
          message_id: `m${i}`,
        }),
      );
    }
    expect(replay(events)).toEqual(replay(events));
    expect(replay([...events, ...events])).toEqual(replay(events));
  });
});
