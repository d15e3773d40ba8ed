// Pure reducer over the gateway event stream.
//
// The whole UI derives from folding events into ConsoleState, so replaying
// a recorded stream must land on exactly the state live delivery produced.
// Events are deduplicated by seq, which also makes reconnect overlap safe.

import type {
  CallPayload,
  ConsoleState,
  GatewayEvent,
  InboxItem,
  ModemStatusPayload,
  SmsReceivedPayload,
} from "./types.js";

const INBOX_LIMIT = 200;
const TOAST_LIMIT = 20;
const MMS_LIMIT = 50;

export function bars(rssiDbm: number | null): number | "?" {
  if (rssiDbm === null || rssiDbm === undefined) {
    return "?";
  }
  const value = Math.round((rssiDbm + 113) / 12.4);
  return Math.min(5, Math.max(0, value));
}

export function initialState(): ConsoleState {
  return {
    cursor: 0,
    inbox: [],
    call: { callId: null, state: "idle", peer: null, cause: null, sinceSeq: null, startedAt: null },
    modal: { visible: false, callId: null, peer: null },
    status: { bars: "?", registration: "unknown", rssiDbm: null },
    toasts: [],
    mms: [],
  };
}

export function reduce(state: ConsoleState, event: GatewayEvent): ConsoleState {
  if (event.seq <= state.cursor) {
    return state; // replay overlap or duplicate
  }
  const next: ConsoleState = { ...state, cursor: event.seq };
  switch (event.kind) {
    case "sms_received": {
      const p = event.payload as unknown as SmsReceivedPayload;
      const item: InboxItem = {
        from: p.from ?? "unknown",
        text: p.text ?? "",
        at: p.at ?? "",
        unread: p.status !== "read",
      };
      next.inbox = [item, ...state.inbox].slice(0, INBOX_LIMIT);
      return next;
    }
    case "incoming_call": {
      const p = event.payload as unknown as CallPayload;
      next.modal = { visible: true, callId: p.call_id, peer: p.peer };
      next.call = {
        callId: p.call_id,
        state: "ringing",
        peer: p.peer,
        cause: null,
        sinceSeq: null,
        startedAt: null,
      };
      return next;
    }
    case "call_state": {
      const p = event.payload as unknown as CallPayload;
      if (state.call.callId !== null && state.call.callId !== p.call_id && p.state === "ringing") {
        return next; // stale ring for a different call
      }
      const active = p.state === "active";
      const terminated = p.state === "terminated";
      next.call = {
        callId: p.call_id,
        state: p.state,
        peer: p.peer ?? state.call.peer,
        cause: p.cause ?? null,
        sinceSeq: active ? event.seq : terminated ? null : state.call.sinceSeq,
        startedAt: active ? event.at : terminated ? null : state.call.startedAt,
      };
      if ((active || terminated) && state.modal.callId === p.call_id) {
        next.modal = { visible: false, callId: null, peer: null };
      }
      return next;
    }
    case "modem_status": {
      const p = event.payload as unknown as ModemStatusPayload;
      const rssi = p.rssi_dbm ?? null;
      next.status = {
        bars: bars(rssi),
        registration: p.registration ?? state.status.registration,
        rssiDbm: rssi,
      };
      return next;
    }
    case "service_alert": {
      const text = String(event.payload["text"] ?? "service alert");
      next.toasts = [{ kind: "service_alert", text, seq: event.seq }, ...state.toasts].slice(
        0,
        TOAST_LIMIT,
      );
      return next;
    }
    case "mms_notification": {
      const from = String(event.payload["from"] ?? "unknown");
      const size = event.payload["size"];
      next.mms = [
        { kind: "notification" as const, detail: `from ${from} (${size ?? "?"} bytes)`, seq: event.seq },
        ...state.mms,
      ].slice(0, MMS_LIMIT);
      return next;
    }
    case "mms_delivery": {
      const id = String(event.payload["message_id"] ?? "?");
      const status = String(event.payload["status"] ?? "?");
      next.mms = [
        { kind: "delivery" as const, detail: `${id}: ${status}`, seq: event.seq },
        ...state.mms,
      ].slice(0, MMS_LIMIT);
      return next;
    }
    default:
      return next; // unknown kinds still advance the cursor
  }
}

export function replay(events: GatewayEvent[]): ConsoleState {
  let state = initialState();
  for (const event of events) {
    state = reduce(state, event);
  }
  return state;
}
