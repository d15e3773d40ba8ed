// Wire types of the gateway API consumed by the console.

export interface GatewayEvent {
  seq: number;
  kind: string;
  at: number;
  payload: Record<string, unknown>;
}

export interface SmsReceivedPayload {
  from: string;
  text: string;
  at: string;
  status: string;
  index?: number;
}

export interface CallPayload {
  call_id: string;
  direction: string;
  peer: string | null;
  state: string;
  cause: string | null;
  incoming_info?: Record<string, unknown> | null;
}

export interface ModemStatusPayload {
  registration: string;
  rssi_dbm: number | null;
  ber_class: number | null;
}

export interface InboxItem {
  from: string;
  text: string;
  at: string;
  unread: boolean;
}

export interface CallPanel {
  callId: string | null;
  state: string; // idle | ringing | active | terminated
  peer: string | null;
  cause: string | null;
  sinceSeq: number | null; // seq of the event that made the call active
  startedAt: number | null;
}

export interface StatusWidget {
  bars: number | "?";
  registration: string;
  rssiDbm: number | null;
}

export interface AnswerModal {
  visible: boolean;
  callId: string | null;
  peer: string | null;
}

export interface Toast {
  kind: string;
  text: string;
  seq: number;
}

export interface MmsActivity {
  kind: "notification" | "delivery";
  detail: string;
  seq: number;
}

export interface ConsoleState {
  cursor: number; // last applied event seq
  inbox: InboxItem[];
  call: CallPanel;
  modal: AnswerModal;
  status: StatusWidget;
  toasts: Toast[];
  mms: MmsActivity[];
}

export interface ShareItem {
  owner: string;
  path: string;
  size: number;
  content_type: string;
  updated_at: number;
}

export interface SurveillanceForm {
  alert_number: string;
  enabled: boolean;
  message_template: string;
}

export type ConnectionState = "connecting" | "live" | "reconnecting" | "unauthorized" | "stopped";
