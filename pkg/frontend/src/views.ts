// DOM rendering: ConsoleState in, innerHTML out.  All modem-affecting
// actions are wired to explicit user gestures in main.ts; nothing here
// issues a request.

import type { ConnectionState, ConsoleState } from "./types.js";

function esc(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

export function renderStatus(state: ConsoleState, connection: ConnectionState): void {
  const el = document.getElementById("status-widget")!;
  const barsText = state.status.bars === "?" ? "?" : "▂▄▅▆█".slice(0, state.status.bars as number) || "·";
  el.innerHTML = `
    <span class="bars" title="${state.status.rssiDbm ?? "?"} dBm">${barsText}</span>
    <span class="reg">${esc(state.status.registration)}</span>
    <span class="conn conn-${connection}">${connection}</span>`;
  const banner = document.getElementById("unauthorized-banner")!;
  banner.style.display = connection === "unauthorized" ? "block" : "none";
}

export function renderInbox(state: ConsoleState): void {
  const el = document.getElementById("inbox-list")!;
  if (!state.inbox.length) {
    el.innerHTML = '<li class="empty">no messages yet</li>';
    return;
  }
  el.innerHTML = state.inbox
    .map(
      (item) => `
      <li class="${item.unread ? "unread" : ""}">
        <span class="from">${esc(item.from)}</span>
        <span class="at">${esc(item.at)}</span>
        <div class="text">${esc(item.text)}</div>
      </li>`,
    )
    .join("");
}

export function renderCall(state: ConsoleState): void {
  const panel = document.getElementById("call-panel")!;
  const call = state.call;
  const duration =
    call.state === "active" && call.startedAt
      ? `${Math.max(0, Math.round(Date.now() / 1000 - call.startedAt))}s`
      : "";
  panel.innerHTML = `
    <div class="call-state call-${call.state}">${esc(call.state)}</div>
    <div class="call-peer">${esc(call.peer ?? "—")}</div>
    <div class="call-extra">${esc(call.cause ?? duration)}</div>`;
  (document.getElementById("btn-hangup") as HTMLButtonElement).disabled =
    call.state !== "active" && call.state !== "ringing";
  (document.getElementById("btn-audio") as HTMLButtonElement).disabled = call.state !== "active";

  const modal = document.getElementById("incoming-modal")!;
  modal.style.display = state.modal.visible ? "flex" : "none";
  if (state.modal.visible) {
    document.getElementById("modal-peer")!.textContent = state.modal.peer ?? "unknown caller";
  }
}

export function renderToasts(state: ConsoleState): void {
  const el = document.getElementById("toast-list")!;
  el.innerHTML = state.toasts
    .map((toast) => `<li class="toast toast-${toast.kind}">${esc(toast.text)}</li>`)
    .join("");
  const mms = document.getElementById("mms-list")!;
  mms.innerHTML = state.mms
    .map((item) => `<li>[${item.kind}] ${esc(item.detail)}</li>`)
    .join("");
}

export function renderAll(state: ConsoleState, connection: ConnectionState): void {
  renderStatus(state, connection);
  renderInbox(state);
  renderCall(state);
  renderToasts(state);
}
