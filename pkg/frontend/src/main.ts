// Console bootstrap: wire the event stream into the reducer, the reducer
// into the views, and the forms into the API.  Every modem-affecting call
// sits behind a button handler - the event loop itself only renders.

import { ApiClient } from "./api.js";
import { CallAudio } from "./audio.js";
import { initialState, reduce } from "./reducer.js";
import { EventStream } from "./sse.js";
import type { ConnectionState, ConsoleState, GatewayEvent } from "./types.js";
import { renderAll } from "./views.js";

interface ConsoleConfig {
  apiBase: string;
}

let state: ConsoleState = initialState();
let connection: ConnectionState = "connecting";
let api: ApiClient;
let stream: EventStream;
let audio: CallAudio | null = null;

function apply(event: GatewayEvent): void {
  state = reduce(state, event);
  renderAll(state, connection);
  if (audio && state.call.state !== "active") {
    audio.stop();
    audio = null;
    setAudioButton(false);
  }
}

function onConnection(next: ConnectionState): void {
  connection = next;
  renderAll(state, connection);
}

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function flash(text: string): void {
  const el = byId<HTMLElement>("flash");
  el.textContent = text;
  el.style.display = "block";
  setTimeout(() => (el.style.display = "none"), 4000);
}

function setAudioButton(active: boolean): void {
  byId<HTMLButtonElement>("btn-audio").textContent = active ? "stop audio" : "audio";
}

async function refreshPhonebook(prefix?: string): Promise<void> {
  try {
    const result = await api.phonebook(prefix);
    byId<HTMLElement>("phonebook-list").innerHTML = result.entries
      .map((entry) => `<li>#${entry.index} <b>${entry.text}</b> ${entry.number}</li>`)
      .join("");
  } catch (err) {
    flash(`phonebook: ${err}`);
  }
}

async function refreshShares(): Promise<void> {
  const owner = byId<HTMLInputElement>("share-owner").value || "default";
  try {
    const result = await api.shareList(owner);
    byId<HTMLElement>("share-list").innerHTML = result.entries
      .map((entry) => `<li>${entry.path} <span class="size">${entry.size} B</span></li>`)
      .join("");
  } catch (err) {
    flash(`share: ${err}`);
  }
}

function wireForms(): void {
  byId<HTMLFormElement>("compose-form").addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    const to = byId<HTMLInputElement>("compose-to").value;
    const text = byId<HTMLInputElement>("compose-text").value;
    api
      .sendSms(to, text)
      .then((result) => flash(`sent (${result.segments} segment${result.segments > 1 ? "s" : ""})`))
      .catch((err) => flash(`send failed: ${err}`));
  });

  byId<HTMLFormElement>("dial-form").addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    const to = byId<HTMLInputElement>("dial-to").value;
    api.dial(to).catch((err) => flash(`dial failed: ${err}`));
  });

  byId<HTMLButtonElement>("btn-hangup").addEventListener("click", () => {
    if (state.call.callId) {
      api.hangup(state.call.callId).catch((err) => flash(`hangup failed: ${err}`));
    }
  });

  byId<HTMLButtonElement>("modal-answer").addEventListener("click", () => {
    const callId = state.modal.callId;
    if (callId) {
      api.answer(callId).catch((err) => flash(`answer failed: ${err}`));
    }
  });

  byId<HTMLButtonElement>("modal-reject").addEventListener("click", () => {
    const callId = state.modal.callId;
    if (callId) {
      api.hangup(callId).catch((err) => flash(`reject failed: ${err}`));
    }
  });

  byId<HTMLButtonElement>("btn-audio").addEventListener("click", async () => {
    if (audio) {
      audio.stop();
      audio = null;
      setAudioButton(false);
      return;
    }
    if (!state.call.callId || state.call.state !== "active") {
      return;
    }
    audio = new CallAudio(api.audioSocketUrl(state.call.callId));
    try {
      await audio.start();
      setAudioButton(true);
      if (audio.listenOnly) {
        flash("no microphone permission: listen-only");
      }
    } catch (err) {
      flash(`audio failed: ${err}`);
      audio = null;
    }
  });

  byId<HTMLButtonElement>("btn-mute").addEventListener("click", (clickEvent) => {
    const button = clickEvent.currentTarget as HTMLButtonElement;
    const muted = button.dataset.muted !== "1";
    button.dataset.muted = muted ? "1" : "0";
    button.textContent = muted ? "unmute" : "mute";
    audio?.setMuted(muted);
  });

  byId<HTMLFormElement>("phonebook-form").addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    const number = byId<HTMLInputElement>("pb-number").value;
    const text = byId<HTMLInputElement>("pb-text").value;
    api
      .phonebookAdd(number, text)
      .then(() => refreshPhonebook())
      .catch((err) => flash(`add failed: ${err}`));
  });

  byId<HTMLInputElement>("pb-find").addEventListener("input", (inputEvent) => {
    const prefix = (inputEvent.currentTarget as HTMLInputElement).value;
    void refreshPhonebook(prefix || undefined);
  });

  byId<HTMLFormElement>("share-form").addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    const owner = byId<HTMLInputElement>("share-owner").value || "default";
    const files = byId<HTMLInputElement>("share-file").files;
    if (!files || !files.length) {
      return;
    }
    api
      .shareUpload(owner, files[0].name, files[0])
      .then(() => refreshShares())
      .catch((err) => flash(`upload failed: ${err}`));
  });

  byId<HTMLButtonElement>("share-refresh").addEventListener("click", () => void refreshShares());

  byId<HTMLFormElement>("surveillance-form").addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    api
      .putSurveillance({
        alert_number: byId<HTMLInputElement>("surv-number").value,
        enabled: byId<HTMLInputElement>("surv-enabled").checked,
        message_template: byId<HTMLInputElement>("surv-template").value,
      })
      .then(() => flash("surveillance saved"))
      .catch((err) => flash(`save failed: ${err}`));
  });
}

async function boot(): Promise<void> {
  let config: ConsoleConfig = { apiBase: "" };
  try {
    const response = await fetch("/console/config.json");
    if (response.ok) {
      config = (await response.json()) as ConsoleConfig;
    }
  } catch {
    // same-origin default
  }
  const saved = localStorage.getItem("cellgate-token") ?? "";
  byId<HTMLInputElement>("token-input").value = saved;
  byId<HTMLFormElement>("token-form").addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    localStorage.setItem("cellgate-token", byId<HTMLInputElement>("token-input").value);
    window.location.reload();
  });
  if (!saved) {
    onConnection("unauthorized");
    return;
  }
  api = new ApiClient(config.apiBase, saved);
  stream = new EventStream(config.apiBase, saved, apply, onConnection);
  stream.start(null);
  wireForms();
  renderAll(state, connection);
  void refreshPhonebook();
  try {
    const survey = await api.getSurveillance();
    byId<HTMLInputElement>("surv-number").value = survey.alert_number;
    byId<HTMLInputElement>("surv-enabled").checked = survey.enabled;
    byId<HTMLInputElement>("surv-template").value = survey.message_template;
  } catch {
    // leave the form blank when the gateway has no surveillance config yet
  }
  setInterval(() => renderAll(state, connection), 1000); // tick call duration
}

void boot();
