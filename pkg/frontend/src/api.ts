// Thin fetch wrapper for the gateway REST API.

import type { ShareItem, SurveillanceForm } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    private readonly token: string,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    let payload: BodyInit | undefined;
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, { method, headers, body: payload });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: unknown };
        if (parsed.detail) {
          detail = typeof parsed.detail === "string" ? parsed.detail : JSON.stringify(parsed.detail);
        }
      } catch {
        // keep statusText
      }
      throw new ApiError(response.status, detail);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  sendSms(to: string, text: string) {
    return this.request<{ id: number; segments: number }>("POST", "/v1/sms", { to, text });
  }

  listInbox() {
    return this.request<{ messages: Array<Record<string, unknown>> }>("GET", "/v1/sms?box=inbox");
  }

  modemStatus() {
    return this.request<{ registration: string; rssi_dbm: number | null }>(
      "GET",
      "/v1/modem/status",
    );
  }

  services() {
    return this.request<{ services: string[] }>("GET", "/v1/services");
  }

  dial(to: string) {
    return this.request<{ call_id: string; state: string }>("POST", "/v1/calls", { to });
  }

  answer(callId: string) {
    return this.request<{ state: string }>("POST", `/v1/calls/${callId}/answer`);
  }

  hangup(callId: string) {
    return this.request<{ state: string }>("POST", `/v1/calls/${callId}/hangup`);
  }

  phonebook(prefix?: string) {
    const suffix = prefix ? `?prefix=${encodeURIComponent(prefix)}` : "";
    return this.request<{ entries: Array<{ index: number; number: string; text: string }> }>(
      "GET",
      `/v1/phonebook${suffix}`,
    );
  }

  phonebookAdd(number: string, text: string) {
    return this.request<{ written: boolean }>("PUT", "/v1/phonebook", { number, text });
  }

  shareList(owner: string) {
    return this.request<{ entries: ShareItem[] }>("GET", `/v1/share/${owner}`);
  }

  async shareUpload(owner: string, path: string, file: File): Promise<ShareItem> {
    const response = await fetch(`${this.baseUrl}/v1/share/${owner}/${path}`, {
      method: "PUT",
      headers: {
        Authorization: `Bearer ${this.token}`,
        "Content-Type": file.type || "application/octet-stream",
      },
      body: file,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as ShareItem;
  }

  getSurveillance() {
    return this.request<SurveillanceForm>("GET", "/v1/services/surveillance");
  }

  putSurveillance(form: SurveillanceForm) {
    return this.request<SurveillanceForm>("PUT", "/v1/services/surveillance", form);
  }

  audioSocketUrl(callId: string): string {
    const base = this.baseUrl || window.location.origin;
    const ws = base.replace(/^http/, "ws");
    return `${ws}/v1/calls/${callId}/audio?token=${encodeURIComponent(this.token)}`;
  }
}
