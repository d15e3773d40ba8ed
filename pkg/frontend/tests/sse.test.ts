import { describe, expect, it } from "vitest";

import { decodeEvent, parseSse } from "../src/sse.js";

describe("SSE chunk parser", () => {
  it("parses a complete frame", () => {
    const { frames, rest } = parseSse(
      'id: 7\nevent: sms_received\ndata: {"seq":7,"kind":"sms_received","at":1,"payload":{}}\n\n',
    );
    expect(rest).toBe("");
    expect(frames).toHaveLength(1);
    expect(frames[0].id).toBe(7);
    expect(frames[0].event).toBe("sms_received");
  });

  it("keeps partial frames in the remainder", () => {
    const { frames, rest } = parseSse("id: 1\nevent: call_state\ndata: {\"se");
    expect(frames).toHaveLength(0);
    expect(rest).toContain("call_state");
  });

  it("reassembles across chunk boundaries", () => {
    const whole = 'id: 2\nevent: x\ndata: {"seq":2,"kind":"x","at":0,"payload":{}}\n\n';
    for (let split = 1; split < whole.length - 1; split += 7) {
      const first = parseSse(whole.slice(0, split));
      const second = parseSse(first.rest + whole.slice(split));
      const frames = [...first.frames, ...second.frames];
      expect(frames).toHaveLength(1);
      expect(frames[0].id).toBe(2);
    }
  });

  it("skips comments and keep-alives", () => {
    const { frames, rest } = parseSse(": connected\n\n: keep-alive\n\nid: 3\nevent: y\ndata: {}\n\n");
    expect(rest).toBe("");
    expect(frames).toHaveLength(1);
    expect(frames[0].event).toBe("y");
  });

  it("handles multiple frames per chunk in order", () => {
    const chunk =
      "id: 1\nevent: a\ndata: {}\n\n" +
      "id: 2\nevent: b\ndata: {}\n\n" +
      "id: 3\nevent: c\ndata: {}\n\n";
    const { frames } = parseSse(chunk);
    expect(frames.map((f) => f.id)).toEqual([1, 2, 3]);
  });
});

describe("decodeEvent", () => {
  it("accepts well-formed gateway events", () => {
    const event = decodeEvent({
      id: 5,
      event: "sms_received",
      data: '{"seq":5,"kind":"sms_received","at":1.5,"payload":{"text":"hi"}}',
    });
    expect(event?.seq).toBe(5);
    expect(event?.payload["text"]).toBe("hi");
  });

  it("rejects malformed data without throwing", () => {
    expect(decodeEvent({ id: null, event: "x", data: "not json" })).toBeNull();
    expect(decodeEvent({ id: null, event: "x", data: '{"no":"seq"}' })).toBeNull();
    expect(decodeEvent({ id: null, event: "", data: "" })).toBeNull();
  });
});
