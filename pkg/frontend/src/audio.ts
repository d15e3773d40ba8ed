// Browser audio leg of a call: plays the gateway's 16-bit 8 kHz PCM frames
// and streams microphone audio back, downsampled to 8 kHz.  Without mic
// permission the relay stays listen-only.

export function pcm16ToFloat(frame: Int16Array) {
  const out = new Float32Array(frame.length);
  for (let i = 0; i < frame.length; i++) {
    out[i] = frame[i] / 32768;
  }
  return out;
}

export function floatToPcm16(samples: Float32Array) {
  const out = new Int16Array(samples.length);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]));
    out[i] = Math.round(clamped * 32767);
  }
  return out;
}

// Linear-interpolation resample to 8 kHz.
export function downsampleTo8k(samples: Float32Array, sourceRate: number) {
  const ratio = sourceRate / 8000;
  const length = sourceRate === 8000 ? samples.length : Math.floor(samples.length / ratio);
  const out = new Float32Array(length);
  if (sourceRate === 8000) {
    out.set(samples);
    return out;
  }
  for (let i = 0; i < length; i++) {
    const position = i * ratio;
    const base = Math.floor(position);
    const frac = position - base;
    const a = samples[base] ?? 0;
    const b = samples[base + 1] ?? a;
    out[i] = a + (b - a) * frac;
  }
  return out;
}

const CAPTURE_WORKLET = `
class PcmCaptureProcessor extends AudioWorkletProcessor {
  process(inputs) {
    const ch0 = inputs[0] && inputs[0][0];
    if (ch0 && ch0.length) {
      const copy = new Float32Array(ch0.length);
      copy.set(ch0);
      this.port.postMessage(copy, [copy.buffer]);
    }
    return true;
  }
}
registerProcessor('pcm-capture', PcmCaptureProcessor);
`;

export class CallAudio {
  private ws: WebSocket | null = null;
  private context: AudioContext | null = null;
  private playCursor = 0;
  private micStream: MediaStream | null = null;
  private muted = false;
  listenOnly = false;
  framesIn = 0;
  framesOut = 0;

  constructor(private readonly url: string) {}

  async start(): Promise<void> {
    this.context = new AudioContext();
    this.playCursor = this.context.currentTime;
    this.ws = new WebSocket(this.url);
    this.ws.binaryType = "arraybuffer";
    this.ws.onmessage = (message) => {
      if (message.data instanceof ArrayBuffer) {
        this.playFrame(new Int16Array(message.data));
      }
    };
    await this.startMic();
  }

  private playFrame(frame: Int16Array): void {
    const ctx = this.context;
    if (!ctx || frame.length === 0) {
      return;
    }
    this.framesIn += 1;
    const buffer = ctx.createBuffer(1, frame.length, 8000);
    buffer.copyToChannel(pcm16ToFloat(frame), 0);
    const source = ctx.createBufferSource();
    source.buffer = buffer;
    source.connect(ctx.destination);
    const now = ctx.currentTime;
    if (this.playCursor < now) {
      this.playCursor = now + 0.02; // fell behind: restart slightly ahead
    }
    source.start(this.playCursor);
    this.playCursor += buffer.duration;
  }

  private async startMic(): Promise<void> {
    const ctx = this.context;
    if (!ctx) {
      return;
    }
    try {
      this.micStream = await navigator.mediaDevices.getUserMedia({ audio: true });
    } catch {
      this.listenOnly = true;
      return;
    }
    const workletUrl = URL.createObjectURL(
      new Blob([CAPTURE_WORKLET], { type: "application/javascript" }),
    );
    await ctx.audioWorklet.addModule(workletUrl);
    const source = ctx.createMediaStreamSource(this.micStream);
    const capture = new AudioWorkletNode(ctx, "pcm-capture");
    let pending = new Float32Array(0);
    capture.port.onmessage = (message: MessageEvent<Float32Array>) => {
      if (this.muted || !this.ws || this.ws.readyState !== WebSocket.OPEN) {
        return;
      }
      const down = downsampleTo8k(message.data, ctx.sampleRate);
      const merged = new Float32Array(pending.length + down.length);
      merged.set(pending);
      merged.set(down, pending.length);
      let offset = 0;
      while (merged.length - offset >= 160) {
        const frame = floatToPcm16(merged.subarray(offset, offset + 160));
        this.ws.send(frame.buffer);
        this.framesOut += 1;
        offset += 160;
      }
      pending = merged.slice(offset);
    };
    source.connect(capture);
  }

  setMuted(muted: boolean): void {
    this.muted = muted;
  }

  stop(): void {
    this.ws?.close();
    this.ws = null;
    this.micStream?.getTracks().forEach((track) => track.stop());
    this.micStream = null;
    void this.context?.close();
    this.context = null;
  }
}
