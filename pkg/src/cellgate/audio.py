"""G.711 µ-law codec and PCM frame helpers for the voice bridge.

Frames are 20 ms of 8 kHz mono signed 16-bit little-endian PCM: 160 samples,
320 bytes.  µ-law follows the classic segment/mantissa construction in the
14-bit domain (sign, 3-bit exponent, 4-bit mantissa, ones' complement), which
is bit-exact with the usual reference implementations.
"""

from __future__ import annotations

import math
import struct

SAMPLE_RATE = 8000
FRAME_SAMPLES = 160
FRAME_BYTES = FRAME_SAMPLES * 2
FRAME_SECONDS = FRAME_SAMPLES / SAMPLE_RATE

_BIAS = 0x84
_CLIP_14BIT = 8159
_SEG_ENDS = (0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF, 0x1FFF)


def _encode_sample(sample: int) -> int:
    value = sample >> 2
    if value < 0:
        value = -value
        mask = 0x7F
    else:
        mask = 0xFF
    if value > _CLIP_14BIT:
        value = _CLIP_14BIT
    value += _BIAS >> 2
    for seg, end in enumerate(_SEG_ENDS):
        if value <= end:
            return ((seg << 4) | ((value >> (seg + 1)) & 0x0F)) ^ mask
    return 0x7F ^ mask


def _decode_sample(code: int) -> int:
    code = ~code & 0xFF
    magnitude = ((code & 0x0F) << 3) + _BIAS
    magnitude <<= (code & 0x70) >> 4
    return _BIAS - magnitude if code & 0x80 else magnitude - _BIAS


ULAW_DECODE_TABLE = tuple(_decode_sample(c) for c in range(256))
_ULAW_ENCODE_TABLE = tuple(_encode_sample(s) for s in range(-32768, 32768))


def ulaw_encode_sample(sample: int) -> int:
    return _ULAW_ENCODE_TABLE[sample + 32768]


def ulaw_decode_sample(code: int) -> int:
    return ULAW_DECODE_TABLE[code & 0xFF]


def pcm_to_ulaw(pcm: bytes) -> bytes:
    """Encode little-endian 16-bit PCM to one µ-law byte per sample."""
    samples = struct.unpack(f"<{len(pcm) // 2}h", pcm[: len(pcm) // 2 * 2])
    return bytes(_ULAW_ENCODE_TABLE[s + 32768] for s in samples)


def ulaw_to_pcm(data: bytes) -> bytes:
    return struct.pack(f"<{len(data)}h", *(ULAW_DECODE_TABLE[b] for b in data))


def tone_frames(frequency: float, seconds: float, amplitude: int = 12000):
    """Yield successive 20 ms PCM frames of a sine tone."""
    total = int(round(seconds * SAMPLE_RATE / FRAME_SAMPLES))
    phase_step = 2.0 * math.pi * frequency / SAMPLE_RATE
    n = 0
    for _ in range(total):
        samples = [
            int(amplitude * math.sin(phase_step * (n + i))) for i in range(FRAME_SAMPLES)
        ]
        n += FRAME_SAMPLES
        yield struct.pack(f"<{FRAME_SAMPLES}h", *samples)


def signal_energy(pcm: bytes) -> float:
    count = len(pcm) // 2
    if not count:
        return 0.0
    samples = struct.unpack(f"<{count}h", pcm[: count * 2])
    return sum(s * s for s in samples) / count
