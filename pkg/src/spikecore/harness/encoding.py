"""Rate encoding of pixel intensities into spike trains.

A pixel of intensity ``v`` (0..15) on input channel ``c`` becomes
``spikes_per_level * v`` spikes spread evenly over a 32-step window:
spike ``i`` lands at step ``floor(i * 32 / count)``.  With the default
``spikes_per_level=2``, intensity 4 yields 8 spikes at steps
0, 4, 8, ..., 28 and intensity 15 yields 30 spikes, all inside
steps 0..31.  Intensity 0 yields no spikes.
"""

from __future__ import annotations

from ..network import SpikeEvent

WINDOW_STEPS = 32
LEVELS = 16


def rate_encode(value: int, channel: int, *, spikes_per_level: int = 2,
                window: int = WINDOW_STEPS, offset: int = 0) -> list[SpikeEvent]:
    """Encode one pixel; events are returned in ascending time order."""
    if not 0 <= value < LEVELS:
        raise ValueError(f"pixel value {value} outside 0..{LEVELS - 1}")
    if channel < 0:
        raise ValueError(f"channel must be non-negative, got {channel}")
    count = spikes_per_level * value
    if count > window:
        raise ValueError(
            f"{count} spikes do not fit a {window}-step window; "
            f"lower spikes_per_level"
        )
    return [
        SpikeEvent(offset + (i * window) // count, channel)
        for i in range(count)
    ]


def rate_encode_sample(pixels, *, spikes_per_level: int = 2,
                       window: int = WINDOW_STEPS, offset: int = 0) -> list[SpikeEvent]:
    """Encode a whole sample (row-major pixel vector), channel i = pixel i.

    The merged stream is sorted by time then channel, ready for
    ``Network.run``.
    """
    events: list[SpikeEvent] = []
    for channel, value in enumerate(pixels):
        events.extend(
            rate_encode(int(value), channel, spikes_per_level=spikes_per_level,
                        window=window, offset=offset)
        )
    events.sort()
    return events
