"""Saturating fixed-point arithmetic for the emulated core.

Membrane potentials and synaptic currents use a signed Q1.7.10 layout:
1 sign bit, 7 integer bits, 10 fractional bits, stored as an 18-bit
two's-complement integer.  The representable range is [-128.0, +127.999]
in steps of 2**-10; the raw integer 1024 is 1.0.  Synaptic weights are
plain signed 8-bit integers with no fractional part of their own — they
are aligned with the Q1.7.10 scale by a left shift when injected.

All functions here operate on plain Python ints (raw register values)
and never overflow silently: results clamp to the representable range,
matching the hardware's saturating adders.
"""

from __future__ import annotations

FRAC_BITS = 10
ONE = 1 << FRAC_BITS  # 1.0 in raw units

RAW_MIN = -(1 << 17)  # -131072 == -128.0
RAW_MAX = (1 << 17) - 1  # +131071 == +127.9990234375

W_MIN = -128
W_MAX = 127

MAX_SHIFT = FRAC_BITS


def saturate(raw: int) -> int:
    """Clamp a wide intermediate value into the 18-bit signed range."""
    if raw > RAW_MAX:
        return RAW_MAX
    if raw < RAW_MIN:
        return RAW_MIN
    return raw


def q_add(a: int, b: int) -> int:
    """Saturating addition of two raw Q1.7.10 values."""
    return saturate(a + b)


def q_sub(a: int, b: int) -> int:
    """Saturating subtraction of two raw Q1.7.10 values."""
    return saturate(a - b)


def weight_to_current(weight: int, shift: int = MAX_SHIFT) -> int:
    """Align a signed 8-bit weight with the Q1.7.10 current scale.

    ``shift`` selects the injection gain: at the default shift of 10 a
    weight of +1 contributes exactly +1.0 of synaptic current, and the
    extreme weight -128 maps to the most negative representable value.
    Shifts up to 10 cannot overflow the register, but the result is
    saturated anyway to keep the contract explicit.
    """
    if not W_MIN <= weight <= W_MAX:
        raise ValueError(f"weight {weight} outside signed 8-bit range")
    if not 0 <= shift <= MAX_SHIFT:
        raise ValueError(f"shift {shift} outside [0, {MAX_SHIFT}]")
    return saturate(weight << shift)


def to_real(raw: int) -> float:
    """Raw register value -> real number (exact: dyadic rational)."""
    return raw / ONE


def from_real(value: float) -> int:
    """Real number -> nearest raw Q1.7.10 value, ties away from zero."""
    scaled = value * ONE
    if scaled >= 0:
        raw = int(scaled + 0.5)
    else:
        raw = -int(-scaled + 0.5)
    return saturate(raw)


def quantize_weight(value: float) -> int:
    """Real number -> nearest signed 8-bit weight, ties away from zero."""
    if value >= 0:
        w = int(value + 0.5)
    else:
        w = -int(-value + 0.5)
    if w > W_MAX:
        return W_MAX
    if w < W_MIN:
        return W_MIN
    return w
