"""The two purification strategies as control maps applied after each step."""

import enum
import math

from .bloch import BlochState, ito_step


class Protocol(enum.Enum):
    NO_FEEDBACK = "none"
    JACOBS = "jacobs"

    @classmethod
    def parse(cls, value):
        """Accept a Protocol or its CLI name (``"none"`` / ``"jacobs"``)."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(repr(p.value) for p in cls)
            raise ValueError(f"unknown protocol {value!r}; expected one of {names}") from None

    @property
    def feedback(self):
        return self is Protocol.JACOBS


def apply_control(kind, state):
    """Identity for no feedback; rotation onto the +x axis for Jacobs feedback."""
    kind = Protocol.parse(kind)
    if kind is Protocol.NO_FEEDBACK:
        return state
    r2 = 1.0 - state.gap
    return BlochState(math.sqrt(max(r2, 0.0)), 0.0, gap_z=1.0, gap=state.gap)


def jacobs_purity(t):
    """Purity under ideal continuous feedback from the maximally mixed state."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return 1.0 - 0.5 * math.exp(-4.0 * t)


def simulated_jacobs_step(state, dt, dW, step=ito_step):
    """Integrator step followed by the feedback rotation.

    ``step`` defaults to the Euler-Maruyama update; pass
    :func:`qpurify.bloch.measurement_step` for the high-purity-safe map.
    """
    return apply_control(Protocol.JACOBS, step(state, dt, dW))
