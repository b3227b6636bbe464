"""Peripheral timing models: SPI flash fetch, UART transmitter and receiver."""

from __future__ import annotations

import ast
import collections
from dataclasses import dataclass, field
from typing import Deque, Iterable, List, Optional, Tuple

import numpy as np

from .isa import check_image

DEFAULT_CLOCK_HZ = 27_000_000
DEFAULT_BAUD = 115_200
DEFAULT_DIVISOR = round(DEFAULT_CLOCK_HZ / DEFAULT_BAUD)  # 234
DEFAULT_FLASH_LATENCY = 3
FRAME_BITS = 10


class OutOfImage(Exception):
    def __init__(self, addr: int, size: int):
        super().__init__(f"flash address 0x{addr:06x} is beyond the {size}-byte image")
        self.addr = addr
        self.size = size


class FlashModel:
    """Execute-in-place flash: every byte read costs a fixed number of cycles."""

    def __init__(self, image: bytes, latency: int = DEFAULT_FLASH_LATENCY):
        if latency < 1:
            raise ValueError("flash latency must be at least 1 cycle")
        self.image = check_image(image)
        self.latency = latency

    def __len__(self) -> int:
        return len(self.image)

    def fetch(self, addr: int) -> Tuple[int, int]:
        if not 0 <= addr < len(self.image):
            raise OutOfImage(addr, len(self.image))
        return self.image[addr], self.latency


@dataclass
class UartModel:
    """Cycle-timed UART.

    ``tx_log`` holds ``(byte, start_cycle)`` for every transmitted byte in
    issue order. ``rx_script`` holds ``(byte, available_at_cycle)`` entries
    consumed front to back by :meth:`rx_next`.
    """

    divisor: int = DEFAULT_DIVISOR
    rx_script: Deque[Tuple[int, int]] = field(default_factory=collections.deque)
    tx_log: List[Tuple[int, int]] = field(default_factory=list)
    tx_busy_until: int = 0

    def __post_init__(self):
        if self.divisor < 1:
            raise ValueError("UART divisor must be at least 1")
        self.rx_script = collections.deque(self.rx_script)

    @property
    def frame_cycles(self) -> int:
        return FRAME_BITS * self.divisor

    @property
    def output(self) -> bytes:
        return bytes(b for b, _ in self.tx_log)

    def tx(self, byte: int, now: int) -> int:
        """Latch ``byte`` for transmission; return the cycles the CPU must stall.

        The CPU only waits for a previous frame still on the wire, never for
        its own.
        """
        stall = max(0, self.tx_busy_until - now)
        start = now + stall
        self.tx_busy_until = start + self.frame_cycles
        self.tx_log.append((byte & 0xFF, start))
        self.on_tx(byte & 0xFF)
        return stall

    def on_tx(self, byte: int) -> None:
        """Hook for live output; the base model only logs."""

    def rx_next(self, now: int) -> Optional[Tuple[int, int]]:
        """Pop the next scripted byte as ``(byte, wait_cycles)``, or None when exhausted."""
        if not self.rx_script:
            return None
        byte, at = self.rx_script.popleft()
        return byte, max(0, at - now)

    def feed(self, data: Iterable[int], at: int = 0) -> None:
        for b in data:
            self.rx_script.append((b & 0xFF, at))


def parse_rx_script(text: str) -> List[Tuple[int, int]]:
    """Parse ``<cycle>:<byte>`` lines; the byte is hex (``0x41`` or ``41``) or a quoted char.

    Blank lines and lines starting with ``#`` are ignored.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cycle_text, sep, value = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected <cycle>:<byte>, got {raw!r}")
        try:
            cycle = int(cycle_text.strip(), 0)
        except ValueError:
            raise ValueError(f"line {lineno}: bad cycle {cycle_text!r}") from None
        value = value.strip()
        if value[:1] in ("'", '"'):
            try:
                char = ast.literal_eval(value)
            except (ValueError, SyntaxError):
                raise ValueError(f"line {lineno}: bad character literal {value!r}") from None
            encoded = char.encode("latin-1") if isinstance(char, str) else b""
            if len(encoded) != 1:
                raise ValueError(f"line {lineno}: expected a single character, got {value!r}")
            byte = encoded[0]
        else:
            try:
                byte = int(value, 16)
            except ValueError:
                raise ValueError(f"line {lineno}: bad byte {value!r}") from None
            if not 0 <= byte <= 0xFF:
                raise ValueError(f"line {lineno}: byte {value!r} out of range")
        if cycle < 0:
            raise ValueError(f"line {lineno}: negative cycle")
        entries.append((byte, cycle))
    return entries


def format_rx_script(entries: Iterable[Tuple[int, int]]) -> str:
    return "".join(f"{cycle}:0x{byte:02x}\n" for byte, cycle in entries)


def uart_waveform(byte: int, clock_hz: float = DEFAULT_CLOCK_HZ,
                  divisor: int = DEFAULT_DIVISOR) -> Tuple[List[int], float]:
    """Logic levels of one frame (start, 8 data bits LSB first, stop) and the bit period in seconds."""
    levels = [0] + [(byte >> i) & 1 for i in range(8)] + [1]
    return levels, divisor / clock_hz


def oversample(levels: List[int], samples_per_bit: int) -> np.ndarray:
    """Line level sampled ``samples_per_bit`` times per bit."""
    return np.repeat(np.asarray(levels, dtype=np.uint8), samples_per_bit)


def decode_waveform(line: np.ndarray, samples_per_bit: int) -> int:
    """Recover a byte from an oversampled frame by sampling mid-bit."""
    centres = samples_per_bit // 2 + samples_per_bit * np.arange(FRAME_BITS)
    bits = np.asarray(line)[centres]
    if bits[0] != 0 or bits[-1] != 1:
        raise ValueError("framing error: bad start or stop bit")
    return int(np.dot(bits[1:9].astype(np.int64), 1 << np.arange(8)))


def waveform_csv(byte: int, clock_hz: float = DEFAULT_CLOCK_HZ,
                 divisor: int = DEFAULT_DIVISOR) -> str:
    levels, period = uart_waveform(byte, clock_hz, divisor)
    rows = ["bit_index,level,start_time_us"]
    for i, level in enumerate(levels):
        rows.append(f"{i},{level},{i * period * 1e6:.4f}")
    return "\n".join(rows) + "\n"


@dataclass
class DeviceBus:
    """Everything the CPU talks to besides its own stacks and RAM."""

    flash: FlashModel
    uart: UartModel = field(default_factory=UartModel)

    @classmethod
    def for_image(cls, image: bytes, *, flash_latency: int = DEFAULT_FLASH_LATENCY,
                  divisor: int = DEFAULT_DIVISOR, rx: Iterable[Tuple[int, int]] = (),
                  ) -> "DeviceBus":
        return cls(FlashModel(image, flash_latency), UartModel(divisor, collections.deque(rx)))
