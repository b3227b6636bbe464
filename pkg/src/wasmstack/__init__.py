"""Toolchain for a small 32-bit dual-stack CPU with a WebAssembly-flavoured ISA.

Assembler, disassembler and a cycle-accurate emulator with flash and UART
timing models.
"""

from .assembler import assemble, disassemble, scan_labels
from .devices import DeviceBus, FlashModel, UartModel, uart_waveform
from .emulator import Cpu, RunOutcome, StopReason, report_mips, run
from .isa import (
    Instruction, Opcode, decode_instruction, emit_hexdump, encode_instruction,
    parse_hexdump,
)

__all__ = [
    "assemble", "disassemble", "scan_labels",
    "DeviceBus", "FlashModel", "UartModel", "uart_waveform",
    "Cpu", "RunOutcome", "StopReason", "report_mips", "run",
    "Instruction", "Opcode", "decode_instruction", "emit_hexdump",
    "encode_instruction", "parse_hexdump",
]
