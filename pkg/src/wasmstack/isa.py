"""Instruction set, binary encoding and the hexdump text format.

Instructions are one opcode byte, optionally followed by a 32-bit
little-endian immediate (5 bytes total).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

WORD_MASK = 0xFFFFFFFF
ADDR_BITS = 24
MAX_IMAGE_SIZE = 1 << ADDR_BITS
IMM_SIZE = 4


class IsaError(Exception):
    """Base class for encoding/decoding failures."""


class UnknownOpcode(IsaError):
    def __init__(self, byte: int, offset: int):
        super().__init__(f"unknown opcode 0x{byte:02x} at offset 0x{offset:06x}")
        self.byte = byte
        self.offset = offset


class TruncatedImmediate(IsaError):
    def __init__(self, offset: int, available: int):
        super().__init__(
            f"instruction at offset 0x{offset:06x} needs a 4-byte immediate, "
            f"only {available} byte(s) remain")
        self.offset = offset
        self.available = available


class MalformedToken(IsaError):
    def __init__(self, token: str, line: int):
        super().__init__(f"line {line}: malformed hex token {token!r}")
        self.token = token
        self.line = line


class Category(enum.Enum):
    STACK = "stack-manipulation"
    ARITH = "arithmetic-logic"
    COMPARE = "comparison"
    CONTROL = "control-flow"
    MEMIO = "memory-io"


class Opcode(enum.IntEnum):
    PUSH = 0x01
    DROP = 0x05
    DUP = 0x12
    SWAP = 0x13
    OVER = 0x14

    ADD = 0x02
    SUB = 0x03
    MUL = 0x04
    AND = 0x16
    OR = 0x17
    NOT = 0x19

    EQ = 0x09
    LT_S = 0x0A
    GT_S = 0x0B
    EQZ = 0x35

    BR_IF = 0x0E
    JUMP = 0x0F
    CALL = 0x10
    RET = 0x11

    LOAD = 0x1D
    STORE = 0x1E
    PRINT = 0x08
    KEY = 0x1F

    @property
    def mnemonic(self) -> str:
        return self.name.lower()

    @property
    def has_immediate(self) -> bool:
        return self in _WITH_IMMEDIATE

    @property
    def category(self) -> Category:
        return _CATEGORY[self]

    @property
    def is_comparison(self) -> bool:
        return _CATEGORY[self] is Category.COMPARE

    @property
    def is_branch(self) -> bool:
        """True for opcodes whose immediate is a code address."""
        return self in (Opcode.BR_IF, Opcode.JUMP, Opcode.CALL)

    @classmethod
    def from_mnemonic(cls, text: str) -> "Opcode":
        """Case-insensitive lookup; raises KeyError for unknown names."""
        return cls[text.upper()]


_WITH_IMMEDIATE = frozenset({Opcode.PUSH, Opcode.BR_IF, Opcode.JUMP, Opcode.CALL})

_CATEGORY = {}
for _cat, _ops in (
    (Category.STACK, "PUSH DROP DUP SWAP OVER"),
    (Category.ARITH, "ADD SUB MUL AND OR NOT"),
    (Category.COMPARE, "EQ LT_S GT_S EQZ"),
    (Category.CONTROL, "BR_IF JUMP CALL RET"),
    (Category.MEMIO, "LOAD STORE PRINT KEY"),
):
    for _name in _ops.split():
        _CATEGORY[Opcode[_name]] = _cat

OPCODE_BYTES = frozenset(int(op) for op in Opcode)


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    immediate: Optional[int] = None

    def __post_init__(self):
        if self.opcode.has_immediate:
            if self.immediate is None:
                raise ValueError(f"{self.opcode.mnemonic} requires an immediate")
            if not 0 <= self.immediate <= WORD_MASK:
                raise ValueError(f"immediate {self.immediate} is not a 32-bit word")
        elif self.immediate is not None:
            raise ValueError(f"{self.opcode.mnemonic} takes no immediate")

    @property
    def size(self) -> int:
        return 1 + IMM_SIZE if self.opcode.has_immediate else 1

    def __str__(self) -> str:
        if self.immediate is None:
            return self.opcode.mnemonic
        return f"{self.opcode.mnemonic} {self.immediate}"


def instruction_size(opcode: Opcode) -> int:
    return 1 + IMM_SIZE if opcode.has_immediate else 1


def encode_instruction(instr: Instruction) -> bytes:
    if instr.immediate is None:
        return bytes([instr.opcode])
    return bytes([instr.opcode]) + instr.immediate.to_bytes(IMM_SIZE, "little")


def decode_instruction(data: bytes, offset: int = 0) -> Tuple[Instruction, int]:
    """Decode the instruction at ``offset``; return it and the next offset."""
    byte = data[offset]
    if byte not in OPCODE_BYTES:
        raise UnknownOpcode(byte, offset)
    op = Opcode(byte)
    if not op.has_immediate:
        return Instruction(op), offset + 1
    end = offset + 1 + IMM_SIZE
    if end > len(data):
        raise TruncatedImmediate(offset, len(data) - offset - 1)
    imm = int.from_bytes(data[offset + 1:end], "little")
    return Instruction(op, imm), end


def iter_instructions(data: bytes) -> Iterator[Tuple[int, Instruction]]:
    """Yield ``(offset, instruction)`` pairs from the start of ``data``."""
    offset = 0
    while offset < len(data):
        instr, nxt = decode_instruction(data, offset)
        yield offset, instr
        offset = nxt


def encode_program(instrs) -> bytes:
    return b"".join(encode_instruction(i) for i in instrs)


def check_image(image: bytes) -> bytes:
    image = bytes(image)
    if len(image) > MAX_IMAGE_SIZE:
        raise ValueError(f"image of {len(image)} bytes exceeds the 24-bit address space")
    return image


def emit_hexdump(image: bytes) -> str:
    lines = []
    for start in range(0, len(image), 16):
        lines.append(" ".join(f"{b:02x}" for b in image[start:start + 16]) + "\n")
    return "".join(lines)


_HEX_TOKEN = re.compile(r"[0-9a-fA-F]{2}")


def parse_hexdump(text: str) -> bytes:
    out = bytearray()
    for lineno, line in enumerate(text.splitlines(), 1):
        for token in line.split():
            if not _HEX_TOKEN.fullmatch(token):
                raise MalformedToken(token, lineno)
            out.append(int(token, 16))
    return bytes(out)
