"""Two-pass assembler and the matching disassembler.

Source dialect::

    :label              ; a label definition stands alone on its line
        push 62         ; '>'
        br_if :label    ; branch targets are absolute byte offsets

Mnemonics are case-insensitive, labels are case-sensitive. Operands are
decimal (optionally negative, stored two's-complement), ``0x`` hex, or a
``:label`` reference.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

from .isa import (
    MAX_IMAGE_SIZE, WORD_MASK, Instruction, Opcode, encode_instruction,
    instruction_size, iter_instructions,
)

SymbolTable = Dict[str, int]

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_LABEL_DEF = re.compile(rf":({_IDENT})")
_LABEL_REF = re.compile(rf":({_IDENT})")
_DECIMAL = re.compile(r"-?[0-9]+")
_HEX = re.compile(r"0[xX][0-9a-fA-F]+")


class AsmError(Exception):
    """An assembly failure tied to a source line."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AsmSyntaxError(AsmError):
    pass


class DuplicateLabel(AsmError):
    def __init__(self, name: str, first_line: int, line: int):
        super().__init__(f"label {name!r} already defined on line {first_line}", line)
        self.name = name
        self.first_line = first_line


class UndefinedLabel(AsmError):
    def __init__(self, name: str, line: int):
        super().__init__(f"undefined label {name!r}", line)
        self.name = name


class UnknownMnemonic(AsmError):
    def __init__(self, mnemonic: str, line: int):
        super().__init__(f"unknown mnemonic {mnemonic!r}", line)
        self.mnemonic = mnemonic


class MissingOperand(AsmError):
    pass


class UnexpectedOperand(AsmError):
    pass


class LiteralOutOfRange(AsmError):
    pass


class TargetInsideInstruction(AsmError):
    """A branch target points into the middle of an instruction."""

    def __init__(self, target: int, source_offset: int):
        super().__init__(
            f"branch at 0x{source_offset:06x} targets 0x{target:06x}, "
            f"which is inside an instruction")
        self.target = target
        self.source_offset = source_offset


class LineKind(enum.Enum):
    BLANK = "blank"
    LABEL = "label-definition"
    INSTRUCTION = "instruction"


@dataclass(frozen=True)
class LabelRef:
    name: str


@dataclass(frozen=True)
class SourceLine:
    lineno: int
    kind: LineKind
    label: Optional[str] = None
    opcode: Optional[Opcode] = None
    mnemonic: str = ""
    operand: Union[int, LabelRef, None] = None
    comment: str = ""


def _parse_literal(text: str, lineno: int) -> int:
    if _HEX.fullmatch(text):
        value = int(text, 16)
        if value > WORD_MASK:
            raise LiteralOutOfRange(f"literal {text} does not fit in 32 bits", lineno)
        return value
    if _DECIMAL.fullmatch(text):
        value = int(text, 10)
        if not -(1 << 31) <= value <= WORD_MASK:
            raise LiteralOutOfRange(f"literal {text} does not fit in 32 bits", lineno)
        return value & WORD_MASK
    raise AsmSyntaxError(f"invalid operand {text!r}", lineno)


def parse_line(text: str, lineno: int) -> SourceLine:
    code, _, comment = text.partition(";")
    tokens = code.split()
    comment = comment.strip()
    if not tokens:
        return SourceLine(lineno, LineKind.BLANK, comment=comment)

    if tokens[0].startswith(":"):
        if len(tokens) != 1:
            raise AsmSyntaxError("a label definition must stand alone on its line", lineno)
        m = _LABEL_DEF.fullmatch(tokens[0])
        if not m:
            raise AsmSyntaxError(f"invalid label name {tokens[0]!r}", lineno)
        return SourceLine(lineno, LineKind.LABEL, label=m.group(1), comment=comment)

    mnemonic = tokens[0]
    try:
        op = Opcode.from_mnemonic(mnemonic)
    except KeyError:
        raise UnknownMnemonic(mnemonic, lineno) from None
    if len(tokens) > 2:
        raise AsmSyntaxError(f"too many operands: {' '.join(tokens[1:])!r}", lineno)

    operand: Union[int, LabelRef, None] = None
    if len(tokens) == 2:
        if not op.has_immediate:
            raise UnexpectedOperand(f"{op.mnemonic} takes no operand", lineno)
        if tokens[1].startswith(":"):
            m = _LABEL_REF.fullmatch(tokens[1])
            if not m:
                raise AsmSyntaxError(f"invalid label reference {tokens[1]!r}", lineno)
            operand = LabelRef(m.group(1))
        else:
            operand = _parse_literal(tokens[1], lineno)
    elif op.has_immediate:
        raise MissingOperand(f"{op.mnemonic} requires an operand", lineno)

    return SourceLine(lineno, LineKind.INSTRUCTION, opcode=op, mnemonic=mnemonic,
                      operand=operand, comment=comment)


def parse_source(source: str) -> List[SourceLine]:
    return [parse_line(text, n) for n, text in enumerate(source.splitlines(), 1)]


def _pass1(lines: List[SourceLine]):
    symbols: SymbolTable = {}
    defined_at: Dict[str, int] = {}
    offsets: List[Optional[int]] = []
    offset = 0
    for line in lines:
        if line.kind is LineKind.LABEL:
            if line.label in symbols:
                raise DuplicateLabel(line.label, defined_at[line.label], line.lineno)
            symbols[line.label] = offset
            defined_at[line.label] = line.lineno
            offsets.append(None)
        elif line.kind is LineKind.INSTRUCTION:
            offsets.append(offset)
            offset += instruction_size(line.opcode)
        else:
            offsets.append(None)
    if offset > MAX_IMAGE_SIZE:
        raise AsmError(f"program is {offset} bytes, exceeding the 24-bit address space")
    return symbols, offsets


def scan_labels(source: str) -> SymbolTable:
    """Pass 1: map every label to the offset of the next emitted instruction."""
    symbols, _ = _pass1(parse_source(source))
    return symbols


def assemble(source: str) -> bytes:
    lines = parse_source(source)
    symbols, offsets = _pass1(lines)

    out = bytearray()
    for line, expected in zip(lines, offsets):
        if line.kind is not LineKind.INSTRUCTION:
            continue
        assert len(out) == expected, (line.lineno, len(out), expected)
        operand = line.operand
        if isinstance(operand, LabelRef):
            if operand.name not in symbols:
                raise UndefinedLabel(operand.name, line.lineno)
            operand = symbols[operand.name]
        out += encode_instruction(Instruction(line.opcode, operand))
    return bytes(out)


def label_name(offset: int) -> str:
    return f"L_{offset:06x}"


def disassemble(image: bytes) -> str:
    """Render ``image`` as source that reassembles to the same bytes.

    Every in-image branch target gets a synthetic ``L_<offset>`` label.
    """
    decoded = list(iter_instructions(image))
    boundaries = {off for off, _ in decoded}
    boundaries.add(len(image))

    targets = set()
    for off, instr in decoded:
        if instr.opcode.is_branch and instr.immediate <= len(image):
            if instr.immediate not in boundaries:
                raise TargetInsideInstruction(instr.immediate, off)
            targets.add(instr.immediate)

    lines = []
    for off, instr in decoded:
        if off in targets:
            lines.append(f":{label_name(off)}")
        if instr.immediate is None:
            lines.append(f"    {instr.opcode.mnemonic}")
        elif instr.opcode.is_branch and instr.immediate in targets:
            lines.append(f"    {instr.opcode.mnemonic} :{label_name(instr.immediate)}")
        else:
            lines.append(f"    {instr.opcode.mnemonic} {instr.immediate}")
    if len(image) in targets:
        lines.append(f":{label_name(len(image))}")
    return "".join(line + "\n" for line in lines)
