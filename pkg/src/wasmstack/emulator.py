"""Cycle-accurate model of the dual-stack CPU.

One call to :meth:`Cpu.step` is one clock cycle (wait states may be
collapsed when ``fast_wait`` is on; the cycle counter ends up the same).
With the default 3-cycle flash latency the per-instruction costs are::

    single-byte op      FETCH, FETCH_WAIT_LOW, FETCH_WAIT_HIGH, DECODE, EXECUTE   5
    op + immediate      ... DECODE, FETCH_IMM x 12, EXECUTE                       17
    comparison          ... EXECUTE, ALU_WAIT                                     6

plus UART_WAIT / KEY_WAIT cycles for PRINT and KEY.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional

from .devices import DeviceBus, OutOfImage
from .isa import (
    OPCODE_BYTES, WORD_MASK, Instruction, Opcode, check_image,
)

STACK_DEPTH = 8
RAM_SIZE = 1024
DEFAULT_MAX_CYCLES = 100_000_000


class Fsm(enum.Enum):
    FETCH = "FETCH"
    FETCH_WAIT_LOW = "FETCH_WAIT_LOW"
    FETCH_WAIT_HIGH = "FETCH_WAIT_HIGH"
    DECODE = "DECODE"
    FETCH_IMM = "FETCH_IMM"
    EXECUTE = "EXECUTE"
    ALU_WAIT = "ALU_WAIT"
    UART_WAIT = "UART_WAIT"
    KEY_WAIT = "KEY_WAIT"
    HALTED = "HALTED"
    TRAPPED = "TRAPPED"


class Trap(Exception):
    """Raised inside the core; :meth:`Cpu.step` turns it into the TRAPPED state."""

    def __init__(self, message: str, kind: Optional[str] = None):
        super().__init__(message)
        self.kind = kind or type(self).__name__


class StackOverflow(Trap):
    pass


class StackUnderflow(Trap):
    pass


class RamOutOfBounds(Trap):
    pass


class RamMisaligned(Trap):
    pass


class JumpOutOfImage(Trap):
    pass


class InputExhausted(Trap):
    def __init__(self):
        super().__init__("input exhausted", "InputExhausted")


def to_signed(v: int) -> int:
    return v - (1 << 32) if v & 0x80000000 else v


@dataclass
class StackBank:
    """Eight 32-bit slots addressed by a 3-bit pointer that wraps.

    ``sp`` indexes the current top. ``depth`` is bookkeeping only: in the
    default (faithful) mode it may leave 0..8 and nothing happens.
    """

    name: str = "data"
    strict: bool = False
    slots: List[int] = field(default_factory=lambda: [0] * STACK_DEPTH)
    sp: int = STACK_DEPTH - 1
    depth: int = 0

    def push(self, value: int) -> None:
        if self.strict and self.depth >= STACK_DEPTH:
            raise StackOverflow(f"{self.name} stack overflow")
        self.sp = (self.sp + 1) % STACK_DEPTH
        self.slots[self.sp] = value & WORD_MASK
        self.depth += 1

    def pop(self) -> int:
        if self.strict and self.depth <= 0:
            raise StackUnderflow(f"{self.name} stack underflow")
        value = self.slots[self.sp]
        self.sp = (self.sp - 1) % STACK_DEPTH
        self.depth -= 1
        return value

    def peek(self) -> int:
        if self.strict and self.depth <= 0:
            raise StackUnderflow(f"{self.name} stack underflow")
        return self.slots[self.sp]

    def poke(self, value: int) -> None:
        """Overwrite the top slot without moving the pointer."""
        if self.strict and self.depth <= 0:
            raise StackUnderflow(f"{self.name} stack underflow")
        self.slots[self.sp] = value & WORD_MASK

    def items(self) -> List[int]:
        """Live entries, bottom first (at most eight)."""
        n = max(0, min(self.depth, STACK_DEPTH))
        return [self.slots[(self.sp - i) % STACK_DEPTH] for i in reversed(range(n))]


@dataclass
class MachineState:
    pc: int = 0
    dstack: StackBank = field(default_factory=lambda: StackBank("data"))
    rstack: StackBank = field(default_factory=lambda: StackBank("return"))
    ram: bytearray = field(default_factory=lambda: bytearray(RAM_SIZE))
    fsm: Fsm = Fsm.FETCH
    cycle: int = 0
    retired: int = 0
    # latched by the fetch/decode path
    instr_pc: int = 0
    opcode_byte: int = 0
    opcode: Optional[Opcode] = None
    imm: int = 0
    imm_index: int = 0
    wait: int = 0
    temp_alu: int = 0
    key_byte: Optional[int] = None


class StopReason(enum.Enum):
    CYCLE_LIMIT = "cycle-limit"
    BREAKPOINT = "breakpoint"
    TRAP = "trap"
    HALTED = "halted"


@dataclass(frozen=True)
class TrapInfo:
    kind: str
    message: str
    pc: int
    opcode: Optional[int]
    cycle: int

    def __str__(self) -> str:
        op = "--" if self.opcode is None else f"0x{self.opcode:02x}"
        return f"{self.kind}: {self.message} (pc=0x{self.pc:06x} opcode={op} cycle={self.cycle})"


@dataclass
class RunOutcome:
    state: MachineState
    reason: StopReason
    output: bytes = b""
    trap: Optional[TrapInfo] = None


def report_mips(outcome: RunOutcome, clock_hz: float) -> float:
    """Retired instructions per microsecond at ``clock_hz``."""
    s = outcome.state
    if s.retired < 1 or s.cycle < 1:
        raise ValueError("no retired instructions to measure")
    return s.retired * clock_hz / s.cycle / 1e6


def trace_line(pc: int, instr: Instruction, state: MachineState) -> str:
    imm = "-" if instr.immediate is None else f"{instr.immediate:08x}"
    d = state.dstack
    return (f"cycle={state.cycle} pc={pc:06x} op={instr.opcode.mnemonic} imm={imm} "
            f"sp={d.sp} tos={d.slots[d.sp]:08x} rsp={state.rstack.sp}")


class Cpu:
    """The CPU core wired to a :class:`DeviceBus`.

    ``on_unknown`` is ``"trap"`` or ``"halt"``. ``on_input_exhausted`` is
    ``"trap"`` (stop the run) or ``"block"`` (sit in KEY_WAIT, polling, as
    the hardware would with nothing arriving on RX).
    """

    def __init__(self, bus: DeviceBus, *, strict: bool = False, fast_wait: bool = True,
                 on_unknown: str = "trap", on_input_exhausted: str = "trap",
                 trace: Optional[Callable[[str], None]] = None):
        if on_unknown not in ("trap", "halt"):
            raise ValueError(f"on_unknown must be 'trap' or 'halt', not {on_unknown!r}")
        if on_input_exhausted not in ("trap", "block"):
            raise ValueError("on_input_exhausted must be 'trap' or 'block'")
        self.bus = bus
        self.strict = strict
        self.fast_wait = fast_wait
        self.on_unknown = on_unknown
        self.on_input_exhausted = on_input_exhausted
        self.trace = trace
        self.state = MachineState()
        self.state.dstack.strict = strict
        self.state.rstack.strict = strict
        self.trap: Optional[TrapInfo] = None
        self._bp_hit_cycle: Optional[int] = None

    @classmethod
    def from_image(cls, image: bytes, **kwargs) -> "Cpu":
        bus_kw = {k: kwargs.pop(k) for k in ("flash_latency", "divisor", "rx") if k in kwargs}
        return cls(DeviceBus.for_image(check_image(image), **bus_kw), **kwargs)

    # -- single cycle ---------------------------------------------------

    def step(self, budget: Optional[int] = None) -> int:
        """Advance one FSM transition; return the number of cycles consumed."""
        s = self.state
        if s.fsm in (Fsm.HALTED, Fsm.TRAPPED):
            raise RuntimeError(f"cpu is {s.fsm.value}")
        if budget is not None and budget < 1:
            return 0
        try:
            n, retired = self._tick(budget)
        except Trap as exc:
            self._enter_trap(exc.kind, str(exc))
            n, retired = 1, None
        s.cycle += n
        if retired is not None:
            s.retired += 1
            if self.trace is not None:
                self.trace(trace_line(s.instr_pc, retired, s))
        return n

    def _enter_trap(self, kind: str, message: str) -> None:
        s = self.state
        op = None if s.fsm is Fsm.FETCH else s.opcode_byte
        self.trap = TrapInfo(kind, message, s.instr_pc, op, s.cycle)
        s.fsm = Fsm.TRAPPED

    def _collapse(self, budget: Optional[int]) -> int:
        if not self.fast_wait:
            return 1
        n = self.state.wait
        return n if budget is None else min(n, budget)

    def _tick(self, budget):
        s = self.state
        flash = self.bus.flash
        fsm = s.fsm

        if fsm is Fsm.FETCH:
            s.instr_pc = s.pc
            try:
                s.opcode_byte, latency = flash.fetch(s.pc)
            except OutOfImage as exc:
                raise Trap(str(exc), "OutOfImage") from None
            if latency == 1:
                s.fsm = Fsm.DECODE
            elif latency == 2:
                s.fsm = Fsm.FETCH_WAIT_HIGH
            else:
                s.fsm = Fsm.FETCH_WAIT_LOW
                s.wait = latency - 2
            return 1, None

        if fsm is Fsm.FETCH_WAIT_LOW:
            s.wait -= 1
            if s.wait == 0:
                s.fsm = Fsm.FETCH_WAIT_HIGH
            return 1, None

        if fsm is Fsm.FETCH_WAIT_HIGH:
            s.fsm = Fsm.DECODE
            return 1, None

        if fsm is Fsm.DECODE:
            if s.opcode_byte not in OPCODE_BYTES:
                if self.on_unknown == "halt":
                    s.fsm = Fsm.HALTED
                    return 1, None
                raise Trap(f"unknown opcode 0x{s.opcode_byte:02x}", "UnknownOpcode")
            s.opcode = Opcode(s.opcode_byte)
            if s.opcode.has_immediate:
                s.fsm = Fsm.FETCH_IMM
                s.imm = 0
                s.imm_index = 0
                s.wait = flash.latency
            else:
                s.fsm = Fsm.EXECUTE
            return 1, None

        if fsm is Fsm.FETCH_IMM:
            s.wait -= 1
            if s.wait == 0:
                addr = s.instr_pc + 1 + s.imm_index
                try:
                    byte, _ = flash.fetch(addr)
                except OutOfImage:
                    raise Trap(f"immediate truncated at 0x{addr:06x}", "TruncatedImmediate") from None
                s.imm |= byte << (8 * s.imm_index)
                s.imm_index += 1
                if s.imm_index == 4:
                    s.fsm = Fsm.EXECUTE
                else:
                    s.wait = flash.latency
            return 1, None

        if fsm is Fsm.EXECUTE:
            instr = Instruction(s.opcode, s.imm if s.opcode.has_immediate else None)
            self._execute(instr)
            return 1, (instr if s.fsm is Fsm.FETCH else None)

        if fsm is Fsm.ALU_WAIT:
            # pointer has settled; write the latched comparison into the new top
            s.dstack.poke(s.temp_alu)
            s.fsm = Fsm.FETCH
            return 1, self._current()

        if fsm is Fsm.UART_WAIT:
            n = self._collapse(budget)
            s.wait -= n
            if s.wait == 0:
                s.fsm = Fsm.FETCH
                return n, self._current()
            return n, None

        if fsm is Fsm.KEY_WAIT:
            if s.key_byte is None:
                # blocking on an exhausted script: poll once per cycle
                got = self.bus.uart.rx_next(s.cycle)
                if got is None:
                    return (1 if not self.fast_wait or budget is None else budget), None
                s.key_byte, s.wait = got
                if s.wait == 0:
                    s.dstack.push(s.key_byte)
                    s.fsm = Fsm.FETCH
                    return 1, self._current()
                return 1, None
            n = self._collapse(budget)
            s.wait -= n
            if s.wait == 0:
                s.dstack.push(s.key_byte)
                s.fsm = Fsm.FETCH
                return n, self._current()
            return n, None

        raise AssertionError(f"unhandled state {fsm}")

    def _current(self) -> Instruction:
        s = self.state
        return Instruction(s.opcode, s.imm if s.opcode.has_immediate else None)

    # -- instruction semantics -------------------------------------------

    def _check_target(self, target: int) -> int:
        if target >= len(self.bus.flash):
            raise JumpOutOfImage(
                f"target 0x{target:x} is beyond the {len(self.bus.flash)}-byte image")
        return target

    def _ram_addr(self, addr: int) -> int:
        if addr + 3 >= RAM_SIZE:
            raise RamOutOfBounds(f"RAM address 0x{addr:x} out of bounds")
        if addr % 4:
            raise RamMisaligned(f"RAM address 0x{addr:x} is not word aligned")
        return addr

    def _execute(self, instr: Instruction) -> None:
        """The EXECUTE cycle: apply the stack effect and pick the next state."""
        s = self.state
        d = s.dstack
        op = instr.opcode
        next_pc = s.instr_pc + instr.size
        s.fsm = Fsm.FETCH

        if op is Opcode.PUSH:
            d.push(instr.immediate)
        elif op is Opcode.DROP:
            d.pop()
        elif op is Opcode.DUP:
            d.push(d.peek())
        elif op is Opcode.SWAP:
            b = d.pop()
            a = d.pop()
            d.push(b)
            d.push(a)
        elif op is Opcode.OVER:
            b = d.pop()
            a = d.pop()
            d.push(a)
            d.push(b)
            d.push(a)
        elif op in _BINARY:
            b = d.pop()
            a = d.pop()
            d.push(_BINARY[op](a, b))
        elif op is Opcode.NOT:
            d.poke(~d.peek())
        elif op in _COMPARE:
            b = d.pop()
            s.temp_alu = int(_COMPARE[op](d.peek(), b))
            s.fsm = Fsm.ALU_WAIT
        elif op is Opcode.EQZ:
            s.temp_alu = int(d.peek() == 0)
            s.fsm = Fsm.ALU_WAIT
        elif op is Opcode.BR_IF:
            if d.pop() != 0:
                next_pc = self._check_target(instr.immediate)
        elif op is Opcode.JUMP:
            next_pc = self._check_target(instr.immediate)
        elif op is Opcode.CALL:
            target = self._check_target(instr.immediate)
            s.rstack.push(next_pc)
            next_pc = target
        elif op is Opcode.RET:
            next_pc = self._check_target(s.rstack.pop())
        elif op is Opcode.LOAD:
            addr = self._ram_addr(d.pop())
            d.push(int.from_bytes(s.ram[addr:addr + 4], "little"))
        elif op is Opcode.STORE:
            addr = d.pop()
            value = d.pop()
            addr = self._ram_addr(addr)
            s.ram[addr:addr + 4] = value.to_bytes(4, "little")
        elif op is Opcode.PRINT:
            stall = self.bus.uart.tx(d.pop() & 0xFF, s.cycle)
            if stall:
                s.wait = stall
                s.fsm = Fsm.UART_WAIT
        elif op is Opcode.KEY:
            got = self.bus.uart.rx_next(s.cycle)
            if got is None:
                if self.on_input_exhausted == "trap":
                    s.fsm = Fsm.EXECUTE
                    raise InputExhausted()
                s.key_byte = None
                s.fsm = Fsm.KEY_WAIT
            else:
                byte, wait = got
                if wait:
                    s.key_byte, s.wait = byte, wait
                    s.fsm = Fsm.KEY_WAIT
                else:
                    d.push(byte)
        else:
            raise AssertionError(f"unhandled opcode {op!r}")
        s.pc = next_pc

    def exec_instruction(self, instr: Instruction) -> None:
        """Apply ``instr`` at the current pc in one go, ignoring cycle cost.

        Two-phase comparisons and pending KEY data are completed before
        returning, so the architectural state matches a retired instruction.
        """
        s = self.state
        s.instr_pc = s.pc
        s.opcode = instr.opcode
        s.opcode_byte = int(instr.opcode)
        s.imm = instr.immediate or 0
        self._execute(instr)
        if s.fsm is Fsm.ALU_WAIT:
            s.dstack.poke(s.temp_alu)
        elif s.fsm is Fsm.KEY_WAIT and s.key_byte is not None:
            s.dstack.push(s.key_byte)
        elif s.fsm is Fsm.KEY_WAIT:
            raise InputExhausted()
        s.fsm = Fsm.FETCH

    # -- run loop ---------------------------------------------------------

    def run(self, max_cycles: int = DEFAULT_MAX_CYCLES,
            breakpoints: Iterable[int] = ()) -> RunOutcome:
        """Step until the cycle budget is spent, a breakpoint is reached, or the core stops.

        ``max_cycles`` counts from the current cycle. A breakpoint fires when
        the FSM is about to fetch the opcode at that address; resuming from a
        breakpoint stop executes that instruction.
        """
        if max_cycles < 0:
            raise ValueError("max_cycles must be non-negative")
        s = self.state
        limit = s.cycle + max_cycles
        bps = frozenset(breakpoints)
        while True:
            if s.fsm is Fsm.HALTED:
                return self._outcome(StopReason.HALTED)
            if s.fsm is Fsm.TRAPPED:
                return self._outcome(StopReason.TRAP)
            if s.cycle >= limit:
                return self._outcome(StopReason.CYCLE_LIMIT)
            if (bps and s.fsm is Fsm.FETCH and s.pc in bps
                    and self._bp_hit_cycle != s.cycle):
                self._bp_hit_cycle = s.cycle
                return self._outcome(StopReason.BREAKPOINT)
            self.step(limit - s.cycle)

    def _outcome(self, reason: StopReason) -> RunOutcome:
        return RunOutcome(copy.deepcopy(self.state), reason, self.bus.uart.output,
                          self.trap if reason is StopReason.TRAP else None)


_BINARY = {
    Opcode.ADD: lambda a, b: (a + b) & WORD_MASK,
    Opcode.SUB: lambda a, b: (a - b) & WORD_MASK,
    Opcode.MUL: lambda a, b: (a * b) & WORD_MASK,
    Opcode.AND: lambda a, b: a & b,
    Opcode.OR: lambda a, b: a | b,
}

_COMPARE = {
    Opcode.EQ: lambda a, b: a == b,
    Opcode.LT_S: lambda a, b: to_signed(a) < to_signed(b),
    Opcode.GT_S: lambda a, b: to_signed(a) > to_signed(b),
}


def run(image: bytes, bus: Optional[DeviceBus] = None, *,
        max_cycles: int = DEFAULT_MAX_CYCLES, breakpoints: Iterable[int] = (),
        **cpu_options) -> RunOutcome:
    """Build a CPU for ``image`` (or ``bus``) and run it."""
    if not image:
        raise ValueError("cannot run an empty image")
    if bus is None:
        bus = DeviceBus.for_image(image)
    return Cpu(bus, **cpu_options).run(max_cycles, breakpoints)
