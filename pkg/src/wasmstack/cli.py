"""Command-line front end: ``asm``, ``disasm``, ``run`` and ``examples``."""

from __future__ import annotations

import argparse
import collections
import sys
from pathlib import Path
from typing import BinaryIO, List, Optional

from . import programs
from .assembler import AsmError, assemble, disassemble
from .devices import (
    DEFAULT_CLOCK_HZ, DEFAULT_DIVISOR, DEFAULT_FLASH_LATENCY, DeviceBus, FlashModel,
    UartModel, parse_rx_script,
)
from .emulator import DEFAULT_MAX_CYCLES, Cpu, StopReason, report_mips
from .isa import IsaError, emit_hexdump, parse_hexdump


class StreamUart(UartModel):
    """UART whose transmitter writes straight to a byte stream."""

    def __init__(self, out: BinaryIO, **kwargs):
        super().__init__(**kwargs)
        self.out = out

    def on_tx(self, byte: int) -> None:
        self.out.write(bytes([byte]))
        self.out.flush()


class ConsoleUart(StreamUart):
    """Interactive receiver: KEY blocks on the console, costing one cycle per byte."""

    def __init__(self, out: BinaryIO, inp: BinaryIO, **kwargs):
        super().__init__(out, **kwargs)
        self.inp = inp

    def rx_next(self, now: int):
        data = self.inp.read(1)
        if not data:
            return None
        return data[0], 1


def _read_image(path: str, fmt: str) -> bytes:
    if fmt == "hexdump":
        return parse_hexdump(Path(path).read_text(encoding="utf-8"))
    return Path(path).read_bytes()


def _address(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 24:
        raise argparse.ArgumentTypeError(f"{text} is not a 24-bit address")
    return value


def _non_negative(text: str) -> int:
    value = int(text, 0)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def cmd_asm(args, stdout: BinaryIO, stderr) -> int:
    try:
        source = Path(args.source).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"{args.source}: {exc.strerror}", file=stderr)
        return 1
    try:
        image = assemble(source)
    except AsmError as exc:
        where = f"{args.source}:{exc.line}" if exc.line is not None else args.source
        print(f"{where}: {type(exc).__name__}: {exc.message}", file=stderr)
        return 1
    data = emit_hexdump(image).encode("ascii") if args.format == "hexdump" else image
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        stdout.write(data)
    return 0


def cmd_disasm(args, stdout: BinaryIO, stderr) -> int:
    try:
        image = _read_image(args.image, args.format)
        listing = disassemble(image)
    except OSError as exc:
        print(f"{args.image}: {exc.strerror}", file=stderr)
        return 1
    except (IsaError, AsmError) as exc:
        print(f"{args.image}: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    stdout.write(listing.encode("utf-8"))
    return 0


def cmd_run(args, stdout: BinaryIO, stderr, stdin: Optional[BinaryIO] = None) -> int:
    try:
        image = _read_image(args.image, args.format)
        flash = FlashModel(image, args.flash_latency)
        if args.interactive:
            uart = ConsoleUart(stdout, stdin if stdin is not None else sys.stdin.buffer,
                               divisor=args.divisor)
        else:
            uart = StreamUart(stdout, divisor=args.divisor)
            if args.script:
                entries = parse_rx_script(Path(args.script).read_text(encoding="utf-8"))
                uart.rx_script = collections.deque(entries)
            if args.input is not None:
                uart.feed(args.input.encode("latin-1"))
    except OSError as exc:
        print(f"{exc.filename}: {exc.strerror}", file=stderr)
        return 1
    except (IsaError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    if not image:
        print(f"{args.image}: empty image", file=stderr)
        return 1

    trace = (lambda line: print(line, file=stderr)) if args.trace else None
    cpu = Cpu(DeviceBus(flash, uart), strict=args.strict, trace=trace,
              on_input_exhausted="block" if args.block else "trap")
    outcome = cpu.run(args.max_cycles, args.breakpoints)

    s = outcome.state
    reason = outcome.reason.value
    if outcome.trap is not None:
        reason += f" ({outcome.trap})"
    mips = f"{report_mips(outcome, args.clock_hz):.3f}" if s.retired else "n/a"
    print(f"\n--- stop: {reason}", file=stderr)
    print(f"--- cycles: {s.cycle}  retired: {s.retired}  "
          f"mips: {mips} @ {args.clock_hz:g} Hz", file=stderr)
    if outcome.reason is StopReason.TRAP and outcome.trap.kind != "InputExhausted":
        return 1
    return 0


def cmd_examples(args, stdout: BinaryIO, stderr) -> int:
    dest = Path(args.dir)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        for name in programs.NAMES:
            (dest / name).write_text(programs.source(name), encoding="utf-8")
            stdout.write(f"{dest / name}\n".encode())
    except OSError as exc:
        print(f"{exc.filename}: {exc.strerror}", file=stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wasmstack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble a source file")
    p.add_argument("source")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.add_argument("-f", "--format", choices=("raw", "hexdump"), default="raw")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("disasm", help="disassemble an image")
    p.add_argument("image")
    p.add_argument("-f", "--format", choices=("raw", "hexdump"), default="raw",
                   help="format of the input image")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("run", help="run an image on the emulator")
    p.add_argument("image")
    p.add_argument("-f", "--format", choices=("raw", "hexdump"), default="raw")
    p.add_argument("--max-cycles", type=_non_negative, default=DEFAULT_MAX_CYCLES)
    p.add_argument("--clock-hz", type=_positive, default=DEFAULT_CLOCK_HZ)
    p.add_argument("--flash-latency", type=int, default=DEFAULT_FLASH_LATENCY)
    p.add_argument("--divisor", type=int, default=DEFAULT_DIVISOR,
                   help="UART clock cycles per bit")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--script", help="RX script file, one <cycle>:<byte> per line")
    src.add_argument("--interactive", action="store_true",
                     help="feed KEY from standard input as it is typed")
    p.add_argument("--input", help="text fed to RX, all available at cycle 0")
    p.add_argument("--block", action="store_true",
                   help="KEY waits for input forever instead of stopping when the script runs out")
    p.add_argument("--strict", action="store_true", help="trap on stack overflow/underflow")
    p.add_argument("--trace", action="store_true", help="one line per retired instruction on stderr")
    p.add_argument("--break", dest="breakpoints", type=_address, action="append", default=[],
                   metavar="ADDR")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("examples", help="write the bundled example programs")
    p.add_argument("--dir", default=".")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv: Optional[List[str]] = None, stdout: Optional[BinaryIO] = None,
         stderr=None, stdin: Optional[BinaryIO] = None) -> int:
    args = build_parser().parse_args(argv)
    stdout = stdout if stdout is not None else sys.stdout.buffer
    stderr = stderr if stderr is not None else sys.stderr
    if args.command == "run":
        if args.interactive and args.input is not None:
            print("--input cannot be combined with --interactive", file=stderr)
            return 2
        return cmd_run(args, stdout, stderr, stdin)
    return args.func(args, stdout, stderr)


if __name__ == "__main__":
    sys.exit(main())
