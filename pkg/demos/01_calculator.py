"""
Running the calculator
======================

Assemble the bundled single-digit calculator, check it against the known
168-byte image, then feed it a few expressions over the simulated UART.
"""

from wasmstack import programs
from wasmstack.assembler import assemble, disassemble, scan_labels
from wasmstack.devices import DeviceBus
from wasmstack.emulator import Cpu, report_mips
from wasmstack.isa import emit_hexdump

source = programs.source("calc.asm")
image = assemble(source)
print(f"{len(image)} bytes")
print(emit_hexdump(image))

# Labels resolve to absolute byte offsets; the three operator handlers
# are the targets of the br_if instructions.
print({name: hex(addr) for name, addr in scan_labels(source).items()})

# The disassembler invents L_<offset> labels for every branch target and
# its output assembles back to the same bytes.
listing = disassemble(image)
assert assemble(listing) == image
print(listing[:120], "...")

# Each expression is scripted as RX bytes available from cycle 0. When the
# script runs out the next KEY stops the run with an InputExhausted trap.
for expr in ("3+4", "8-3", "2*3"):
    bus = DeviceBus.for_image(image)
    bus.uart.feed(expr.encode())
    outcome = Cpu(bus).run()
    print(repr(outcome.output.decode()),
          f"{outcome.state.retired} instructions, {outcome.state.cycle} cycles,",
          f"{report_mips(outcome, 27e6):.3f} MIPS (UART bound)")
