"""
Software division and multi-digit input
=======================================

There is no divide instruction; divide.asm subtracts until the remainder
drops below the divisor, which leans on lt_s and the ALU_WAIT write-back.
multidigit.asm folds typed digits into one value.
"""

from wasmstack import programs
from wasmstack.assembler import assemble, scan_labels
from wasmstack.devices import DeviceBus
from wasmstack.emulator import Cpu


def run_until_idle(source, keys=b"", trace=None):
    bus = DeviceBus.for_image(assemble(source))
    bus.uart.feed(keys)
    idle = scan_labels(source)["idle"]
    return Cpu(bus, strict=True, trace=trace).run(10_000_000, breakpoints=[idle])


source = programs.source("divide.asm")
out = run_until_idle(source)
print("35 / 7 ->", out.output, "remainder", int.from_bytes(out.state.ram[:4], "little"))

for n, d in [(9, 2), (47, 5), (100, 12)]:
    variant = (source.replace("push 35         ; dividend", f"push {n}")
                     .replace("push 7          ; divisor", f"push {d}"))
    out = run_until_idle(variant)
    q = out.output[0] - ord("0")
    r = int.from_bytes(out.state.ram[:4], "little")
    print(f"{n} / {d} -> q={q} r={r} (divmod says {divmod(n, d)}), {out.state.cycle} cycles")

lines = []
out = run_until_idle(programs.source("multidigit.asm"), b"123#", trace=lines.append)
print(out.output)
print([line for line in lines if "op=store" in line][0])
print("data stack:", out.state.dstack.items())
