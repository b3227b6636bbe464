"""
Cycle costs, throughput and the UART frame
==========================================

The flash read latency dominates: every opcode byte and every immediate
byte costs a full read.
"""

import numpy as np

from wasmstack.assembler import assemble
from wasmstack.devices import DeviceBus, decode_waveform, oversample, uart_waveform
from wasmstack.emulator import Cpu, report_mips

# Trace one instruction of each class and read the cycle deltas.
lines = []
cpu = Cpu(DeviceBus.for_image(assemble("push 5\npush 5\nadd\npush 10\neq\ndrop")),
          trace=lines.append)
cpu.run(200)
prev = 0
for line in lines:
    cycle = int(line.split()[0].split("=")[1])
    print(f"{cycle - prev:3d}  {line}")
    prev = cycle

# Throughput of straight-line single-byte code at 27 MHz.
image = bytes([0x12, 0x05]) * 5000
outcome = Cpu(DeviceBus.for_image(image)).run(50_000)
print(f"single-byte ops: {report_mips(outcome, 27e6):.2f} MIPS")

image = assemble("\n".join(f"push {i}" for i in range(1000)))
outcome = Cpu(DeviceBus.for_image(image)).run(17_000)
print(f"push-only:       {report_mips(outcome, 27e6):.2f} MIPS")

# Slower flash moves everything proportionally.
for latency in (1, 3, 5):
    cpu = Cpu(DeviceBus.for_image(bytes([0x12]) * 100, flash_latency=latency))
    out = cpu.run(latency + 2)
    print(f"flash latency {latency}: a single-byte op takes {out.state.cycle} cycles")

# One UART frame for 'A', oversampled 16x and decoded back mid-bit.
levels, period = uart_waveform(ord("A"))
print("frame:", levels, f"bit period {period * 1e6:.3f} us")
line = oversample(levels, 16)
print("line:", "".join("-" if v else "_" for v in line[::4]))
assert decode_waveform(line, 16) == ord("A")
print("all bytes decode:", all(
    decode_waveform(oversample(uart_waveform(b)[0], 16), 16) == b for b in range(256)))
print("frame duration:", np.round(10 * period * 1e6, 2), "us")
