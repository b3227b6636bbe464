import numpy as np
import pytest
from hypothesis import given, strategies as st

from wasmstack.devices import (
    DEFAULT_DIVISOR, FlashModel, OutOfImage, UartModel, decode_waveform, format_rx_script,
    oversample, parse_rx_script, uart_waveform, waveform_csv,
)


def test_default_divisor():
    assert DEFAULT_DIVISOR == 234
    # 27 MHz / 234 = 115385 baud, 0.16 % above nominal
    assert abs(27e6 / 234 - 115200) / 115200 < 0.002


class TestFlash:
    def test_fetch(self, calc_image):
        assert FlashModel(calc_image).fetch(0) == (0x01, 3)

    def test_out_of_image(self, calc_image):
        flash = FlashModel(calc_image)
        with pytest.raises(OutOfImage):
            flash.fetch(len(calc_image))

    def test_latency_bounds(self):
        assert FlashModel(b"\x02", latency=5).fetch(0) == (2, 5)
        with pytest.raises(ValueError):
            FlashModel(b"\x02", latency=0)


class TestUartTx:
    def test_idle(self):
        uart = UartModel()
        assert uart.tx(0x41, 0) == 0
        assert uart.tx_busy_until == 2340

    def test_back_to_back(self):
        uart = UartModel()
        uart.tx(0x41, 1000)
        assert uart.tx(0x42, 1100) == 2240
        assert uart.tx_log == [(0x41, 1000), (0x42, 3340)]
        assert uart.tx_busy_until == 3340 + 2340

    def test_divisor_one(self):
        uart = UartModel(divisor=1)
        uart.tx(0, 5)
        assert uart.tx_busy_until == 15

    def test_after_idle_gap_no_stall(self):
        uart = UartModel()
        uart.tx(1, 0)
        assert uart.tx(2, 5000) == 0

    @given(st.lists(st.tuples(st.integers(0, 255), st.integers(0, 5000)), max_size=30))
    def test_frames_never_overlap_and_log_is_ordered(self, sends):
        uart = UartModel()
        now = 0
        for byte, gap in sends:
            now += gap
            now += uart.tx(byte, now)
        starts = [t for _, t in uart.tx_log]
        assert all(b - a >= 2340 for a, b in zip(starts, starts[1:]))
        assert uart.output == bytes(b for b, _ in sends)


class TestUartRx:
    def test_available(self):
        uart = UartModel(rx_script=[(ord("3"), 0)])
        assert uart.rx_next(50) == (ord("3"), 0)

    def test_wait(self):
        uart = UartModel(rx_script=[(ord("x"), 1000)])
        assert uart.rx_next(400) == (ord("x"), 600)

    def test_exhausted(self):
        assert UartModel().rx_next(0) is None


class TestRxScript:
    def test_parse(self):
        text = "# session\n0:'3'\n10:0x2b\n\n2000:34\n30:\"#\"\n"
        assert parse_rx_script(text) == [(0x33, 0), (0x2B, 10), (0x34, 2000), (0x23, 30)]

    def test_roundtrip(self):
        entries = [(0, 0), (255, 12), (65, 99999)]
        assert parse_rx_script(format_rx_script(entries)) == entries

    @pytest.mark.parametrize("bad", ["3", "x:'3'", "0:'ab'", "0:1ff", "0:zz", "-1:00"])
    def test_errors(self, bad):
        with pytest.raises(ValueError):
            parse_rx_script(bad)


class TestWaveform:
    def test_letter_a(self):
        levels, period = uart_waveform(0x41)
        assert levels == [0, 1, 0, 0, 0, 0, 0, 1, 0, 1]
        assert abs(period * 1e6 - 8.68) / 8.68 < 0.002

    def test_zero(self):
        assert uart_waveform(0)[0] == [0] * 9 + [1]

    @pytest.mark.parametrize("spb", [1, 4, 16, 234])
    def test_all_bytes_decode(self, spb):
        for byte in range(256):
            levels, _ = uart_waveform(byte)
            assert decode_waveform(oversample(levels, spb), spb) == byte

    def test_framing_error(self):
        with pytest.raises(ValueError):
            decode_waveform(np.ones(40, dtype=np.uint8), 4)

    def test_csv(self):
        rows = waveform_csv(0x41).splitlines()
        assert rows[0] == "bit_index,level,start_time_us"
        assert len(rows) == 11
        assert rows[1] == "0,0,0.0000"
        assert rows[2].startswith("1,1,8.66")
