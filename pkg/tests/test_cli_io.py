import json
import struct

import numpy as np
import pytest
from conftest import sine

from tonescale.cli_io import (
    cli_main,
    read_grid_csv,
    read_wav,
    write_grid_csv,
    write_grid_pgm,
    write_wav,
)


def make_wav(fmt_body: bytes, data_body: bytes, tail: bytes = b"") -> bytes:
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    if len(fmt_body) % 2:
        chunks += b"\x00"
    chunks += b"data" + struct.pack("<I", len(data_body)) + data_body
    if len(data_body) % 2:
        chunks += b"\x00"
    chunks += tail
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def pcm_fmt(tag: int, channels: int, rate: int, bits: int) -> bytes:
    frame = channels * bits // 8
    return struct.pack("<HHIIHH", tag, channels, rate, rate * frame, frame, bits)


# ---------------------------------------------------------------------------
# WAV decoding


def test_wav_pcm16_roundtrip(tmp_path):
    x = sine(440.0, 0.05, 8000.0, amp=0.7)
    path = tmp_path / "tone.wav"
    write_wav(path, x, 8000.0)
    buf = read_wav(path)
    assert buf.rate == 8000.0
    assert buf.samples.shape == x.shape
    # one LSB of rounding plus the 32767/32768 encoder scale
    np.testing.assert_allclose(buf.samples, x, atol=2.0 / 32768)


def test_wav_pcm24_sign_extension(tmp_path):
    ints = [0, 1, -1, 4194304, 8388607, -8388608]
    body = b"".join(struct.pack("<i", v)[:3] for v in ints)
    path = tmp_path / "p24.wav"
    path.write_bytes(make_wav(pcm_fmt(1, 1, 48000, 24), body))
    buf = read_wav(path)
    expected = np.array(ints, dtype=np.float64) / 8388608.0
    np.testing.assert_allclose(buf.samples, expected, rtol=0, atol=0)
    assert buf.rate == 48000.0


def test_wav_pcm32(tmp_path):
    ints = np.array([0, 2**30, -(2**31), 2**31 - 1], dtype="<i4")
    path = tmp_path / "p32.wav"
    path.write_bytes(make_wav(pcm_fmt(1, 1, 44100, 32), ints.tobytes()))
    buf = read_wav(path)
    np.testing.assert_allclose(buf.samples, ints / 2147483648.0, atol=0)


def test_wav_float32_clips_out_of_range(tmp_path):
    vals = np.array([0.25, -0.5, 1.5, -2.0], dtype="<f4")
    path = tmp_path / "f32.wav"
    path.write_bytes(make_wav(pcm_fmt(3, 1, 22050, 32), vals.tobytes()))
    buf = read_wav(path)
    np.testing.assert_allclose(buf.samples, [0.25, -0.5, 1.0, -1.0], atol=0)


def test_wav_stereo_collapses_to_mean(tmp_path):
    frames = np.array([[16384, -16384], [8192, 24576]], dtype="<i2")
    path = tmp_path / "st.wav"
    path.write_bytes(make_wav(pcm_fmt(1, 2, 8000, 16), frames.tobytes()))
    buf = read_wav(path)
    np.testing.assert_allclose(buf.samples, [0.0, 0.5], atol=0)


def test_wav_extensible_header(tmp_path):
    sub = struct.pack("<H", 1) + b"\x00\x00" + b"\x00" * 12
    fmt_body = pcm_fmt(0xFFFE, 1, 16000, 16) + struct.pack("<HHI", 22, 16, 4) + sub
    ints = np.array([100, -100], dtype="<i2")
    path = tmp_path / "ext.wav"
    path.write_bytes(make_wav(fmt_body, ints.tobytes()))
    buf = read_wav(path)
    np.testing.assert_allclose(buf.samples, ints / 32768.0, atol=0)


def test_wav_rejects_non_riff(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"OggS" + b"\x00" * 40)
    with pytest.raises(ValueError, match="not a RIFF/WAVE"):
        read_wav(path)


def test_wav_truncated_chunk_reports_offsets(tmp_path):
    good = make_wav(pcm_fmt(1, 1, 8000, 16), b"\x00\x00" * 10)
    path = tmp_path / "trunc.wav"
    path.write_bytes(good[:-6])  # data chunk now claims more than the file has
    with pytest.raises(ValueError, match=r"truncated file: chunk 'data'.*byte offset"):
        read_wav(path)


def test_wav_data_ending_mid_frame(tmp_path):
    # stereo 16-bit needs 4 bytes per frame; 6 bytes is one and a half
    path = tmp_path / "mid.wav"
    path.write_bytes(make_wav(pcm_fmt(1, 2, 8000, 16), b"\x00" * 6))
    with pytest.raises(ValueError, match="mid-frame at byte offset"):
        read_wav(path)


def test_wav_trailing_partial_chunk_header(tmp_path):
    path = tmp_path / "tail.wav"
    path.write_bytes(make_wav(pcm_fmt(1, 1, 8000, 16), b"\x00\x00", tail=b"JUNK"))
    with pytest.raises(ValueError, match="not a complete chunk header"):
        read_wav(path)


def test_wav_unsupported_shapes(tmp_path):
    cases = [
        (pcm_fmt(1, 1, 8000, 8), b"\x00", "unsupported bit depth 8"),
        (pcm_fmt(2, 1, 8000, 16), b"\x00\x00", "unsupported WAV format tag 2"),
        (pcm_fmt(3, 1, 8000, 64), b"\x00" * 8, "unsupported bit depth 64 for float"),
        (pcm_fmt(1, 1, 0, 16), b"\x00\x00", "invalid sample rate"),
    ]
    for idx, (fmt_body, data, message) in enumerate(cases):
        path = tmp_path / f"bad{idx}.wav"
        path.write_bytes(make_wav(fmt_body, data))
        with pytest.raises(ValueError, match=message):
            read_wav(path)


def test_wav_missing_data_chunk(tmp_path):
    fmt_body = pcm_fmt(1, 1, 8000, 16)
    raw = b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt_body)) + b"WAVE"
    raw += b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    path = tmp_path / "nodata.wav"
    path.write_bytes(raw)
    with pytest.raises(ValueError, match="missing data chunk"):
        read_wav(path)


# ---------------------------------------------------------------------------
# Grid CSV / PGM


def test_grid_csv_roundtrip_is_stable(tmp_path, rng):
    nu = np.array([60.0, 60.25, 60.5])
    times = np.array([0.0, 0.001, 0.002, 0.003])
    values = np.round(rng.normal(size=(4, 3)), 6)
    first = tmp_path / "a.csv"
    write_grid_csv(first, nu, times, values)
    nu2, times2, values2 = read_grid_csv(first)
    np.testing.assert_allclose(nu2, nu, atol=0)
    np.testing.assert_allclose(times2, times, atol=0)
    np.testing.assert_allclose(values2, values, atol=0)
    second = tmp_path / "b.csv"
    write_grid_csv(second, nu2, times2, values2)
    assert first.read_bytes() == second.read_bytes()


def test_grid_csv_complex_roundtrip(tmp_path, rng):
    nu = np.array([69.0, 69.5])
    times = np.array([0.0, 0.001])
    values = np.round(rng.normal(size=(2, 2)), 6) + 1j * np.round(rng.normal(size=(2, 2)), 6)
    path = tmp_path / "c.csv"
    write_grid_csv(path, nu, times, values)
    _, _, back = read_grid_csv(path)
    np.testing.assert_allclose(back, values, atol=0)


def test_grid_csv_validation(tmp_path):
    with pytest.raises(ValueError, match="does not match"):
        write_grid_csv(tmp_path / "x.csv", np.arange(3.0), np.arange(2.0), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="empty grid"):
        write_grid_csv(tmp_path / "y.csv", np.array([]), np.array([]), np.zeros((0, 0)))
    bad = tmp_path / "z.csv"
    bad.write_text("time,value\n0,1\n")
    with pytest.raises(ValueError, match="missing 'nu' header"):
        read_grid_csv(bad)


def test_grid_pgm_mapping_rounds_half_up(tmp_path):
    # one frame, four channels; 127.5/255 is the exact midpoint case
    values = np.array([[-0.5, 127.5 / 255.0, 1.0, 2.0]])
    path = tmp_path / "img.pgm"
    write_grid_pgm(path, values, 0.0, 1.0)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n1 4\n255\n")
    pixels = raw[len(b"P5\n1 4\n255\n") :]
    # top row is the highest channel
    assert list(pixels) == [255, 255, 128, 0]


def test_grid_pgm_dimensions_and_orientation(tmp_path):
    values = np.array([[0.0, 0.5, 1.0], [0.25, 0.75, 1.0]])  # 2 frames x 3 channels
    path = tmp_path / "dims.pgm"
    write_grid_pgm(path, values, 0.0, 1.0)
    raw = path.read_bytes()
    header = b"P5\n2 3\n255\n"
    assert raw.startswith(header)
    img = np.frombuffer(raw[len(header) :], dtype=np.uint8).reshape(3, 2)
    np.testing.assert_array_equal(img[0], [255, 255])  # highest nu first
    np.testing.assert_array_equal(img[2], [0, 64])


def test_grid_pgm_validation(tmp_path):
    with pytest.raises(ValueError, match="bad grayscale range"):
        write_grid_pgm(tmp_path / "r.pgm", np.ones((2, 2)), 1.0, 1.0)
    with pytest.raises(ValueError, match="empty grid"):
        write_grid_pgm(tmp_path / "e.pgm", np.zeros((0, 3)), 0.0, 1.0)


# ---------------------------------------------------------------------------
# CLI plumbing


@pytest.fixture()
def tone_wav(tmp_path):
    path = tmp_path / "tone.wav"
    write_wav(path, sine(440.0, 0.8, 8000.0, amp=0.5), 8000.0)
    return path


def test_cli_analyze_prints_tables(capsys):
    assert cli_main(["analyze", "--table", "2"]) == 0
    out = capsys.readouterr().out
    assert "Table 2" in out
    assert "K=8" in out
    assert "uniform" in out


def test_cli_analyze_rejects_unknown_table(capsys):
    assert cli_main(["analyze", "--table", "9"]) == 2
    assert "error: no table 9; choose 1, 2, or 3" in capsys.readouterr().err
    assert cli_main(["analyze", "--out-csv", "x.csv"]) == 2
    assert "--out-csv needs --table" in capsys.readouterr().err


def test_cli_requires_an_output(tone_wav, capsys):
    assert cli_main(["spectrogram", str(tone_wav)]) == 2
    assert "error: no output requested" in capsys.readouterr().err
    assert cli_main(["kernels"]) == 2
    assert "error: no output requested" in capsys.readouterr().err


def test_cli_missing_input_is_a_runtime_error(tmp_path, capsys):
    missing = tmp_path / "nope.wav"
    assert cli_main(["spectrogram", str(missing), "--out-csv", str(tmp_path / "o.csv")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_config_precedence(tone_wav, tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(
        json.dumps({"bins_per_octave": 12, "nu_min": 60.0, "nu_max": 66.0, "hop_ms": 5.0})
    )
    out_a = tmp_path / "a.csv"
    args = ["spectrogram", str(tone_wav), "--config", str(config), "--db"]
    assert cli_main(args + ["--out-csv", str(out_a)]) == 0
    nu, _, _ = read_grid_csv(out_a)
    assert len(nu) == 7  # config bins win over the default

    out_b = tmp_path / "b.csv"
    assert cli_main(args + ["--out-csv", str(out_b), "--bins-per-octave", "24"]) == 0
    nu_b, _, _ = read_grid_csv(out_b)
    assert len(nu_b) == 13  # explicit flag wins over the config
    capsys.readouterr()


def test_cli_rejects_unknown_config_key(tone_wav, tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"bogus_key": 1}))
    code = cli_main(
        ["spectrogram", str(tone_wav), "--config", str(config), "--out-csv", "x.csv"]
    )
    assert code == 2
    assert "unknown config key 'bogus_key'" in capsys.readouterr().err


def test_cli_spectrogram_is_deterministic(tone_wav, tmp_path, capsys):
    outs = [tmp_path / "r1.csv", tmp_path / "r2.csv"]
    base = [
        "spectrogram",
        str(tone_wav),
        "--nu-min",
        "64",
        "--nu-max",
        "74",
        "--bins-per-octave",
        "24",
        "--hop-ms",
        "5",
        "--db",
    ]
    for out in outs:
        assert cli_main(base + ["--out-csv", str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    capsys.readouterr()


def test_cli_kernels_impulse_is_normalized(tmp_path, capsys):
    out = tmp_path / "kern.csv"
    code = cli_main(
        ["kernels", "--family", "rec-uni", "--K", "4", "--tau", "0.04", "--out-csv", str(out)]
    )
    assert code == 0
    rows = np.loadtxt(out, skiprows=1)
    t, h = rows[:, 0], rows[:, 1]
    assert np.trapezoid(h, t) == pytest.approx(1.0, abs=1e-3)
    assert np.trapezoid(h * t, t) == pytest.approx(0.4, abs=1e-3)
    # derivative column integrates back to zero net change
    assert np.trapezoid(rows[:, 2], t) == pytest.approx(0.0, abs=1e-3)
    capsys.readouterr()


def test_cli_partials_json(tone_wav, tmp_path, capsys):
    out = tmp_path / "partials.json"
    code = cli_main(
        [
            "features",
            str(tone_wav),
            "--partials",
            "--nu-min",
            "64",
            "--nu-max",
            "74",
            "--bins-per-octave",
            "24",
            "--hop-ms",
            "5",
            "--out-json",
            str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["curves"], "expected at least one partial curve"
    longest = max(payload["curves"], key=lambda c: len(c["frames"]))
    assert longest["mean_nu"] == pytest.approx(69.0, abs=0.15)
    assert len(longest["frames"]) == len(longest["nus"]) == len(longest["strengths"])
    capsys.readouterr()
