"""Command-line interface: WAV ingestion, configuration, serialization.

Subcommands:
  spectrogram   multi-scale complex or dB spectrogram of a WAV file
  features      onset/offset/band/partial/glissando maps from a WAV file
  analyze       reference tables: bandwidth constants and kernel delays
  kernels       impulse responses and receptive-field kernel grids

Exit codes: 0 success, 2 bad arguments, 1 runtime failure. A JSON config
file (``--config run.json``) can supply any flag value by its destination
name; explicit command-line flags override the file, which overrides the
built-in defaults. Identical inputs and settings produce byte-identical
CSV/PGM/JSON outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import struct
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tonescale.features import (
    band_response,
    detect_offsets,
    detect_onsets,
    enhance_bands,
    extract_partial_curves,
    glissando_filterbank,
    ridge_mask,
    second_moment_glissando,
)
from tonescale.receptive_fields import RFSpec, rf_kernel_image
from tonescale.selectivity_analysis import (
    bandwidth_constant_table,
    delay_max_table,
    delay_mean_table,
)
from tonescale.spectrogram import (
    SpectrogramFamily,
    WindowScaleLaw,
    build_frequency_grid,
    compute_spectrogram,
    delay_compensate,
    midi_from_frequency,
    to_db,
)
from tonescale.temporal_scale_space import (
    Distribution,
    TemporalKernelSpec,
    build_ladder,
    cascade_kernel_numeric,
    composed_uniform_kernel_dt,
    composed_uniform_kernel_dtt,
    composed_uniform_kernel_sample,
    gaussian_kernel_sample,
)


class CliError(Exception):
    """CLI failure carrying the process exit code."""

    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


# ---------------------------------------------------------------------------
# WAV ingestion


@dataclass
class AudioBuffer:
    """Mono audio in [-1, 1] at a fixed sample rate (Hz)."""

    samples: np.ndarray
    rate: float


def read_wav(path: str | Path) -> AudioBuffer:
    """Decode a RIFF/WAVE file to mono float64.

    Supports PCM 16/24/32-bit integers (scaled by 2^(bits-1)) and 32-bit
    float, plain or wrapped in an extensible header. Multi-channel audio is
    collapsed by arithmetic mean; float data is clipped to [-1, 1].
    """
    p = Path(path)
    raw = p.read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{p}: not a RIFF/WAVE file")
    fmt_body: bytes | None = None
    data_body: bytes | None = None
    data_start = 0
    pos = 12
    while pos + 8 <= len(raw):
        name = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        start = pos + 8
        end = start + size
        if end > len(raw):
            raise ValueError(
                f"{p}: truncated file: chunk {name.decode('latin-1')!r} needs data up to "
                f"byte offset {end} but the file ends at byte offset {len(raw)}"
            )
        if name == b"fmt ":
            fmt_body = raw[start:end]
        elif name == b"data":
            data_body = raw[start:end]
            data_start = start
        pos = end + (size & 1)  # chunks are word-aligned
    leftover = len(raw) - pos
    if 0 < leftover < 8:
        raise ValueError(
            f"{p}: truncated file: {leftover} trailing bytes at byte offset {pos} "
            "are not a complete chunk header"
        )
    if fmt_body is None:
        raise ValueError(f"{p}: missing fmt chunk")
    if data_body is None:
        raise ValueError(f"{p}: missing data chunk")
    if len(fmt_body) < 16:
        raise ValueError(f"{p}: fmt chunk too short ({len(fmt_body)} bytes)")
    tag, n_channels, rate, _byte_rate, _block_align, bits = struct.unpack_from(
        "<HHIIHH", fmt_body, 0
    )
    if tag == 0xFFFE:  # extensible: the real tag leads the SubFormat GUID
        if len(fmt_body) < 26:
            raise ValueError(f"{p}: extensible fmt chunk too short")
        (tag,) = struct.unpack_from("<H", fmt_body, 24)
    if tag not in (1, 3):
        raise ValueError(f"{p}: unsupported WAV format tag {tag}")
    if n_channels < 1:
        raise ValueError(f"{p}: invalid channel count {n_channels}")
    if rate == 0:
        raise ValueError(f"{p}: invalid sample rate 0")
    if tag == 3:
        if bits != 32:
            raise ValueError(f"{p}: unsupported bit depth {bits} for float data")
        bytes_per = 4
    elif bits in (16, 24, 32):
        bytes_per = bits // 8
    else:
        raise ValueError(f"{p}: unsupported bit depth {bits}")
    frame_size = bytes_per * n_channels
    n_frames = len(data_body) // frame_size
    if n_frames * frame_size != len(data_body):
        raise ValueError(
            f"{p}: truncated file: sample data ends mid-frame at byte offset "
            f"{data_start + len(data_body)}"
        )
    if tag == 3:
        x = np.frombuffer(data_body, dtype="<f4").astype(np.float64)
        x = np.clip(x, -1.0, 1.0)
    elif bits == 16:
        x = np.frombuffer(data_body, dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 32:
        x = np.frombuffer(data_body, dtype="<i4").astype(np.float64) / 2147483648.0
    else:  # 24-bit little-endian, sign-extended
        b = np.frombuffer(data_body, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        vals = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        vals = (vals ^ 0x800000) - 0x800000
        x = vals.astype(np.float64) / 8388608.0
    if n_channels > 1:
        x = x.reshape(n_frames, n_channels).mean(axis=1)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{p}: non-finite samples in float data")
    return AudioBuffer(samples=x, rate=float(rate))


def write_wav(path: str | Path, samples: np.ndarray, rate: float) -> None:
    """Write mono 16-bit PCM; test and demo helper."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, int(rate), 2 * int(rate), 2, 16)
    header += b"data" + struct.pack("<I", len(pcm))
    Path(path).write_bytes(header + pcm)


# ---------------------------------------------------------------------------
# Grid serialization


def _format_cell(value) -> str:
    if np.iscomplexobj(np.asarray(value)) or isinstance(value, complex):
        z = complex(value)
        return f"{z.real:.6f}{z.imag:+.6f}j"
    return f"{float(value):.6f}"


def write_grid_csv(path: str | Path, nu: np.ndarray, frame_times: np.ndarray, values: np.ndarray) -> None:
    """Tab-separated grid: header row "nu<TAB>frame times", one row per
    channel in ascending nu, cells formatted with 6 decimals ('.' decimal).
    Complex cells are written as re+imj."""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError(f"{path}: refusing to write an empty grid")
    if values.shape != (len(frame_times), len(nu)):
        raise ValueError(
            f"{path}: value shape {values.shape} does not match "
            f"{len(frame_times)} frames x {len(nu)} channels"
        )
    lines = ["nu\t" + "\t".join(f"{float(t):.6f}" for t in frame_times)]
    for ch in range(len(nu)):
        cells = "\t".join(_format_cell(v) for v in values[:, ch])
        lines.append(f"{float(nu[ch]):.6f}\t" + cells)
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


def read_grid_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of write_grid_csv: (nu, frame_times, values)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("nu\t"):
        raise ValueError(f"{path}: not a grid CSV (missing 'nu' header)")
    frame_times = np.array([float(tok) for tok in lines[0].split("\t")[1:]])
    nu = []
    rows = []
    is_complex = "j" in lines[1] if len(lines) > 1 else False
    for line in lines[1:]:
        if not line:
            continue
        toks = line.split("\t")
        nu.append(float(toks[0]))
        if is_complex:
            rows.append([complex(tok) for tok in toks[1:]])
        else:
            rows.append([float(tok) for tok in toks[1:]])
    values = np.array(rows).T  # back to (n_frames, n_channels)
    return np.array(nu), frame_times, values


def write_grid_pgm(path: str | Path, values: np.ndarray, lo: float, hi: float) -> None:
    """Binary PGM (P5): width = frames, height = channels, top row = highest
    nu. Pixels map [lo, hi] to [0, 255] with clamping, rounding half up."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError(f"{path}: refusing to write an empty grid")
    if hi <= lo:
        raise ValueError(f"{path}: bad grayscale range [{lo}, {hi}]")
    x = np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    pix = np.floor(255.0 * x + 0.5).astype(np.uint8)
    img = pix.T[::-1, :]  # (channels, frames), row 0 = highest nu
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + img.tobytes())
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Configuration plumbing

NU_MIN_DEFAULT = midi_from_frequency(80.0)
NU_MAX_DEFAULT = midi_from_frequency(16000.0)

LAYER1_DEFAULTS: dict = {
    "family": "rec-log",
    "K": 7,
    "c": math.sqrt(2.0),
    "n": 8.0,
    "tau0_ms": 0.0,
    "bins_per_octave": 48,
    "nu_min": NU_MIN_DEFAULT,
    "nu_max": NU_MAX_DEFAULT,
    "hop_ms": 1.0,
    "compensate_delay": False,
    "out_csv": None,
    "out_pgm": None,
    "db_min": -60.0,
    "db_max": 0.0,
}

SPECTROGRAM_DEFAULTS: dict = {**LAYER1_DEFAULTS, "db": False}

FEATURE_DEFAULTS: dict = {
    **LAYER1_DEFAULTS,
    "tau_a_ms": 20.0,
    "sigma_nu": 0.5,
    "tau_i_ms": 60.0,
    "sigma_nu_i": 1.0,
    "c_min": 3.0,
    "min_level_db": -70.0,
    "onsets": False,
    "offsets": False,
    "bands": False,
    "partials": False,
    "second_moment": False,
    "glissando_bank": None,
    "out_json": None,
}

KERNELS_DEFAULTS: dict = {
    "family": "rec-log",
    "K": 7,
    "c": math.sqrt(2.0),
    "tau": 1.0,
    "dt": None,
    "rf": False,
    "alpha": 0,
    "beta": 0,
    "v": 0.0,
    "sigma_nu": 0.5,
    "tau_a_ms": 20.0,
    "t_span": None,
    "nu_span": None,
    "dnu": None,
    "out_csv": None,
    "out_pgm": None,
}

ANALYZE_DEFAULTS: dict = {"table": None, "n": 8.0, "out_csv": None}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(2, f"config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(2, f"config {path}: invalid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise CliError(2, f"config {path}: expected a JSON object")
    return config


def _merge_settings(args: argparse.Namespace, defaults: dict) -> dict:
    """Flags (not None) override config file values, which override defaults."""
    config = _load_config(getattr(args, "config", None))
    unknown = sorted(set(config) - set(defaults))
    if unknown:
        raise CliError(2, f"unknown config key {unknown[0]!r}")
    merged = {}
    for key, fallback in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in config:
            merged[key] = config[key]
        else:
            merged[key] = fallback
    return merged


def _parse_bank(raw) -> list[float] | None:
    if raw is None:
        return None
    if isinstance(raw, (list, tuple)):
        toks = [str(v) for v in raw]
    else:
        toks = [tok for tok in str(raw).split(",") if tok.strip()]
    try:
        vals = [float(tok) for tok in toks]
    except ValueError as exc:
        raise CliError(2, f"bad glissando bank value in {raw!r}") from exc
    if not vals:
        raise CliError(2, "glissando bank must not be empty")
    return vals


def _layer1(cfg: dict, buf: AudioBuffer):
    """Shared first-layer pipeline: grid, family, spectrogram, compensation."""
    law = WindowScaleLaw(n=float(cfg["n"]), tau0=(float(cfg["tau0_ms"]) / 1000.0) ** 2)
    grid = build_frequency_grid(
        float(cfg["nu_min"]), float(cfg["nu_max"]), int(cfg["bins_per_octave"]), law
    )
    family = SpectrogramFamily(kind=str(cfg["family"]), K=int(cfg["K"]), c=float(cfg["c"]))
    hop = max(1, round(buf.rate * float(cfg["hop_ms"]) / 1000.0))
    spec = compute_spectrogram(buf.samples, buf.rate, grid, family, hop=hop)
    if cfg["compensate_delay"]:
        if not family.causal:
            raise CliError(2, "delay compensation applies to causal families only")
        spec = delay_compensate(spec)
    return spec


# ---------------------------------------------------------------------------
# Subcommands


def cmd_spectrogram(args: argparse.Namespace) -> int:
    cfg = _merge_settings(args, SPECTROGRAM_DEFAULTS)
    if cfg["out_csv"] is None and cfg["out_pgm"] is None:
        raise CliError(2, "no output requested")
    buf = read_wav(args.wav)
    spec = _layer1(cfg, buf)
    want_db = bool(cfg["db"])
    values = to_db(spec).values if want_db else spec.values
    if cfg["out_csv"]:
        write_grid_csv(cfg["out_csv"], spec.grid.nu, spec.frame_times, values)
        print(f"wrote {cfg['out_csv']}")
    if cfg["out_pgm"]:
        db_values = values if want_db else to_db(spec).values
        write_grid_pgm(cfg["out_pgm"], db_values, float(cfg["db_min"]), float(cfg["db_max"]))
        print(f"wrote {cfg['out_pgm']}")
    return 0


def _feature_pgm_range(kind: str, values: np.ndarray) -> tuple[float, float]:
    """Rectified maps render on [0, max]; signed slope maps symmetrically."""
    if kind in ("glissando_bank", "second_moment"):
        m = float(np.max(np.abs(values))) or 1.0
        return -m, m
    m = float(np.max(values)) or 1.0
    return 0.0, m


def _curve_median_level(log, curve) -> float:
    """Median dB level of the spectrogram under a partial curve's track."""
    ch = np.clip(
        np.round((curve.nus - log.grid.nu[0]) / log.grid.delta_nu).astype(int),
        0,
        log.grid.n_channels - 1,
    )
    return float(np.median(log.values[curve.frames, ch]))


def cmd_features(args: argparse.Namespace) -> int:
    cfg = _merge_settings(args, FEATURE_DEFAULTS)
    bank = _parse_bank(cfg["glissando_bank"])
    selectors = [
        name
        for name in ("onsets", "offsets", "bands", "partials", "second_moment")
        if cfg[name]
    ]
    if bank is not None:
        selectors.append("glissando_bank")
    if len(selectors) != 1:
        raise CliError(
            2,
            "choose exactly one of --onsets --offsets --bands --partials "
            "--glissando-bank --second-moment",
        )
    sel = selectors[0]
    if sel == "partials":
        if cfg["out_json"] is None:
            raise CliError(2, "no output requested (--partials writes --out-json)")
    elif cfg["out_csv"] is None and cfg["out_pgm"] is None:
        raise CliError(2, "no output requested")

    buf = read_wav(args.wav)
    log = to_db(_layer1(cfg, buf))
    tau_a = (float(cfg["tau_a_ms"]) / 1000.0) ** 2
    s = float(cfg["sigma_nu"]) ** 2

    if sel == "partials":
        band = band_response(log, tau_a, s)
        curves = extract_partial_curves(band, c_min=float(cfg["c_min"]))
        floor = float(cfg["min_level_db"])
        scored = [(curve, _curve_median_level(log, curve)) for curve in curves]
        kept = [(curve, lv) for curve, lv in scored if lv >= floor]
        payload = {
            "curves": [
                {
                    "frames": [int(j) for j in curve.frames],
                    "times": [round(float(log.frame_times[j]), 9) for j in curve.frames],
                    "nus": [round(float(x), 9) for x in curve.nus],
                    "strengths": [round(float(x), 9) for x in curve.strengths],
                    "mean_nu": round(float(curve.mean_nu), 9),
                    "median_level_db": round(lv, 9),
                }
                for curve, lv in kept
            ]
        }
        Path(cfg["out_json"]).write_text(json.dumps(payload, indent=2) + "\n")
        dropped = len(scored) - len(kept)
        note = f"; dropped {dropped} below --min-level-db" if dropped else ""
        print(f"wrote {cfg['out_json']} ({len(kept)} curves{note})")
        return 0

    if sel == "onsets":
        fm = detect_onsets(log, tau_a, s)
        values, times, grid = fm.values, fm.frame_times, fm.grid
    elif sel == "offsets":
        fm = detect_offsets(log, tau_a, s)
        values, times, grid = fm.values, fm.frame_times, fm.grid
    elif sel == "bands":
        fm = enhance_bands(log, tau_a, s)
        values, times, grid = fm.values, fm.frame_times, fm.grid
    elif sel == "glissando_bank":
        # zero-phase window: causal smoothing displaces a moving ridge and
        # biases the per-cell argmax toward the fastest bank member
        est = glissando_filterbank(
            log, bank, tau_a, s, temporal=TemporalKernelSpec.gaussian(tau_a)
        )
        mask = ridge_mask(est.response, est.warmup_frames, float(cfg["c_min"]))
        values = np.where(mask, est.vhat, 0.0)
        times, grid = est.frame_times, est.grid
    else:  # second_moment
        tau_i = (float(cfg["tau_i_ms"]) / 1000.0) ** 2
        s_i = float(cfg["sigma_nu_i"]) ** 2
        field = second_moment_glissando(log, tau_a, s, tau_i, s_i)
        values = np.where(field.defined, field.vhat, 0.0)
        times, grid = field.frame_times, field.grid

    if cfg["out_csv"]:
        write_grid_csv(cfg["out_csv"], grid.nu, times, values)
        print(f"wrote {cfg['out_csv']}")
    if cfg["out_pgm"]:
        lo, hi = _feature_pgm_range(sel, values)
        write_grid_pgm(cfg["out_pgm"], values, lo, hi)
        print(f"wrote {cfg['out_pgm']}")
    return 0


def _column_label(col) -> str:
    if isinstance(col, float):
        return f"{col:g} dB"
    return str(col)


def _render_table(title: str, table: dict) -> str:
    width = max(len(label) for label, _ in table["rows"]) + 2
    lines = [title]
    lines.append(" " * width + "".join(f"{_column_label(c):>11}" for c in table["columns"]))
    for label, cells in table["rows"]:
        lines.append(label.ljust(width) + "".join(f"{v:>11.3f}" for v in cells))
    return "\n".join(lines)


def _write_table_csv(path: str | Path, table: dict) -> None:
    lines = ["label\t" + "\t".join(_column_label(c) for c in table["columns"])]
    for label, cells in table["rows"]:
        lines.append(label + "\t" + "\t".join(f"{v:.6f}" for v in cells))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _merge_settings(args, ANALYZE_DEFAULTS)
    n = float(cfg["n"])
    choice = cfg["table"]
    if cfg["out_csv"] is not None and choice is None:
        raise CliError(2, "--out-csv needs --table to pick a single table")
    if choice is not None and int(choice) not in (1, 2, 3):
        raise CliError(2, f"no table {choice}; choose 1, 2, or 3")
    builders = {
        1: (f"Table 1: bandwidth constants C (n={n:g})", lambda: bandwidth_constant_table(n)),
        2: ("Table 2: mean delay in units of sqrt(tau)", delay_mean_table),
        3: ("Table 3: kernel maximum position in units of sqrt(tau)", delay_max_table),
    }
    picks = [int(choice)] if choice is not None else [1, 2, 3]
    blocks = []
    for idx in picks:
        title, builder = builders[idx]
        table = builder()
        blocks.append(_render_table(title, table))
        if cfg["out_csv"] is not None:
            _write_table_csv(cfg["out_csv"], table)
    print("\n\n".join(blocks))
    return 0


def _kernels_temporal(cfg: dict) -> TemporalKernelSpec:
    family = str(cfg["family"])
    tau_a = (float(cfg["tau_a_ms"]) / 1000.0) ** 2
    if family == "gauss":
        return TemporalKernelSpec.gaussian(tau_a)
    if family == "rec-uni":
        return TemporalKernelSpec.cascade(build_ladder(Distribution.UNIFORM, tau_a, int(cfg["K"])))
    return TemporalKernelSpec.cascade(
        build_ladder(Distribution.LOGARITHMIC, tau_a, int(cfg["K"]), float(cfg["c"]))
    )


def _write_columns_csv(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    lines = ["\t".join(header)]
    for row in zip(*columns):
        lines.append("\t".join(f"{v:.9g}" for v in row))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


def cmd_kernels(args: argparse.Namespace) -> int:
    cfg = _merge_settings(args, KERNELS_DEFAULTS)
    if cfg["out_csv"] is None and cfg["out_pgm"] is None:
        raise CliError(2, "no output requested")
    family = str(cfg["family"])

    if cfg["rf"]:
        sigma_nu = float(cfg["sigma_nu"])
        if sigma_nu <= 0:
            raise CliError(2, f"sigma-nu must be positive, got {sigma_nu}")
        temporal = _kernels_temporal(cfg)
        spec = RFSpec(
            temporal=temporal,
            s=sigma_nu**2,
            v=float(cfg["v"]),
            alpha=int(cfg["alpha"]),
            beta=int(cfg["beta"]),
        )
        sigma_t = math.sqrt(temporal.scale)
        if cfg["t_span"] is not None:
            t_span = float(cfg["t_span"])
        elif family == "gauss":
            t_span = 4.0 * sigma_t
        else:
            t_span = temporal.ladder.mu_sum + 4.0 * sigma_t
        nu_span = float(cfg["nu_span"]) if cfg["nu_span"] is not None else 4.0 * sigma_nu
        dt = float(cfg["dt"]) if cfg["dt"] is not None else sigma_t / 50.0
        dnu = float(cfg["dnu"]) if cfg["dnu"] is not None else sigma_nu / 25.0
        img = rf_kernel_image(spec, t_span, nu_span, dt, dnu)
        if cfg["out_csv"]:
            write_grid_csv(cfg["out_csv"], img.nu, img.t, img.values)
            print(f"wrote {cfg['out_csv']}")
        if cfg["out_pgm"]:
            m = float(np.max(np.abs(img.values))) or 1.0
            write_grid_pgm(cfg["out_pgm"], img.values, -m, m)
            print(f"wrote {cfg['out_pgm']}")
        return 0

    if cfg["out_pgm"] is not None:
        raise CliError(2, "PGM output applies to --rf kernel grids; impulse responses are CSV")
    tau = float(cfg["tau"])
    if tau <= 0:
        raise CliError(2, f"tau must be positive, got {tau}")
    K = int(cfg["K"])
    dt = float(cfg["dt"]) if cfg["dt"] is not None else math.sqrt(tau) / 2000.0
    if family == "gauss":
        span = 8.0 * math.sqrt(tau)
        t = np.arange(-span, span + dt / 2.0, dt)
        header, cols = ["t", "h"], [t, gaussian_kernel_sample(tau, t)]
    elif family == "rec-uni":
        ladder = build_ladder(Distribution.UNIFORM, tau, K)
        mu = ladder.mus[0]
        t = np.arange(0.0, ladder.mu_sum + 10.0 * math.sqrt(tau), dt)
        header = ["t", "h", "h_t", "h_tt"]
        cols = [
            t,
            composed_uniform_kernel_sample(mu, K, t),
            composed_uniform_kernel_dt(mu, K, t),
            composed_uniform_kernel_dtt(mu, K, t),
        ]
    else:
        ladder = build_ladder(Distribution.LOGARITHMIC, tau, K, float(cfg["c"]))
        dt = min(dt, ladder.mu_min / 20.0)
        kernel = cascade_kernel_numeric(ladder, dt, ladder.mu_sum + 10.0 * math.sqrt(tau))
        header, cols = ["t", "h"], [kernel.times, kernel.values]
    _write_columns_csv(cfg["out_csv"], header, cols)
    print(f"wrote {cfg['out_csv']}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_layer1_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--family",
        choices=("gauss", "rec-uni", "rec-log"),
        default=None,
        help="temporal window family (default: rec-log)",
    )
    p.add_argument("--K", type=int, default=None, help="cascade stages (default: 7)")
    p.add_argument(
        "--c", type=float, default=None, help="logarithmic ladder ratio (default: sqrt(2))"
    )
    p.add_argument(
        "--n", type=float, default=None, help="carrier periods per window extent (default: 8)"
    )
    p.add_argument(
        "--tau0-ms",
        type=float,
        default=None,
        dest="tau0_ms",
        help="base window extent sigma_0 in ms, added in variance (default: 0)",
    )
    p.add_argument(
        "--bins-per-octave",
        type=int,
        default=None,
        dest="bins_per_octave",
        help="log-frequency grid density (default: 48)",
    )
    p.add_argument(
        "--nu-min",
        type=float,
        default=None,
        dest="nu_min",
        help=f"lowest channel in MIDI units (default: {NU_MIN_DEFAULT:.2f} = 80 Hz)",
    )
    p.add_argument(
        "--nu-max",
        type=float,
        default=None,
        dest="nu_max",
        help=f"highest channel in MIDI units (default: {NU_MAX_DEFAULT:.2f} = 16 kHz)",
    )
    p.add_argument(
        "--hop-ms", type=float, default=None, dest="hop_ms", help="frame hop in ms (default: 1)"
    )
    p.add_argument(
        "--compensate-delay",
        action="store_true",
        default=None,
        dest="compensate_delay",
        help="shift each causal channel earlier by its first-inflection delay",
    )
    p.add_argument("--out-csv", default=None, dest="out_csv", help="write the grid as CSV")
    p.add_argument("--out-pgm", default=None, dest="out_pgm", help="write the grid as binary PGM")
    p.add_argument(
        "--db-min",
        type=float,
        default=None,
        dest="db_min",
        help="PGM grayscale floor in dB (default: -60)",
    )
    p.add_argument(
        "--db-max",
        type=float,
        default=None,
        dest="db_max",
        help="PGM grayscale ceiling in dB (default: 0)",
    )
    p.add_argument(
        "--config",
        default=None,
        help="JSON file supplying flag values by destination name; flags override",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tonescale",
        description="Multi-scale auditory spectrograms, receptive fields, and feature maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser(
        "spectrogram",
        help="compute a multi-scale spectrogram of a WAV file",
        description="Complex (or dB) spectrogram on a log-frequency grid. "
        "PGM output always renders the dB map over [--db-min, --db-max].",
    )
    sp.add_argument("wav", help="input WAV (PCM 16/24/32-bit int or 32-bit float)")
    _add_layer1_flags(sp)
    sp.add_argument(
        "--db",
        action="store_true",
        default=None,
        help="write dB magnitude instead of complex values in the CSV",
    )
    sp.set_defaults(func=cmd_spectrogram)

    fe = sub.add_parser(
        "features",
        help="compute an auditory feature map from a WAV file",
        description="Choose exactly one feature selector. Maps are computed "
        "on the dB spectrogram of the configured first layer.",
    )
    fe.add_argument("wav", help="input WAV (PCM 16/24/32-bit int or 32-bit float)")
    _add_layer1_flags(fe)
    fe.add_argument("--onsets", action="store_true", default=None, help="rectified rise map")
    fe.add_argument("--offsets", action="store_true", default=None, help="rectified decay map")
    fe.add_argument(
        "--bands", action="store_true", default=None, help="rectified spectral band map"
    )
    fe.add_argument(
        "--partials",
        action="store_true",
        default=None,
        help="linked partial-tone curves (JSON via --out-json)",
    )
    fe.add_argument(
        "--glissando-bank",
        default=None,
        dest="glissando_bank",
        metavar="V1,V2,...",
        help="per-cell best slope over a comma-separated bank (semitones/s), "
        "zeroed where the band response stays below --c-min; slope "
        "resolution grows with --tau-a-ms (60 ms suits 10-40 st/s)",
    )
    fe.add_argument(
        "--second-moment",
        action="store_true",
        default=None,
        dest="second_moment",
        help="glissando slope map from the smoothed second-moment matrix",
    )
    fe.add_argument(
        "--tau-a-ms",
        type=float,
        default=None,
        dest="tau_a_ms",
        help="feature temporal extent sigma_a in ms, squared to tau_a (default: 20)",
    )
    fe.add_argument(
        "--sigma-nu",
        type=float,
        default=None,
        dest="sigma_nu",
        help="feature spectral extent in semitones (default: 0.5)",
    )
    fe.add_argument(
        "--tau-i-ms",
        type=float,
        default=None,
        dest="tau_i_ms",
        help="second-moment integration extent sigma_i in ms (default: 60)",
    )
    fe.add_argument(
        "--sigma-nu-i",
        type=float,
        default=None,
        dest="sigma_nu_i",
        help="second-moment spectral integration extent in semitones (default: 1)",
    )
    fe.add_argument(
        "--c-min",
        type=float,
        default=None,
        dest="c_min",
        help="minimum band strength for partial-curve points (default: 3)",
    )
    fe.add_argument(
        "--min-level-db",
        type=float,
        default=None,
        dest="min_level_db",
        help="drop partial curves whose median spectrogram level is below this "
        "many dB re full scale (default: -70; set very low to keep all)",
    )
    fe.add_argument(
        "--out-json", default=None, dest="out_json", help="write partial curves as JSON"
    )
    fe.set_defaults(func=cmd_features)

    an = sub.add_parser(
        "analyze",
        help="print the reference tables",
        description="Bandwidth constants (table 1), mean delays (table 2), "
        "and kernel maximum positions (table 3). Without --table, prints all three.",
    )
    an.add_argument("--table", type=int, default=None, help="print a single table: 1, 2, or 3")
    an.add_argument(
        "--n", type=float, default=None, help="periods per window for table 1 (default: 8)"
    )
    an.add_argument(
        "--out-csv",
        default=None,
        dest="out_csv",
        help="also write the selected table as CSV (needs --table)",
    )
    an.add_argument("--config", default=None, help="JSON config file; flags override")
    an.set_defaults(func=cmd_analyze)

    ke = sub.add_parser(
        "kernels",
        help="dump impulse responses or receptive-field kernel grids",
        description="Default mode writes the temporal impulse response as CSV "
        "(columns t, h, and for rec-uni also h_t, h_tt). With --rf, samples "
        "the spectro-temporal kernel on a (t, nu) grid as CSV and/or PGM.",
    )
    ke.add_argument(
        "--family",
        choices=("gauss", "rec-uni", "rec-log"),
        default=None,
        help="temporal window family (default: rec-log)",
    )
    ke.add_argument("--K", type=int, default=None, help="cascade stages (default: 7)")
    ke.add_argument(
        "--c", type=float, default=None, help="logarithmic ladder ratio (default: sqrt(2))"
    )
    ke.add_argument(
        "--tau",
        type=float,
        default=None,
        help="impulse-response scale in seconds^2 (default: 1.0)",
    )
    ke.add_argument(
        "--dt", type=float, default=None, help="sample spacing in s (default: sqrt(tau)/2000)"
    )
    ke.add_argument(
        "--rf",
        action="store_true",
        default=None,
        help="sample the two-dimensional receptive-field kernel instead",
    )
    ke.add_argument("--alpha", type=int, default=None, help="temporal derivative order 0..2")
    ke.add_argument("--beta", type=int, default=None, help="spectral derivative order 0..2")
    ke.add_argument("--v", type=float, default=None, help="glissando shear in semitones/s")
    ke.add_argument(
        "--sigma-nu",
        type=float,
        default=None,
        dest="sigma_nu",
        help="spectral extent in semitones for --rf (default: 0.5)",
    )
    ke.add_argument(
        "--tau-a-ms",
        type=float,
        default=None,
        dest="tau_a_ms",
        help="temporal extent sigma_a in ms for --rf (default: 20)",
    )
    ke.add_argument(
        "--t-span",
        type=float,
        default=None,
        dest="t_span",
        help="time half-span in s for --rf (default: auto)",
    )
    ke.add_argument(
        "--nu-span",
        type=float,
        default=None,
        dest="nu_span",
        help="frequency half-span in semitones for --rf (default: 4 sigma-nu)",
    )
    ke.add_argument(
        "--dnu",
        type=float,
        default=None,
        help="frequency spacing in semitones for --rf (default: sigma-nu/25)",
    )
    ke.add_argument("--out-csv", default=None, dest="out_csv", help="output CSV path")
    ke.add_argument("--out-pgm", default=None, dest="out_pgm", help="output PGM path (--rf only)")
    ke.add_argument("--config", default=None, help="JSON config file; flags override")
    ke.set_defaults(func=cmd_kernels)

    return parser


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags, 0 on --help
        code = exc.code
        return int(code) if code is not None else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
