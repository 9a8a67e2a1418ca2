import math

import numpy as np
import pytest

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
from tonescale.spectrogram import (
    SpectrogramFamily,
    WindowScaleLaw,
    build_frequency_grid,
    channel_delays,
    compute_spectrogram,
    to_db,
)
from tonescale.temporal_scale_space import (
    Distribution,
    TemporalKernelSpec,
    build_ladder,
    discretize_ladder,
)

from conftest import exponential_chirp, sine

RATE = 44100.0
FAM = SpectrogramFamily(kind="rec-log", K=7, c=math.sqrt(2.0))
TAU_A = 0.02 ** 2
S_NU = 0.25


def step_tone_db(t_on=0.4, duration=1.0, freq=440.0, span=(64.0, 74.0)):
    grid = build_frequency_grid(span[0], span[1], 48, law=WindowScaleLaw(n=8.0))
    t = np.arange(int(duration * RATE)) / RATE
    x = 0.5 * (t >= t_on) * np.sin(2 * np.pi * freq * t)
    return to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))


def synthetic_db_step(t_on=0.4, duration=1.0, lo=-60.0, hi=0.0, span=(64.0, 74.0)):
    """A dB map that jumps from lo to hi at t_on on every channel."""
    from tonescale.spectrogram import LogSpectrogram

    grid = build_frequency_grid(span[0], span[1], 48, law=WindowScaleLaw(n=8.0))
    hop = 44
    n_frames = int(duration * RATE / hop)
    frame_times = np.arange(n_frames) * hop / RATE
    values = np.where(frame_times[:, None] >= t_on, hi, lo) * np.ones(
        (1, grid.n_channels)
    )
    return LogSpectrogram(
        values=values,
        frame_times=frame_times,
        grid=grid,
        sample_rate=RATE,
        hop=hop,
        family=FAM,
        S0=1.0,
        warmup_frames=np.zeros(grid.n_channels, dtype=int),
    )


def test_onset_map_peaks_at_smoothing_delay_after_a_db_step():
    t_on = 0.4
    L = synthetic_db_step(t_on=t_on)
    onset = detect_onsets(L, TAU_A, S_NU)
    ch = L.grid.n_channels // 2
    peak_frame = int(np.argmax(onset.values[:, ch]))
    # the step is smeared by the causal smoothing kernel; the derivative
    # peaks at the kernel maximum after the step
    frame_rate = RATE / 44
    lad = discretize_ladder(build_ladder(Distribution.UNIFORM, TAU_A, 4), frame_rate)
    t_max_frames = 3 * lad.mus[0]
    step_frame = t_on * frame_rate
    assert abs(peak_frame - (step_frame + t_max_frames)) <= 1.5
    assert onset.values.min() >= 0.0


def test_onset_map_fires_after_an_audio_step():
    t_on = 0.4
    L = step_tone_db(t_on=t_on)
    onset = detect_onsets(L, TAU_A, S_NU)
    ch = int(np.argmin(np.abs(L.grid.nu - 69.0)))
    peak_t = L.frame_times[int(np.argmax(onset.values[:, ch]))]
    # layer-1 adds its own channel delay on top of the layer-2 kernel max
    assert t_on < peak_t < t_on + 0.12
    assert onset.values.min() >= 0.0


def test_offset_map_ignores_a_rising_db_step():
    L = synthetic_db_step()
    offset = detect_offsets(L, TAU_A, S_NU)
    assert np.max(offset.values) == 0.0
    # and the onset map ignores a falling step
    L2 = synthetic_db_step()
    L2.values = -L2.values - 30.0
    assert np.max(detect_onsets(L2, TAU_A, S_NU).values) == 0.0


def test_offset_map_mirrors_onset_for_reversed_step():
    # tone switched OFF at t_off
    grid = build_frequency_grid(64.0, 74.0, 48, law=WindowScaleLaw(n=8.0))
    t = np.arange(int(1.0 * RATE)) / RATE
    x = 0.5 * (t < 0.5) * np.sin(2 * np.pi * 440.0 * t)
    L = to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))
    offset = detect_offsets(L, TAU_A, S_NU)
    onset = detect_onsets(L, TAU_A, S_NU)
    ch = int(np.argmin(np.abs(grid.nu - 69.0)))
    assert offset.values[:, ch].max() > 0.0
    j_off = int(np.argmax(offset.values[:, ch]))
    assert L.frame_times[j_off] > 0.5
    # after the initial onset transient has passed, no onset response remains
    assert onset.values[700:, ch].max() == 0.0


def test_constant_input_has_no_onsets_or_offsets():
    L = synthetic_db_step()
    L.values = np.full_like(L.values, -20.0)
    for f in (detect_onsets, detect_offsets):
        assert np.max(f(L, TAU_A, S_NU).values) == 0.0


def test_band_enhancement_is_rectified_and_peaks_on_partials():
    grid = build_frequency_grid(60.0, 97.0, 48, law=WindowScaleLaw(n=8.0))
    t = np.arange(int(1.0 * RATE)) / RATE
    x = (
        0.4 * np.sin(2 * np.pi * 440.0 * t)
        + 0.25 * np.sin(2 * np.pi * 880.0 * t)
        + 0.15 * np.sin(2 * np.pi * 1320.0 * t)
    )
    L = to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))
    bands = enhance_bands(L, TAU_A, S_NU)
    assert bands.values.min() >= 0.0
    last = bands.values[-1]
    # local maxima of the band map sit on the three partials
    local = [
        grid.nu[i]
        for i in range(1, len(last) - 1)
        if last[i] > last[i - 1] and last[i] > last[i + 1] and last[i] > 3.0
    ]
    assert len(local) == 3
    for found, target in zip(sorted(local), (69.0, 81.0, 88.02)):
        assert abs(found - target) < 0.3


def test_partial_curves_track_three_partials():
    grid = build_frequency_grid(60.0, 97.0, 48, law=WindowScaleLaw(n=8.0))
    t = np.arange(int(1.5 * RATE)) / RATE
    x = (
        0.4 * np.sin(2 * np.pi * 440.0 * t)
        + 0.25 * np.sin(2 * np.pi * 880.0 * t)
        + 0.15 * np.sin(2 * np.pi * 1320.0 * t)
    )
    L = to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))
    curves = extract_partial_curves(band_response(L, TAU_A, S_NU), c_min=3.0)
    long_curves = [c for c in curves if len(c.frames) > 100]
    assert len(long_curves) == 3
    means = sorted(c.mean_nu for c in long_curves)
    for found, target in zip(means, (69.0, 81.0, 88.02)):
        assert abs(found - target) < 0.1
    # curves are consecutive in frames and carry matching arrays
    for c in long_curves:
        assert np.all(np.diff(c.frames) == 1)
        assert len(c.nus) == len(c.frames) == len(c.strengths)


def test_partial_curve_follows_slow_chirp():
    grid = build_frequency_grid(62.0, 76.0, 48, law=WindowScaleLaw(n=8.0))
    x = exponential_chirp(67.0, 3.0, 1.2, RATE)
    L = to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))
    curves = extract_partial_curves(band_response(L, TAU_A, S_NU), c_min=3.0)
    main = max(curves, key=lambda c: len(c.frames))
    times = L.frame_times[main.frames]
    slope = np.polyfit(times, main.nus, 1)[0]
    assert slope == pytest.approx(3.0, abs=0.1)


def test_glissando_bank_ties_break_toward_zero_on_steady_tone():
    L = step_tone_db(t_on=0.0, duration=1.2)
    bank = (-40.0, -20.0, 0.0, 20.0, 40.0)
    est = glissando_filterbank(L, bank, TAU_A, S_NU)
    # judge on the tone ridge itself, at frames where even the fastest bank
    # member warps within the grid (mirror ghosts stay clear of the ridge)
    ch = int(np.argmin(np.abs(L.grid.nu - 69.0)))
    t_mid = L.frame_times[len(L.frame_times) // 2]
    margin = min(69.0 - L.grid.nu_min, L.grid.nu_max - 69.0)
    ok = np.abs(L.frame_times - t_mid) <= margin / 40.0
    ok &= np.arange(len(ok)) >= int(est.warmup_frames[ch] * 1.2)
    assert ok.sum() > 50
    sel = est.vhat[ok, ch]
    assert est.response[ok, ch].min() > 3.0
    assert np.all(sel == 0.0)


def test_glissando_bank_empty_rejected():
    L = step_tone_db()
    with pytest.raises(ValueError):
        glissando_filterbank(L, (), TAU_A, S_NU)


def test_glissando_bank_picks_matching_slope_on_chirp():
    grid = build_frequency_grid(50.0, 90.0, 48, law=WindowScaleLaw(n=8.0))
    v0 = 20.0
    x = exponential_chirp(70.0 - v0 * 0.75, v0, 1.5, RATE)
    L = to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))
    tau_a = 0.06 ** 2
    est = glissando_filterbank(
        L,
        (-40.0, -20.0, -10.0, 0.0, 10.0, 20.0, 40.0),
        tau_a,
        0.35 ** 2,
        temporal=TemporalKernelSpec.gaussian(tau_a),
    )
    warm = np.ceil(est.warmup_frames * 1.2).astype(int)
    mask = ridge_mask(est.response.copy(), warm, 4.0)
    interior = (grid.nu >= 58.0) & (grid.nu <= 82.0)
    mask[:, ~interior] = False
    assert mask.sum() > 100
    assert np.mean(est.vhat[mask] == v0) >= 0.9


def test_second_moment_estimates_chirp_slope():
    grid = build_frequency_grid(55.0, 85.0, 48, law=WindowScaleLaw(n=8.0))
    v0 = 10.0
    x = exponential_chirp(62.5, v0, 1.5, RATE)
    L = to_db(compute_spectrogram(x, RATE, grid, FAM, hop=44))
    sm = second_moment_glissando(L, TAU_A, S_NU, 0.06 ** 2, 1.0)
    band = band_response(L, TAU_A, S_NU)
    warm = np.ceil(band.warmup_frames * 1.2).astype(int)
    mask = ridge_mask(band.values.copy(), warm, 3.0) & sm.defined
    med = float(np.median(sm.vhat[mask]))
    assert med == pytest.approx(v0, abs=1.0)
    # stationary tone: slope near zero
    L2 = step_tone_db(t_on=0.0, duration=1.0)
    sm2 = second_moment_glissando(L2, TAU_A, S_NU, 0.06 ** 2, 1.0)
    band2 = band_response(L2, TAU_A, S_NU)
    warm2 = np.ceil(band2.warmup_frames * 1.2).astype(int)
    mask2 = ridge_mask(band2.values.copy(), warm2, 3.0) & sm2.defined
    assert abs(float(np.median(sm2.vhat[mask2]))) < 1.0


def test_second_moment_requires_integration_scales_above_derivation():
    L = step_tone_db()
    with pytest.raises(ValueError):
        second_moment_glissando(L, 0.05 ** 2, 0.25, 0.02 ** 2, 1.0)


def test_feature_maps_share_spectrogram_axes():
    L = step_tone_db()
    onset = detect_onsets(L, TAU_A, S_NU)
    assert onset.values.shape == L.values.shape
    assert onset.frame_times is L.frame_times or np.array_equal(
        onset.frame_times, L.frame_times
    )
    assert onset.kind == "onset"


def test_onset_peak_time_respects_delay_compensation_bound():
    """Compensating layer-1 delays moves the onset peak of a step to within
    the layer-2 window of the physical step time."""
    from tonescale.spectrogram import delay_compensate

    t_on = 0.4
    grid = build_frequency_grid(64.0, 74.0, 48, law=WindowScaleLaw(n=8.0))
    t = np.arange(int(1.0 * RATE)) / RATE
    x = 0.5 * (t >= t_on) * np.sin(2 * np.pi * 440.0 * t)
    S = compute_spectrogram(x, RATE, grid, FAM, hop=44)
    L = to_db(delay_compensate(S))
    onset = detect_onsets(L, TAU_A, S_NU)
    ch = int(np.argmin(np.abs(grid.nu - 69.0)))
    frame_rate = RATE / 44
    peak_t = np.argmax(onset.values[:, ch]) / frame_rate
    lad = discretize_ladder(build_ladder(Distribution.UNIFORM, TAU_A, 4), frame_rate)
    t_max2 = 3 * lad.mus[0] / frame_rate
    t_infl1_2 = (3 - math.sqrt(3)) * lad.mus[0] / frame_rate
    slack = t_max2 - t_infl1_2 + 2.0 / frame_rate
    assert abs(peak_t - (t_on + t_max2)) <= slack
