"""Multi-scale auditory receptive fields.

Layer one turns a waveform into complex multi-scale spectrograms using
Gaussian (Gabor) or time-causal cascade (Gammatone and generalized
Gammatone) temporal windows on a logarithmic frequency axis. Layer two
applies spectro-temporal derivative receptive fields to the dB map, from
which onset/offset maps, spectral band enhancement, partial-tone curves,
and glissando estimates are computed. A separate analysis module
reproduces the filter families' frequency-selectivity and temporal-delay
characteristics in closed or numeric form.
"""

from tonescale.temporal_scale_space import (
    Distribution,
    SampledKernel,
    ScaleLadder,
    TemporalKernelSpec,
    build_ladder,
    cascade_kernel_numeric,
    composed_uniform_kernel_sample,
    discrete_gaussian_kernel,
    discrete_recursive_smooth,
    discretize_ladder,
    gaussian_kernel_sample,
    temporal_derivative_channels,
)
from tonescale.spectrogram import (
    ComplexSpectrogram,
    FrequencyGrid,
    LogSpectrogram,
    SpectrogramFamily,
    WindowScaleLaw,
    build_frequency_grid,
    compute_spectrogram,
    delay_compensate,
    frequency_from_midi,
    midi_from_frequency,
    to_db,
    window_scale,
)
from tonescale.receptive_fields import RFSpec, apply_rf, glissando_warp, spectral_smooth
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
from tonescale.selectivity_analysis import (
    WindowFamily,
    bandwidth_constant,
    delay_measures,
    relative_bandwidth,
    selectivity_db,
)

__version__ = "0.1.0"
