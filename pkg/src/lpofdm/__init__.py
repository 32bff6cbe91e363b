"""2D linearly precoded OFDM with spread-pilot channel estimation.

Library layout:

- :mod:`lpofdm.precoding`: Walsh-Hadamard spreading, power split, chip grid
- :mod:`lpofdm.channel`: WSSUS tapped-delay-line fading and its closed-form
  time-frequency autocorrelation
- :mod:`lpofdm.estimation`: the per-subset pilot estimator and analytical MSE
- :mod:`lpofdm.fec`: convolutional code, interleavers, mapping, soft metrics
- :mod:`lpofdm.harness`: seeded experiments, CSV emission
- :mod:`lpofdm.plotting`: figures rendered next to the delimited output
"""

from .channel import (
    ChannelRealization,
    DopplerParams,
    SampledCir,
    TapGains,
    TapProfile,
    autocorrelation,
    freq_response,
    generate_tap_gains,
    get_profile,
    quantize_profile,
)
from .errors import ConfigurationError
from .estimation import (
    EstimateRecord,
    MseBreakdown,
    SubsetObservation,
    equalize_despread,
    estimate_subset,
    estimate_subsets,
    mse_analytical,
    si_variance_analytical,
    true_subset_average,
    verify_rm_property,
)
from .fec import (
    CODE,
    CodeConfig,
    Modulation,
    conv_encode,
    demap_soft,
    ebno_to_sigma,
    map_symbols,
    viterbi_decode,
)
from .harness import (
    RunConfig,
    SweepRecord,
    bitrate_table,
    emit_csv,
    emit_plotdata,
    run_ber_sweep,
    run_channel_probe,
    run_mse_sweep,
    run_rm_check,
)
from .precoding import (
    PowerMatrix,
    PowerMode,
    PrecodeConfig,
    PrecodeMatrix,
    allocate_powers,
    build_walsh_hadamard,
    chip_demap,
    chip_map,
    deprecode,
    precode,
)

__version__ = "0.1.0"
