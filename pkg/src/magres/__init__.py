"""Stochastic-magnet neuron models and leaky stochastic reservoir computing."""

__version__ = "0.1.0"

from .device import (  # noqa: E402
    MagnetParams,
    NeuronParams,
    asn_output,
    bsn_output,
    characterize_transfer,
    energy_barrier_from_material,
    retention_time,
)
from .reservoir import (  # noqa: E402
    ReservoirConfig,
    ReservoirTopology,
    StateTrace,
    init_topology,
    run_free,
    run_teacher_forced,
    spectral_radius,
    step,
)
from .rng import RngState  # noqa: E402
from .synapse import ConductanceNetwork, input_currents, quantize, weights_to_conductances  # noqa: E402
from .tasks import (  # noqa: E402
    ChannelParams,
    ExperimentSpec,
    MGParams,
    channel_apply,
    gen_symbols,
    mackey_glass,
    run_equalization_experiment,
    run_mg_experiment,
)
from .training import RidgeConfig, nrmse, srr, train_readout  # noqa: E402
