"""beamtrack: 2D phased-array beam and channel tracking.

Library layout:

- :mod:`beamtrack.arrays` -- array geometry, steering vectors, beam kernels,
  element pattern
- :mod:`beamtrack.signal` -- probing beams, observations, noiseless recovery
- :mod:`beamtrack.estimation` -- Fisher information and CRLBs (finite and
  large-array limits) for both observation models
- :mod:`beamtrack.offsets` -- optimal exploration-offset search
- :mod:`beamtrack.trackers` -- recursive trackers, mean-field map, baselines
- :mod:`beamtrack.channels` -- ground-truth channel scenarios
- :mod:`beamtrack.harness` -- Monte-Carlo experiments and CSV emission
- :mod:`beamtrack.cli` -- the ``beamtrack`` command
"""

from .arrays import (Aoa, ArrayConfig, Dpv, OutOfPhysicalRange, PatternConfig,
                     aoa_from_dpv, beam_gain_kernel, dpv_from_aoa,
                     element_gain, element_gain_db, in_main_lobe,
                     steering_derivative, steering_vector)
from .channels import (ChannelState, DynamicI, DynamicII, QuasiStatic,
                       ScenarioConfig, evolve, init_channel, initial_estimate)
from .estimation import (DiModel, FisherDI, SingularFisher, crlb_di,
                         crlb_di_asymptotic, crlb_static,
                         crlb_static_asymptotic, fisher_di, fisher_static,
                         jacobian, sigma_di)
from .harness import (ConfigError, ExperimentConfig, MetricsRecord, emit_csv,
                      run_experiment)
from .offsets import (FADING_OFFSETS, STATIC_OFFSETS, DiAsymptotic, DiFinite,
                      NoImprovement, SearchConfig, SearchResult,
                      StaticAsymptotic, StaticFinite, canonicalize,
                      optimize_offsets, robustness_sweep)
from .signal import (AmbiguousSolution, ChannelParams, Ebm, NoSolution,
                     OffsetSet, build_ebm, noiseless_mean, observe,
                     recover_from_noiseless)
from .trackers import (ConstantStep, DiminishingStep, EkfState, JbctState,
                       RbtState, baseline_beam_switch_step, baseline_ekf_step,
                       beam_switch_tracker, count_ops, ekf_tracker,
                       jbct_dii_step, jbct_static_step, jbct_tracker,
                       mean_field, rbt_di_step, rbt_tracker)

__version__ = "0.1.0"
