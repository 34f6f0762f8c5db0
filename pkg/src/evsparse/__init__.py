"""evsparse: spatiotemporal token sparsification for event-camera streams.

The pipeline bins a raw (t, x, y, p) event stream, merges temporally
redundant bins into meta windows via an intensity-field distance and a
density-damped semantic score, encodes each window into patch tokens, and
prunes spatially uninformative tokens with density-guided attention.
"""

from .events import (Event, EventBin, EventStream, StreamFormatError,
                     StreamValidationError, load_events, save_events,
                     segment_into_bins)
from .intensity import (GridSpec, IntensityField, KernelParams, bin_distance,
                        field_distance, intensity_at, intensity_field)
from .temporal import (MergeConfig, MetaWindow, TraceRecord, density_factor,
                       merge_stage1, merge_stage2, merging_score,
                       window_similarity)
from .encoder import (EncoderConfig, TokenSequence, ToyEncoder,
                      config_fingerprint, encode, get_encoder, patch_grid,
                      rasterize)
from .sdga import (AttentionConfig, DensityEncoder, DensityMap,
                   ModulatedAttention, SelectionResult, density_encode,
                   modulated_attention, sdga, token_density, token_selector)
from .synthetic import KINDS, SyntheticSpec, generate_synthetic
from .pipeline import (EfficiencyReport, PipelineConfig, PipelineResult,
                       WindowTokens, calibrate_tau, capacity_probe,
                       default_workload, run_ablation, run_pipeline,
                       write_ablation)

__version__ = "0.1.0"
