"""specflash: spectral library search inside simulated multi-level NAND strings.

Binned spectra are encoded as binary hypervectors, packed into integer
cell levels, and searched with a dual-bound tolerance check that models
m wordlines sensed at once on a serial cell string.  An exact Hamming
oracle, a deterministic noise model, and a read-operation cost model
support accuracy/throughput trade-off studies at desk scale.
"""

from .array_model import (
    ArrayGeometry,
    ArrayLayout,
    CapacityError,
    CostParams,
    OpCounters,
    cost_report,
    count_reads_dual_bound,
    count_reads_mlc_baseline,
    map_library,
    read_speedup,
)
from .hdc import (
    HdcParams,
    Hypervector,
    ItemMemory,
    encode,
    generate_item_memory,
    hamming,
    normalized_hamming,
)
from .matching import (
    MatchConfig,
    NoiseModel,
    ScoreResult,
    dual_bound_score,
    level_to_voltage,
    lower_bound_check,
    upper_bound_check,
)
from .packing import PackedVector, bits_per_cell, pack
from .pipeline import (
    EvalSummary,
    Library,
    SearchReport,
    build_library,
    evaluate,
    exact_hamming,
    load_library,
    save_library,
    search,
    sweep,
    sweep_grid,
)
from .spectra import (
    BinnedSpectrum,
    EmptySpectrumError,
    MgfParseError,
    PreprocessConfig,
    Spectrum,
    parse_mgf,
    preprocess,
)
from .synth import SynthConfig, make_query_spectra, make_reference_spectra

__version__ = "0.1.0"
