"""Planar-array 3D DOA estimation with SRP-PHAT and fast search strategies."""

from .geom import (
    ArrayGeometry,
    Direction,
    DirectionGrid,
    SphericalCap,
    StripSet,
    build_icosphere,
    build_uca,
    cap_contains,
    dir_to_unit,
    in_strips,
    slerp,
    unit_to_dir,
)
from .harness import (
    BenchmarkReport,
    Settings,
    angular_error,
    emit_report,
    locate,
    run_recorded_bench,
    run_simulation_bench,
)
from .search import (
    AsapConfig,
    CfrcConfig,
    SearchResult,
    asap_search,
    cfrc_search,
    full_grid_search,
)
from .spectral import FrameSpec, GccSet, MultichannelSignal, build_gcc_set
from .srp import SrpEvaluator, srp_power, srp_power_batch
from .synth import LfmSpec, NoiseSpec, SourceSpec, add_noise, propagate
from .wavio import load_wav, save_wav

__version__ = "0.1.0"
