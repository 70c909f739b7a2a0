"""Simulation of driven solid-state defects: optical Bloch dynamics under
Stark modulation, sideband spectroscopy and ground-state spin coherence."""

__version__ = "0.1.0"

from .bessel import bessel_jn, bessel_ladder, generalized_bessel_2d, generalized_bessel_ladder
from .config import ConfigError, RunConfig, parse as parse_config, serialize as serialize_config
from .driving import AcDrive, OpticalTLSParams, Tone, sideband_amplitudes
from .experiments import (
    FineStructureParams,
    band_integrated_intensity,
    bichromatic_map,
    find_resonances,
    fit_bloch_parameters,
    fit_lorentzian,
    lzs_map,
    optical_rabi_trace,
    ple_scan,
    poisson_counts,
    predict_ple_lines,
)
from .fitting import BlochFit, EnvelopeFit, FitError, LorentzianFit
from .io import read_scan, write_scan
from .lindblad import (
    IntegrationError,
    LindbladModel,
    OpticalBlochParams,
    PulseEnvelope,
    evolve,
    steady_state,
)
from .periodic import TrappingError
from .quantum import DensityMatrix, EigensolverError, HermitianOperator
from .results import Axis, ScanResult
from .spin import SpinSystemParams, build_ground_hamiltonian, find_zefoz_field, zefoz_basis
from .spin_dynamics import NoiseModel, hahn_echo, ramsey, spin_rabi
