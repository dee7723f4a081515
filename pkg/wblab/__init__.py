__version__ = "1.0.0"

import importlib
import sys

import jax

jax.config.update("jax_enable_x64", True)

from wblab.__src.utils.errors import (
    LabError,
    InvalidInputError,
    PreconditionError,
    CapabilityError,
    InvalidConfigError,
    IllPosedError,
    ResonanceError,
    StepRejectedError,
    PositivityError,
    TruncationError,
    NonConvergenceError,
    FoldingError,
    ResolutionError,
    WindowError,
    ConfigError
)

from wblab.__src.spectral.fourier import (
    PeriodicGrid,
    RealField,
    DiagonalSymbol,
    hilbert_symbol,
    stream_symbol,
    derivative_symbol,
    symbol_multiplier,
    spectrum,
    spectral_derivative,
    apply_symbol,
    dealiased_size,
    dealiased_product,
    spectral_antiderivative,
    fourier_interpolate,
    resample,
    exponential_filter,
    spectral_tail
)

from wblab.__src.spectral.hermite import (
    MAX_HERMITE_ORDER,
    hermite_poly,
    hermite_functions
)

from wblab.__src.balance.scalar import (
    ScalarLaw,
    burgers_law,
    traffic_law,
    traffic_eigenvalues,
    TempleState,
    temple_state,
    check_convexity,
    steady_jump,
    riemann_state,
    wb_godunov_step,
    steady_profile,
    ScalarRun,
    run_scalar,
    BressanReport,
    bressan_inflow,
    bressan_demo
)

from wblab.__src.device.state import (
    MomentState,
    doping_profile,
    DeviceConfig,
    device_config,
    rest_state,
    check_state
)

from wblab.__src.device.flux import (
    euler_flux,
    split_flux,
    wb_interface_flux,
    augmented_jump
)

from wblab.__src.device.poisson import (
    PotentialField,
    poisson_residual,
    poisson_solve
)

from wblab.__src.device.solver import (
    stable_dt,
    device_step,
    DeviceRun,
    device_run,
    SonicReport,
    sonic_diagnostics,
    IVRow,
    iv_curve
)

from wblab.__src.kinetic.vfp import (
    VfpParams,
    vfp_eigenvalue,
    translated_velocity,
    vfp_mode,
    stationary_residual,
    VfpBasis,
    VelocityGrid,
    gauss_hermite_grid,
    Decomposition,
    half_range_decompose,
    reconstruct,
    ScatteringMatrix,
    scattering_matrix,
    layer_scattering_matrix,
    to_hermite,
    from_hermite,
    fokker_planck_matrix,
    moments
)

from wblab.__src.kinetic.coupling import (
    KineticDensity,
    maxwellian_density,
    coupled_dt,
    burgers_vfp_step,
    CoupledRun,
    total_momentum,
    run_burgers_vfp,
    periodic_cells,
    burgers_field
)

from wblab.__src.waves.babenko import (
    SolitaryWave,
    PetviashviliResult,
    petviashvili_solve,
    babenko_symbol,
    decay_rate,
    solitary_window,
    babenko_solitary
)

from wblab.__src.waves.conformal import (
    ConformalSurfaceState,
    rest_surface,
    linear_wave_state,
    conformal_rhs,
    surface_abscissa,
    wave_mass,
    wave_energy,
    surface_dt,
    Trajectory,
    evolve,
    solitary_surface_state,
    mean_current,
    track_crest,
    PropagationReport,
    propagate_solitary
)

from wblab.__src.waves.serre import (
    ALPHA_OPT,
    THC_SERIES,
    ShallowState,
    vertical_acceleration,
    TravelingResidual,
    traveling_residual,
    esgn_dispersion,
    exact_dispersion,
    dispersion_mismatch,
    DispersionCurve,
    dispersion_curve,
    shallow_state,
    sgn_solitary,
    decay_kappa,
    esgn_speed,
    esgn_solitary,
    SweepRow,
    speed_amplitude_sweep
)

from wblab.__src.utils.persistence import (
    write_csv,
    read_csv,
    write_json,
    save_state,
    load_state,
    write_manifest
)

from wblab.__src.lab.config import (
    ScenarioConfig,
    parse_config,
    default_config,
    expand_range
)

from wblab.__src.lab.runner import RunResult, run
from wblab.__src.lab.cli import build_parser, main as cli_main

__all__ = [
    # Errors
    "LabError",
    "InvalidInputError",
    "PreconditionError",
    "CapabilityError",
    "InvalidConfigError",
    "IllPosedError",
    "ResonanceError",
    "StepRejectedError",
    "PositivityError",
    "TruncationError",
    "NonConvergenceError",
    "FoldingError",
    "ResolutionError",
    "WindowError",
    "ConfigError",

    # Spectral core
    "PeriodicGrid",
    "RealField",
    "DiagonalSymbol",
    "hilbert_symbol",
    "stream_symbol",
    "derivative_symbol",
    "symbol_multiplier",
    "spectrum",
    "spectral_derivative",
    "apply_symbol",
    "dealiased_size",
    "dealiased_product",
    "spectral_antiderivative",
    "fourier_interpolate",
    "resample",
    "exponential_filter",
    "spectral_tail",
    "MAX_HERMITE_ORDER",
    "hermite_poly",
    "hermite_functions",

    # Scalar balance laws
    "ScalarLaw",
    "burgers_law",
    "traffic_law",
    "traffic_eigenvalues",
    "TempleState",
    "temple_state",
    "check_convexity",
    "steady_jump",
    "riemann_state",
    "wb_godunov_step",
    "steady_profile",
    "ScalarRun",
    "run_scalar",
    "BressanReport",
    "bressan_inflow",
    "bressan_demo",

    # Euler-Poisson device
    "MomentState",
    "doping_profile",
    "DeviceConfig",
    "device_config",
    "rest_state",
    "check_state",
    "euler_flux",
    "split_flux",
    "wb_interface_flux",
    "augmented_jump",
    "PotentialField",
    "poisson_residual",
    "poisson_solve",
    "stable_dt",
    "device_step",
    "DeviceRun",
    "device_run",
    "SonicReport",
    "sonic_diagnostics",
    "IVRow",
    "iv_curve",

    # Kinetic
    "VfpParams",
    "vfp_eigenvalue",
    "translated_velocity",
    "vfp_mode",
    "stationary_residual",
    "VfpBasis",
    "VelocityGrid",
    "gauss_hermite_grid",
    "Decomposition",
    "half_range_decompose",
    "reconstruct",
    "ScatteringMatrix",
    "scattering_matrix",
    "layer_scattering_matrix",
    "to_hermite",
    "from_hermite",
    "fokker_planck_matrix",
    "moments",
    "KineticDensity",
    "maxwellian_density",
    "coupled_dt",
    "burgers_vfp_step",
    "CoupledRun",
    "total_momentum",
    "run_burgers_vfp",
    "periodic_cells",
    "burgers_field",

    # Water waves
    "SolitaryWave",
    "PetviashviliResult",
    "petviashvili_solve",
    "babenko_symbol",
    "decay_rate",
    "solitary_window",
    "babenko_solitary",
    "ConformalSurfaceState",
    "rest_surface",
    "linear_wave_state",
    "conformal_rhs",
    "surface_abscissa",
    "wave_mass",
    "wave_energy",
    "surface_dt",
    "Trajectory",
    "evolve",
    "solitary_surface_state",
    "mean_current",
    "track_crest",
    "PropagationReport",
    "propagate_solitary",

    # Serre models
    "ALPHA_OPT",
    "THC_SERIES",
    "ShallowState",
    "vertical_acceleration",
    "TravelingResidual",
    "traveling_residual",
    "esgn_dispersion",
    "exact_dispersion",
    "dispersion_mismatch",
    "DispersionCurve",
    "dispersion_curve",
    "shallow_state",
    "sgn_solitary",
    "decay_kappa",
    "esgn_speed",
    "esgn_solitary",
    "SweepRow",
    "speed_amplitude_sweep",

    # Lab
    "write_csv",
    "read_csv",
    "write_json",
    "save_state",
    "load_state",
    "write_manifest",
    "ScenarioConfig",
    "parse_config",
    "default_config",
    "expand_range",
    "RunResult",
    "run",
    "build_parser",
    "cli_main",
]


def check_library_installed(lib_name):
    try:
        return importlib.import_module(lib_name)
    except ImportError:
        raise ImportError(f"{lib_name} is not installed or improperly installed.")


def test_jax(jax):
    arr = jax.numpy.fft.rfft(jax.numpy.array([1.0, 2.0, 3.0, 4.0]))


def test_flax(flax):
    blob = flax.serialization.to_bytes({"x": [1.0, 2.0]})


def test_einops(einops, jax):
    arr = einops.rearrange(jax.numpy.ones((1, 3)), 'a b -> b a')


def test_scipy(optimize):
    root = optimize.brentq(lambda x: x - 1.0, 0.0, 2.0)


def main():
    try:
        flax = check_library_installed('flax')
        jax = check_library_installed('jax')
        einops = check_library_installed('einops')
        optimize = check_library_installed('scipy.optimize')

        test_jax(jax)
        test_flax(flax)
        test_einops(einops, jax)
        test_scipy(optimize)

    except ImportError as e:
        print(e)
        sys.exit(1)
    except Exception as e:
        print(f"An error occurred while verifying the JAX/Flax/SciPy installation: {e}")
        sys.exit(1)

if __name__ == "__main__":
    main()
