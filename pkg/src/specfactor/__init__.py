"""Integer factorization by simulated projective measurements, with digital
(multi-spin) and analog (SUSY potential) realizations of the required spectra."""

from .errors import NumericalError, PreconditionError
from .numtheory import Factorization, PrimeTable, SpectrumSpec, factor_oracle, sieve, spectrum_values
from .measure import build_manifold, enumerate_paths, factorize, measure_h1, prepare_from_window, primality_test
from .digital import eigenvalues_from_couplings, solve_couplings
from .susy import assemble_potential, build_superpotentials, eigen_solve

__version__ = "0.1.0"
