"""
Real almost reducibility of quasi-periodic cocycles, constructively.

Submodules
----------
harmonics
    Matrix trigonometric polynomials, C^r norms, small-divisor solvers.
jordan
    Certified nilpotent Jordan forms and structure comparison.
spectral
    Spectrum clustering and block decoupling.
resonance
    Resonance graphs, link classes and witness composition.
reduction
    Conjugation triples, realification, period doubling, full pipeline.
synth
    Case files and synthetic fixtures.
cli
    Command-line front end.
"""

from .certificates import Certificate, Inequality
from .errors import (CertificateError, DimensionError, HypothesisError, MalformedInputError,
                     ReductionError)
from .harmonics import FrequencyVector, TrigPoly
from .jordan import nilpotent_jnf, realify_jordan, same_structure
from .reduction import (Cocycle, ConjugationTriple, PipelineParams, full_pipeline,
                        realify_step)
from .resonance import analyze_classes, build_graph
from .spectral import adaptive_separation, separate_spectrum
from .synth import CaseFile, synth_case

__version__ = "0.1.0"

__all__ = [
    "Certificate", "Inequality", "CertificateError", "DimensionError", "HypothesisError",
    "MalformedInputError", "ReductionError", "FrequencyVector", "TrigPoly", "nilpotent_jnf",
    "realify_jordan", "same_structure", "Cocycle", "ConjugationTriple", "PipelineParams",
    "full_pipeline", "realify_step", "analyze_classes", "build_graph", "adaptive_separation",
    "separate_spectrum", "CaseFile", "synth_case",
]
