"""Idealized HMC samplers: exact dynamics, contraction analysis and benchmarks."""

from .models import PhaseState, Spectrum, Target
from .sample import SamplerSpec, Variant, run_chain, run_chains
from .database import ResultsDatabase
from .api import LabAPI, create_api

__all__ = ['PhaseState', 'Spectrum', 'Target', 'SamplerSpec', 'Variant', 'run_chain',
           'run_chains', 'ResultsDatabase', 'LabAPI', 'create_api']
