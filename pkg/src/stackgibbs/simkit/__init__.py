"""Simulation studies: data generators, SIR component forecasters and drivers."""

from .components import COMPONENT_NAMES, fit_sir_components
from .config import DynamicStudyConfig, IidStudyConfig, SirStudyConfig
from .generators import gen_dynamic_mixture, gen_iid_mixture, gen_sir
from .hubsynth import SyntheticHubConfig, synthetic_hub_archive
from .studies import METHODS, STUDIES, StudyReport, make_config, method_weights, run_study

__all__ = [
    "COMPONENT_NAMES", "DynamicStudyConfig", "IidStudyConfig", "METHODS", "STUDIES", "SirStudyConfig",
    "StudyReport", "SyntheticHubConfig", "fit_sir_components", "gen_dynamic_mixture", "gen_iid_mixture",
    "gen_sir", "make_config", "method_weights", "run_study", "synthetic_hub_archive",
]
