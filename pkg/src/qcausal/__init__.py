"""Classical and quantum memory of stationary processes, forward and reversed in time."""
from .families import cycle, flower, heralding_coin, heralding_coin_reverse, iid, perturbed_coin
from .machines import (
    ComplexityReport,
    GeneralHMM,
    MachineError,
    UnifilarMachine,
    block_entropy,
    excess_entropy_estimate,
    load_machine,
    minimize,
    save_machine,
    statistical_complexity,
    topological_complexity,
    validate,
)
from .reversal import StateBudgetError, reverse_epsilon_machine
from .simulator import build_step_operator, exact_word_distribution, sample_trajectory
from .spectral import AnalysisConfig, analyze_bidirectional, gram_fixed_point, qmachine_spectrum

__version__ = "0.1.0"
