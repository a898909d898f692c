"""Train track representatives of free group endomorphisms and what they certify."""
from .errors import *  # noqa: F401,F403
from .words import Alphabet, Endomorphism, apply_endo, cyclic_reduce, is_injective_on_ball, reduce
from .graphs import CoreGraph, MarkedGraph, rose, stallings_core, tighten
from .maps import GraphMap, TransitionMatrix, is_irreducible, power, rose_representative, transition_matrix
from .spectral import PerronData, assign_metric, pf_eigen
from .moves import TrainTrackResult, train_track_algorithm
from .gates import Constants, bcc_constant, constants, gate_structure, illegal_count, leg_fraction
from .parabolic import (
    ParabolicFamily,
    check_strictly_type_preserving,
    coned_length,
    find_invariant_factor_system,
    parabolic_orbits,
    transversality_constant,
)
from .dynamics import atoroidal_scan, classify_growth, enumerate_nielsen_paths, flare_certificate

__version__ = "0.1.0"
