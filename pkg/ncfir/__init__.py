from .filter import BinTrajectory, NcFirFilter, design_matrix, apply_filter, prediction_error, ls_oracle
from .normal_system import NormalSystem, build_normal_system, solve_normal_system, fit_filter, closed_form_solve
from .spectrogram import (
    SpectrogramPair,
    dereverberate_spectrogram,
    context_sweep_errors,
    context_sweep,
    summarize_sweep,
    fixed_tap_slice,
    filters_to_frame,
)
