from .autocorr import AutocorrCurve, normalized_autocorr, average_autocorr, tail_mass
from .export import export_spectrogram, to_graymap
from .report import mse_report, CORPUS_ROW
