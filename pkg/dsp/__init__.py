from .audio import Waveform, read_wav, write_wav, convolve
from .stft import StftConfig, ComplexSpectrogram, stft, istft, full_spectrum_energy
