from .mel import MelFilterBank, LogMelSeq, mel_bank, log_mel, N_MELS
from .context import ContextSeq, mvn, stack_context, align_pairs
from .pipeline import extract_features, save_features, load_features, features_to_frame
