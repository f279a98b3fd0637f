from .distributions import HardKumaParams, hardkuma_gate, hardkuma_sample
from .sparse_map import AlphaParam, entmax, sparsemax
from .tagger import Tagset, TransitionMask, viterbi_decode
