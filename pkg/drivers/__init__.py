from .base import EnhancerDriver, ENHANCERS, get_enhancer, reference_enhancer
from .identity import IdentityEnhancer
from .causal_fir import CausalFirEnhancer
