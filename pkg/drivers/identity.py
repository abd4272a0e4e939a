from drivers.base import EnhancerDriver, register_enhancer
from dsp.audio import Waveform


@register_enhancer
class IdentityEnhancer(EnhancerDriver):
    name = "identity"

    @property
    def requires_fit(self) -> bool:
        return False

    def enhance(self, waveform: Waveform) -> Waveform:
        return waveform
