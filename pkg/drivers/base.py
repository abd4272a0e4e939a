from abc import ABC, abstractmethod
from typing import Dict, Sequence, Tuple, Type, Union
import logging

from dsp.audio import Waveform
from utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

"""
Reference enhancers stand in wherever a prior-art dereverberation front end is
applied to an utterance before featurization. Drivers register themselves by name.
"""

ENHANCERS: Dict[str, Type["EnhancerDriver"]] = {}


def register_enhancer(cls: Type["EnhancerDriver"]) -> Type["EnhancerDriver"]:
    ENHANCERS[cls.name] = cls
    return cls


class EnhancerDriver(ABC):
    name: str = ""

    def __init__(self):
        self.is_fitted = not self.requires_fit

    @property
    @abstractmethod
    def requires_fit(self) -> bool:
        pass

    @abstractmethod
    def enhance(self, waveform: Waveform) -> Waveform:
        """
        enhanced waveform of the same length and sample rate as the input
        :param waveform: a reverberant utterance
        :return:
        """
        pass

    def fit(self, pairs: Sequence[Tuple[Waveform, Waveform]]) -> "EnhancerDriver":
        """
        adapt on (reverberant, clean) pairs disjoint from the evaluation utterances
        :param pairs:
        :return: self
        """
        self.is_fitted = True
        return self

    def check_fitted(self):
        if not self.is_fitted:
            raise DataError(f"enhancer '{self.name}' must be fitted on an adaptation set first")


def get_enhancer(name: str, **params) -> EnhancerDriver:
    if name not in ENHANCERS:
        raise ConfigError(f"unknown enhancer '{name}', registered: {sorted(ENHANCERS)}")
    return ENHANCERS[name](**params)


def reference_enhancer(enhancer: Union[str, EnhancerDriver], waveform: Waveform) -> Waveform:
    """Apply a registered enhancer, by name or as an already fitted driver."""
    if isinstance(enhancer, str):
        enhancer = get_enhancer(enhancer)
    enhancer.check_fitted()
    return enhancer.enhance(waveform)
