from .semi_enhance import (
    MixConfig,
    MixUtterance,
    SweepResult,
    CONFIG_STREAMS,
    STREAMS,
    DEFAULT_GRID,
    semi_enhance,
    lambda_sweep,
    rt60_subset,
)
