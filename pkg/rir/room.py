"""Randomised shoebox rooms following the reverberant-corpus recipe.

Room dimensions are drawn within +/-20 % of a nominal meeting room, RT60 between
0.4 and 1.99 s, speaker-microphone distance between 0.144 and 2.816 m, both at
least 1 m from any wall and between 1 m and 2 m above the floor.
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple
import logging
import math

import numpy as np

from utils.errors import DataError, NumericalError

logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
NOMINAL_DIMS = (7.95, 5.68, 4.5)
DIM_SPREAD = 0.2
RT60_RANGE = (0.4, 1.99)
DISTANCE_RANGE = (0.144, 2.816)
WALL_MARGIN = 1.0
HEIGHT_BAND = (1.0, 2.0)

ABSORPTION_MODELS = ("sabine", "eyring")

Vec3 = Tuple[float, float, float]


def _vec3(values, name: str) -> Vec3:
    values = tuple(float(v) for v in values)
    if len(values) != 3:
        raise DataError(f"{name} must have 3 coordinates, got {len(values)}")
    return values


@dataclass(frozen=True)
class RoomSpec:
    dims: Vec3
    src: Vec3
    mic: Vec3
    rt60: float
    sample_rate: int = 16000
    max_rir_len: int = None
    absorption_model: str = "sabine"

    def __post_init__(self):
        object.__setattr__(self, "dims", _vec3(self.dims, "dims"))
        object.__setattr__(self, "src", _vec3(self.src, "src"))
        object.__setattr__(self, "mic", _vec3(self.mic, "mic"))
        object.__setattr__(self, "rt60", float(self.rt60))

        if min(self.dims) <= 0:
            raise DataError(f"room dimensions must be positive, got {self.dims}")
        for name, point in (("src", self.src), ("mic", self.mic)):
            if not all(0 < c < d for c, d in zip(point, self.dims)):
                raise DataError(f"{name} {point} is not strictly inside room {self.dims}")
        if self.rt60 <= 0:
            raise DataError(f"rt60 must be positive, got {self.rt60}")
        if self.sample_rate <= 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.absorption_model not in ABSORPTION_MODELS:
            raise DataError(f"absorption_model must be one of {ABSORPTION_MODELS}")

        if self.max_rir_len is None:
            object.__setattr__(
                self, "max_rir_len", int(math.ceil(1.2 * self.rt60 * self.sample_rate))
            )
        if self.max_rir_len < 1:
            raise DataError(f"max_rir_len must be >= 1, got {self.max_rir_len}")

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(np.subtract(self.src, self.mic)))

    def constraint_violations(self) -> List[str]:
        """The sampling-recipe constraints this spec breaks, empty when it satisfies them all."""
        violations = []
        lo, hi = admissible_box(self.dims)
        for name, point in (("src", self.src), ("mic", self.mic)):
            if not (np.all(np.asarray(point) >= lo) and np.all(np.asarray(point) <= hi)):
                violations.append(f"{name} {point} outside admissible region {lo}..{hi}")
        if not DISTANCE_RANGE[0] <= self.distance <= DISTANCE_RANGE[1]:
            violations.append(f"distance {self.distance:.3f} m outside {DISTANCE_RANGE}")
        if not RT60_RANGE[0] <= self.rt60 <= RT60_RANGE[1]:
            violations.append(f"rt60 {self.rt60:.3f} s outside {RT60_RANGE}")
        return violations

    def to_meta(self) -> Dict[str, str]:
        return {
            "dims": ",".join(repr(v) for v in self.dims),
            "src": ",".join(repr(v) for v in self.src),
            "mic": ",".join(repr(v) for v in self.mic),
            "rt60": repr(self.rt60),
            "sample_rate": str(self.sample_rate),
            "max_rir_len": str(self.max_rir_len),
            "absorption_model": self.absorption_model,
        }

    @classmethod
    def from_meta(cls, meta: Dict[str, str]) -> "RoomSpec":
        try:
            return cls(
                dims=[float(v) for v in meta["dims"].split(",")],
                src=[float(v) for v in meta["src"].split(",")],
                mic=[float(v) for v in meta["mic"].split(",")],
                rt60=float(meta["rt60"]),
                sample_rate=int(meta["sample_rate"]),
                max_rir_len=int(meta["max_rir_len"]),
                absorption_model=meta.get("absorption_model", "sabine"),
            )
        except (KeyError, ValueError) as e:
            raise DataError(f"invalid RoomSpec block: {e}") from e


def admissible_box(dims: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Region where a source or microphone may be placed."""
    length, width, height = dims
    lo = np.array([WALL_MARGIN, WALL_MARGIN, max(HEIGHT_BAND[0], WALL_MARGIN)])
    hi = np.array([length - WALL_MARGIN, width - WALL_MARGIN, min(HEIGHT_BAND[1], height - WALL_MARGIN)])
    return lo, hi


def _can_host_distances(dims: Sequence[float]) -> bool:
    lo, hi = admissible_box(dims)
    if np.any(hi < lo):
        return False
    return float(np.linalg.norm(hi - lo)) >= DISTANCE_RANGE[1]


def volume_and_surface(dims: Sequence[float]) -> Tuple[float, float]:
    length, width, height = dims
    return length * width * height, 2 * (length * width + width * height + length * height)


def absorption(dims: Sequence[float], rt60: float, model: str = "sabine") -> float:
    """Uniform wall absorption coefficient that yields ``rt60`` in a room of ``dims``."""
    volume, surface = volume_and_surface(dims)
    exponent = 24 * math.log(10) * volume / (SPEED_OF_SOUND * surface * rt60)

    if model == "sabine":
        alpha = exponent
    elif model == "eyring":
        alpha = 1 - math.exp(-exponent)
    else:
        raise DataError(f"unknown absorption model {model}")

    # allow for rounding when rt60 is exactly the anechoic limit
    if alpha > 1 and alpha - 1 < 1e-9:
        alpha = 1.0
    if not 0 < alpha <= 1:
        raise NumericalError(
            f"rt60 {rt60:.3f} s is unreachable in room {tuple(dims)}: required absorption {alpha:.3f}"
        )
    return alpha


def min_rt60(dims: Sequence[float], model: str = "sabine") -> float:
    """Shortest reachable RT60 (fully absorbing walls)."""
    if model == "eyring":
        return 0.0
    volume, surface = volume_and_surface(dims)
    return 24 * math.log(10) * volume / (SPEED_OF_SOUND * surface)


def sample_room(
    rng: np.random.Generator,
    nominal_dims: Sequence[float] = NOMINAL_DIMS,
    sample_rate: int = 16000,
    max_retries: int = 200,
    batch_size: int = 256,
    absorption_model: str = "sabine",
) -> RoomSpec:
    """Draw one room, source and microphone position and RT60.

    :param rng: seeded generator, consumed sequentially
    :param nominal_dims: nominal (length, width, height) in meters
    :param max_retries: bounded number of redraws for dims and positions
    :return: a RoomSpec with no constraint violations
    """
    nominal = np.asarray(_vec3(nominal_dims, "nominal_dims"))
    if np.any(nominal <= 0):
        raise DataError(f"nominal dims must be positive, got {tuple(nominal)}")

    if not _can_host_distances((1 + DIM_SPREAD) * nominal):
        raise DataError(
            f"nominal room {tuple(nominal)} is infeasible: the 1 m wall margins and the "
            f"{HEIGHT_BAND} m height band cannot host a {DISTANCE_RANGE[1]} m separation"
        )

    for _ in range(max_retries):
        dims = rng.uniform((1 - DIM_SPREAD) * nominal, (1 + DIM_SPREAD) * nominal)
        if _can_host_distances(dims):
            break
    else:
        raise DataError(f"no feasible room drawn around {tuple(nominal)} after {max_retries} tries")

    rt60 = rng.uniform(*RT60_RANGE)
    lo, hi = admissible_box(dims)

    for _ in range(max_retries):
        distance = rng.uniform(*DISTANCE_RANGE)

        src = rng.uniform(lo, hi, size=(batch_size, 3))
        direction = rng.normal(size=(batch_size, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        mic = src + distance * direction

        valid = np.all((mic >= lo) & (mic <= hi), axis=1)
        if valid.any():
            i = int(np.argmax(valid))
            return RoomSpec(
                dims=dims,
                src=src[i],
                mic=mic[i],
                rt60=rt60,
                sample_rate=sample_rate,
                absorption_model=absorption_model,
            )

        logger.debug(f"no placement for distance {distance:.3f} m in {batch_size} draws, redrawing")

    raise DataError(f"couldn't place source and microphone in room {tuple(dims)} after {max_retries} tries")


def sample_room_set(
    seed: int,
    count: int,
    nominal_dims: Sequence[float] = NOMINAL_DIMS,
    sample_rate: int = 16000,
    absorption_model: str = "sabine",
) -> List[RoomSpec]:
    """``count`` rooms, room i drawn from the i-th child of ``seed``."""
    if count < 1:
        raise DataError(f"count must be >= 1, got {count}")

    children = np.random.SeedSequence(seed).spawn(count)
    return [
        sample_room(
            np.random.default_rng(child),
            nominal_dims,
            sample_rate=sample_rate,
            absorption_model=absorption_model,
        )
        for child in children
    ]
