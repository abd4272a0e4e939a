"""Work-directory layout, manifest and deterministic train/dev/test split."""
from hashlib import sha256
from pathlib import Path
from typing import Dict, List, Sequence
import json
import logging

import pandas as pd

from utils import __version__
from utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
MANIFEST_COLUMNS = [
    "utterance_id", "split", "subset", "rir_id", "rt60", "distance", "gain",
    "clean_path", "reverb_path", "rir_path",
]
FEATURE_KINDS = ("clean", "reverb", "ref_enhanced", "derev_of_reverb", "derev_of_ref_enhanced")


class WorkLayout:
    def __init__(self, root):
        self.root = Path(root)

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.csv"

    @property
    def reverb_dir(self) -> Path:
        return self.root / "reverb"

    @property
    def rir_dir(self) -> Path:
        return self.root / "rirs"

    @property
    def fir_dir(self) -> Path:
        return self.root / "fir"

    @property
    def features_dir(self) -> Path:
        return self.root / "features"

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def exports_dir(self) -> Path:
        return self.root / "exports"

    @property
    def runs_dir(self) -> Path:
        return self.root / "runs"

    def features(self, utterance_id: str, kind: str) -> Path:
        if kind not in FEATURE_KINDS:
            raise DataError(f"unknown feature kind {kind}")
        return self.features_dir / f"{utterance_id}.{kind}.ncft"

    def fir_estimate(self, utterance_id: str) -> Path:
        return self.fir_dir / f"{utterance_id}.ncsp"

    def resolve(self, relative: str) -> Path:
        return self.root / relative


def require(path: Path, producer: str) -> Path:
    """Fail with the command that produces a missing upstream artifact."""
    if not Path(path).exists():
        raise DataError(f"missing upstream artifact {path}; run '{producer}' first")
    return Path(path)


def hash_bucket(utterance_id: str) -> int:
    return int(sha256(utterance_id.encode("utf-8")).hexdigest()[:8], 16)


def assign_splits(utterance_ids: Sequence[str]) -> Dict[str, str]:
    """80/10/10 split by hash of the utterance id.

    With three or more utterances an empty dev or test split takes the first
    utterance, in hash order, of the largest other split.
    """
    ordered = sorted(utterance_ids, key=lambda u: (hash_bucket(u), u))
    splits = {}
    for utterance_id in ordered:
        bucket = hash_bucket(utterance_id) % 10
        splits[utterance_id] = "train" if bucket < 8 else ("dev" if bucket == 8 else "test")

    if len(ordered) >= 3:
        for needed in ("dev", "test"):
            if needed in splits.values():
                continue
            counts = {s: sum(1 for v in splits.values() if v == s) for s in SPLITS}
            donor = max((s for s in SPLITS if s != needed and counts[s] >= 2), key=lambda s: counts[s])
            moved = next(u for u in ordered if splits[u] == donor)
            splits[moved] = needed
            logger.info(f"{moved} moved from {donor} to keep the {needed} split non-empty")

    return splits


def list_clean_wavs(clean_dir: Path) -> List[Path]:
    clean_dir = Path(clean_dir)
    if not clean_dir.is_dir():
        raise ConfigError(f"clean directory {clean_dir} doesn't exist")
    wavs = sorted(clean_dir.glob("*.wav"))
    if not wavs:
        raise DataError(f"no .wav files in {clean_dir}")
    return wavs


def write_manifest(layout: WorkLayout, rows: List[dict]) -> pd.DataFrame:
    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS).sort_values("utterance_id").reset_index(drop=True)
    layout.root.mkdir(parents=True, exist_ok=True)
    manifest.to_csv(layout.manifest, index=False)
    logger.info(f"Wrote manifest with {len(manifest)} utterances to {layout.manifest}")
    return manifest


def read_manifest(layout: WorkLayout, split: str = None) -> pd.DataFrame:
    require(layout.manifest, "make-corpus")
    manifest = pd.read_csv(layout.manifest, dtype={"utterance_id": str})
    if split is not None:
        manifest = manifest[manifest["split"] == split]
    return manifest.sort_values("utterance_id").reset_index(drop=True)


def write_run_record(layout: WorkLayout, command: str, config: dict):
    """Reproducibility record: resolved config, seed and tool version, no timestamps."""
    record = {"command": command, "version": __version__, "seed": config.get("seed"), "config": config}
    layout.runs_dir.mkdir(parents=True, exist_ok=True)
    path = layout.runs_dir / f"{command}.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True))
    logger.debug(f"Wrote run record {path}")
