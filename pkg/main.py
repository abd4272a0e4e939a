from argparse import ArgumentParser
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple
import logging
import os
import sys
import warnings

from dotenv import load_dotenv
import numpy as np
import pandas as pd

from diagnostics import average_autocorr, export_spectrogram, mse_report, tail_mass
from drivers import get_enhancer, reference_enhancer
from dsp import ComplexSpectrogram, StftConfig, Waveform, convolve, read_wav, stft, write_wav
from features import LogMelSeq, align_pairs, extract_features, load_features, save_features
from mixing import MixUtterance, lambda_sweep, rt60_subset
from mlp import (
    PairedDataset,
    TrainConfig,
    context_pairs,
    dereverberate_features,
    init_model,
    load_model,
    mlp_context_sweep,
    mlp_layer_dims,
    save_model,
    train,
)
from ncfir import SpectrogramPair, context_sweep_errors, dereverberate_spectrogram, filters_to_frame, summarize_sweep
from ncfir.spectrogram import fixed_tap_slice
from rir import make_rir_set, save_rir
from utils.binary_io import read_spectrogram, write_spectrogram
from utils.config_util import ENV_VARS, ExperimentConfig, load_config
from utils.corpus_util import (
    WorkLayout,
    assign_splits,
    list_clean_wavs,
    read_manifest,
    require,
    write_manifest,
    write_run_record,
)
from utils.errors import DataError, DerevError
from utils.parallel import map_ordered

logger = logging.getLogger(__name__)
warnings.simplefilter("ignore", category=FutureWarning)

# reverberant utterances are scaled to this peak at most
PEAK_LEVEL = 0.99
FIXED_TAPS = 21


def _load_pair(layout: WorkLayout, row) -> Tuple[Waveform, Waveform]:
    clean = read_wav(require(layout.resolve(row["clean_path"]), "make-corpus"))
    reverb = read_wav(require(layout.resolve(row["reverb_path"]), "make-corpus"))
    return reverb, clean


def _spectrogram_pair(layout: WorkLayout, row) -> SpectrogramPair:
    reverb, clean = _load_pair(layout, row)
    config = StftConfig.for_rate(clean.sample_rate)
    return SpectrogramPair(row["utterance_id"], stft(reverb, config), stft(clean, config))


def _write_csv(frame: pd.DataFrame, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {path} ({len(frame)} rows)")


def _feature(layout: WorkLayout, utterance_id: str, kind: str, producer: str) -> LogMelSeq:
    return load_features(require(layout.features(utterance_id, kind), producer))


def _train_config(config: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        epochs=config.epochs,
        newbob_threshold=config.newbob_threshold,
        max_halvings=config.max_halvings,
        seed=config.seed,
    )


def cmd_make_corpus(config: ExperimentConfig):
    """Convolve every clean utterance with its own simulated RIR."""
    layout = WorkLayout(config.workdir)
    wavs = list_clean_wavs(Path(config.clean_dir))
    ids = [wav.stem for wav in wavs]
    if len(set(ids)) != len(ids):
        raise DataError("clean WAV file names must be unique")

    cleans = [read_wav(wav) for wav in wavs]
    sample_rate = cleans[0].sample_rate
    rir_count = config.rir_count or len(ids)

    rirs = make_rir_set(
        config.seed,
        rir_count,
        config.nominal_dims,
        sample_rate=sample_rate,
        utterance_count=len(ids),
        unique=config.unique_rirs,
        fractional_delay=config.fractional_delay,
        absorption_model=config.absorption_model,
        high_pass=config.high_pass,
        jobs=config.jobs,
    )

    rng = np.random.default_rng([config.seed, 1])
    if config.unique_rirs:
        assignment = rng.permutation(rir_count)[: len(ids)]
    else:
        assignment = rng.integers(0, rir_count, size=len(ids))

    splits = assign_splits(ids)
    rows = []
    for utterance_id, wav, clean, rir_id in zip(ids, wavs, cleans, assignment):
        rir = rirs[rir_id]
        reverb = convolve(clean, rir)

        peak = float(np.max(np.abs(reverb.samples))) if len(reverb) else 0.0
        gain = min(1.0, PEAK_LEVEL / peak) if peak > 0 else 1.0

        reverb_path = layout.reverb_dir / f"{utterance_id}.wav"
        rir_path = layout.rir_dir / f"rir_{rir_id:05d}.ncir"
        write_wav(reverb.scaled(gain), reverb_path)
        save_rir(rir, rir_path)

        rows.append({
            "utterance_id": utterance_id,
            "split": splits[utterance_id],
            "subset": rt60_subset(rir.spec.rt60),
            "rir_id": int(rir_id),
            "rt60": rir.spec.rt60,
            "distance": rir.spec.distance,
            "gain": gain,
            "clean_path": str(wav.resolve()),
            "reverb_path": str(reverb_path.relative_to(layout.root)),
            "rir_path": str(rir_path.relative_to(layout.root)),
        })

    write_manifest(layout, rows)


def _fit_utterance(row, layout: WorkLayout, p: int, q: int, ridge) -> dict:
    utterance_id = row["utterance_id"]
    pair = _spectrogram_pair(layout, row)
    estimate, filters, errors = dereverberate_spectrogram(pair.reverb, pair.clean, p, q, ridge)

    write_spectrogram(layout.fir_estimate(utterance_id), estimate.values)
    _write_csv(filters_to_frame(filters), layout.fir_dir / f"{utterance_id}.filters.csv")

    clean = pair.clean.values
    clean_energy = float(np.sum(np.abs(clean) ** 2))
    baseline = np.sum(np.abs(pair.reverb.values[: len(clean)] - clean) ** 2, axis=0)
    return {
        "utterance_id": utterance_id,
        "p": p,
        "q": q,
        "err": errors.sum() / clean_energy,
        "baseline_err": baseline.sum() / clean_energy,
        "bins_below_baseline": float(np.mean(errors < baseline)),
    }


def cmd_fit_fir(config: ExperimentConfig):
    """In-sample non-causal FIR fit of every utterance at (fir_p, fir_q)."""
    layout = WorkLayout(config.workdir)
    manifest = read_manifest(layout)

    fit = partial(_fit_utterance, layout=layout, p=config.fir_p, q=config.fir_q, ridge=config.ridge)
    rows = map_ordered(fit, manifest.to_dict("records"), config.jobs)

    _write_csv(pd.DataFrame(rows), layout.reports_dir / "fir_errors.csv")


def cmd_sweep_context(config: ExperimentConfig):
    layout = WorkLayout(config.workdir)
    manifest = read_manifest(layout)
    corpus = [_spectrogram_pair(layout, row) for row in manifest.to_dict("records")]
    grid = [tuple(pq) for pq in config.context_grid]

    errors = context_sweep_errors(corpus, grid, config.ridge, config.jobs)
    _write_csv(errors, layout.reports_dir / "context_sweep_errors.csv")

    table = summarize_sweep(errors)
    _write_csv(table, layout.reports_dir / "context_sweep.csv")

    if (table["taps"] == FIXED_TAPS).any():
        _write_csv(fixed_tap_slice(table, FIXED_TAPS), layout.reports_dir / f"context_sweep_{FIXED_TAPS}taps.csv")


def _featurize_utterance(row, layout: WorkLayout, enhancer):
    reverb, clean = _load_pair(layout, row)
    enhanced = reference_enhancer(enhancer, reverb)

    save_features(extract_features(clean), layout.features(row["utterance_id"], "clean"))
    save_features(extract_features(reverb), layout.features(row["utterance_id"], "reverb"))
    save_features(extract_features(enhanced), layout.features(row["utterance_id"], "ref_enhanced"))
    return row["utterance_id"]


def cmd_featurize(config: ExperimentConfig):
    """MVN'd log-Mel features of the clean, reverberant and reference-enhanced versions."""
    layout = WorkLayout(config.workdir)
    manifest = read_manifest(layout)

    params = {"p": config.enhancer_p, "ridge": config.ridge} if config.enhancer == "causal-fir" else {}
    enhancer = get_enhancer(config.enhancer, **params)

    if enhancer.requires_fit:
        adaptation = manifest[manifest["split"] == "train"]
        if adaptation.empty:
            raise DataError(f"enhancer '{config.enhancer}' needs train utterances to adapt on")
        enhancer.fit([_load_pair(layout, row) for row in adaptation.to_dict("records")])
        if hasattr(enhancer, "filters_frame"):
            _write_csv(enhancer.filters_frame(), layout.models_dir / "enhancer_filters.csv")

    featurize = partial(_featurize_utterance, layout=layout, enhancer=enhancer)
    done = map_ordered(featurize, manifest.to_dict("records"), config.jobs)
    logger.info(f"Featurized {len(done)} utterances")


def _split_pairs(layout: WorkLayout, manifest: pd.DataFrame, split: str) -> List[Tuple[LogMelSeq, LogMelSeq]]:
    rows = manifest[manifest["split"] == split]
    return [
        (_feature(layout, u, "reverb", "featurize"), _feature(layout, u, "clean", "featurize"))
        for u in rows["utterance_id"]
    ]


def cmd_train_mlp(config: ExperimentConfig):
    layout = WorkLayout(config.workdir)
    manifest = read_manifest(layout)
    train_pairs = _split_pairs(layout, manifest, "train")
    valid_pairs = _split_pairs(layout, manifest, "dev")
    if not train_pairs:
        raise DataError("no train utterances")

    p, q = config.mlp_p, config.mlp_q
    train_set = PairedDataset.concat([context_pairs(r, c, p, q) for r, c in train_pairs])
    valid_set = PairedDataset.concat([context_pairs(r, c, p, q) for r, c in valid_pairs]) if valid_pairs else None

    dims = mlp_layer_dims(train_set.inputs.shape[1], train_set.targets.shape[1], config.hidden, config.n_hidden)
    model, trace = train(init_model(dims, config.seed), train_set, _train_config(config), valid_set)

    save_model(model, layout.models_dir / "mlp.json")
    _write_csv(trace, layout.reports_dir / "mlp_loss_trace.csv")

    if config.mlp_context_grid:
        if not valid_pairs:
            raise DataError("the MLP context sweep needs dev utterances")
        grid = [tuple(pq) for pq in config.mlp_context_grid]
        sweep = mlp_context_sweep(train_pairs, valid_pairs, grid, _train_config(config), config.hidden, config.n_hidden)
        _write_csv(sweep, layout.reports_dir / "mlp_context_sweep.csv")


def cmd_derev(config: ExperimentConfig):
    """Map reverberant and reference-enhanced features through the trained MLP."""
    layout = WorkLayout(config.workdir)
    manifest = read_manifest(layout)
    model = load_model(require(layout.models_dir / "mlp.json", "train-mlp"))
    p, q = config.mlp_p, config.mlp_q

    derev_rows, baseline_rows = [], []
    for row in manifest.to_dict("records"):
        u = row["utterance_id"]
        clean = _feature(layout, u, "clean", "featurize")
        reverb = _feature(layout, u, "reverb", "featurize")
        enhanced = _feature(layout, u, "ref_enhanced", "featurize")

        derev = dereverberate_features(model, reverb, p, q)
        save_features(derev, layout.features(u, "derev_of_reverb"))
        save_features(dereverberate_features(model, enhanced, p, q), layout.features(u, "derev_of_ref_enhanced"))

        if row["split"] == "test":
            derev_rows.append((u, align_pairs(derev, clean)[0], clean))
            baseline_rows.append((u, align_pairs(reverb, clean)[0], clean))

    if derev_rows:
        _write_csv(mse_report(derev_rows), layout.reports_dir / "derev_mse.csv")
        _write_csv(mse_report(baseline_rows), layout.reports_dir / "reverb_mse.csv")


def cmd_mix_sweep(config: ExperimentConfig):
    layout = WorkLayout(config.workdir)
    dev = read_manifest(layout, split="dev")
    if dev.empty:
        raise DataError("no dev utterances to tune lambda on")

    utterances = []
    for row in dev.to_dict("records"):
        clean = _feature(layout, row["utterance_id"], "clean", "featurize")
        streams = {}
        for kind, producer in (
            ("reverb", "featurize"),
            ("ref_enhanced", "featurize"),
            ("derev_of_reverb", "derev"),
            ("derev_of_ref_enhanced", "derev"),
        ):
            streams[kind] = align_pairs(_feature(layout, row["utterance_id"], kind, producer), clean)[0]
        utterances.append(MixUtterance(row["utterance_id"], row["subset"], clean, streams))

    tables, summaries = [], []
    for config_id in config.mix_configs:
        result = lambda_sweep(config_id, utterances, config.lambda_grid)
        tables.append(result.table)
        summaries.append(result.summary)

    _write_csv(pd.concat(tables, ignore_index=True), layout.reports_dir / "mix_sweep.csv")
    _write_csv(pd.concat(summaries, ignore_index=True), layout.reports_dir / "mix_summary.csv")


def cmd_diagnose(config: ExperimentConfig):
    """Autocorrelation tails of clean, reverberant and FIR-dereverberated trajectories, plus exports."""
    layout = WorkLayout(config.workdir)
    manifest = read_manifest(layout)

    corpora: Dict[str, List[ComplexSpectrogram]] = {"clean": [], "reverb": [], "fir_derev": []}
    for row in manifest.to_dict("records"):
        pair = _spectrogram_pair(layout, row)
        estimate = read_spectrogram(require(layout.fir_estimate(row["utterance_id"]), "fit-fir"))
        corpora["clean"].append(pair.clean)
        corpora["reverb"].append(pair.reverb)
        corpora["fir_derev"].append(pair.clean.with_values(estimate))

    curves = {name: average_autocorr(corpus, config.max_lag, config.autocorr_magnitude) for name, corpus in corpora.items()}

    autocorr = pd.DataFrame({"lag": np.arange(config.max_lag + 1)})
    for name, curve in curves.items():
        autocorr[name] = curve.values
    _write_csv(autocorr, layout.reports_dir / "autocorr.csv")

    tails = pd.DataFrame([
        {"condition": name, "tail_mass": tail_mass(curve), "trajectories": curve.trajectories, "skipped": curve.skipped}
        for name, curve in curves.items()
    ])
    _write_csv(tails, layout.reports_dir / "autocorr_tail.csv")

    utterance_id = config.export_utterance or manifest["utterance_id"].iloc[0]
    if utterance_id not in set(manifest["utterance_id"]):
        raise DataError(f"unknown utterance {utterance_id} to export")
    index = int(np.flatnonzero(manifest["utterance_id"] == utterance_id)[0])

    fmt = config.export_format
    for name, corpus in corpora.items():
        export_spectrogram(corpus[index], layout.exports_dir / f"{utterance_id}.{name}.{fmt}", fmt)
    for kind in ("clean", "reverb"):
        path = layout.features(utterance_id, kind)
        if path.exists():
            export_spectrogram(load_features(path), layout.exports_dir / f"{utterance_id}.{kind}_lfe.{fmt}", fmt)


COMMANDS = {
    "make-corpus": cmd_make_corpus,
    "fit-fir": cmd_fit_fir,
    "sweep-context": cmd_sweep_context,
    "featurize": cmd_featurize,
    "train-mlp": cmd_train_mlp,
    "derev": cmd_derev,
    "mix-sweep": cmd_mix_sweep,
    "diagnose": cmd_diagnose,
}


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--workdir")
    common.add_argument("--jobs", type=int)
    common.add_argument("--log-level", dest="log_level")

    parser = ArgumentParser(description="Single-channel speech dereverberation experiments")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=(func.__doc__ or "").strip() or None)

    make_corpus = subparsers.choices["make-corpus"]
    make_corpus.add_argument("--clean-dir", dest="clean_dir")
    make_corpus.add_argument("--rir-count", dest="rir_count", type=int)

    return parser


def _set_log_level(level: str):
    logging.basicConfig()
    logging.getLogger().setLevel(level.upper())


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}

    # the config file may still change the level, this covers config resolution itself
    load_dotenv()
    try:
        _set_log_level(args.log_level or os.getenv(ENV_VARS["log_level"]) or "INFO")
    except ValueError:
        _set_log_level("INFO")

    try:
        config = load_config(args.config, overrides)
        _set_log_level(config.log_level)

        logger.info(f"Running {args.command} in {config.workdir} (seed {config.seed})")
        COMMANDS[args.command](config)
        write_run_record(WorkLayout(config.workdir), args.command, config.to_dict())
    except DerevError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code

    return 0


if __name__ == "__main__":
    sys.exit(main())
