"""Pipeline operator surface.

Verbs: extract-features, train, encode, convert, eval, make-synth-corpus.
Global flags (after the verb): --config, --seed, --out, --jobs, --log-level.
Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure. Every run logs its fully-resolved configuration. All
stages run sequentially in utterance order, so results never depend on
--jobs; the flag is accepted for interface stability.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..bottlenecks import CodeSequence, read_codes, write_codes
from ..errors import ConfigError, DataError, NumericalError, ShapeError
from ..eval import (abx_score, bitrate, make_abx_items, metric_report,
                    parse_item_file, stream_from_codes, stream_from_frames,
                    write_metric_report)
from ..features import (FeatureSequence, MfccConfig, add_deltas, apply_cmvn,
                        compute_cmvn, mfcc, read_features, read_wav, save_cmvn,
                        segment, write_features)
from ..models import (VARIANT_IN, VARIANT_SVQ, VARIANTS, DecoderConfig,
                      EncoderConfig, SpeakerEncoderConfig, VqConfig, convert,
                      encode_utterance, init_model, load_checkpoint, train_loop)
from .config import load_config
from .manifest import read_manifest
from .synth import make_synth_corpus

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

CHECKPOINT_NAME = "model.zvqm"
SPEAKERS_NAME = "speakers.json"
TRAIN_LOG_NAME = "train_log.jsonl"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is the data-error code
    # here, so usage problems are rerouted through _UsageError instead.
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="key=value config file")
    common.add_argument("--seed", type=int, default=None,
                        help="override every configured seed")
    common.add_argument("--out", required=True, help="output directory or file")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker budget (stages are sequential; accepted "
                             "for compatibility)")
    common.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])

    parser = _Parser(prog="zvq", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-features", parents=[common],
                       help="MFCC+deltas+CMVN feature files from a manifest")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("train", parents=[common], help="train a model variant")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, help="directory of feature files")

    p = sub.add_parser("encode", parents=[common],
                       help="utterance codes (SVQ) or latents (IN)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--format", default="auto", choices=["auto", "codes", "latents"])

    p = sub.add_parser("convert", parents=[common],
                       help="convert an utterance to a target speaker")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--source", required=True, help="source utterance id")
    p.add_argument("--target-speaker", required=True)
    p.add_argument("--reference", default=None,
                   help="target-speaker utterance id for the speaker encoder")

    p = sub.add_parser("eval", parents=[common], help="objective metrics")
    p.add_argument("--kind", required=True, choices=["bitrate", "abx"])
    p.add_argument("--inputs", required=True,
                   help="directory of code or feature files")
    p.add_argument("--item-file", default=None)

    sub.add_parser("make-synth-corpus", parents=[common],
                   help="deterministic synthetic corpus with ABX items")
    return parser


def _mfcc_config(cfg) -> MfccConfig:
    f = cfg.section("features")
    return MfccConfig(window_ms=f["window_ms"], hop_ms=f["hop_ms"],
                      n_mels=f["n_mels"], n_coeffs=f["n_coeffs"])


def cmd_extract_features(args, cfg) -> int:
    man = read_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fcfg = _mfcc_config(cfg)
    feats = []
    failures = []
    for e in sorted(man.entries, key=lambda e: e.utterance_id):
        try:
            clip = read_wav(e.wav_path)
            feats.append(add_deltas(mfcc(clip, fcfg, utterance_id=e.utterance_id),
                                    window=fcfg.delta_window))
        except (DataError, OSError) as exc:
            log.error("%s: %s", e.utterance_id, exc)
            failures.append(e.utterance_id)
    if not feats:
        raise DataError("no utterance produced features")
    stats = compute_cmvn(feats)
    for feat in feats:
        write_features(apply_cmvn(feat, stats), out / f"{feat.utterance_id}.zvqf")
    save_cmvn(stats, out / "cmvn.json")
    if failures:
        log.error("%d utterance(s) failed: %s", len(failures), " ".join(failures))
        return EXIT_DATA
    return EXIT_OK


def _read_feature_dir(feature_dir) -> dict:
    paths = sorted(Path(feature_dir).glob("*.zvqf"))
    if not paths:
        raise DataError(f"{feature_dir}: no feature files (*.zvqf)")
    seqs = {}
    for p in paths:
        feat = read_features(p)
        seqs[feat.utterance_id] = feat
    return seqs


def cmd_train(args, cfg) -> int:
    man = read_manifest(args.manifest, check_paths=False)
    speakers = {name: i for i, name in enumerate(man.speaker_names)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    m = cfg.section("model")
    tr = cfg.section("train")
    if m["variant"] not in VARIANTS:
        raise ConfigError(f"[model] variant must be one of {VARIANTS}, "
                          f"got {m['variant']!r}")

    feature_dir = Path(args.features)
    segments = []
    seg_speakers = []
    for e in sorted(man.entries, key=lambda e: e.utterance_id):
        feat = read_features(feature_dir / f"{e.utterance_id}.zvqf",
                             utterance_id=e.utterance_id)
        for seg in segment(feat, length=tr["segment_frames"], hop=tr["segment_frames"]):
            segments.append(seg)
            seg_speakers.append(speakers[e.speaker_name])
    if not segments:
        raise DataError("no training segments; utterances shorter than "
                        f"{tr['segment_frames']} frames?")

    state = init_model(
        m["variant"], n_speakers=len(speakers), rng_seed=tr["seed"],
        encoder=EncoderConfig(hidden_channels=m["hidden_channels"],
                              latent_dim=m["latent_dim"],
                              n_downsample=m["n_downsample"],
                              norm_epsilon=m["norm_epsilon"]),
        speaker=SpeakerEncoderConfig(channels=m["speaker_channels"],
                                     speaker_dim=m["speaker_dim"]),
        decoder=DecoderConfig(hidden_channels=m["decoder_hidden"],
                              speaker_embedding_dim=m["speaker_dim"]),
        vq=VqConfig(codebook_size=m["codebook_size"], n_slices=m["n_slices"],
                    beta=m["beta"]),
        learning_rate=tr["learning_rate"])

    # Written before training so an aborted run still maps speaker names.
    with open(out / SPEAKERS_NAME, "w", encoding="utf-8") as fh:
        json.dump(speakers, fh, indent=2, sort_keys=True)
        fh.write("\n")

    log.info("training %s: %d segments, %d speakers, %d steps",
             m["variant"], len(segments), len(speakers), tr["steps"])
    records = train_loop(state, segments, np.asarray(seg_speakers),
                         n_steps=tr["steps"], batch_size=tr["batch_size"],
                         checkpoint_path=out / CHECKPOINT_NAME,
                         checkpoint_interval=tr["checkpoint_interval"])
    with open(out / TRAIN_LOG_NAME, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_encode(args, cfg) -> int:
    state = load_checkpoint(args.checkpoint)
    if args.format == "codes" and state.variant != VARIANT_SVQ:
        raise ConfigError(f"--format codes needs a {VARIANT_SVQ} checkpoint, "
                          f"got {state.variant}")
    if args.format == "latents" and state.variant != VARIANT_IN:
        raise ConfigError(f"--format latents needs a {VARIANT_IN} checkpoint, "
                          f"got {state.variant}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for utt, feat in _read_feature_dir(args.features).items():
        result = encode_utterance(state, feat)
        if isinstance(result, CodeSequence):
            write_codes(result, out / f"{utt}.codes")
        else:
            write_features(FeatureSequence(utt, result.data,
                                           state.encoder_cfg.latent_rate_hz),
                           out / f"{utt}.zvqf")
        n += 1
    log.info("encoded %d utterance(s)", n)
    return EXIT_OK


def cmd_convert(args, cfg) -> int:
    state = load_checkpoint(args.checkpoint)
    speakers_path = Path(args.checkpoint).parent / SPEAKERS_NAME
    if not speakers_path.is_file():
        raise DataError(f"{speakers_path}: speaker map not found next to checkpoint")
    with open(speakers_path, encoding="utf-8") as fh:
        speakers = json.load(fh)
    if args.target_speaker not in speakers:
        raise DataError(f"unknown speaker {args.target_speaker!r}; known: "
                        f"{', '.join(sorted(speakers))}")
    feature_dir = Path(args.features)
    source = read_features(feature_dir / f"{args.source}.zvqf",
                           utterance_id=args.source)
    reference = None
    if args.reference is not None:
        reference = read_features(feature_dir / f"{args.reference}.zvqf",
                                  utterance_id=args.reference)
    converted = convert(state, source, speakers[args.target_speaker], reference)
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_features(converted, out)
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    ev = cfg.section("eval")
    inputs = Path(args.inputs)
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)

    if args.kind == "bitrate":
        # Code files carry only the id and index tuples, so the frame rate
        # comes from the config that produced them: feature rate divided by
        # the encoder's total downsampling. Pass the training --config when
        # it differed from the defaults.
        latent_rate = (1000.0 / cfg.get("features", "hop_ms")
                       / 2 ** cfg.get("model", "n_downsample"))
        streams = []
        for p in sorted(inputs.glob("*.codes")):
            streams.append(stream_from_codes(read_codes(p, latent_rate)))
        for p in sorted(inputs.glob("*.zvqf")):
            streams.append(stream_from_frames(read_features(p)))
        if not streams:
            raise DataError(f"{inputs}: no *.codes or *.zvqf inputs")
        report = metric_report("bitrate", bitrate(streams),
                               config={"unit": "bits/s"}, seed=ev["seed"],
                               n_items=len(streams))
    else:
        if args.item_file is None:
            raise ConfigError("eval --kind abx requires --item-file")
        spans = parse_item_file(args.item_file)
        items = make_abx_items(spans, _read_feature_dir(inputs))
        abx = abx_score(items, mode=ev["mode"], seed=ev["seed"],
                        max_triples_per_cell=ev["max_triples_per_cell"],
                        frame_metric=ev["frame_metric"])
        report = metric_report("abx", abx.error_rate,
                               config={"mode": ev["mode"],
                                       "frame_metric": ev["frame_metric"],
                                       "max_triples_per_cell": ev["max_triples_per_cell"]},
                               seed=ev["seed"], n_items=len(items),
                               n_triples=abx.n_triples)

    write_metric_report(out, report)
    log.info("%s = %.6g (%s)", report["metric"], report["value"], out)
    return EXIT_OK


def cmd_make_synth_corpus(args, cfg) -> int:
    sy = cfg.section("synth")
    summary = make_synth_corpus(
        args.out, n_speakers=sy["n_speakers"], n_phones=sy["n_phones"],
        utterances_per_speaker=sy["utterances_per_speaker"], seed=sy["seed"],
        sample_rate=sy["sample_rate"],
        phones_per_utterance=sy["phones_per_utterance"], phone_ms=sy["phone_ms"])
    log.info("synth corpus: %s", json.dumps(summary, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "extract-features": cmd_extract_features,
    "train": cmd_train,
    "encode": cmd_encode,
    "convert": cmd_convert,
    "eval": cmd_eval,
    "make-synth-corpus": cmd_make_synth_corpus,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        cfg = load_config(args.config)
        if args.seed is not None:
            for section in ("train", "eval", "synth"):
                cfg.override(section, "seed", args.seed)
        cfg.log_resolved()
        return COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except (DataError, ShapeError, OSError) as e:
        log.error("%s", e)
        return EXIT_DATA
    except NumericalError as e:
        log.error("numerical failure: %s", e)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
