"""CLI verbs, run configuration, manifests, and the synthetic corpus."""

import hashlib
import json

import numpy as np
import pytest

from zvq.bottlenecks import read_codes
from zvq.cli import (EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, load_config,
                     main, make_synth_corpus, read_manifest, write_manifest)
from zvq.cli.manifest import ManifestEntry
from zvq.errors import ConfigError, DataError
from zvq.eval import parse_item_file
from zvq.features import FeatureSequence, read_features, write_features


def tree_hashes(root):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestConfig:
    def test_defaults(self):
        cfg = load_config(env={})
        assert cfg.get("model", "variant") == "in_wae"
        assert cfg.get("train", "steps") == 20_000
        assert cfg.get("eval", "mode") == "across_talker"

    def test_file_then_env_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[train]\nsteps = 500\nbatch_size = 4\n")
        cfg = load_config(path, env={"ZVQ_TRAIN_STEPS": "7"})
        assert cfg.get("train", "steps") == 7      # env beats file
        assert cfg.get("train", "batch_size") == 4  # file beats default

    def test_unknown_keys_rejected(self, tmp_path):
        bad_key = tmp_path / "a.cfg"
        bad_key.write_text("[train]\nstepz = 5\n")
        with pytest.raises(ConfigError):
            load_config(bad_key, env={})
        bad_section = tmp_path / "b.cfg"
        bad_section.write_text("[training]\nsteps = 5\n")
        with pytest.raises(ConfigError):
            load_config(bad_section, env={})
        with pytest.raises(ConfigError):
            load_config(env={"ZVQ_TRAIN_STEPZ": "5"})

    def test_bad_value_types_rejected(self, tmp_path):
        path = tmp_path / "a.cfg"
        path.write_text("[train]\nsteps = soon\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})
        with pytest.raises(ConfigError):
            load_config(env={"ZVQ_MODEL_BETA": "often"})

    def test_passthrough_env_is_not_config(self):
        cfg = load_config(env={"ZVQ_GRADCHECK_LOG": "/tmp/x.jsonl"})
        assert "gradcheck" not in cfg.sections

    def test_resolved_view_is_flat_and_sorted(self):
        keys = list(load_config(env={}).resolved())
        assert keys == sorted(keys)
        assert "model.latent_dim" in keys


class TestManifest:
    def test_round_trip_and_relative_paths(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(b"")
        write_manifest([ManifestEntry("u1", "a.wav", "spk0")], tmp_path / "m.tsv")
        man = read_manifest(tmp_path / "m.tsv")
        assert man.entries[0].wav_path == tmp_path / "a.wav"
        assert man.speaker_names == ["spk0"]

    def test_rejects_bad_rows(self, tmp_path):
        path = tmp_path / "m.tsv"
        for text in ("u1\ta.wav\n",                       # 2 fields
                     "u1\ta.wav\tspk0\nu1\tb.wav\tspk1\n",  # duplicate id
                     ""):                                  # empty
            path.write_text(text)
            with pytest.raises(DataError):
                read_manifest(path, check_paths=False)
        path.write_text("u1\tmissing.wav\tspk0\n")
        with pytest.raises(DataError):
            read_manifest(path)


class TestSynthCorpus:
    def test_counts_and_labels(self, tmp_path):
        summary = make_synth_corpus(tmp_path / "c", n_speakers=2, n_phones=3,
                                    utterances_per_speaker=4, seed=1,
                                    phones_per_utterance=4)
        assert summary["n_wavs"] == 8
        assert len(list((tmp_path / "c" / "wav").glob("*.wav"))) == 8
        man = read_manifest(tmp_path / "c" / "manifest.tsv")
        assert len(man.entries) == 8 and man.speaker_names == ["spk0", "spk1"]
        spans = parse_item_file(tmp_path / "c" / "items.txt")
        assert len(spans) == 8 * 4
        assert {s.category for s in spans} <= {"ph0", "ph1", "ph2"}
        assert {s.talker for s in spans} == {"spk0", "spk1"}

    def test_byte_identical_under_seed(self, tmp_path):
        kwargs = dict(n_speakers=2, n_phones=3, utterances_per_speaker=2, seed=5)
        make_synth_corpus(tmp_path / "a", **kwargs)
        make_synth_corpus(tmp_path / "b", **kwargs)
        assert tree_hashes(tmp_path / "a") == tree_hashes(tmp_path / "b")

    def test_seed_changes_audio(self, tmp_path):
        make_synth_corpus(tmp_path / "a", n_speakers=1, n_phones=2,
                          utterances_per_speaker=1, seed=0)
        make_synth_corpus(tmp_path / "b", n_speakers=1, n_phones=2,
                          utterances_per_speaker=1, seed=1)
        wav_a = next((tmp_path / "a" / "wav").glob("*.wav")).read_bytes()
        wav_b = next((tmp_path / "b" / "wav").glob("*.wav")).read_bytes()
        assert wav_a != wav_b


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus -> features -> one trained checkpoint per variant."""
    root = tmp_path_factory.mktemp("cliwork")
    assert main(["make-synth-corpus", "--out", str(root / "corpus"), "--seed", "3",
                 "--log-level", "warning"]) == EXIT_OK
    assert main(["extract-features", "--manifest", str(root / "corpus/manifest.tsv"),
                 "--out", str(root / "feats"), "--log-level", "warning"]) == EXIT_OK

    for variant, name in (("svq_wae", "run_svq"), ("in_wae", "run_in")):
        cfg = root / f"{name}.cfg"
        cfg.write_text(f"[model]\nvariant = {variant}\ncodebook_size = 32\n"
                       "[train]\nsteps = 60\ncheckpoint_interval = 30\n")
        assert main(["train", "--manifest", str(root / "corpus/manifest.tsv"),
                     "--features", str(root / "feats"), "--out", str(root / name),
                     "--config", str(cfg), "--seed", "0",
                     "--log-level", "warning"]) == EXIT_OK
    return root


class TestPipeline:
    def test_extract_outputs_and_idempotence(self, workspace, tmp_path):
        feats = workspace / "feats"
        zvqf = sorted(feats.glob("*.zvqf"))
        assert len(zvqf) == 40 and (feats / "cmvn.json").is_file()
        feat = read_features(zvqf[0])
        assert feat.dim == 39 and feat.frame_rate_hz == 100.0

        assert main(["extract-features", "--manifest",
                     str(workspace / "corpus/manifest.tsv"),
                     "--out", str(tmp_path / "feats2"),
                     "--log-level", "warning"]) == EXIT_OK
        assert tree_hashes(tmp_path / "feats2") == tree_hashes(feats)

    def test_train_outputs(self, workspace):
        for name in ("run_svq", "run_in"):
            run = workspace / name
            assert (run / "model.zvqm").is_file()
            speakers = json.loads((run / "speakers.json").read_text())
            assert speakers == {"spk0": 0, "spk1": 1}
            records = [json.loads(line)
                       for line in (run / "train_log.jsonl").read_text().splitlines()]
            assert [r["step"] for r in records] == list(range(1, 61))
            if name == "run_svq":
                assert all(0.0 < r["codebook_usage"] <= 1.0 for r in records)
            else:
                assert all(r["vq_loss"] == 0.0 for r in records)
                assert "codebook_usage" not in records[0]

    def test_train_is_byte_reproducible(self, workspace, tmp_path):
        cfg = workspace / "run_svq.cfg"
        assert main(["train", "--manifest", str(workspace / "corpus/manifest.tsv"),
                     "--features", str(workspace / "feats"),
                     "--out", str(tmp_path / "again"), "--config", str(cfg),
                     "--seed", "0", "--log-level", "warning"]) == EXIT_OK
        for name in ("model.zvqm", "train_log.jsonl", "speakers.json"):
            assert ((tmp_path / "again" / name).read_bytes()
                    == (workspace / "run_svq" / name).read_bytes()), name

    def test_encode_codes_parse_back(self, workspace, tmp_path):
        def encode_to(dest):
            return main(["encode", "--checkpoint",
                         str(workspace / "run_svq/model.zvqm"),
                         "--features", str(workspace / "feats"),
                         "--out", str(dest), "--log-level", "warning"])

        out = tmp_path / "codes"
        assert encode_to(out) == EXIT_OK
        files = sorted(out.glob("*.codes"))
        assert len(files) == 40
        codes = read_codes(files[0], frame_rate_hz=25.0)
        assert codes.utterance_id == files[0].stem
        assert codes.indices.shape[1] == 2
        assert codes.indices.min() >= 0 and codes.indices.max() < 32

        assert encode_to(tmp_path / "codes2") == EXIT_OK
        assert tree_hashes(tmp_path / "codes2") == tree_hashes(out)

    def test_encode_latents_and_format_mismatch(self, workspace, tmp_path):
        out = tmp_path / "latents"
        assert main(["encode", "--checkpoint", str(workspace / "run_in/model.zvqm"),
                     "--features", str(workspace / "feats"), "--out", str(out),
                     "--format", "latents", "--log-level", "warning"]) == EXIT_OK
        lat = read_features(next(iter(sorted(out.glob("*.zvqf")))))
        assert lat.dim == 8 and lat.frame_rate_hz == 25.0

        assert main(["encode", "--checkpoint", str(workspace / "run_in/model.zvqm"),
                     "--features", str(workspace / "feats"),
                     "--out", str(tmp_path / "x"), "--format", "codes",
                     "--log-level", "warning"]) == EXIT_USAGE

    def test_convert_deterministic_and_speaker_sensitive(self, workspace, tmp_path):
        base = ["convert", "--checkpoint", str(workspace / "run_in/model.zvqm"),
                "--features", str(workspace / "feats"), "--source", "spk0_u000",
                "--log-level", "warning"]
        a, b, c = tmp_path / "a.zvqf", tmp_path / "b.zvqf", tmp_path / "c.zvqf"
        assert main([*base, "--target-speaker", "spk1", "--out", str(a)]) == EXIT_OK
        assert main([*base, "--target-speaker", "spk1", "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        assert main([*base, "--target-speaker", "spk0", "--out", str(c)]) == EXIT_OK
        assert a.read_bytes() != c.read_bytes()

        src = read_features(workspace / "feats/spk0_u000.zvqf")
        out = read_features(a)
        assert out.frame_rate_hz == 100.0 and out.n_frames == src.n_frames

        assert main([*base, "--target-speaker", "spk9",
                     "--out", str(tmp_path / "x.zvqf")]) == EXIT_DATA

    def test_eval_bitrate_and_determinism(self, workspace, tmp_path):
        codes = tmp_path / "codes"
        assert main(["encode", "--checkpoint", str(workspace / "run_svq/model.zvqm"),
                     "--features", str(workspace / "feats"), "--out", str(codes),
                     "--log-level", "warning"]) == EXIT_OK
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for r in (r1, r2):
            assert main(["eval", "--kind", "bitrate", "--inputs", str(codes),
                         "--out", str(r), "--log-level", "warning"]) == EXIT_OK
        assert r1.read_bytes() == r2.read_bytes()
        report = json.loads(r1.read_text())
        assert report["metric"] == "bitrate" and report["value"] > 0
        assert report["n_items"] == 40

    def test_eval_bitrate_constant_corpus_is_zero(self, tmp_path):
        d = tmp_path / "codes"
        d.mkdir()
        (d / "u1.codes").write_text("u1" + " 3" * 50 + "\n")
        out = tmp_path / "r.json"
        assert main(["eval", "--kind", "bitrate", "--inputs", str(d),
                     "--out", str(out), "--log-level", "warning"]) == EXIT_OK
        assert json.loads(out.read_text())["value"] == 0.0

    def test_eval_abx_on_separable_representations(self, tmp_path):
        r = np.random.default_rng(6)
        reps = tmp_path / "reps"
        reps.mkdir()
        lines = []
        for i in range(12):
            cat = i % 2
            base = np.zeros((10, 6), dtype=np.float32)
            base[:, cat] = 1.0
            frames = base + r.normal(scale=0.05, size=(10, 6)).astype(np.float32)
            utt = f"u{i:02d}"
            write_features(FeatureSequence(utt, frames, 100.0), reps / f"{utt}.zvqf")
            lines.append(f"{utt} 0 10 ph{cat} t{i % 4}\n")
        items = tmp_path / "items.txt"
        items.write_text("".join(lines))
        out = tmp_path / "abx.json"
        assert main(["eval", "--kind", "abx", "--inputs", str(reps),
                     "--item-file", str(items), "--out", str(out),
                     "--log-level", "warning"]) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["metric"] == "abx" and report["value"] < 0.02
        assert report["n_triples"] > 0
        assert report["config"]["mode"] == "across_talker"

    def test_eval_abx_requires_item_file(self, workspace, tmp_path):
        assert main(["eval", "--kind", "abx", "--inputs", str(workspace / "feats"),
                     "--out", str(tmp_path / "x.json"),
                     "--log-level", "warning"]) == EXIT_USAGE


class TestExitCodes:
    def test_usage_errors(self, tmp_path):
        assert main(["no-such-verb", "--out", "x"]) == EXIT_USAGE
        assert main(["train", "--out", str(tmp_path)]) == EXIT_USAGE  # missing flags
        assert main(["--help"]) == EXIT_OK

    def test_bad_config_is_usage_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[train]\nstepz = 5\n")
        assert main(["make-synth-corpus", "--out", str(tmp_path / "c"),
                     "--config", str(cfg), "--log-level", "warning"]) == EXIT_USAGE
        assert main(["make-synth-corpus", "--out", str(tmp_path / "c2"),
                     "--jobs", "0", "--log-level", "warning"]) == EXIT_USAGE

    def test_missing_wav_is_data_error(self, tmp_path):
        man = tmp_path / "m.tsv"
        man.write_text("u1\tmissing.wav\tspk0\n")
        assert main(["extract-features", "--manifest", str(man),
                     "--out", str(tmp_path / "o"),
                     "--log-level", "warning"]) == EXIT_DATA

    def test_corrupt_wav_continues_but_fails(self, tmp_path):
        make_synth_corpus(tmp_path / "c", n_speakers=1, n_phones=2,
                          utterances_per_speaker=2, seed=0)
        wavs = sorted((tmp_path / "c" / "wav").glob("*.wav"))
        wavs[0].write_bytes(b"not audio")
        rc = main(["extract-features", "--manifest", str(tmp_path / "c/manifest.tsv"),
                   "--out", str(tmp_path / "o"), "--log-level", "error"])
        assert rc == EXIT_DATA
        # The healthy utterance was still extracted.
        assert len(list((tmp_path / "o").glob("*.zvqf"))) == 1

    @pytest.mark.filterwarnings("ignore:invalid value encountered",
                                "ignore:overflow encountered")
    def test_nonfinite_training_is_numerical_error(self, tmp_path):
        feats = tmp_path / "feats"
        feats.mkdir()
        r = np.random.default_rng(0)
        man_lines = []
        for i, spk in enumerate(("spk0", "spk1")):
            utt = f"u{i}"
            frames = np.full((32, 39), 1e30, dtype=np.float32)
            frames[:16] = r.normal(size=(16, 39))
            write_features(FeatureSequence(utt, frames, 100.0), feats / f"{utt}.zvqf")
            man_lines.append(f"{utt}\t{utt}.wav\t{spk}\n")
        man = tmp_path / "m.tsv"
        man.write_text("".join(man_lines))
        cfg = tmp_path / "t.cfg"
        cfg.write_text("[train]\nsteps = 5\n")
        rc = main(["train", "--manifest", str(man), "--features", str(feats),
                   "--out", str(tmp_path / "run"), "--config", str(cfg),
                   "--seed", "0", "--log-level", "error"])
        assert rc == EXIT_NUMERICAL
        # The speaker map is written before training and must survive the abort.
        assert (tmp_path / "run" / "speakers.json").is_file()
