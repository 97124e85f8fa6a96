"""Acceptance gate: every headline guarantee at its stated tolerance.

Each class pins one release-blocking property end to end: gradient
correctness of all trainable layers and loss terms, quantizer equivalence
with a brute-force scan, the normalization and entropy oracles, metric
behavior on corpora with known structure, desk-scale training of both model
variants, the speaker-information direction, and bit-level determinism of
persistence and the command line. Where a guarantee carries a runtime
budget, the budget is asserted too.

The trained-models fixture runs ten full trainings (two variants, five
seeds) and dominates the suite's wall time; everything downstream of it
shares the one fixture instance.
"""

import hashlib
import statistics
import time

import numpy as np
import pytest

from gradcases import ALL_CASES
from quantize_oracle import lattice, oracle_quantize

from zvq.bottlenecks import (CodeSequence, Codebook, InConfig, SlicedCodebook,
                             instance_norm, sliced_vq_quantize, straight_through,
                             vq_quantize)
from zvq.cli.main import main
from zvq.cli.manifest import read_manifest
from zvq.eval import (AbxItem, SymbolStream, abx_score, bitrate, make_abx_items,
                      parse_item_file, stream_from_codes)
from zvq.features import mfcc, read_features, read_wav, segment
from zvq.models import (VARIANT_IN, VARIANT_SVQ, DecoderConfig, EncoderConfig,
                        SpeakerEncoderConfig, VqConfig, encode_utterance,
                        init_model, load_checkpoint, save_checkpoint, train_loop)
from zvq.numerics import Tape, Tensor, backward, ops
from zvq.numerics.gradcheck import finite_difference_check

rng_global = np.random.default_rng

TRAIN_STEPS = 20_000
N_SEEDS = 5
QUIET = ["--log-level", "warning"]


def default_model(variant, seed):
    """The shipped training profile: 25 Hz latents over 8 channels."""
    return init_model(
        variant, n_speakers=2, rng_seed=seed,
        encoder=EncoderConfig(hidden_channels=16, latent_dim=8, n_downsample=2),
        speaker=SpeakerEncoderConfig(channels=16, speaker_dim=8),
        decoder=DecoderConfig(hidden_channels=16, speaker_embedding_dim=8),
        vq=VqConfig(codebook_size=64, n_slices=2))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Seed-fixed synthetic two-speaker corpus plus extracted features."""
    root = tmp_path_factory.mktemp("acceptance")
    assert main(["make-synth-corpus", "--out", str(root / "corpus"),
                 "--seed", "0", *QUIET]) == 0
    assert main(["extract-features", "--manifest", str(root / "corpus/manifest.tsv"),
                 "--out", str(root / "feats"), *QUIET]) == 0
    return root


@pytest.fixture(scope="module")
def raw_mfcc(corpus):
    """Un-normalized MFCCs straight off the corpus audio, plus speaker labels."""
    man = read_manifest(corpus / "corpus/manifest.tsv")
    feats = {e.utterance_id: mfcc(read_wav(e.wav_path), utterance_id=e.utterance_id)
             for e in man.entries}
    speaker_of = {e.utterance_id: e.speaker_name for e in man.entries}
    return feats, speaker_of


@pytest.fixture(scope="module")
def trained(corpus):
    """Both variants at full step count, five seeds each, on shared segments."""
    man = read_manifest(corpus / "corpus/manifest.tsv", check_paths=False)
    speaker_ids = {name: i for i, name in enumerate(man.speaker_names)}
    segs, sids = [], []
    for e in sorted(man.entries, key=lambda e: e.utterance_id):
        feat = read_features(corpus / "feats" / f"{e.utterance_id}.zvqf")
        for s in segment(feat):
            segs.append(s)
            sids.append(speaker_ids[e.speaker_name])

    runs = {}
    for variant in (VARIANT_IN, VARIANT_SVQ):
        t0 = time.monotonic()
        per_seed = []
        for seed in range(N_SEEDS):
            state = default_model(variant, seed)
            records = train_loop(state, segs, sids, TRAIN_STEPS)
            per_seed.append((state, records))
        runs[variant] = {"runs": per_seed, "elapsed_s": time.monotonic() - t0}
    return runs


class TestGradientCorrectness:
    def test_every_layer_and_loss_term(self):
        t0 = time.monotonic()
        r = rng_global(100)
        for case in ALL_CASES.values():
            for _ in range(20):
                label, f, x = case(r)
                rep = finite_difference_check(f, x, h=1e-3, tol=1e-3, label=label)
                assert rep.passed, (label, rep.max_rel_err, rep.worst_index)
        assert time.monotonic() - t0 < 120.0

    def test_straight_through_equals_leaf_gradient(self):
        for trial in range(20):
            r = rng_global([101, trial])
            z_e = Tensor(r.normal(size=(6, 8)).astype(np.float32), requires_grad=True)
            book = Codebook.uniform_init(16, 8, r)
            q = vq_quantize(z_e, book)  # tapeless: z_q values only
            w = Tensor(r.uniform(0.5, 1.5, size=(6, 8)).astype(np.float32))

            tape = Tape()
            st = straight_through(tape, z_e, q.z_q.data)
            backward(tape, ops.tsum(tape, ops.mul(tape, st, w)))

            tape2 = Tape()
            leaf = Tensor(q.z_q.data, requires_grad=True)
            backward(tape2, ops.tsum(tape2, ops.mul(tape2, leaf, w)))
            assert np.max(np.abs(z_e.grad - leaf.grad)) <= 1e-6


class TestQuantizerOracle:
    def test_plain_matches_exhaustive_scan(self):
        r = rng_global(200)
        for _ in range(1000):
            k = int(r.integers(1, 65))
            d = int(r.integers(1, 17))
            t = int(r.integers(1, 5))
            emb = lattice(r, (k, d))
            z = lattice(r, (t, d))
            res = vq_quantize(Tensor(z), Codebook(Tensor(emb)))
            want_idx, want_zq, _ = oracle_quantize(z, [emb], 0.25)
            np.testing.assert_array_equal(res.indices, want_idx)
            np.testing.assert_array_equal(res.z_q.data, want_zq)

    def test_single_slice_is_bit_identical_to_plain(self):
        r = rng_global(201)
        for _ in range(1000):
            k = int(r.integers(1, 65))
            d = int(r.integers(1, 17))
            t = int(r.integers(1, 5))
            emb = r.normal(size=(k, d)).astype(np.float32)
            z = Tensor(r.normal(size=(t, d)).astype(np.float32))
            plain = vq_quantize(z, Codebook(Tensor(emb)))
            sliced = sliced_vq_quantize(z, SlicedCodebook([Codebook(Tensor(emb))]))
            np.testing.assert_array_equal(plain.indices, sliced.indices)
            assert plain.z_q.data.tobytes() == sliced.z_q.data.tobytes()
            assert plain.vq_loss.item() == sliced.vq_loss.item()


class TestNormalizationOracle:
    def test_three_point_example(self):
        x = Tensor(np.array([[[2.0, 4.0, 6.0]]], dtype=np.float32))
        out = instance_norm(None, x, InConfig(epsilon=0.0))
        expect = np.array([-1.2247, 0.0, 1.2247])
        assert np.max(np.abs(out.data[0, 0] - expect)) <= 1e-4

    def test_channel_means_vanish(self):
        r = rng_global(300)
        for _ in range(20):
            b, c, t = (int(v) for v in r.integers(2, 7, size=3))
            x = Tensor((5.0 * r.normal(size=(b, c, t)) + r.uniform(-3, 3))
                       .astype(np.float32))
            joint = instance_norm(None, x, InConfig(per_instance_stats=False))
            assert np.max(np.abs(joint.data.mean(axis=(0, 2)))) < 1e-5
            inst = instance_norm(None, x, InConfig(per_instance_stats=True))
            assert np.max(np.abs(inst.data.mean(axis=2))) < 1e-5


class TestBitrateOracle:
    def test_three_entropy_examples(self):
        assert abs(bitrate([SymbolStream(["a"] * 100, 4.0)]) - 0.0) <= 1e-9
        assert abs(bitrate([SymbolStream(["a", "b"] * 25, 2.0)]) - 25.0) <= 1e-9
        symbols = [k for k in range(128) for _ in range(2)]
        uniform = SymbolStream(symbols, len(symbols) / 25.0)
        assert abs(bitrate([uniform]) - 175.0) <= 1e-9

    def test_relabeling_invariance_on_random_corpora(self):
        r = rng_global(400)
        for _ in range(100):
            alphabet = int(r.integers(2, 30))
            streams, relabeled = [], []
            perm = r.permutation(alphabet)
            for _ in range(int(r.integers(1, 4))):
                n = int(r.integers(10, 300))
                symbols = r.integers(0, alphabet, size=n).tolist()
                dur = float(r.uniform(0.2, 8.0))
                streams.append(SymbolStream(symbols, dur))
                relabeled.append(SymbolStream([int(perm[s]) for s in symbols], dur))
            assert abs(bitrate(streams) - bitrate(relabeled)) <= 1e-9


class TestSliceCountTrend:
    def test_bitrate_grows_with_slice_count(self):
        # Statistical direction over random corpora, so one adverse draw out
        # of ten is tolerated.
        wins = 0
        for trial in range(10):
            z = Tensor(rng_global([500, trial]).normal(size=(600, 8))
                       .astype(np.float32))
            rates = []
            for n_slices in (1, 2, 4):
                book = SlicedCodebook.uniform_init(128, 8, n_slices,
                                                   rng_global([501, trial, n_slices]))
                q = sliced_vq_quantize(z, book)
                codes = CodeSequence("c", q.indices, 25.0, 128)
                rates.append(bitrate([stream_from_codes(codes)]))
            if rates[2] >= rates[1] - 1e-12 and rates[1] >= rates[0] - 1e-12:
                wins += 1
        assert wins >= 9


class TestAbxSanity:
    def test_raw_mfcc_separates_phones(self, corpus, raw_mfcc):
        t0 = time.monotonic()
        feats, _ = raw_mfcc
        spans = parse_item_file(corpus / "corpus/items.txt")
        rep = abx_score(make_abx_items(spans, feats), seed=0)
        assert rep.error_rate < 0.10
        assert time.monotonic() - t0 < 300.0

    def test_iid_representations_score_chance(self):
        r = rng_global(600)
        items = [AbxItem(r.normal(size=(3, 4)), f"p{i % 2}", f"t{(i // 2) % 2}")
                 for i in range(80)]
        rep = abx_score(items, seed=601)
        assert rep.n_triples >= 10_000
        assert abs(rep.error_rate - 0.5) <= 0.03


class TestDeskTraining:
    def test_reconstruction_improves(self, trained):
        for variant in (VARIANT_IN, VARIANT_SVQ):
            ratios = []
            for _, records in trained[variant]["runs"]:
                step10 = next(r for r in records if r["step"] == 10)["recon_loss"]
                ratios.append(records[-1]["recon_loss"] / step10)
            assert statistics.median(ratios) < 0.5, (variant, ratios)

    def test_svq_codebook_usage(self, trained):
        # Usage over the trailing window of each run; collapse on any seed is
        # a failure, not an outlier.
        usages = [records[-1]["codebook_usage"]
                  for _, records in trained[VARIANT_SVQ]["runs"]]
        assert min(usages) > 0.10, usages

    def test_runtime_budget(self, trained):
        for variant in (VARIANT_IN, VARIANT_SVQ):
            assert trained[variant]["elapsed_s"] < 1800.0


def _probe_accuracy(frames_by_utt, label_by_utt):
    """Closed-form ridge probe; even-indexed utterances train, odd test."""
    utts = sorted(frames_by_utt)
    split = {u: ("train" if i % 2 == 0 else "test") for i, u in enumerate(utts)}

    def stack(part):
        xs = [frames_by_utt[u] for u in utts if split[u] == part]
        ys = [np.full(len(frames_by_utt[u]), label_by_utt[u])
              for u in utts if split[u] == part]
        x = np.concatenate(xs).astype(np.float64)
        return np.hstack([x, np.ones((len(x), 1))]), np.concatenate(ys).astype(int)

    xtr, ytr = stack("train")
    xte, yte = stack("test")
    gram = xtr.T @ xtr + 1e-3 * np.eye(xtr.shape[1])
    w = np.linalg.solve(gram, xtr.T @ np.eye(2)[ytr])
    return float(((xte @ w).argmax(axis=1) == yte).mean())


class TestDisentanglement:
    def test_content_code_hides_speaker(self, corpus, raw_mfcc, trained):
        feats, speaker_of = raw_mfcc
        man = read_manifest(corpus / "corpus/manifest.tsv", check_paths=False)
        speaker_ids = {name: i for i, name in enumerate(man.speaker_names)}
        labels = {u: speaker_ids[speaker_of[u]] for u in feats}

        acc_raw = _probe_accuracy({u: f.frames for u, f in feats.items()}, labels)

        cmvn = {p.stem: read_features(p)
                for p in sorted((corpus / "feats").glob("*.zvqf"))}
        accs = []
        for state, _ in trained[VARIANT_IN]["runs"]:
            z_c = {u: encode_utterance(state, f).data for u, f in cmvn.items()}
            accs.append(_probe_accuracy(z_c, labels))
        assert statistics.median(accs) < acc_raw, (accs, acc_raw)


class TestDeterminismPersistence:
    def test_checkpoint_round_trip_bit_exact(self, trained, tmp_path):
        for variant in (VARIANT_IN, VARIANT_SVQ):
            state, _ = trained[variant]["runs"][0]
            path = tmp_path / f"{variant}.zvqm"
            save_checkpoint(state, path)
            loaded = load_checkpoint(path)
            a, b = state.all_params(), loaded.all_params()
            assert set(a) == set(b)
            for name in a:
                assert a[name].data.tobytes() == b[name].data.tobytes(), name
            resaved = tmp_path / f"{variant}-resaved.zvqm"
            save_checkpoint(loaded, resaved)
            assert path.read_bytes() == resaved.read_bytes()

    def test_resume_matches_uninterrupted(self, tmp_path):
        r = rng_global(900)
        data = [Tensor(x[None].astype(np.float32))
                for x in r.normal(size=(12, 39, 32))]
        sids = r.integers(0, 2, 12)
        for variant in (VARIANT_IN, VARIANT_SVQ):
            straight = default_model(variant, seed=901)
            full = train_loop(straight, data, sids, n_steps=40)

            part = default_model(variant, seed=901)
            train_loop(part, data, sids, n_steps=20,
                       checkpoint_path=tmp_path / f"{variant}-mid.zvqm")
            resumed = load_checkpoint(tmp_path / f"{variant}-mid.zvqm")
            tail = train_loop(resumed, data, sids, n_steps=40)

            assert [x["total_loss"] for x in tail] == \
                [x["total_loss"] for x in full[20:]]
            a, b = straight.all_params(), resumed.all_params()
            for name in a:
                assert a[name].data.tobytes() == b[name].data.tobytes(), name

    def test_every_command_is_byte_reproducible(self, tmp_path):
        def tree(root):
            return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
                    for p in sorted(root.rglob("*")) if p.is_file()}

        def run_chain(d):
            d.mkdir()
            for variant in ("svq_wae", "in_wae"):
                (d / f"{variant}.cfg").write_text(
                    "[synth]\nutterances_per_speaker = 4\n"
                    f"[model]\nvariant = {variant}\ncodebook_size = 32\n"
                    "[train]\nsteps = 60\ncheckpoint_interval = 30\n"
                    "[eval]\nmax_triples_per_cell = 500\n")
            cfg_svq, cfg_in = str(d / "svq_wae.cfg"), str(d / "in_wae.cfg")

            assert main(["make-synth-corpus", "--out", str(d / "corpus"),
                         "--config", cfg_svq, "--seed", "11", *QUIET]) == 0
            assert main(["extract-features", "--manifest",
                         str(d / "corpus/manifest.tsv"),
                         "--out", str(d / "feats"), *QUIET]) == 0
            for variant, cfg in (("svq_wae", cfg_svq), ("in_wae", cfg_in)):
                assert main(["train", "--manifest", str(d / "corpus/manifest.tsv"),
                             "--features", str(d / "feats"),
                             "--out", str(d / f"run_{variant}"),
                             "--config", cfg, "--seed", "0", *QUIET]) == 0
            assert main(["encode", "--checkpoint", str(d / "run_svq_wae/model.zvqm"),
                         "--features", str(d / "feats"),
                         "--out", str(d / "codes"), *QUIET]) == 0
            assert main(["encode", "--checkpoint", str(d / "run_in_wae/model.zvqm"),
                         "--features", str(d / "feats"), "--format", "latents",
                         "--out", str(d / "latents"), *QUIET]) == 0
            assert main(["convert", "--checkpoint", str(d / "run_in_wae/model.zvqm"),
                         "--features", str(d / "feats"), "--source", "spk0_u000",
                         "--target-speaker", "spk1",
                         "--out", str(d / "converted.zvqf"), *QUIET]) == 0
            assert main(["eval", "--kind", "bitrate", "--inputs", str(d / "codes"),
                         "--out", str(d / "bitrate.json"), *QUIET]) == 0
            assert main(["eval", "--kind", "abx", "--inputs", str(d / "feats"),
                         "--item-file", str(d / "corpus/items.txt"),
                         "--config", cfg_svq,
                         "--out", str(d / "abx.json"), *QUIET]) == 0

        run_chain(tmp_path / "a")
        run_chain(tmp_path / "b")
        assert tree(tmp_path / "a") == tree(tmp_path / "b")
