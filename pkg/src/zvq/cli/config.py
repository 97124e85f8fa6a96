"""Run configuration: sectioned key=value files with environment overrides.

Precedence, lowest to highest: built-in defaults, config file, environment
variables named ZVQ_<SECTION>_<KEY>. Unknown sections or keys are rejected so
a typo cannot silently fall back to a default.
"""

import configparser
import json
import logging
from dataclasses import dataclass, field

from ..errors import ConfigError

log = logging.getLogger(__name__)

ENV_PREFIX = "ZVQ_"
# ZVQ_-prefixed variables owned by other subsystems, not config overrides.
PASSTHROUGH_ENV = frozenset({"ZVQ_GRADCHECK_LOG"})

# section -> key -> (parser, default). Parsers raise ValueError on bad text.
SCHEMA = {
    "features": {
        "window_ms": (float, 25.0),
        "hop_ms": (float, 10.0),
        "n_mels": (int, 40),
        "n_coeffs": (int, 13),
    },
    "model": {
        "variant": (str, "in_wae"),
        "hidden_channels": (int, 16),
        "latent_dim": (int, 8),
        "n_downsample": (int, 2),
        "speaker_channels": (int, 16),
        "speaker_dim": (int, 8),
        "decoder_hidden": (int, 16),
        "codebook_size": (int, 64),
        "n_slices": (int, 2),
        "beta": (float, 0.25),
        "norm_epsilon": (float, 1e-5),
    },
    "train": {
        "steps": (int, 20_000),
        "batch_size": (int, 10),
        "learning_rate": (float, 4e-4),
        "seed": (int, 0),
        "checkpoint_interval": (int, 5_000),
        "segment_frames": (int, 32),
    },
    "eval": {
        "seed": (int, 0),
        "mode": (str, "across_talker"),
        "frame_metric": (str, "cosine"),
        "max_triples_per_cell": (int, 10_000),
    },
    "synth": {
        "n_speakers": (int, 2),
        "n_phones": (int, 5),
        "utterances_per_speaker": (int, 20),
        "seed": (int, 0),
        "sample_rate": (int, 8000),
        "phones_per_utterance": (int, 8),
        "phone_ms": (int, 160),
    },
}


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def section(self, name: str) -> dict:
        return dict(self.sections[name])

    def resolved(self) -> dict:
        """Flat ``section.key -> value`` view, sorted, for logging."""
        return {f"{s}.{k}": v for s in sorted(self.sections)
                for k, v in sorted(self.sections[s].items())}

    def override(self, section: str, key: str, value) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key [{section}] {key}")
        self.sections[section][key] = value

    def log_resolved(self) -> None:
        log.info("resolved config: %s", json.dumps(self.resolved(), sort_keys=True))


def _parse_value(section: str, key: str, text: str, origin: str):
    parser, _ = SCHEMA[section][key]
    try:
        return parser(text)
    except ValueError:
        raise ConfigError(f"{origin}: [{section}] {key} = {text!r} is not "
                          f"a valid {parser.__name__}")


def load_config(path=None, env: dict | None = None) -> RunConfig:
    sections = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}

    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (configparser.Error, OSError) as e:
            raise ConfigError(f"{path}: cannot parse config ({e})")
        for s in cp.sections():
            if s not in SCHEMA:
                raise ConfigError(f"{path}: unknown config section [{s}]")
            for k, text in cp.items(s):
                if k not in SCHEMA[s]:
                    raise ConfigError(f"{path}: unknown config key [{s}] {k}")
                sections[s][k] = _parse_value(s, k, text, str(path))

    if env is None:
        import os
        env = os.environ
    for name, text in env.items():
        if not name.startswith(ENV_PREFIX) or name in PASSTHROUGH_ENV:
            continue
        rest = name[len(ENV_PREFIX):].lower()
        # Key names contain underscores, so the first segment is the section.
        section, sep, key = rest.partition("_")
        if not sep or section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"{name}: no such config key "
                              f"(expected {ENV_PREFIX}<SECTION>_<KEY>)")
        sections[section][key] = _parse_value(section, key, text, name)

    return RunConfig(sections)
