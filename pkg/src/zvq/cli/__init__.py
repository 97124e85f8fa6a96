"""Command-line pipeline: corpus synthesis through training to evaluation."""

from .config import SCHEMA, RunConfig, load_config
from .main import (EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, build_parser,
                   main)
from .manifest import Manifest, ManifestEntry, read_manifest, write_manifest
from .synth import make_synth_corpus

__all__ = [
    "EXIT_DATA",
    "EXIT_NUMERICAL",
    "EXIT_OK",
    "EXIT_USAGE",
    "Manifest",
    "ManifestEntry",
    "RunConfig",
    "SCHEMA",
    "build_parser",
    "load_config",
    "main",
    "make_synth_corpus",
    "read_manifest",
    "write_manifest",
]
