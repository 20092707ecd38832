"""Bundled example inputs: a seven-state surveillance automaton and the
four-robot scenario that exercises every part of the toolkit."""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent

SURVEIL_BA = DATA_DIR / "surveil.ba"
ROBOTS4_YAML = DATA_DIR / "robots4.yaml"

__all__ = ["DATA_DIR", "SURVEIL_BA", "ROBOTS4_YAML"]
