"""Corruption-plan samplers.

The interventional sampler corrupts every position with one constant prior:
a uniform draw per position, thresholded, with the draw depending only on
(seed, position) and never on the token.  The conditional sampler is the
ablation arm: its threshold comes from a per-token empirical corruption
frequency table, reintroducing the dependence the intervention removes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import MATCH, AlignmentEntry
from .errors import EmptyCorpusError, PriorOutOfRangeError
from .rng import uniforms_at


@dataclass(frozen=True)
class CorruptionPlan:
    """Per-token corruption indicators plus the sampling inputs that made them.

    ``prior`` is the constant threshold for interventional plans and None for
    conditional plans (whose thresholds vary by token).
    """

    z: tuple[bool, ...]
    prior: Optional[float]
    seed: int

    def __len__(self) -> int:
        return len(self.z)

    @property
    def corrupted_positions(self) -> tuple[int, ...]:
        return tuple(i for i, flag in enumerate(self.z) if flag)

    @property
    def corruption_count(self) -> int:
        return sum(self.z)


def sample_plan_interventional(tokens: Sequence, p_z: float, seed: int) -> CorruptionPlan:
    """Sample z for every position with constant prior ``p_z``.

    The uniform draw at position k is a pure function of (seed, k), so the
    plan is reproducible and token-independent by construction.
    """
    if not 0.0 <= p_z <= 1.0:
        raise PriorOutOfRangeError(f"corruption prior must be in [0, 1], got {p_z}")
    draws = uniforms_at(seed, np.arange(len(tokens)))
    return CorruptionPlan(z=tuple(bool(a <= p_z) for a in draws), prior=p_z, seed=seed)


class ConditionalPriorTable:
    """Empirical per-token corruption frequencies with a fallback default."""

    def __init__(self, frequencies: Mapping[str, float], default: float):
        for token, freq in frequencies.items():
            if not 0.0 <= freq <= 1.0:
                raise PriorOutOfRangeError(f"frequency for {token!r} must be in [0, 1], got {freq}")
        if not 0.0 <= default <= 1.0:
            raise PriorOutOfRangeError(f"default frequency must be in [0, 1], got {default}")
        self.frequencies = dict(frequencies)
        self.default = default

    def __getitem__(self, token: str) -> float:
        return self.frequencies.get(token.lower(), self.default)

    def __len__(self) -> int:
        return len(self.frequencies)

    def save(self, path, header: str = "") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write(f"# default\t{self.default!r}\n")
            for token in sorted(self.frequencies):
                fh.write(f"{token}\t{self.frequencies[token]!r}\n")

    @classmethod
    def load(cls, path) -> "ConditionalPriorTable":
        frequencies: dict[str, float] = {}
        default = 0.0
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.rstrip("\n")
                if not line:
                    continue
                if line.startswith("# default\t"):
                    default = float(line.split("\t")[1])
                    continue
                if line.startswith("#"):
                    continue
                token, _, freq = line.partition("\t")
                frequencies[token] = float(freq)
        return cls(frequencies, default)


def estimate_conditional_prior(
    alignments: Sequence[Sequence[AlignmentEntry]] | Sequence[AlignmentEntry],
) -> ConditionalPriorTable:
    """Per-word corruption frequency observed in aligned pairs.

    Unseen words fall back to the corpus-wide mean rate.
    """
    if alignments and isinstance(alignments[0], AlignmentEntry):
        alignments = [alignments]  # type: ignore[list-item]
    corrupted: dict[str, int] = {}
    total: dict[str, int] = {}
    n_corrupted = 0
    n_total = 0
    for entries in alignments:
        for entry in entries:
            word = entry.gt_word.lower()
            total[word] = total.get(word, 0) + 1
            n_total += 1
            if entry.label != MATCH:
                corrupted[word] = corrupted.get(word, 0) + 1
                n_corrupted += 1
    if n_total == 0:
        raise EmptyCorpusError("cannot estimate corruption frequencies from empty alignments")
    frequencies = {w: corrupted.get(w, 0) / total[w] for w in total}
    return ConditionalPriorTable(frequencies, default=n_corrupted / n_total)


def sample_plan_conditional(
    tokens: Sequence[str],
    table: ConditionalPriorTable,
    seed: int,
) -> CorruptionPlan:
    """Sample z with per-token thresholds from the frequency table."""
    draws = uniforms_at(seed, np.arange(len(tokens)))
    z = tuple(bool(a <= table[tok]) for a, tok in zip(draws, tokens))
    return CorruptionPlan(z=z, prior=None, seed=seed)
