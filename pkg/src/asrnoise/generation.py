"""Constrained decoding of noise spans and pseudo-transcript assembly.

Corrupted positions each decode a short token span ending in [EOS]; the
span's length classifies the error (one token is a deletion, two a
substitution, more an insertion).  Untouched positions pass through, and the
surface text is rebuilt with the ``##`` glue rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import Token, TokenSeq, detokenize, tokenize
from .errors import OutOfRangeError, PlanMismatchError
from .intervention import CorruptionPlan, sample_plan_interventional
from .model import Model, _wrap_params, decoder_hidden, embed_sequence, encode, step_distributions
from .phonetics import CONTINUATION_PREFIX
from .rng import derive_seed

GREEDY = "greedy"
SAMPLE = "sample"


class ErrorType(Enum):
    DELETION = "deletion"
    SUBSTITUTION = "substitution"
    INSERTION = "insertion"
    NO_ERROR = "no_error"


def classify_error(m: int, max_gen_len: int) -> ErrorType:
    """Error type from the generated token count (including [EOS])."""
    if not 1 <= m <= max_gen_len:
        raise OutOfRangeError(f"generated length {m} outside [1, {max_gen_len}]")
    if m == 1:
        return ErrorType.DELETION
    if m == 2:
        return ErrorType.SUBSTITUTION
    return ErrorType.INSERTION


@dataclass(frozen=True)
class GeneratedSpan:
    """Decoder output for one corrupted position.

    ``token_ids``/``surfaces`` include the terminating [EOS]; ``replacement``
    is the surface form that substitutes the original token.
    """

    position: int
    original: str
    token_ids: tuple[int, ...]
    surfaces: tuple[str, ...]
    error_type: ErrorType
    replacement: str

    @property
    def m(self) -> int:
        return len(self.token_ids)


def _pick_greedy(p: np.ndarray) -> int:
    # lowest index wins ties
    return int(np.argmax(p))


def _pick_sample(p: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    if temperature <= 0.0:
        raise ValueError("sampling temperature must be positive")
    logp = np.log(np.maximum(p, 1e-300)) / temperature
    logp -= logp.max()
    weights = np.exp(logp)
    weights /= weights.sum()
    return int(rng.choice(len(weights), p=weights))


def generate_span(
    e_k: Tensor,
    e_encoder: Tensor,
    model: Model,
    position: int,
    original: str = "",
    mode: str = GREEDY,
    temperature: float = 1.0,
    seed: int = 0,
    params: Optional[dict[str, Tensor]] = None,
) -> GeneratedSpan:
    """Decode one noise span from the combined generation distribution.

    Greedy mode takes the argmax each step (lowest index on ties); sample
    mode draws from the temperature-scaled distribution with a generator
    keyed by (seed, position).  [EOS] is forced once the span reaches the
    maximum generation length, so decoding always terminates.
    """
    config = model.config
    vocab = model.vocab
    params = params if params is not None else _wrap_params(model.params)
    rows_map = model.code_index.token_rows
    rng = np.random.default_rng(derive_seed(seed, position)) if mode == SAMPLE else None

    generated: list[int] = []
    while len(generated) < config.max_gen_len - 1:
        hidden = decoder_hidden(e_k, generated, e_encoder, params, config, rows_map)
        n = hidden.data.shape[0]
        d_last = ad.row_slice(hidden, n - 1, n)
        _, _, p_gen = step_distributions(d_last, params, config, rows_map, model.special_mask)
        probs = p_gen.data[0]
        if mode == GREEDY:
            token = _pick_greedy(probs)
        elif mode == SAMPLE:
            token = _pick_sample(probs, temperature, rng)
        else:
            raise ValueError(f"unknown decode mode {mode!r}")
        generated.append(token)
        if token == vocab.eos_id:
            break
    if not generated or generated[-1] != vocab.eos_id:
        generated.append(vocab.eos_id)

    surfaces = tuple(vocab.surface(t) for t in generated)
    replacement_tokens = [
        Token(t, s, s.startswith(CONTINUATION_PREFIX))
        for t, s in zip(generated[:-1], surfaces[:-1])
    ]
    return GeneratedSpan(
        position=position,
        original=original,
        token_ids=tuple(generated),
        surfaces=surfaces,
        error_type=classify_error(len(generated), config.max_gen_len),
        replacement=detokenize(replacement_tokens),
    )


def assemble(tokens: TokenSeq, plan: CorruptionPlan, spans: Sequence[GeneratedSpan]) -> str:
    """Rebuild surface text with corrupted positions replaced by their spans.

    Spans must cover exactly the corrupted positions of the plan.
    """
    if len(plan) != len(tokens):
        raise PlanMismatchError(f"plan covers {len(plan)} tokens, sentence has {len(tokens)}")
    by_position = {span.position: span for span in spans}
    if len(by_position) != len(spans):
        raise PlanMismatchError("duplicate span positions")
    expected = set(plan.corrupted_positions)
    if set(by_position) != expected:
        raise PlanMismatchError(
            f"spans cover positions {sorted(by_position)}, plan corrupts {sorted(expected)}"
        )
    stream: list[Token] = []
    for k, token in enumerate(tokens):
        if not plan.z[k]:
            stream.append(token)
            continue
        span = by_position[k]
        for tid, surface in zip(span.token_ids[:-1], span.surfaces[:-1]):
            stream.append(Token(tid, surface, surface.startswith(CONTINUATION_PREFIX)))
    return detokenize(stream)


@dataclass(frozen=True)
class SpanRecord:
    sentence_id: str
    span: GeneratedSpan


def corrupt_corpus(
    texts: Sequence[str],
    model: Model,
    p_z: float,
    seed: int,
    mode: str = SAMPLE,
    temperature: float = 1.0,
) -> tuple[list[str], list[SpanRecord]]:
    """Corrupt every text: tokenize, sample a plan, decode spans, reassemble.

    Deterministic for a fixed seed; per-sentence seeds are derived from the
    sentence index so shards can be generated independently.
    """
    params = _wrap_params(model.params)
    config = model.config
    rows_map = model.code_index.token_rows
    outputs: list[str] = []
    records: list[SpanRecord] = []
    for idx, text in enumerate(texts):
        tokens = tokenize(text, model.vocab)
        sentence_seed = derive_seed(seed, idx)
        plan = sample_plan_interventional(tokens, p_z, sentence_seed)
        spans: list[GeneratedSpan] = []
        if plan.corruption_count:
            e_in = embed_sequence(tokens.piece_ids, params, config, rows_map)
            e_enc = encode(e_in, params, config)
            for k in plan.corrupted_positions:
                e_k = ad.row_slice(e_enc, k, k + 1)
                spans.append(
                    generate_span(
                        e_k,
                        e_enc,
                        model,
                        position=k,
                        original=tokens[k].surface,
                        mode=mode,
                        temperature=temperature,
                        seed=sentence_seed,
                        params=params,
                    )
                )
        outputs.append(assemble(tokens, plan, spans))
        records.extend(SpanRecord(str(idx), span) for span in spans)
    return outputs, records


def save_span_report(path, records: Sequence[SpanRecord], header: str = "") -> None:
    """TSV: sentence_id, position, original, replacement, error_type."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("sentence_id\tposition\toriginal\treplacement\terror_type\n")
        for rec in records:
            s = rec.span
            fh.write(f"{rec.sentence_id}\t{s.position}\t{s.original}\t{s.replacement}\t{s.error_type.value}\n")
