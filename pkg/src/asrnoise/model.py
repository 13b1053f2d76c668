"""Constrained encoder-decoder with word and phoneme generation heads.

The encoder is one self-attention block over mixed word/phoneme/position
embeddings.  For each corrupted position the decoder cross-attends to the
encoder states from a query sequence that starts with a projection of
[encoder row ; start embedding] and continues with the tokens generated so
far.  Two heads score the vocabulary from the decoder state: a word head and
a phoneme head whose logits are shared across tokens with the same phonetic
code; their renormalized product drives generation.

Everything runs in float64 through the in-package autodiff engine, so
training is deterministic and gradients can be checked against central
finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import SPECIALS, AlignedExample, SubwordVocab
from .errors import (
    DegenerateSupportError,
    NonFiniteGradientError,
    PrefixTooLongError,
    SequenceTooLongError,
)
from .phonetics import PronouncingLexicon, g2p, supervision_distribution

_SPECIAL_CODES = {piece: f"<{piece[1:-1].lower()}>" for piece in SPECIALS}

#: Floor applied to supervision entries outside their support so the
#: phoneme-head KL term stays finite.
R_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_heads: int = 4
    vocab_size: int = 0
    code_vocab_size: int = 0
    max_gen_len: int = 5
    max_len: int = 64
    lambda_w: float = 0.5
    lambda_ph: float = 0.5
    phoneme_head: bool = True

    def __post_init__(self):
        if self.d_model <= 0 or self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be positive and divisible by n_heads")
        if self.max_gen_len < 1:
            raise ValueError("max_gen_len must be at least 1")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if not 0.0 <= self.lambda_w <= 1.0:
            raise ValueError("lambda_w must lie in [0, 1]")
        if self.lambda_ph < 0.0:
            raise ValueError("lambda_ph must be nonnegative")


class PhonemeCodeIndex:
    """Maps vocabulary pieces to rows of the phoneme embedding table.

    Pieces with identical phonetic codes share a row; special tokens get
    private pseudo-codes.
    """

    def __init__(self, codes: Sequence[str], token_rows: Sequence[int]):
        self.codes: list[str] = list(codes)
        self.token_rows: np.ndarray = np.asarray(token_rows, dtype=np.intp)
        if self.token_rows.size and self.token_rows.max() >= len(self.codes):
            raise ValueError("token row out of range for the code list")
        self.unk_row = self.codes.index(_SPECIAL_CODES["[UNK]"]) if _SPECIAL_CODES["[UNK]"] in self.codes else 0

    def __len__(self) -> int:
        return len(self.codes)

    @classmethod
    def build(cls, vocab: SubwordVocab, lexicon: PronouncingLexicon) -> "PhonemeCodeIndex":
        codes: list[str] = []
        row_of: dict[str, int] = {}
        token_rows: list[int] = []
        for piece in vocab.pieces:
            if piece in _SPECIAL_CODES:
                key = _SPECIAL_CODES[piece]
            else:
                key = g2p(piece, lexicon).key()
            row = row_of.get(key)
            if row is None:
                row = len(codes)
                row_of[key] = row
                codes.append(key)
            token_rows.append(row)
        return cls(codes, token_rows)


def _normal(rng: np.random.Generator, shape, scale=0.02) -> np.ndarray:
    return rng.normal(0.0, scale, size=shape).astype(np.float64)


class ParamStore:
    """Named float64 arrays in a fixed order."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self.arrays: dict[str, np.ndarray] = {
            name: np.asarray(a, dtype=np.float64) for name, a in arrays.items()
        }

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "ParamStore":
        rng = np.random.default_rng(seed)
        d, f = config.d_model, 4 * config.d_model
        arrays: dict[str, np.ndarray] = {}
        arrays["m_word"] = _normal(rng, (config.vocab_size, d))
        arrays["m_pos"] = _normal(rng, (config.max_len, d))
        arrays["m_ph"] = _normal(rng, (config.code_vocab_size, d))
        arrays["bos_emb"] = _normal(rng, (1, d))
        for prefix in ("enc_", "dec_"):
            for name in ("wq", "wk", "wv", "wo"):
                arrays[prefix + name] = _normal(rng, (d, d))
                arrays[prefix + "b" + name[1]] = np.zeros(d)
            arrays[prefix + "ln1_g"] = np.ones(d)
            arrays[prefix + "ln1_b"] = np.zeros(d)
            arrays[prefix + "w1"] = _normal(rng, (d, f))
            arrays[prefix + "b1"] = np.zeros(f)
            arrays[prefix + "w2"] = _normal(rng, (f, d))
            arrays[prefix + "b2"] = np.zeros(d)
            arrays[prefix + "ln2_g"] = np.ones(d)
            arrays[prefix + "ln2_b"] = np.zeros(d)
        arrays["dec_h"] = _normal(rng, (2 * d, d))
        arrays["b_n"] = np.zeros(config.vocab_size)
        arrays["b_ph"] = np.zeros(config.code_vocab_size)
        return cls(arrays)

    def validate(self, config: ModelConfig) -> None:
        d, f = config.d_model, 4 * config.d_model
        expected = {
            "m_word": (config.vocab_size, d),
            "m_pos": (config.max_len, d),
            "m_ph": (config.code_vocab_size, d),
            "bos_emb": (1, d),
            "dec_h": (2 * d, d),
            "b_n": (config.vocab_size,),
            "b_ph": (config.code_vocab_size,),
        }
        for prefix in ("enc_", "dec_"):
            expected.update(
                {
                    prefix + "wq": (d, d),
                    prefix + "bq": (d,),
                    prefix + "wk": (d, d),
                    prefix + "bk": (d,),
                    prefix + "wv": (d, d),
                    prefix + "bv": (d,),
                    prefix + "wo": (d, d),
                    prefix + "bo": (d,),
                    prefix + "ln1_g": (d,),
                    prefix + "ln1_b": (d,),
                    prefix + "w1": (d, f),
                    prefix + "b1": (f,),
                    prefix + "w2": (f, d),
                    prefix + "b2": (d,),
                    prefix + "ln2_g": (d,),
                    prefix + "ln2_b": (d,),
                }
            )
        if set(expected) != set(self.arrays):
            missing = set(expected) - set(self.arrays)
            extra = set(self.arrays) - set(expected)
            raise ValueError(f"parameter names mismatch: missing={missing}, extra={extra}")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ValueError(
                    f"parameter {name} has shape {self.arrays[name].shape}, expected {shape}"
                )
            if not np.all(np.isfinite(self.arrays[name])):
                raise ValueError(f"parameter {name} contains non-finite values")

    def copy(self) -> "ParamStore":
        return ParamStore({name: a.copy() for name, a in self.arrays.items()})

    def items(self):
        return self.arrays.items()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.arrays[name] = np.asarray(value, dtype=np.float64)

    def __contains__(self, name: str) -> bool:
        return name in self.arrays


@dataclass
class Model:
    """Parameter store plus everything needed to run it."""

    params: ParamStore
    config: ModelConfig
    vocab: SubwordVocab
    code_index: PhonemeCodeIndex
    _r_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        vocab: SubwordVocab,
        lexicon: PronouncingLexicon,
        config: Optional[ModelConfig] = None,
        seed: int = 0,
    ) -> "Model":
        code_index = PhonemeCodeIndex.build(vocab, lexicon)
        base = config if config is not None else ModelConfig()
        base = replace(base, vocab_size=len(vocab), code_vocab_size=len(code_index))
        params = ParamStore.init(base, seed)
        params.validate(base)
        return cls(params=params, config=base, vocab=vocab, code_index=code_index)

    def r_support(self) -> list[Optional[str]]:
        return [None if p in SPECIALS else p for p in self.vocab.pieces]

    @property
    def special_mask(self) -> np.ndarray:
        """1.0 at special-token indices, 0.0 elsewhere (cached)."""
        mask = self._r_cache.get(("special_mask",))
        if mask is None:
            mask = np.asarray([1.0 if p in SPECIALS else 0.0 for p in self.vocab.pieces])
            self._r_cache[("special_mask",)] = mask
        return mask

    def supervision_vector(self, surface: str, lexicon: PronouncingLexicon) -> np.ndarray:
        """Cached supervision distribution over the vocabulary for a target."""
        vec = self._r_cache.get(surface)
        if vec is None:
            vec = supervision_distribution(surface, self.r_support(), lexicon)
            self._r_cache[surface] = vec
        return vec

    def supervision_log(self, surface: str, lexicon: PronouncingLexicon) -> np.ndarray:
        """Floored log of the supervision distribution (cached)."""
        key = ("log", surface)
        vec = self._r_cache.get(key)
        if vec is None:
            vec = np.log(np.maximum(self.supervision_vector(surface, lexicon), R_FLOOR))
            self._r_cache[key] = vec
        return vec


def _wrap_params(params: ParamStore) -> dict[str, Tensor]:
    return {name: Tensor(a) for name, a in params.items()}


def embed_sequence(
    token_ids: Sequence[int],
    params: dict[str, Tensor],
    config: ModelConfig,
    token_code_rows: np.ndarray,
) -> Tensor:
    """Input embeddings: word/phoneme convex mix plus position rows."""
    ids = np.asarray(token_ids, dtype=np.intp)
    if len(ids) > config.max_len:
        raise SequenceTooLongError(f"sequence of {len(ids)} tokens exceeds max_len={config.max_len}")
    positions = ad.rows(params["m_pos"], np.arange(len(ids)))
    words = ad.rows(params["m_word"], ids)
    if not config.phoneme_head:
        return ad.add(words, positions)
    phonemes = ad.rows(params["m_ph"], token_code_rows[ids])
    mix = ad.add(
        ad.mul(Tensor(config.lambda_w), words),
        ad.mul(Tensor(1.0 - config.lambda_w), phonemes),
    )
    return ad.add(mix, positions)


def _split_heads(x: Tensor, n: int, h: int, dh: int) -> Tensor:
    return ad.transpose_axes(ad.reshape(x, (n, h, dh)), (1, 0, 2))


def _attention_ffn_block(
    q_in: Tensor,
    kv_in: Tensor,
    params: dict[str, Tensor],
    prefix: str,
    config: ModelConfig,
) -> Tensor:
    d, h = config.d_model, config.n_heads
    dh = d // h
    n = q_in.data.shape[0]
    m = kv_in.data.shape[0]
    q = ad.add(ad.matmul(q_in, params[prefix + "wq"]), params[prefix + "bq"])
    k = ad.add(ad.matmul(kv_in, params[prefix + "wk"]), params[prefix + "bk"])
    v = ad.add(ad.matmul(kv_in, params[prefix + "wv"]), params[prefix + "bv"])
    qh = _split_heads(q, n, h, dh)
    kh = _split_heads(k, m, h, dh)
    vh = _split_heads(v, m, h, dh)
    scores = ad.mul(ad.matmul(qh, ad.transpose_axes(kh, (0, 2, 1))), Tensor(1.0 / np.sqrt(dh)))
    weights = ad.softmax(scores, axis=-1)
    merged = ad.reshape(ad.transpose_axes(ad.matmul(weights, vh), (1, 0, 2)), (n, d))
    attn = ad.add(ad.matmul(merged, params[prefix + "wo"]), params[prefix + "bo"])
    h1 = ad.layer_norm(ad.add(q_in, attn), params[prefix + "ln1_g"], params[prefix + "ln1_b"])
    inner = ad.gelu(ad.add(ad.matmul(h1, params[prefix + "w1"]), params[prefix + "b1"]))
    ffn = ad.add(ad.matmul(inner, params[prefix + "w2"]), params[prefix + "b2"])
    return ad.layer_norm(ad.add(h1, ffn), params[prefix + "ln2_g"], params[prefix + "ln2_b"])


def encode(e_in: Tensor, params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    """One self-attention block; output rows align with input rows."""
    return _attention_ffn_block(e_in, e_in, params, "enc_", config)


def encode_tokens(model: Model, token_ids: Sequence[int], params: Optional[dict[str, Tensor]] = None) -> Tensor:
    params = params if params is not None else _wrap_params(model.params)
    e_in = embed_sequence(token_ids, params, model.config, model.code_index.token_rows)
    return encode(e_in, params, model.config)


def _decoder_queries(
    e_k: Tensor,
    generated_ids: Sequence[int],
    params: dict[str, Tensor],
    config: ModelConfig,
    token_code_rows: np.ndarray,
) -> Tensor:
    if 1 + len(generated_ids) > config.max_gen_len:
        raise PrefixTooLongError(
            f"prefix of {1 + len(generated_ids)} positions exceeds max_gen_len={config.max_gen_len}"
        )
    head = ad.matmul(ad.concat([e_k, params["bos_emb"]], axis=1), params["dec_h"])
    head = ad.add(head, ad.rows(params["m_pos"], np.asarray([0], dtype=np.intp)))
    if not generated_ids:
        return head
    ids = np.asarray(generated_ids, dtype=np.intp)
    words = ad.rows(params["m_word"], ids)
    if config.phoneme_head:
        phonemes = ad.rows(params["m_ph"], token_code_rows[ids])
        tok = ad.add(
            ad.mul(Tensor(config.lambda_w), words),
            ad.mul(Tensor(1.0 - config.lambda_w), phonemes),
        )
    else:
        tok = words
    tok = ad.add(tok, ad.rows(params["m_pos"], np.arange(1, len(ids) + 1)))
    return ad.concat([head, tok], axis=0)


def decoder_hidden(
    e_k: Tensor,
    generated_ids: Sequence[int],
    e_encoder: Tensor,
    params: dict[str, Tensor],
    config: ModelConfig,
    token_code_rows: np.ndarray,
) -> Tensor:
    """Hidden states for every query position (no cross-position mixing)."""
    queries = _decoder_queries(e_k, generated_ids, params, config, token_code_rows)
    return _attention_ffn_block(queries, e_encoder, params, "dec_", config)


def decoder_step(
    e_k: Tensor,
    prefix_ids: Sequence[int],
    e_encoder: Tensor,
    params: dict[str, Tensor],
    config: ModelConfig,
    token_code_rows: np.ndarray,
    bos_id: int,
) -> Tensor:
    """Hidden state for the next generation step.

    ``prefix_ids`` is the decoded prefix and must start with the [BOS] id;
    the start symbol itself is folded into the projected head position.
    """
    if not prefix_ids or prefix_ids[0] != bos_id:
        raise ValueError("decoder prefix must start with the [BOS] id")
    hidden = decoder_hidden(e_k, list(prefix_ids[1:]), e_encoder, params, config, token_code_rows)
    n = hidden.data.shape[0]
    return ad.row_slice(hidden, n - 1, n)


def _head_logits(
    d_k: Tensor,
    params: dict[str, Tensor],
    config: ModelConfig,
    token_code_rows: np.ndarray,
) -> tuple[Tensor, Optional[Tensor]]:
    logits_n = ad.add(ad.matmul(d_k, ad.transpose(params["m_word"])), params["b_n"])
    if not config.phoneme_head:
        return logits_n, None
    ph_rows = ad.rows(params["m_ph"], token_code_rows)
    ph_bias = ad.rows(params["b_ph"], token_code_rows)
    logits_ph = ad.add(ad.matmul(d_k, ad.transpose(ph_rows)), ph_bias)
    return logits_n, logits_ph


def step_distributions(
    d_k: Tensor,
    params: dict[str, Tensor],
    config: ModelConfig,
    token_code_rows: np.ndarray,
    special_mask: Optional[np.ndarray] = None,
) -> tuple[Tensor, Optional[Tensor], Tensor]:
    """Word-head, phoneme-head and combined distributions over the vocabulary.

    The combined distribution is the renormalized elementwise product of the
    two heads over pronounceable tokens.  Special tokens ([BOS]/[EOS]/[UNK])
    have no pronunciation, and their supervision mass is floored to nothing,
    so the product would starve them of probability and generation could
    never stop; instead they keep their word-head probability exactly, which
    is the product rule with the content-average phoneme factor standing in
    for their undefined phoneme score.  A uniform phoneme head therefore
    leaves the word-head distribution unchanged.
    """
    logits_n, logits_ph = _head_logits(d_k, params, config, token_code_rows)
    p_n = ad.softmax(logits_n, axis=-1)
    if logits_ph is None:
        return p_n, None, p_n
    p_ph = ad.softmax(logits_ph, axis=-1)
    if special_mask is None:
        special_mask = np.zeros(config.vocab_size)
    content = Tensor(1.0 - special_mask)
    special = Tensor(special_mask)
    prod = ad.mul(p_n, p_ph)
    pn_content = ad.sum_(ad.mul(p_n, content), axis=-1, keepdims=True)
    prod_content = ad.sum_(ad.mul(prod, content), axis=-1, keepdims=True)
    mean_factor = ad.div(prod_content, pn_content)
    unnorm = ad.add(ad.mul(prod, content), ad.mul(ad.mul(p_n, special), mean_factor))
    p_gen = ad.div(unnorm, ad.sum_(unnorm, axis=-1, keepdims=True))
    return p_n, p_ph, p_gen


def kl_divergence(p: np.ndarray, r: np.ndarray, floor: float = R_FLOOR) -> float:
    """KL(p || r) with the reference distribution floored at ``floor``.

    This is the per-step phoneme supervision penalty: mass that ``p`` puts
    where ``r`` has (floored-to-)no support is charged heavily but finitely.
    """
    p = np.asarray(p, dtype=np.float64)
    r = np.maximum(np.asarray(r, dtype=np.float64), floor)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(r[mask]))))


def _loss_graph(
    batch: Sequence[AlignedExample],
    model: Model,
    lexicon: PronouncingLexicon,
    lambda_ph: Optional[float] = None,
) -> tuple[Tensor, Tensor, Tensor, dict[str, Tensor]]:
    """Build the loss graph for a batch; returns (L_tot, L_n, L_ph, leaves)."""
    config = model.config
    weight = config.lambda_ph if lambda_ph is None else lambda_ph
    params = _wrap_params(model.params)
    rows_map = model.code_index.token_rows
    eos_id = model.vocab.eos_id

    encoder_cache: dict[str, Tensor] = {}
    ln_terms: list[Tensor] = []
    lph_terms: list[Tensor] = []
    for example in batch:
        e_enc = encoder_cache.get(example.sentence_id)
        if e_enc is None:
            e_in = embed_sequence(example.sentence.piece_ids, params, config, rows_map)
            e_enc = encode(e_in, params, config)
            encoder_cache[example.sentence_id] = e_enc
        e_k = ad.row_slice(e_enc, example.position, example.position + 1)
        target = list(example.target_ids)
        hidden = decoder_hidden(e_k, target[:-1], e_enc, params, config, rows_map)
        logits_n, logits_ph = _head_logits(hidden, params, config, rows_map)
        lp_n = ad.log_softmax(logits_n, axis=-1)
        picked = ad.select(lp_n, np.arange(len(target)), np.asarray(target, dtype=np.intp))
        ln_terms.append(ad.neg(ad.sum_(picked)))
        if logits_ph is None or weight == 0.0:
            continue
        step_rows = []
        r_logs = []
        for l, (tid, surface) in enumerate(zip(target, example.target_surfaces)):
            if tid == eos_id:
                continue
            try:
                r_log = model.supervision_log(surface, lexicon)
            except DegenerateSupportError:
                continue
            step_rows.append(l)
            r_logs.append(r_log)
        if not step_rows:
            continue
        lp_ph = ad.log_softmax(ad.rows(logits_ph, np.asarray(step_rows, dtype=np.intp)), axis=-1)
        p_ph = ad.exp(lp_ph)
        kl = ad.sum_(ad.mul(p_ph, ad.sub(lp_ph, Tensor(np.asarray(r_logs)))))
        lph_terms.append(kl)

    zero = Tensor(0.0)
    l_n = sum(ln_terms, start=zero) if ln_terms else zero
    l_ph = sum(lph_terms, start=zero) if lph_terms else Tensor(0.0)
    l_tot = ad.add(l_n, ad.mul(Tensor(weight), l_ph))
    return l_tot, l_n, l_ph, params


def loss_total(
    batch: Sequence[AlignedExample],
    model: Model,
    lexicon: PronouncingLexicon,
    lambda_ph: Optional[float] = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """Word-head negative log likelihood plus weighted phoneme-head KL.

    The phoneme term sums, over non-[EOS] teacher-forcing steps, the KL
    divergence from the phoneme-head distribution to the supervision
    distribution of the step's target token (floored outside its support).
    """
    l_tot, l_n, l_ph, _ = _loss_graph(batch, model, lexicon, lambda_ph)
    return l_tot, l_n, l_ph


@dataclass(frozen=True)
class GradCheckReport:
    coordinates: tuple[tuple[str, int], ...]
    max_rel_error: float
    worst_coordinate: tuple[str, int]


def backward_and_check(
    model: Model,
    batch: Sequence[AlignedExample],
    lexicon: PronouncingLexicon,
    lambda_ph: Optional[float] = None,
    check_coords: int = 0,
    check_seed: int = 0,
    fd_step: float = 1e-5,
) -> tuple[dict[str, np.ndarray], Optional[GradCheckReport]]:
    """Gradients of the total loss, optionally audited by finite differences.

    When ``check_coords`` > 0, that many randomly chosen parameter
    coordinates are re-derived with central differences at ``fd_step`` and
    the maximum relative error (guarded at unit scale) is reported.
    """
    l_tot, _, _, leaves = _loss_graph(batch, model, lexicon, lambda_ph)
    ad.backward(l_tot)
    grads: dict[str, np.ndarray] = {}
    for name, leaf in leaves.items():
        g = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"gradient for {name} contains non-finite values")
        grads[name] = g

    report = None
    if check_coords > 0:
        rng = np.random.default_rng(check_seed)
        names = sorted(model.params.arrays)
        coords: list[tuple[str, int]] = []
        for _ in range(check_coords):
            name = names[int(rng.integers(len(names)))]
            coords.append((name, int(rng.integers(model.params[name].size))))

        def loss_value() -> float:
            l, _, _, _ = _loss_graph(batch, model, lexicon, lambda_ph)
            return float(l.data)

        max_rel = 0.0
        worst = coords[0]
        for name, flat in coords:
            array = model.params[name]
            original = array.flat[flat]
            array.flat[flat] = original + fd_step
            up = loss_value()
            array.flat[flat] = original - fd_step
            down = loss_value()
            array.flat[flat] = original
            fd = (up - down) / (2.0 * fd_step)
            adg = float(grads[name].flat[flat])
            rel = abs(adg - fd) / max(abs(adg), abs(fd), 1.0)
            if rel > max_rel:
                max_rel, worst = rel, (name, flat)
        report = GradCheckReport(tuple(coords), max_rel, worst)
    return grads, report
