"""Train a small noise generator and corrupt text with it, end to end.

Uses a compact synthetic parallel corpus (phonetically plausible noise over
the shipped lexicon), so the whole demo runs in about a minute.

Run:  python3 demos/train_and_corrupt_demo.py
"""
from asrnoise import (
    Model,
    ModelConfig,
    TrainConfig,
    align_pair,
    build_training_items,
    corrupt_corpus,
    default_lexicon,
    induce_vocab,
    make_parallel_corpus,
    train,
)

lexicon = default_lexicon()

# 1. A parallel corpus: clean sentences and noisy transcripts whose errors
#    are substitutions by soundalikes, dropped words and inserted words.
pairs = make_parallel_corpus(200, seed=42)
print("== corpus sample ==")
for pair in pairs[:3]:
    print(f"  GT : {pair.gt}")
    print(f"  ASR: {pair.asr}\n")

# 2. Subword vocabulary and word alignments; each corrupted piece becomes a
#    training item whose target is the transcript pieces plus [EOS].
vocab = induce_vocab([p.gt for p in pairs] + [p.asr for p in pairs], 384)
alignments = [align_pair(p.gt, p.asr, lexicon) for p in pairs]
items = build_training_items(alignments, vocab, [p.id for p in pairs], max_target_len=5)
labels = {}
for item in items:
    labels[item.error_label] = labels.get(item.error_label, 0) + 1
print(f"vocab {len(vocab)} pieces, {len(items)} training items, label mix {labels}")

# 3. Train the encoder-decoder with both generation heads.
model = Model.build(vocab, lexicon, ModelConfig(d_model=32, n_heads=4), seed=7)
log = train(items, model, lexicon, TrainConfig(learning_rate=1e-3, epochs=20, seed=7))
print("\n== training ==")
for row in log[::4] + [log[-1]]:
    print(f"  epoch {row.epoch:3d}: L_tot {row.loss_total:7.3f}  L_n {row.loss_word:7.3f}  L_ph {row.loss_phoneme:7.3f}")

# 4. Corrupt fresh text.  Each token is independently corrupted with
#    probability p_z; corrupted tokens are replaced by sampled spans whose
#    length picks the error type (1 = deletion, 2 = substitution, more =
#    insertion).
texts = [p.gt for p in make_parallel_corpus(8, seed=99)]
outputs, records = corrupt_corpus(texts, model, p_z=0.45, seed=3)
print("\n== pseudo transcripts at P(z) = 0.45 ==")
for text, out in zip(texts, outputs):
    print(f"  in : {text}")
    print(f"  out: {out}\n")

mix = {}
for rec in records:
    mix[rec.span.error_type.value] = mix.get(rec.span.error_type.value, 0) + 1
print(f"span error mix: {mix}")
