"""Length-controlled translation workbench.

Pieces: length-aware positional encodings (lenat.pe), a float64 autodiff
substrate (lenat.autodiff / lenat.optim), an autoregressive teacher
(lenat.transformer), a Levenshtein-style editing student (lenat.levt),
sequence-level distillation (lenat.distill), BLEU / length-ratio scoring
(lenat.metrics) and a CLI (lenat.cli).
"""

__version__ = "0.1.0"
