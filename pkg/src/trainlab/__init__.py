"""Training-dynamics toolkit.

Subpackages cover learning-rate schedule arithmetic (:mod:`trainlab.schedule`),
token-budget batch planning and epoch math (:mod:`trainlab.batching`),
learning-curve analytics (:mod:`trainlab.curves`), checkpoint averaging
(:mod:`trainlab.checkpoints`), subword vocabularies (:mod:`trainlab.subword`)
and BLEU scoring (:mod:`trainlab.bleu`).  The ``trainlab`` command exposes all
of it from the shell.
"""

__version__ = "0.1.0"
