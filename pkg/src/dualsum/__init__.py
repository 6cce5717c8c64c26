"""Active-learning sample selection for text summarization.

Library layout:

* :mod:`dualsum.corpus` -- dataset files and the train/test pools
* :mod:`dualsum.textmetrics` -- BLEU, BLEU variance, ROUGE
* :mod:`dualsum.embedspace` -- embeddings, IDDS scoring, spread metrics, PCA
* :mod:`dualsum.backend` -- mock simulator and remote model-server client
* :mod:`dualsum.strategies` -- the combined strategy and the baselines
* :mod:`dualsum.harness` -- seeded experiment runs and file exports
* :mod:`dualsum.reports` -- figures rendered from exported files
* :mod:`dualsum.cli` -- the ``dualsum`` command
"""

__version__ = "0.1.0"
