"""Weld-radiograph defect classification workbench.

Subpackages cover the corpus pipeline (dataset), transfer-learning trainer
(trainer), configuration search engine (search), saliency explainers
(explain), localization scoring (locmetric), and the expert audit service
(ddia). The `weldlab` CLI binds them together.
"""

__version__ = "0.1.0"
