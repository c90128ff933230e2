"""Visual grounding for multimodal shopping dialogues.

End-to-end stack: a synthetic multimodal dialogue simulator, a neural model
that resolves referring expressions to on-screen entities and fills API
arguments, a training/ablation harness, and an interactive session service.
"""

__version__ = "0.1.0"
