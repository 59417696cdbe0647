"""Semantic compression toolkit for textured 3D objects.

Three compression regimes over one container format: traditional
(decimation + texture recoding), structured semantic (clamped description +
sparse edge map), and pure semantic (description only), with pluggable
generative backends for decompression and an evaluation kit (F-score,
embedding cosine, human mean rank).
"""

__version__ = "0.1.0"
