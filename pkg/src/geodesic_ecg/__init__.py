"""Riemannian-geometry classification of multichannel biosignals.

Covariance matrices of multichannel recordings are treated as points on the
SPD manifold; features come from tangent-space projection at a global or at
per-class Riemannian means, training sets can be enlarged by geodesic
covariance mixup, and classifiers are evaluated under a stratified
patient-leave-out protocol.
"""

__version__ = "0.1.0"

from . import augment, classify, evaluation, features, pipeline, signal, spd  # noqa: F401
