"""Hallucination span detection from sampled-response consistency."""
from .datamodel import DetectionConfig, PredictionSet, Record, SampleSet, validate_config
from .kernels import BACKEND
from .pipeline import detect
from .scorer import RemoteEmbeddingProvider, StubEmbeddingProvider, deterministic_stub_provider

__all__ = [
    "BACKEND",
    "DetectionConfig",
    "PredictionSet",
    "Record",
    "RemoteEmbeddingProvider",
    "SampleSet",
    "StubEmbeddingProvider",
    "detect",
    "deterministic_stub_provider",
    "validate_config",
]
__version__ = "0.1.0"
