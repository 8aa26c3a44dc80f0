"""Detectors, detector error models and matching decoding."""
from .matching import MatchingDecoder, MatchingGraph, brute_force_matching, build_matching_graph, decode
from .model import DetectorModel, Detector, FaultEntry, Observable, build_detector_model

__all__ = [
    "Detector",
    "DetectorModel",
    "FaultEntry",
    "MatchingDecoder",
    "MatchingGraph",
    "Observable",
    "brute_force_matching",
    "build_detector_model",
    "build_matching_graph",
    "decode",
]
