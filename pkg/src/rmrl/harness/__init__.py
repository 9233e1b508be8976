"""Experiment orchestration: config, training, calibration, evaluation, analysis."""
