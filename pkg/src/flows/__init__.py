"""Prefect flows for gazekit."""

from .evaluation import gaze_evaluation_flow

__all__ = ["gaze_evaluation_flow"]
