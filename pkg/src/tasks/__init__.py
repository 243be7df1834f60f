"""Prefect tasks for gazekit."""

from .pipeline_tasks import aggregate_report_task, build_feature_table_task, run_fold_task

__all__ = ["aggregate_report_task", "build_feature_table_task", "run_fold_task"]
