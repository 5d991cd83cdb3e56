"""Utility functions for run configuration and report generation."""

from .report_writer import (
    classification_tables,
    display_results_summary,
    trace_frame,
    write_csv,
    write_text_report
)

from .run_configuration import (
    ConfigFileError,
    RunConfiguration,
    build_run_config
)

from .template_processor import (
    SafeTemplateEnvironment,
    render_report,
    validate_template_syntax
)

__all__ = [
    'classification_tables',
    'display_results_summary',
    'trace_frame',
    'write_csv',
    'write_text_report',
    'ConfigFileError',
    'RunConfiguration',
    'build_run_config',
    'SafeTemplateEnvironment',
    'render_report',
    'validate_template_syntax'
]
