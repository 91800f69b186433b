"""report_writer モジュール"""

from .writer import (
    REPORT_VERSION,
    TIMESTAMP_FIELD,
    ReportPaths,
    get_output_filenames,
    render_report,
    render_summary,
    save_report,
    to_plain,
)

__all__ = [
    "REPORT_VERSION",
    "TIMESTAMP_FIELD",
    "ReportPaths",
    "get_output_filenames",
    "render_report",
    "render_summary",
    "save_report",
    "to_plain",
]
