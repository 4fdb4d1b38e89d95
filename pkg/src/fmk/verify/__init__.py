"""Model files, check suites, reports and the command line."""

from .modelfile import SchemaError, export_model, load_description, load_model, model_schema
from .report import CheckReport, SuiteReport, run_check, run_suite
from .suites import SUITES, Check, checks_for

__all__ = [
    "Check",
    "CheckReport",
    "SUITES",
    "SchemaError",
    "SuiteReport",
    "checks_for",
    "export_model",
    "load_description",
    "load_model",
    "model_schema",
    "run_check",
    "run_suite",
]
