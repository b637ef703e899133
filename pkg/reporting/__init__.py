from reporting.formatters import OutputFormatter
from reporting.results_logger import RESULT_COLUMNS, ResultRow, ResultsJournal

__all__ = ["OutputFormatter", "RESULT_COLUMNS", "ResultRow", "ResultsJournal"]
