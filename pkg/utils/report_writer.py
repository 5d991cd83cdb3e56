"""
Run artifacts: text reports rendered from templates and CSV tables.

No timestamps are written, so rerunning a command with the same inputs
reproduces every artifact byte for byte.
"""

import logging
import os
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.template_processor import render_report

logger = logging.getLogger(__name__)


def write_text_report(output_dir: str, template_name: str, variables: Dict[str, Any],
                      file_name: str = "report.txt") -> str:
    """Render a report template into output_dir and return the written path."""
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, file_name)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(render_report(template_name, variables))
    logger.info(f"Report written to {path}")
    return path


def write_csv(path: str, frame: pd.DataFrame, index: bool = False) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=index, lineterminator='\n', float_format='%.17g')
    return path


def trace_frame(traces: Dict[str, Sequence[float]]) -> pd.DataFrame:
    """One row per iteration, one column per named trace (shorter traces padded with NaN)."""
    length = max((len(t) for t in traces.values()), default=0)
    columns = {name: list(t) + [np.nan] * (length - len(t)) for name, t in traces.items()}
    frame = pd.DataFrame(columns)
    frame.insert(0, 'iteration', range(length))
    return frame


def classification_tables(truth: Sequence[Any], predicted: Sequence[Any]) -> Tuple[float, pd.DataFrame, pd.DataFrame]:
    """
    Accuracy, per-class accuracy and the confusion matrix of one classifier.

    Returns:
        (accuracy, per-class frame with columns class/support/correct/accuracy,
         confusion frame indexed by true class with one column per predicted class)
    """
    frame = pd.DataFrame({'true': list(truth), 'predicted': list(predicted)})
    frame['correct'] = frame['true'] == frame['predicted']
    accuracy = float(frame['correct'].mean()) if len(frame) else 0.0
    per_class = (frame.groupby('true', sort=True)['correct']
                 .agg(support='size', correct='sum')
                 .reset_index()
                 .rename(columns={'true': 'class'}))
    per_class['accuracy'] = per_class['correct'] / per_class['support']
    classes = sorted(set(frame['true']) | set(frame['predicted']))
    confusion = (pd.crosstab(frame['true'], frame['predicted'])
                 .reindex(index=classes, columns=classes, fill_value=0))
    confusion.index.name = 'true'
    confusion.columns.name = 'predicted'
    return accuracy, per_class, confusion


def display_results_summary(results: Optional[Dict[str, Any]], title: str = "Run Results Summary") -> None:
    """Log a short summary of a command's results dictionary."""
    logging.info("\n" + "=" * 60)
    logging.info(title)
    logging.info("=" * 60)

    if isinstance(results, dict):
        for key, value in results.items():
            if isinstance(value, float):
                logging.info(f"{key}: {value:.6e}")
            elif isinstance(value, (list, tuple)) and len(value) > 8:
                logging.info(f"{key}: [{len(value)} entries]")
            else:
                logging.info(f"{key}: {value}")
    else:
        logging.warning("No results returned from the command")
