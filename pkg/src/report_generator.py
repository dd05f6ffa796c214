"""Run-table generation (Excel)"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

from .models import RunReport
from config import EXCEL_STYLES

logger = logging.getLogger(__name__)

TABLE_TITLE = "Parameters of MCMC computations"
COLUMNS = ['N', 'epsilon', 'L - l0', 'acceptance r', 'time (s)', 'seed', 'chains', 'max|v_cm - 1|', 'TV(u_cm)']


class ReportGenerator:
    """
    Collects run reports into the run table: one row per run with the
    dimension, prior parameter, retained samples, acceptance and wall time.
    """

    def __init__(self, title: str = TABLE_TITLE):
        self.title = title
        self.reports: List[RunReport] = []

    def add_reports(self, reports: List[RunReport]) -> None:
        """Add finished runs to the table."""
        self.reports.extend(reports)

    def clear(self) -> None:
        """Remove all runs."""
        self.reports = []

    def sorted_reports(self) -> List[RunReport]:
        """Ordered by epsilon descending, then N."""
        return sorted(self.reports, key=lambda r: (-r.epsilon, r.N))

    def to_dataframe(self) -> pd.DataFrame:
        """One row per run in table order, with the run-table column names."""
        rows = []
        for r in self.sorted_reports():
            rows.append({
                'N': r.N,
                'epsilon': r.epsilon,
                'L - l0': r.samples_used,
                'acceptance r': round(r.acceptance_ratio, 4),
                'time (s)': round(r.wall_time_s, 2),
                'seed': r.seed,
                'chains': r.n_chains,
                'max|v_cm - 1|': round(r.v_dip, 4),
                'TV(u_cm)': round(r.u_tv, 4),
            })
        return pd.DataFrame(rows, columns=COLUMNS)

    def get_summary_row(self) -> Dict[str, Any]:
        """Totals for samples and time, the mean acceptance."""
        df = self.to_dataframe()
        if df.empty:
            return {col: '' for col in COLUMNS}
        summary = {col: '' for col in COLUMNS}
        summary['N'] = f"{len(df)} runs"
        summary['L - l0'] = int(df['L - l0'].sum())
        summary['acceptance r'] = round(float(np.mean(df['acceptance r'])), 4)
        summary['time (s)'] = round(float(df['time (s)'].sum()), 2)
        return summary

    def export_excel(self, filepath: str) -> None:
        wb = Workbook()
        ws = wb.active
        ws.title = "Run Table"

        header_fill = PatternFill(start_color=EXCEL_STYLES['header_bg_color'],
                                  end_color=EXCEL_STYLES['header_bg_color'],
                                  fill_type='solid')
        summary_fill = PatternFill(start_color=EXCEL_STYLES['summary_bg_color'],
                                   end_color=EXCEL_STYLES['summary_bg_color'],
                                   fill_type='solid')
        header_font = Font(name=EXCEL_STYLES['font_name'], size=EXCEL_STYLES['font_size'], bold=True)
        border = Border(left=Side(style='thin'), right=Side(style='thin'),
                        top=Side(style='thin'), bottom=Side(style='thin'))

        ws['A1'] = self.title
        ws['A1'].font = Font(name=EXCEL_STYLES['font_name'], size=14, bold=True)

        df = self.to_dataframe()
        start_row = 3
        for col_idx, col_name in enumerate(df.columns, 1):
            cell = ws.cell(row=start_row, column=col_idx, value=col_name)
            cell.fill = header_fill
            cell.font = header_font
            cell.border = border
            cell.alignment = Alignment(horizontal='center')

        for row_idx, row in enumerate(df.itertuples(index=False), 1):
            for col_idx, value in enumerate(row, 1):
                cell = ws.cell(row=start_row + row_idx, column=col_idx, value=_cell_value(value))
                cell.border = border
                cell.alignment = Alignment(horizontal='right')
                if df.columns[col_idx - 1] == 'epsilon':
                    cell.number_format = '0.0E+00'

        summary_row = start_row + len(df) + 1
        summary = self.get_summary_row()
        for col_idx, col_name in enumerate(df.columns, 1):
            cell = ws.cell(row=summary_row, column=col_idx, value=summary[col_name])
            cell.fill = summary_fill
            cell.font = Font(bold=True)
            cell.border = border

        for idx, width in enumerate([10, 10, 12, 14, 10, 8, 8, 14, 12], 1):
            ws.column_dimensions[chr(64 + idx)].width = width

        Path(filepath).parent.mkdir(parents=True, exist_ok=True)
        wb.save(filepath)
        logger.info(f"Run table written to {filepath}")


def _cell_value(value: Any) -> Optional[Any]:
    """openpyxl rejects numpy scalars."""
    if isinstance(value, np.generic):
        return value.item()
    return value
