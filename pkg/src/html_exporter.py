"""HTML run-table exporter"""
import html
import logging
from pathlib import Path
from typing import List

from .models import RunReport
from .report_generator import COLUMNS, ReportGenerator, TABLE_TITLE

logger = logging.getLogger(__name__)


class HTMLReportExporter:
    """
    Renders the run table as a standalone HTML page with the same rows and
    summary as the Excel export.
    """

    HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <title>{title}</title>
    <style>
        body {{
            font-family: Helvetica, Arial, sans-serif;
            font-size: 12px;
            background-color: #fafafa;
            padding: 20px;
        }}

        .report-container {{
            max-width: 1100px;
            margin: 0 auto;
            background-color: white;
            padding: 20px;
        }}

        .report-title {{
            text-align: center;
            font-size: 18px;
            font-weight: bold;
            margin-bottom: 16px;
        }}

        table {{
            width: 100%;
            border-collapse: collapse;
        }}

        th {{
            background-color: #e4e4e4;
            white-space: nowrap;
            padding: 8px;
            border-bottom: 2px solid #888;
        }}

        td {{
            padding: 6px 8px;
            border-bottom: 1px solid #ddd;
            font-variant-numeric: tabular-nums;
            text-align: right;
        }}

        .summary-row {{
            background-color: #ddebf7;
            font-weight: bold;
        }}

        .low-acceptance {{
            color: #c00;
        }}
    </style>
</head>
<body>
    <div class="report-container">
        <div class="report-title">{title}</div>
        <table>
            <thead>
                <tr>
{header}
                </tr>
            </thead>
            <tbody>
{rows}
            </tbody>
        </table>
    </div>
</body>
</html>"""

    LOW_ACCEPTANCE = 0.1

    def __init__(self, title: str = TABLE_TITLE):
        self.generator = ReportGenerator(title)

    def add_reports(self, reports: List[RunReport]) -> None:
        self.generator.add_reports(reports)

    def _format(self, column: str, value) -> str:
        if value == '' or value is None:
            return ''
        if column == 'epsilon':
            return f"{value:.1e}"
        if column == 'time (s)':
            return f"{value:,.2f}"
        if isinstance(value, float):
            return f"{value:.4f}"
        return html.escape(str(value))

    def generate_html(self) -> str:
        """Render the run table and its summary row as a standalone HTML page."""
        header = "\n".join(f"                    <th>{html.escape(c)}</th>" for c in COLUMNS)

        rows = []
        for record in self.generator.to_dataframe().to_dict('records'):
            css = ' class="low-acceptance"' if record['acceptance r'] < self.LOW_ACCEPTANCE else ''
            cells = "".join(f"<td>{self._format(c, record[c])}</td>" for c in COLUMNS)
            rows.append(f"                <tr{css}>{cells}</tr>")

        summary = self.generator.get_summary_row()
        cells = "".join(f"<td>{self._format(c, summary[c])}</td>" for c in COLUMNS)
        rows.append(f'                <tr class="summary-row">{cells}</tr>')

        return self.HTML_TEMPLATE.format(title=html.escape(self.generator.title), header=header,
                                         rows="\n".join(rows))

    def export_html(self, filepath: str) -> None:
        """Write the HTML page, creating parent directories."""
        page = self.generate_html()
        Path(filepath).parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            f.write(page)
        logger.info(f"HTML run table written to {filepath}")
