"""Excel export of a run: summary, sweep table and integrand samples."""

from typing import Any, Dict, List, Optional, Sequence, Tuple

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from .models import EnergyResult, SweepResult


class ExcelExporter:
    """Writes a formatted workbook next to the CSV results."""

    def __init__(self):
        # Style definitions
        self.header_font = Font(bold=True, size=14)
        self.bold_font = Font(bold=True)
        self.scientific_format = '0.000000E+00'
        self.param_format = '0.000000'

        self.header_fill = PatternFill(start_color="4472C4", end_color="4472C4", fill_type="solid")
        self.header_font_white = Font(bold=True, color="FFFFFF")
        self.fit_fill = PatternFill(start_color="D9E2F3", end_color="D9E2F3", fill_type="solid")

        self.thin_border = Border(
            bottom=Side(style='thin', color='000000')
        )

    def export(
        self,
        output_path: str,
        summary: Dict[str, Any],
        sweep: Optional[SweepResult] = None,
        energy: Optional[EnergyResult] = None,
        fit: Optional[Tuple[float, float]] = None,
    ) -> str:
        """
        Export a run to an Excel file.

        Args:
            output_path: Path for the workbook
            summary: Flat key/value pairs shown on the Run sheet
            sweep: Sweep rows, if the run was a sweep
            energy: Single-point result, if the run was not a sweep
            fit: (exponent, stderr) of a power-law fit

        Returns:
            Path to the created workbook
        """
        wb = Workbook()
        default_sheet = wb.active

        self._write_summary(wb, summary, energy)
        if sweep is not None:
            self._write_sweep(wb, sweep, fit)
        if energy is not None and energy.integrand_samples:
            self._write_integrand(wb, energy.integrand_samples)

        if len(wb.sheetnames) > 1 and default_sheet.title in wb.sheetnames:
            del wb[default_sheet.title]

        wb.save(output_path)
        return output_path

    def _write_title(self, ws, title: str) -> int:
        """Write sheet title and return the next row number."""
        ws['A1'] = title
        ws['A1'].font = self.header_font
        ws.merge_cells('A1:D1')
        ws['A2'] = "(energies in eV, lengths in um, angles in rad)"
        ws['A2'].font = Font(italic=True, size=9)
        return 4

    def _write_table_header(self, ws, row: int, headers: Sequence[str]) -> int:
        for col, header in enumerate(headers, 1):
            cell = ws.cell(row=row, column=col, value=header)
            cell.fill = self.header_fill
            cell.font = self.header_font_white
            cell.alignment = Alignment(horizontal='center')
        return row + 1

    def _write_summary(self, wb: Workbook, summary: Dict[str, Any], energy: Optional[EnergyResult]) -> None:
        ws = wb.create_sheet("Run")
        row = self._write_title(ws, "Casimir interaction run")

        items: List[Tuple[str, Any]] = list(summary.items())
        if energy is not None:
            items += [
                ("energy_eV", energy.energy),
                ("quad_error_eV", energy.quad_error_estimate),
                ("node_count", energy.node_count),
            ]
        for key, value in items:
            ws.cell(row=row, column=1, value=key).font = self.bold_font
            cell = ws.cell(row=row, column=2, value=value if isinstance(value, (int, float, str)) else str(value))
            if isinstance(value, float):
                cell.number_format = self.scientific_format
            row += 1

        self._adjust_column_widths(ws)

    def _write_sweep(self, wb: Workbook, sweep: SweepResult, fit: Optional[Tuple[float, float]]) -> None:
        ws = wb.create_sheet("Sweep")
        row = self._write_title(ws, f"{sweep.parameter.value.capitalize()} sweep")
        row = self._write_table_header(ws, row, sweep.columns)

        for r in sweep.rows:
            values = (r.param, r.energy, r.derivative, r.quad_error)
            for col, value in enumerate(values, 1):
                if value is None:
                    continue
                cell = ws.cell(row=row, column=col, value=value)
                cell.number_format = self.param_format if col == 1 else self.scientific_format
                cell.alignment = Alignment(horizontal='right')
            row += 1

        if fit is not None:
            row += 1
            for col, (label, value) in enumerate((("exponent", fit[0]), ("stderr", fit[1])), start=1):
                ws.cell(row=row, column=2 * col - 1, value=label).font = self.bold_font
                cell = ws.cell(row=row, column=2 * col, value=value)
                cell.fill = self.fit_fill
                cell.border = self.thin_border

        self._adjust_column_widths(ws)

    def _write_integrand(self, wb: Workbook, samples: List[Tuple[float, float]]) -> None:
        ws = wb.create_sheet("Integrand")
        row = self._write_title(ws, "Delta log det on the imaginary axis")
        row = self._write_table_header(ws, row, ["xi_eV", "delta_logdet"])
        for xi, value in sorted(samples):
            ws.cell(row=row, column=1, value=xi).number_format = self.scientific_format
            ws.cell(row=row, column=2, value=value).number_format = self.scientific_format
            row += 1
        self._adjust_column_widths(ws)

    def _adjust_column_widths(self, ws) -> None:
        """Auto-adjust column widths based on content."""
        for column in ws.columns:
            column_letter = get_column_letter(column[0].column)
            max_length = max((len(str(cell.value)) for cell in column if cell.value is not None), default=0)
            ws.column_dimensions[column_letter].width = min(max(max_length + 2, 12), 50)
