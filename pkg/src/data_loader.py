"""Data loading and saving for signals, measurements, estimates and run reports"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .models import Mesh, PLFunction, Measurement, RunReport

DUMP_MAGIC = b'DCNV'


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _ensure_parent(filepath: str) -> Path:
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


class DataLoader:
    """
    Read and write every file format used by the toolkit.

    JSON documents carry the resolved experiment config under "config";
    CSV files carry it on a leading "# config: {...}" comment line.
    """

    @staticmethod
    def load_json(filepath: str) -> Any:
        """Parse a JSON file."""
        with open(filepath, 'r', encoding='utf-8') as f:
            return json.load(f)

    @staticmethod
    def save_json(filepath: str, data: Any) -> None:
        """Write JSON with sorted keys; numpy scalars and arrays become plain values."""
        path = _ensure_parent(filepath)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True, default=_to_builtin)
            f.write('\n')

    @staticmethod
    def _save_csv(filepath: str, df: pd.DataFrame, config: Optional[Dict[str, Any]] = None) -> None:
        path = _ensure_parent(filepath)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            if config is not None:
                f.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
            df.to_csv(f, index=False)

    @staticmethod
    def save_table_csv(filepath: str, df: pd.DataFrame, config: Optional[Dict[str, Any]] = None) -> None:
        """CSV table with an optional config header line."""
        DataLoader._save_csv(filepath, df, config)

    @staticmethod
    def read_csv(filepath: str) -> pd.DataFrame:
        """CSV with comment lines skipped and lower-cased column names."""
        df = pd.read_csv(filepath, comment='#')
        df.columns = df.columns.str.strip().str.lower()
        return df

    @staticmethod
    def read_csv_config(filepath: str) -> Optional[Dict[str, Any]]:
        """Config embedded in the comment header of a CSV artifact, if any."""
        with open(filepath, 'r', encoding='utf-8') as f:
            first = f.readline()
        if first.startswith('# config: '):
            return json.loads(first[len('# config: '):])
        return None

    # ------------------------------------------------------------------
    # Signals
    # ------------------------------------------------------------------

    @staticmethod
    def load_signal(filepath: str) -> PLFunction:
        """
        Load a PL signal.

        JSON format: {"n": int, "nodal": [float; 2**n]}.
        CSV format: columns x, value with x = j/N.
        """
        path = Path(filepath)
        if path.suffix.lower() == '.csv':
            df = DataLoader.read_csv(str(path))
            values = df['value'].to_numpy(dtype=float)
            n = int(round(np.log2(len(values))))
            if 2 ** n != len(values):
                raise ValueError(f"signal length {len(values)} is not a power of two")
            order = np.argsort(df['x'].to_numpy(dtype=float)) if 'x' in df.columns else np.arange(len(values))
            return PLFunction(Mesh(n), values[order])
        return PLFunction.from_dict(DataLoader.load_json(str(path)))

    @staticmethod
    def save_signal_json(filepath: str, f: PLFunction, config: Optional[Dict[str, Any]] = None) -> None:
        """Signal JSON from PLFunction.to_dict(), plus the config."""
        data = f.to_dict()
        if config is not None:
            data['config'] = config
        DataLoader.save_json(filepath, data)

    @staticmethod
    def save_signal_csv(filepath: str, f: PLFunction, config: Optional[Dict[str, Any]] = None) -> None:
        """Signal as columns x, value at the nodes."""
        df = pd.DataFrame({'x': f.mesh.nodes(), 'value': f.nodal})
        DataLoader._save_csv(filepath, df, config)

    @staticmethod
    def load_kernel_table(filepath: str) -> np.ndarray:
        """Sampled kernel values on a uniform grid of [0, 1): JSON list or CSV column 'value'."""
        path = Path(filepath)
        if path.suffix.lower() == '.csv':
            return DataLoader.read_csv(str(path))['value'].to_numpy(dtype=float)
        data = DataLoader.load_json(str(path))
        if isinstance(data, dict):
            data = data['table']
        return np.asarray(data, dtype=float)

    # ------------------------------------------------------------------
    # Measurements
    # ------------------------------------------------------------------

    @staticmethod
    def load_measurement(filepath: str) -> Measurement:
        """Format: {"k": int, "coeffs": [float; 2**k], "sigma": float, "meta": {...}}"""
        return Measurement.from_dict(DataLoader.load_json(filepath))

    @staticmethod
    def save_measurement(filepath: str, m: Measurement, config: Optional[Dict[str, Any]] = None) -> None:
        """Measurement JSON with the config under "config"."""
        data = m.to_dict()
        if config is not None:
            data['config'] = config
        DataLoader.save_json(filepath, data)

    # ------------------------------------------------------------------
    # Estimates and run reports
    # ------------------------------------------------------------------

    @staticmethod
    def save_estimate_csv(filepath: str, x: np.ndarray, columns: Dict[str, np.ndarray],
                          config: Optional[Dict[str, Any]] = None) -> None:
        """Columns x, then one column per estimate (u_cm, v_cm, ...) sampled at the nodes."""
        data = {'x': np.asarray(x, dtype=float)}
        data.update({name: np.asarray(vals, dtype=float) for name, vals in columns.items()})
        DataLoader._save_csv(filepath, pd.DataFrame(data), config)

    @staticmethod
    def load_estimate_csv(filepath: str) -> pd.DataFrame:
        """Estimate CSV as a DataFrame; the config line is skipped."""
        return DataLoader.read_csv(filepath)

    @staticmethod
    def save_run_report(filepath: str, report: RunReport, config: Optional[Dict[str, Any]] = None) -> None:
        """Run report JSON with the config under "config"."""
        data = report.to_dict()
        if config is not None:
            data['config'] = config
        DataLoader.save_json(filepath, data)

    @staticmethod
    def load_run_report(filepath: str) -> RunReport:
        """Single run report; any embedded config is dropped."""
        return RunReport.from_dict(DataLoader.load_json(filepath))

    @staticmethod
    def load_run_reports(filepaths: List[str]) -> List[Tuple[RunReport, Optional[Dict[str, Any]]]]:
        """Reports with their embedded configs, in the given order."""
        loaded = []
        for fp in filepaths:
            data = DataLoader.load_json(fp)
            loaded.append((RunReport.from_dict(data), data.get('config')))
        return loaded

    # ------------------------------------------------------------------
    # Binary dumps (basis cache, chain samples)
    # ------------------------------------------------------------------

    @staticmethod
    def save_matrix_dump(filepath: str, header: Dict[str, Any], array: np.ndarray) -> None:
        """
        Little-endian float64 dump.

        Layout: b'DCNV', uint32 header length (little-endian), UTF-8 JSON
        header with "shape" and "dtype" added, then the C-ordered data.
        """
        array = np.ascontiguousarray(array, dtype='<f8')
        meta = dict(header)
        meta['shape'] = list(array.shape)
        meta['dtype'] = '<f8'
        blob = json.dumps(meta, sort_keys=True).encode('utf-8')
        path = _ensure_parent(filepath)
        with open(path, 'wb') as f:
            f.write(DUMP_MAGIC)
            f.write(struct.pack('<I', len(blob)))
            f.write(blob)
            f.write(array.tobytes(order='C'))

    @staticmethod
    def load_matrix_dump(filepath: str) -> Tuple[Dict[str, Any], np.ndarray]:
        with open(filepath, 'rb') as f:
            if f.read(4) != DUMP_MAGIC:
                raise ValueError(f"{filepath} is not a matrix dump")
            (length,) = struct.unpack('<I', f.read(4))
            header = json.loads(f.read(length).decode('utf-8'))
            data = np.frombuffer(f.read(), dtype='<f8')
        return header, data.reshape(header['shape']).astype(float)

    @staticmethod
    def save_chain_dump(filepath: str, samples: np.ndarray, thin: int,
                        config: Optional[Dict[str, Any]] = None) -> None:
        """Retained chain states, one row per kept sweep; header {dim, count, thin}."""
        samples = np.atleast_2d(samples)
        header = {'dim': int(samples.shape[1]), 'count': int(samples.shape[0]), 'thin': int(thin)}
        if config is not None:
            header['config'] = config
        DataLoader.save_matrix_dump(filepath, header, samples)

    @staticmethod
    def load_chain_dump(filepath: str) -> Tuple[Dict[str, Any], np.ndarray]:
        return DataLoader.load_matrix_dump(filepath)
