'''
Writers for the report tables (CSV) and the plot data files (whitespace separated DAT).

Every writer first builds the file content as a string and only then touches the disk, so equal
inputs always give byte-identical files.
'''

import csv
import io
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from daplace.placement.classify import placement_labels

if TYPE_CHECKING:
    from daplace.experiments.study import RunReport, SweepRow
    from daplace.pde.solvers import ParabolicModel

logger = logging.getLogger(__name__)

Table = Tuple[List[str], List[list]]

PERFORMANCE_HEADER = ['sweep', 'J0', 'J_end', 'norm_w', 'norm_sigma', 'iter', 'iter_da', 'pde_solved',
                      'status']


def fmt(value) -> str:
    '''fixed textual form of a table entry; missing numbers print as nan'''
    if value is None:
        return 'nan'
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return 'nan' if math.isnan(value) else f'{float(value):.10g}'
    return str(value)


def table_csv_str(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buffer.getvalue()


def placement_map_str(coords: np.ndarray, w: np.ndarray) -> str:
    '''
    one line "x y label" per sensor candidate, label as in placement_labels
    '''
    labels = placement_labels(w)
    lines = [f'{fmt(x)} {fmt(y)} {label}' for (x, y), label in zip(coords, labels)]
    return '\n'.join(lines) + '\n'


def sigma_profile_str(subintervals: np.ndarray, sigma: np.ndarray) -> str:
    lines = [f'{fmt(t0)} {fmt(t1)} {fmt(s)}' for (t0, t1), s in zip(subintervals, sigma)]
    return '\n'.join(lines) + '\n'


def snapshot_str(nodes: np.ndarray, values: np.ndarray) -> str:
    lines = [f'{fmt(x)} {fmt(y)} {fmt(v)}' for (x, y), v in zip(nodes, values)]
    return '\n'.join(lines) + '\n'


def _counts(row: 'SweepRow', binary: bool) -> Tuple[Optional[Dict[str, int]], Optional[Dict[str, int]]]:
    return row.counts_w(binary=binary), row.counts_sigma(binary=binary)


def _get(counts: Optional[Dict[str, int]], *keys: str):
    if counts is None:
        return None
    return sum(counts[key] for key in keys)


def structure_tables(report: 'RunReport') -> Dict[str, Table]:
    '''
    Tables of the experiment, keyed by file stem. Columns per experiment:

        1a  beta_w, zeros_w, ones_w, zeros_sigma, ones_sigma           (binary placement)
        1b  beta_sigma, zeros_sigma, ones_sigma, zeros_w, ones_w        (binary placement)
        2   beta_w, zeros_w, band2_w, band3_w, ones_w, zeros_sigma, ones_sigma
        3   beta_w, zeros_w, band2_w, ones_w, zeros_sigma, ones_sigma and a binary table
        4   beta_w, sd, error_abs, error_rel

    In the relaxed tables zeros_w counts w <= 0.2; sigma columns always come from the binary
    placement.
    '''
    experiment = report.experiment
    key = report.config.sweep_key
    tables: Dict[str, Table] = {}

    def binary_rows(first: str):
        rows = []
        for row in report.rows:
            cw, cs = _counts(row, binary=True)
            if first == 'w':
                rows.append([row.value, _get(cw, 'zeros'), _get(cw, 'ones'), _get(cs, 'zeros'), _get(cs, 'ones')])
            else:
                rows.append([row.value, _get(cs, 'zeros'), _get(cs, 'ones'), _get(cw, 'zeros'), _get(cw, 'ones')])
        return rows

    if experiment == '1a':
        tables['structure'] = (['beta_w', 'zeros_w', 'ones_w', 'zeros_sigma', 'ones_sigma'], binary_rows('w'))

    elif experiment == '1b':
        tables['structure'] = (['beta_sigma', 'zeros_sigma', 'ones_sigma', 'zeros_w', 'ones_w'], binary_rows('sigma'))

    elif experiment == '2':
        rows = []
        for row in report.rows:
            cw, cs = row.counts_w(), row.counts_sigma(binary=True)
            rows.append([row.value, _get(cw, 'zeros', 'band1'), _get(cw, 'band2'), _get(cw, 'band3'),
                         _get(cw, 'ones'), _get(cs, 'zeros'), _get(cs, 'ones')])
        tables['structure'] = (['beta_w', 'zeros_w', 'band2_w', 'band3_w', 'ones_w', 'zeros_sigma', 'ones_sigma'], rows)

    elif experiment == '3':
        rows = []
        for row in report.rows:
            cw, cs = row.counts_w(), row.counts_sigma(binary=True)
            rows.append([row.value, _get(cw, 'zeros', 'band1'), _get(cw, 'band2'), _get(cw, 'band3', 'ones'),
                         _get(cs, 'zeros'), _get(cs, 'ones')])
        tables['structure'] = (['beta_w', 'zeros_w', 'band2_w', 'ones_w', 'zeros_sigma', 'ones_sigma'], rows)
        tables['binary'] = (['beta_w', 'zeros_w', 'ones_w', 'zeros_sigma', 'ones_sigma'], binary_rows('w'))

    elif experiment == '4':
        rows = [[row.value, row.sd, row.error_abs, row.error_rel] for row in report.rows]
        tables['errors'] = (['beta_w', 'sd', 'error_abs', 'error_rel'], rows)

    else:
        w_keys = ['zeros', 'band1', 'band2', 'band3', 'ones']
        s_keys = ['zeros', 'band1', 'band2', 'band3', 'band4', 'ones']
        rows = []
        for row in report.rows:
            cw, cs = row.counts_w(), row.counts_sigma()
            rows.append([row.value] + [_get(cw, k) for k in w_keys] + [_get(cs, k) for k in s_keys])
        header = [key] + [f'{k}_w' for k in w_keys] + [f'{k}_sigma' for k in s_keys]
        tables['structure'] = (header, rows)

    tables['performance'] = (PERFORMANCE_HEADER,
                             [[row.value, row.J0, row.J_end, row.norm_w, row.norm_sigma, row.iterations,
                               row.da_iterations, row.pde_solves, row.status] for row in report.rows])
    return tables


def _write(path: Path, content: str) -> Path:
    try:
        with open(path, 'w', newline='') as f:
            f.write(content)
    except OSError as err:
        raise OSError(f'could not write {path}: {err}') from err
    return path


def export_report(report: 'RunReport', out_dir: Union[str, Path]) -> List[Path]:
    '''
    Writes the report of a placement study.

    Parameters
    ----------
    report: RunReport
    out_dir: str
        created if missing.

    Returns
    -------
    paths: list[Path]
        every file written, in writing order:
        <prefix>_<table>.csv for each table, w_map_rowNN.dat (x y label) and
        sigma_rowNN.dat (t_start t_end sigma) per successful row, config.txt.

    Raises
    ------
    OSError
        naming the path that could not be written.
    '''
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = f'experiment_{report.experiment}' if report.experiment is not None else 'placement'
    paths = []

    for name, (header, rows) in structure_tables(report).items():
        paths.append(_write(out / f'{prefix}_{name}.csv', table_csv_str(header, rows)))

    for row in report.rows:
        if not row.ok:
            continue
        paths.append(_write(out / f'w_map_row{row.index:02d}.dat', placement_map_str(report.candidate_coords, row.W.w)))
        paths.append(_write(out / f'sigma_row{row.index:02d}.dat', sigma_profile_str(report.subintervals, row.W.sigma)))

    paths.append(_write(out / 'config.txt', report.config.to_text()))
    logger.info('wrote %i files to %s', len(paths), out)
    return paths


def export_snapshots(model: 'ParabolicModel', y: np.ndarray, times: Sequence[float],
                     out_dir: Union[str, Path], label: str='state') -> List[Path]:
    '''
    Writes "x y value" files of the state at the time steps closest to the requested times.

    Raises
    ------
    ValueError
        if a time lies outside [0, T].
    '''
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tg = model.tg
    paths = []
    for t in times:
        if not 0.0 <= t <= tg.T:
            raise ValueError(f'snapshot time {t} outside [0, {tg.T}]')
        k = int(np.argmin(np.abs(tg.times - t)))
        paths.append(_write(out / f'{label}_t{k:03d}.dat', snapshot_str(model.grid.nodes, y[k])))
    return paths
