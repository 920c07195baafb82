'''
Figures of a placement study: the sensor map and the sigma time profile of every successful
sweep row, drawn from the same data the DAT files hold.
'''

import logging
from pathlib import Path
from typing import TYPE_CHECKING, List, Union

import numpy as np
from matplotlib.figure import Figure

from daplace.placement.classify import placement_labels

if TYPE_CHECKING:
    from daplace.experiments.study import RunReport

logger = logging.getLogger(__name__)

# label -> (marker, colour, legend entry)
LABEL_STYLES = {0: ('x', 'lightgrey', 'w <= 0.2'),
                2: ('s', 'tab:orange', '0.2 < w <= 0.8'),
                3: ('^', 'tab:blue', '0.8 < w < 1'),
                1: ('o', 'black', 'w = 1')}


def placement_map_figure(coords: np.ndarray, w: np.ndarray, title: str='') -> Figure:
    '''
    Scatter of the sensor candidates on the unit square, one marker per interval band.
    '''
    labels = placement_labels(w)
    fig = Figure(figsize=(4.5, 4.5))
    ax = fig.add_subplot()
    for label, (marker, colour, name) in LABEL_STYLES.items():
        sel = labels == label
        if np.any(sel):
            ax.scatter(coords[sel, 0], coords[sel, 1], marker=marker, c=colour, s=18, label=name)
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.set_aspect('equal')
    ax.set_xlabel('x1')
    ax.set_ylabel('x2')
    ax.legend(loc='upper right', fontsize='small')
    if title:
        ax.set_title(title)
    return fig


def sigma_profile_figure(subintervals: np.ndarray, sigma: np.ndarray, title: str='') -> Figure:
    fig = Figure(figsize=(5, 3))
    ax = fig.add_subplot()
    widths = subintervals[:, 1] - subintervals[:, 0]
    ax.bar(subintervals[:, 0], sigma, width=widths, align='edge', edgecolor='black', color='tab:blue')
    ax.set_xlim(0.0, subintervals[-1, 1])
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel('t')
    ax.set_ylabel('sigma')
    if title:
        ax.set_title(title)
    return fig


def plot_report(report: 'RunReport', out_dir: Union[str, Path]) -> List[Path]:
    '''
    Writes w_map_rowNN.png and sigma_rowNN.png for every successful row of the report.

    Returns
    -------
    paths: list[Path]
    '''
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    key = report.config.sweep_key
    paths = []
    for row in report.rows:
        if not row.ok:
            continue
        title = f'{key} = {row.value:g}, sd = {row.sd:g}'
        for name, fig in ((f'w_map_row{row.index:02d}.png',
                           placement_map_figure(report.candidate_coords, row.W.w, title)),
                          (f'sigma_row{row.index:02d}.png',
                           sigma_profile_figure(report.subintervals, row.W.sigma, title))):
            fig.savefig(out / name, dpi=120, bbox_inches='tight')
            paths.append(out / name)

    logger.info('wrote %i figures to %s', len(paths), out)
    return paths
