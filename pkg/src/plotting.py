"""
Optional line plots of result tables (one PNG per measure).
"""

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Union

if TYPE_CHECKING:
    from src.harness import ResultTable

logger = logging.getLogger(__name__)


def plot_tables(tables: Dict[str, "ResultTable"], out_dir: Union[str, Path]) -> List[Path]:
    """
    Draw each table as lines against its x column, one line per sweep value.

    Cut-indexed tables are drawn against the cut at the last sampled time.
    Returns the written files; an empty list when matplotlib is unavailable.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping plots")
        return []

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for measure, table in tables.items():
        values = table.value_columns
        if not table.rows or measure == "pairing":
            continue
        keys = table.key_columns
        x_name = "cut" if "cut" in keys else "t"
        sweep = [k for k in keys if k not in ("t", "cut", "l", "m")]
        t = table.column("t")
        x = table.column(x_name)
        y = table.column(values[0])
        groups = table.column(sweep[0]) if sweep else None

        mask_base = t == t.max() if x_name == "cut" else t == t
        fig, ax = plt.subplots(figsize=(6, 4))
        for g in (sorted(set(groups)) if groups is not None else [None]):
            mask = mask_base if g is None else mask_base & (groups == g)
            label = None if g is None else f"{sweep[0]}={g:g}"
            ax.plot(x[mask], y[mask], marker="." if x_name == "cut" else None, label=label)
        ax.set_xlabel("cut" if x_name == "cut" else "γt")
        ax.set_ylabel(measure)
        if groups is not None:
            ax.legend(fontsize="small")
        fig.tight_layout()
        path = out / f"{measure}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
        logger.info(f"Plotted {path}")
    return written
