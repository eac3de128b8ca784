import os
import math
import logging

import numpy as np
import pandas as pd
from prettytable import PrettyTable

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "surface",
    "N",
    "delta_ratio",
    "theta",
    "mode",
    "backend",
    "e2_irreg",
    "einf_irreg",
    "e2_reg",
    "einf_reg",
    "e2_quad",
    "einf_quad",
    "nodes",
    "targets",
    "seconds",
]

ERROR_COLUMNS = CSV_COLUMNS[6:12]


def result_row(result):
    config = result.config
    values = [
        config.surface,
        config.n,
        config.delta_ratio,
        config.theta_degrees,
        config.mode,
        config.backend,
        *result.errors.as_tuple(),
        result.nodes,
        result.targets,
        result.seconds,
    ]
    return dict(zip(CSV_COLUMNS, values))


def append_csv(result, path):
    """Append one row per case, writing the header when the file is new."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame([result_row(result)], columns=CSV_COLUMNS)
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    frame.to_csv(path, mode="a", header=new_file, index=False, float_format="%.6g")
    logger.info(f"Appended results for {result.config.surface} N={result.config.n} to {path}")


def _fmt(value):
    return "-" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.2E}"


def summary_table(result):
    config = result.config
    errors = result.errors
    table = PrettyTable()
    table.field_names = ["Point set", "L2 error", "Max error"]
    table.add_row(["irregular", _fmt(errors.e2_irreg), _fmt(errors.einf_irreg)])
    table.add_row(["regular", _fmt(errors.e2_reg), _fmt(errors.einf_reg)])
    table.add_row(["quadrature", _fmt(errors.e2_quad), _fmt(errors.einf_quad)])
    table.align["Point set"] = "l"
    table.title = (f"{config.surface}  N={config.n}  delta/h={config.delta_ratio:g}  "
                   f"nodes={result.nodes}  targets={result.targets}  {result.seconds:.1f}s")
    return table


def bins_table(bins):
    table = PrettyTable()
    table.field_names = ["|b|/h", "Max error"]
    for (lo, hi), value in bins.items():
        table.add_row([f"[{lo:g}, {hi:g})", _fmt(value)])
    return table


def nodes_table(surface_id, counts, area, h, h0, reference=None, factor=None):
    table = PrettyTable()
    table.field_names = ["Surface", "Axis 1", "Axis 2", "Axis 3", "Total", "Reference", "Area", "h", "h0", "exp(-pi^2 cos^2 (delta/h)^2)"]
    table.add_row([
        surface_id,
        *counts,
        sum(counts),
        reference if reference is not None else "-",
        f"{area:.10f}",
        f"{h:.5f}",
        f"{h0:.5f}",
        _fmt(factor),
    ])
    return table


def convergence_rates(frame, column="einf_irreg"):
    """Observed orders log(e_coarse / e_fine) / log(N_fine / N_coarse) per (surface, delta_ratio, mode)."""
    rows = []
    keys = ["surface", "delta_ratio", "mode"]
    for key, group in frame.sort_values("N").groupby(keys):
        group = group.dropna(subset=[column])
        sizes = group["N"].to_numpy()
        errors = group[column].to_numpy()
        for i in range(1, len(sizes)):
            if errors[i] <= 0 or errors[i - 1] <= 0 or sizes[i] == sizes[i - 1]:
                continue
            order = np.log(errors[i - 1] / errors[i]) / np.log(sizes[i] / sizes[i - 1])
            rows.append(dict(zip(keys, key), N_from=sizes[i - 1], N_to=sizes[i], ratio=errors[i - 1] / errors[i], order=order))
    return pd.DataFrame(rows, columns=keys + ["N_from", "N_to", "ratio", "order"])


def rates_table(rates, column):
    table = PrettyTable()
    table.field_names = ["Surface", "delta/h", "Mode", "N", "Ratio", f"Order ({column})"]
    for row in rates.itertuples(index=False):
        table.add_row([row.surface, f"{row.delta_ratio:g}", row.mode, f"{row.N_from}->{row.N_to}", f"{row.ratio:.2f}", f"{row.order:.2f}"])
    return table
