"""File formats: data ingestion, draw persistence, tables and graphs.

Tables are comma separated with numbers written as ``%.12g``.  Draws are a
NumPy ``.npz`` archive with one array per field, stacked along axis 0:

    iteration (D,)      alpha (D, p)       beta (D, p, q)
    b (D, q)            psi_tilde (D, q)   sigma_x (D, p, p)
    mu_x (D, p)         mu_y (D, q)        B_load (D, p, k)   Lambda (D, p)
    response_names (q,) predictor_names (p,)

Graphs are Graphviz DOT (undirected).  Response nodes carry
``class="response" fillcolor="gray"``, predictor nodes
``class="predictor" fillcolor="white"``; both ``style="filled"``.
"""

from __future__ import annotations

import csv
import io
import zipfile
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .dss_summary import MomentSet
from .exceptions import IngestionError
from .loss_gap import LossGapResult
from .model_core import Dataset, PosteriorDraw
from .path_solver import SummaryPath

__all__ = ["read_table", "ingest", "write_draws", "read_draws", "emit_graph",
           "emit_tradeoff_table", "read_tradeoff_table", "write_path",
           "read_path", "write_moments", "read_moments", "fmt"]

TRADEOFF_COLUMNS = ("lambda", "delta_mean", "band_lower", "band_upper", "pi",
                    "support_size")


def fmt(x) -> str:
    return format(float(x), ".12g")


def read_table(path) -> Tuple[List[str], np.ndarray]:
    """Read a comma-delimited numeric table with a header row."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestionError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise IngestionError(
                f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                data[r - 2, c] = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: non-numeric value {cell!r} at row {r}, column "
                    f"{header[c]!r}") from None
    if not np.all(np.isfinite(data)):
        r, c = np.argwhere(~np.isfinite(data))[0]
        raise IngestionError(f"{path}: non-finite value at row {r + 2}, column {header[c]!r}")
    return header, data


def ingest(responses_path, predictors_path) -> Dataset:
    """Load responses and predictors, centre them and keep the means."""
    rnames, Y = read_table(responses_path)
    pnames, X = read_table(predictors_path)
    if Y.shape[0] != X.shape[0]:
        raise IngestionError(
            f"responses have {Y.shape[0]} rows but predictors have {X.shape[0]} rows")
    return Dataset.from_arrays(Y, X, rnames, pnames)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


# --- draws ------------------------------------------------------------------

def write_draws(path, draws: Sequence[PosteriorDraw], dataset: Dataset = None) -> None:
    arrays = dict(
        iteration=np.array([d.iteration for d in draws], dtype=np.int64),
        alpha=np.stack([d.alpha for d in draws]).astype(np.int8),
        beta=np.stack([d.beta for d in draws]),
        b=np.stack([d.b for d in draws]),
        psi_tilde=np.stack([d.psi_tilde for d in draws]),
        sigma_x=np.stack([d.sigma_x for d in draws]),
        mu_x=np.stack([d.mu_x for d in draws]),
        mu_y=np.stack([d.mu_y for d in draws]),
        B_load=np.stack([d.B_load for d in draws]),
        Lambda=np.stack([d.Lambda for d in draws]),
    )
    if dataset is not None:
        arrays["response_names"] = np.array(dataset.response_names)
        arrays["predictor_names"] = np.array(dataset.predictor_names)
    # plain np.savez writes zip timestamps; write through a fixed-date zip
    _savez_deterministic(path, arrays)


def _savez_deterministic(path, arrays) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def read_draws(path) -> List[PosteriorDraw]:
    with np.load(path, allow_pickle=False) as z:
        n = z["iteration"].shape[0]
        return [PosteriorDraw(beta=z["beta"][i], b=z["b"][i], psi_tilde=z["psi_tilde"][i],
                              B_load=z["B_load"][i], Lambda=z["Lambda"][i],
                              mu_x=z["mu_x"][i], mu_y=z["mu_y"][i],
                              alpha=z["alpha"][i], iteration=int(z["iteration"][i]))
                for i in range(n)]


# --- moments and path -------------------------------------------------------

def write_moments(path, moments: MomentSet) -> None:
    rows = []
    for name in ("A", "S", "M"):
        mat = getattr(moments, name)
        for (i, j), v in np.ndenumerate(mat):
            rows.append((name, i, j, float(v)))
    write_table(path, ("matrix", "row", "col", "value"), rows)


def read_moments(path, mode: str = "random") -> MomentSet:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    mats = {}
    for name in ("A", "S", "M"):
        sel = [r for r in rows if r["matrix"] == name]
        nr = 1 + max(int(r["row"]) for r in sel)
        nc = 1 + max(int(r["col"]) for r in sel)
        m = np.zeros((nr, nc))
        for r in sel:
            m[int(r["row"]), int(r["col"])] = float(r["value"])
        mats[name] = m
    return MomentSet.from_matrices(mats["A"], mats["S"], mats["M"], mode)


def write_path(path, summary: SummaryPath, response_names, predictor_names) -> None:
    rows = []
    for g, (lam, gam) in enumerate(zip(summary.lambdas, summary.gammas)):
        for (j, i), v in np.ndenumerate(gam):
            rows.append((g, float(lam), response_names[j], predictor_names[i], float(v)))
    write_table(path, ("grid_index", "lambda", "response", "predictor", "gamma"), rows)


def read_path(path):
    """Returns ``(lambdas, gammas)`` with gammas shaped (G, q, p)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    resp = list(dict.fromkeys(r["response"] for r in rows))
    pred = list(dict.fromkeys(r["predictor"] for r in rows))
    G = 1 + max(int(r["grid_index"]) for r in rows)
    lambdas = np.zeros(G)
    gammas = np.zeros((G, len(resp), len(pred)))
    for r in rows:
        g = int(r["grid_index"])
        lambdas[g] = float(r["lambda"])
        gammas[g, resp.index(r["response"]), pred.index(r["predictor"])] = float(r["gamma"])
    return lambdas, gammas


# --- trade-off table and graphs ----------------------------------------------

def emit_tradeoff_table(result: LossGapResult, out_path, support_sizes=None) -> None:
    G = len(result.lambdas)
    sizes = np.zeros(G, dtype=int) if support_sizes is None else np.asarray(support_sizes)
    rows = [(float(result.lambdas[g]), float(result.delta_mean[g]),
             float(result.delta_quantiles[g, 0]), float(result.delta_quantiles[g, 1]),
             float(result.pi[g]), int(sizes[g])) for g in range(G)]
    write_table(out_path, TRADEOFF_COLUMNS, rows)


def read_tradeoff_table(path) -> dict:
    header, data = read_table(path)
    return {h: data[:, c] for c, h in enumerate(header)}


def _dot_id(name: str) -> str:
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_graph(support, response_names: Sequence[str], predictor_names: Sequence[str],
               out_path, name: str = "summary") -> None:
    """Write the selected links as an undirected DOT graph.

    ``support`` holds ``(response, predictor)`` index pairs.  Every response
    gets a node; predictors appear only if linked.
    """
    links = sorted(set(support))
    active = sorted({i for _, i in links})
    lines = [f"graph {_dot_id(name)} {{"]
    for rn in response_names:
        lines.append(f'  {_dot_id(rn)} [class="response", style="filled", '
                     f'fillcolor="gray", shape="ellipse"];')
    for i in active:
        lines.append(f'  {_dot_id(predictor_names[i])} [class="predictor", '
                     f'style="filled", fillcolor="white", shape="box"];')
    for j, i in links:
        lines.append(f"  {_dot_id(response_names[j])} -- {_dot_id(predictor_names[i])};")
    lines.append("}")
    Path(out_path).write_text("\n".join(lines) + "\n")
