"""Render the battery-cycle figures from the simulation CSV artifacts.

Pure consumer of the fixed CSV schemas written by the simulation CLI:
`sweep.csv` (per-cell energetic ledger) and `trace.csv` (battery CM
along a charging stroke).  No physics is recomputed here; the only
arithmetic is the display of the published switch-off shape in the
protocol figure.  Rendering is a pure function of the CSV content:
fixed styles, fixed canvas, no timestamps, so identical inputs yield
identical image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

SWEEP_COLUMNS = [
    "scenario", "t_d", "theta", "W_d", "W_c", "ergotropy", "W_diss", "Q",
    "Sigma", "eta", "I_td", "dE_B_disc", "dE_B_charge", "first_law_residual",
    "second_law_value", "interaction_identity_residual", "flags",
]
TRACE_COLUMNS = ["t", "sigma_S_11", "sigma_S_22", "sigma_S_12", "mf_q2_ref", "mf_p2_ref"]

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4")

_STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
}

TRI_COLOR = "#1f77b4"
BI_COLOR = "#2ca02c"
HEAT_COLOR = "#d62728"


class SchemaError(ValueError):
    """A CSV file does not carry the documented column set."""


@dataclass(frozen=True)
class FigureJob:
    figure_id: str
    sweep_csv: Path | None = None
    trace_csv: Path | None = None
    output: Path = Path("figure.png")
    protocol_exponent: int = 11

    def __post_init__(self) -> None:
        if self.figure_id not in FIGURE_IDS:
            raise ValueError(f"unknown figure id {self.figure_id!r}; expected one of {FIGURE_IDS}")


def _read_csv(path: Path, expected: list[str]) -> dict[str, list[str]]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != expected:
            raise SchemaError(
                f"{path} header {header} does not match the documented schema {expected}"
            )
        columns: dict[str, list[str]] = {name: [] for name in expected}
        for row in reader:
            if len(row) != len(expected):
                raise SchemaError(f"{path}: row width {len(row)} != {len(expected)}")
            for name, value in zip(expected, row):
                columns[name].append(value)
    if not columns[expected[0]]:
        raise SchemaError(f"{path} carries no data rows")
    return columns


def load_sweep(path: Path) -> dict[str, np.ndarray]:
    raw = _read_csv(path, SWEEP_COLUMNS)
    out: dict[str, np.ndarray] = {
        "scenario": np.array(raw["scenario"]),
        "flags": np.array(raw["flags"]),
    }
    for name in SWEEP_COLUMNS:
        if name in ("scenario", "flags"):
            continue
        out[name] = np.array([float(v) for v in raw[name]])
    return out


def load_trace(path: Path) -> dict[str, np.ndarray]:
    raw = _read_csv(path, TRACE_COLUMNS)
    return {name: np.array([float(v) for v in raw[name]]) for name in TRACE_COLUMNS}


def _tri_curves(sweep: dict[str, np.ndarray], field: str) -> tuple[np.ndarray, np.ndarray]:
    mask = sweep["scenario"] == "tripartite"
    t_d = sweep["t_d"][mask]
    values = sweep[field][mask]
    order = np.argsort(t_d)
    return t_d[order], values[order]


def _bi_envelope(sweep: dict[str, np.ndarray], field: str):
    """Per-t_d (min, max) envelope of a bipartite column over theta."""
    mask = sweep["scenario"] == "bipartite"
    t_d = sweep["t_d"][mask]
    values = sweep[field][mask]
    grid = np.unique(t_d)
    lo = np.array([np.nanmin(values[t_d == td]) for td in grid])
    hi = np.array([np.nanmax(values[t_d == td]) for td in grid])
    return grid, lo, hi


def _new_figure(width: float, height: float) -> Figure:
    fig = Figure(figsize=(width, height), dpi=_STYLE["figure.dpi"])
    FigureCanvasAgg(fig)
    return fig


def _style_axis(ax) -> None:
    ax.grid(True, alpha=_STYLE["grid.alpha"])
    ax.tick_params(labelsize=_STYLE["font.size"] - 1)


def render(job: FigureJob) -> Figure:
    """Render one figure and write it to job.output deterministically."""
    if job.figure_id == "fig1":
        fig = _render_protocols(job)
    elif job.figure_id == "fig2":
        fig = _render_works(job)
    elif job.figure_id == "fig3":
        fig = _render_merit(job)
    else:
        fig = _render_trace(job)
    job.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output, format="png", metadata={"Software": "gbfigures"})
    return fig


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise ValueError(f"this figure needs {what}")
    return path


def _render_protocols(job: FigureJob) -> Figure:
    sweep = load_sweep(_require(job.sweep_csv, "a sweep.csv input"))
    td_values = sorted(set(np.round(sweep["t_d"], 12)))
    fig = _new_figure(4.2, 3.0)
    ax = fig.add_subplot(111)
    shown = [td for td in td_values if td > 0.0][:6]
    for td in shown:
        t = np.linspace(0.0, td, 200)
        ax.plot(t, (1.0 - t / td) ** job.protocol_exponent, label=f"$t_d$ = {td:g}")
    if 0.0 in td_values:
        ax.plot([0.0, 0.0], [1.0, 0.0], color="black", label="$t_d$ = 0")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\lambda(t)$")
    ax.legend(fontsize=_STYLE["font.size"] - 2)
    _style_axis(ax)
    fig.tight_layout()
    return fig


def _render_works(job: FigureJob) -> Figure:
    sweep = load_sweep(_require(job.sweep_csv, "a sweep.csv input"))
    fig = _new_figure(7.4, 2.9)
    ax_wd = fig.add_subplot(121)
    ax_erg = fig.add_subplot(122)
    t_d, w_d = _tri_curves(sweep, "W_d")
    ax_wd.plot(t_d, w_d, color=TRI_COLOR, marker=".", label="disconnect work")
    ax_wd.axhline(0.0, color="black", linewidth=0.6)
    ax_wd.set_xlabel("$t_d$")
    ax_wd.set_ylabel("$W_d$")
    ax_wd.set_title("(a)", loc="left")
    t_d, erg = _tri_curves(sweep, "ergotropy")
    ax_erg.plot(t_d, erg, color=TRI_COLOR, marker=".", label="ergotropy")
    ax_erg.set_xlabel("$t_d$")
    ax_erg.set_ylabel("extractable energy")
    ax_erg.set_title("(b)", loc="left")
    for ax in (ax_wd, ax_erg):
        ax.legend(fontsize=_STYLE["font.size"] - 2)
        _style_axis(ax)
    fig.tight_layout()
    return fig


def _render_merit(job: FigureJob) -> Figure:
    sweep = load_sweep(_require(job.sweep_csv, "a sweep.csv input"))
    fig = _new_figure(10.5, 3.0)
    ax_info = fig.add_subplot(131)
    ax_first = fig.add_subplot(132)
    ax_eta = fig.add_subplot(133)

    t_d, info = _tri_curves(sweep, "I_td")
    ax_info.plot(t_d, info, color=TRI_COLOR, marker=".")
    ax_info.set_xlabel("$t_d$")
    ax_info.set_ylabel("mutual information")
    ax_info.set_title("(a)", loc="left")

    t_d, w_diss = _tri_curves(sweep, "W_diss")
    _, heat = _tri_curves(sweep, "Q")
    ax_first.plot(t_d, w_diss, color=TRI_COLOR, label=r"$W_{diss}$ (tripartite)")
    ax_first.plot(t_d, -heat, color=HEAT_COLOR, linestyle="--", label="$-Q$ (tripartite)")
    grid, lo, hi = _bi_envelope(sweep, "W_diss")
    if len(grid):
        ax_first.fill_between(grid, lo, hi, color="gray", alpha=0.45,
                              hatch="//", label=r"$W_{diss}$ over $\theta$")
    ax_first.set_xlabel("$t_d$")
    ax_first.set_ylabel("energy")
    ax_first.set_title("(b)", loc="left")
    ax_first.legend(fontsize=_STYLE["font.size"] - 2)

    t_d, eta = _tri_curves(sweep, "eta")
    ax_eta.plot(t_d, eta, color=TRI_COLOR, marker=".", label="tripartite")
    grid, lo, hi = _bi_envelope(sweep, "eta")
    if len(grid):
        ax_eta.fill_between(grid, lo, hi, color=BI_COLOR, alpha=0.4,
                            hatch="//", label=r"bipartite over $\theta$")
    ax_eta.set_xlabel("$t_d$")
    ax_eta.set_ylabel(r"$\eta$")
    ax_eta.set_title("(c)", loc="left")
    ax_eta.legend(fontsize=_STYLE["font.size"] - 2)

    for ax in (ax_info, ax_first, ax_eta):
        _style_axis(ax)
    fig.tight_layout()
    return fig


def _render_trace(job: FigureJob) -> Figure:
    trace = load_trace(_require(job.trace_csv, "a trace.csv input"))
    fig = _new_figure(7.4, 2.9)
    ax_q = fig.add_subplot(121)
    ax_p = fig.add_subplot(122)
    # CM entries are anticommutator moments: the stationary asymptotes sit
    # at twice the mean-force second moments from the oracle columns
    ax_q.plot(trace["t"], trace["sigma_S_11"], color=TRI_COLOR, label=r"$\sigma_{11}(t)$")
    ax_q.axhline(2.0 * trace["mf_q2_ref"][0], color="black", linestyle="--",
                 linewidth=1.0, label="stationary value")
    ax_q.set_xlabel("t")
    ax_q.set_ylabel("position variance entry")
    ax_p.plot(trace["t"], trace["sigma_S_22"], color=HEAT_COLOR, label=r"$\sigma_{22}(t)$")
    ax_p.axhline(2.0 * trace["mf_p2_ref"][0], color="black", linestyle="--",
                 linewidth=1.0, label="stationary value")
    ax_p.set_xlabel("t")
    ax_p.set_ylabel("momentum variance entry")
    for ax in (ax_q, ax_p):
        ax.legend(fontsize=_STYLE["font.size"] - 2)
        _style_axis(ax)
    fig.tight_layout()
    return fig
