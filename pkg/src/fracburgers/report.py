"""CSV writers, run manifests, and figure rendering for the CLI pipelines.

All numeric CSV fields are written with 17 significant digits so that a rerun
with the same configuration and seed is byte-identical, and every report
directory gets a manifest naming the emitted files and the effective seed.
Figures are rendered headlessly next to the CSV they visualize.
"""

import datetime
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .config import RunConfig, config_hash, serialize_config


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.17e}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_trajectory_csv(path, times, coeffs, lambdas, path_id=None) -> None:
    """Schema: [path_id,] t, c_1..c_n, energy_H, energy_V2 (squared norms)."""
    n = coeffs.shape[1]
    header = ["t"] + [f"c_{k + 1}" for k in range(n)] + ["energy_H", "energy_V2"]
    if path_id is not None:
        header = ["path_id"] + header
    rows = []
    for m, t in enumerate(times):
        c = coeffs[m]
        row = [t, *c, float(c @ c), float(np.sum(lambdas * c**2))]
        if path_id is not None:
            row = [path_id] + row
        rows.append(row)
    write_csv(path, header, rows)


def append_trajectory_csv(path, times, coeffs, lambdas, path_id) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        for m, t in enumerate(times):
            c = coeffs[m]
            row = [path_id, t, *c, float(c @ c), float(np.sum(lambdas * c**2))]
            fh.write(",".join(fmt(v) for v in row) + "\n")


MOMENTS_HEADER = [
    "t", "mean_H2", "se_H2", "mean_V2_int", "se_V2_int",
    "mean_sup_H4", "se_sup_H4", "hs_int", "se_hs_int",
]


def write_moments_csv(path, ensemble) -> None:
    write_csv(path, MOMENTS_HEADER, ensemble.moment_rows())


def write_verdicts_csv(path, verdicts) -> None:
    write_csv(
        path,
        ["check_id", "quantity", "threshold", "verdict"],
        [[v.check_id, v.quantity, v.threshold, v.verdict] for v in verdicts],
    )


def write_manifest(out_dir, cfg: RunConfig, files, extras=None) -> str:
    """Plain key: value manifest naming every emitted file."""
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"config_hash: {config_hash(cfg)}\n")
        fh.write(f"code_version: {__version__}\n")
        fh.write(f"timestamp: {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
        fh.write(f"seed: {cfg.seed}\n")
        fh.write(f"workers: {cfg.workers}\n")
        for key, val in (extras or {}).items():
            fh.write(f"{key}: {val}\n")
        for name in files:
            fh.write(f"file: {name}\n")
    return path


def write_config_copy(out_dir, cfg: RunConfig) -> str:
    path = os.path.join(out_dir, "config_used.cfg")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg))
    return path


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_energy_figure(path, times, h2, v2) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(times, np.maximum(h2, 1e-300), label=r"$\|u\|_H^2$")
    ax.semilogy(times, np.maximum(v2, 1e-300), label=r"$\|u\|_V^2$")
    ax.set_xlabel("t")
    ax.set_ylabel("squared norm")
    ax.legend()
    ax.set_title("energy decay")
    _save(fig, path)


def render_spectrum_figure(path, lambdas) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    k = np.arange(1, lambdas.size + 1)
    ax.loglog(k, lambdas, "o-", ms=3)
    ax.set_xlabel("mode index k")
    ax.set_ylabel(r"$\lambda_k$")
    ax.set_title("discrete spectrum")
    _save(fig, path)


def render_modes_figure(path, mesh, modes, count=4) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for k in range(min(count, modes.shape[1])):
        ax.plot(mesh.nodes, modes[:, k], label=f"mode {k + 1}")
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    ax.set_title("leading eigenmodes")
    _save(fig, path)


def render_moments_figure(path, ensemble) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    t = ensemble.times
    m = ensemble.h2.mean(axis=0)
    se = ensemble.h2.std(axis=0, ddof=1) / np.sqrt(ensemble.n_paths)
    ax.plot(t, m, label=r"$E\|u\|_H^2$")
    ax.fill_between(t, m - 3 * se, m + 3 * se, alpha=0.3, label="3 SE band")
    ax.plot(t, ensemble.hs_int.mean(axis=0), "--", label="HS input integral")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title(f"Monte Carlo moments ({ensemble.n_paths} paths)")
    _save(fig, path)


def render_balance_figure(path, ledger) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ledger.times, ledger.residual(), label="balance residual")
    ax.plot(ledger.times, ledger.band, "k--", lw=0.8, label="band")
    ax.plot(ledger.times, -ledger.band, "k--", lw=0.8)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("energy-identity residual")
    _save(fig, path)


def render_residual_figure(path, report) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(report.times, np.abs(report.residual))
    ax.set_xlabel("t")
    ax.set_ylabel("|weak residual|")
    ax.set_title(f"weak-form residual, test function {report.label}")
    _save(fig, path)


def render_convergence_figure(path, labels, distances) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(range(len(distances)), distances, "o-")
    ax.set_xticks(range(len(distances)), labels, fontsize=8)
    ax.set_ylabel(r"$L^2(0,T;H)$ distance")
    ax.set_title("self-convergence ladder")
    _save(fig, path)


def render_besov_figure(path, totals, gamma, delta) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(totals, bins=40)
    ax.set_xlabel("per-path Besov-Slobodetski norm^2")
    ax.set_ylabel("paths")
    ax.set_title(f"time-regularity estimator (gamma={gamma}, delta={delta})")
    _save(fig, path)
