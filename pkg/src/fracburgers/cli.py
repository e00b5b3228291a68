"""Command-line entry point: experiment orchestration with reproducible output.

Each subcommand reads one flat key = value config, runs a pipeline, and emits
CSV files, rendered figures, a copy of the effective config, and a manifest
into the configured output directory.  Exit codes: 0 success, 2 configuration
error, 3 numerical blow-up, 4 failed verdict.
"""

import argparse
import os
import sys

import numpy as np

from .config import (
    RunConfig, apply_overrides, initial_state, load_config,
)
from .diagnostics import (
    CheckVerdict, check_energy_balance, besov_estimate, convergence_table,
    gronwall_envelope, ledger_from_ensemble, ledger_from_trajectory,
    polynomial_bump, weak_residual,
)
from .errors import BlowUpError, ConfigError, FracBurgersError
from .galerkin import (
    ModalState, convection_tensor, reconstruct, run_deterministic,
    solve_eigenbasis,
)
from .kernel import (
    Field, FractionalOrder, Mesh, assemble_form, dump_matrix, getoor_constant,
    rho_weight, strong_image, symbol_factor,
)
from .spaces import SpectralScale
from .stochastic import NoiseModel, simulate_paths
from . import report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_CHECK = 4

# declared second-order tolerance of the deterministic trapezoid ledger,
# calibrated so dt = 1e-4 corresponds to a 1e-4 relative residual
DET_BALANCE_REL_TOL = lambda dt: 1e4 * dt**2


def _setup(cfg: RunConfig):
    mesh = Mesh(cfg.n_cells)
    form = assemble_form(mesh, FractionalOrder(cfg.alpha))
    basis = solve_eigenbasis(form, cfg.n_modes)
    return mesh, form, basis


def _cmd_assemble(cfg, out):
    mesh = Mesh(cfg.n_cells)
    form = assemble_form(mesh, FractionalOrder(cfg.alpha))
    dump_matrix(os.path.join(out, "stiffness.txt"), form.A)
    dump_matrix(os.path.join(out, "mass.txt"), form.M)
    report.write_csv(
        os.path.join(out, "weight.csv"),
        ["x", "rho"],
        [[x, rho_weight(x, form.alpha)] for x in mesh.nodes],
    )
    report.render_spectrum_figure(
        os.path.join(out, "stiffness_first_column.png"), np.abs(form.A[:, 0])
    )
    return ["stiffness.txt", "mass.txt", "weight.csv",
            "stiffness_first_column.png"], []


def _cmd_eigs(cfg, out):
    _, form, basis = _setup(cfg)
    report.write_csv(
        os.path.join(out, "eigenvalues.csv"),
        ["k", "lambda_k"],
        [[k + 1, lam] for k, lam in enumerate(basis.lambdas)],
    )
    report.render_modes_figure(os.path.join(out, "modes.png"), basis.mesh,
                               basis.modes)
    report.render_spectrum_figure(os.path.join(out, "spectrum.png"),
                                  basis.lambdas)
    return ["eigenvalues.csv", "modes.png", "spectrum.png"], []


def _deterministic_run(cfg, basis):
    tensor = convection_tensor(basis)
    c0 = initial_state(cfg, basis)
    traj = run_deterministic(basis, tensor, c0, cfg.dt, cfg.t_final,
                             scheme=cfg.scheme)
    return tensor, traj


def _cmd_run_det(cfg, out):
    _, form, basis = _setup(cfg)
    _, traj = _deterministic_run(cfg, basis)
    report.write_trajectory_csv(os.path.join(out, "trajectory.csv"),
                                traj.times, traj.coeffs, traj.lambdas)
    report.render_energy_figure(os.path.join(out, "energy.png"),
                                traj.times, traj.h2(), traj.v2())
    ledger = ledger_from_trajectory(
        traj, DET_BALANCE_REL_TOL(cfg.dt) * max(traj.h2()[0], 1e-30)
    )
    verdict = check_energy_balance(ledger, "deterministic")
    report.render_balance_figure(os.path.join(out, "balance.png"), ledger)
    report.write_verdicts_csv(os.path.join(out, "verdicts.csv"), [verdict])
    return ["trajectory.csv", "energy.png", "balance.png", "verdicts.csv"], [verdict]


def _ensemble(cfg, basis, store_coeffs, n_checkpoints=None):
    model = cfg.noise_model()
    if model is None:
        raise ConfigError(
            "stochastic subcommand requires a noise block (noise_kind != none)"
        )
    tensor = convection_tensor(basis)
    c0 = initial_state(cfg, basis)
    ens = simulate_paths(
        basis, tensor, model, c0, cfg.dt, cfg.t_final, cfg.mc_paths, cfg.seed,
        n_checkpoints=n_checkpoints or cfg.n_checkpoints,
        store_coeffs=store_coeffs, workers=cfg.workers,
    )
    return model, ens


def _cmd_run_sde(cfg, out):
    _, form, basis = _setup(cfg)
    _, ens = _ensemble(cfg, basis, store_coeffs=True)
    path = os.path.join(out, "paths.csv")
    n = basis.n_modes
    header = (["path_id", "t"] + [f"c_{k + 1}" for k in range(n)]
              + ["energy_H", "energy_V2"])
    rows = []
    for pid in range(ens.n_paths):
        for m, t in enumerate(ens.times):
            c = ens.coeffs[pid, m]
            rows.append([pid, t, *c, float(c @ c),
                         float(np.sum(basis.lambdas * c**2))])
    report.write_csv(path, header, rows)
    report.render_moments_figure(os.path.join(out, "paths_moments.png"), ens)
    return ["paths.csv", "paths_moments.png"], []


def _gronwall_verdicts(cfg, model, ens, c0):
    h2_0 = float(c0 @ c0)
    env = gronwall_envelope(h2_0, model, cfg.t_final)
    mean_h2 = ens.h2.mean(axis=0)
    se_h2 = ens.h2.std(axis=0, ddof=1) / np.sqrt(ens.n_paths)
    sup_ok = np.all(mean_h2 - 3.0 * se_h2 <= env)
    v2 = 2.0 * ens.v2_int[:, -1]
    m_v2, se_v2 = v2.mean(), v2.std(ddof=1) / np.sqrt(ens.n_paths)
    # the same envelope majorizes E||u||^2 + 2E int ||u||_V^2, hence the
    # integral term alone
    return [
        CheckVerdict("gronwall_sup_h2", float(mean_h2.max()), env, bool(sup_ok)),
        CheckVerdict("gronwall_v2_integral", float(m_v2), env,
                     bool(m_v2 - 3.0 * se_v2 <= env)),
    ]


def _cmd_mc_moments(cfg, out):
    _, form, basis = _setup(cfg)
    model, ens = _ensemble(cfg, basis, store_coeffs=False)
    report.write_moments_csv(os.path.join(out, "moments.csv"), ens)
    ledger = ledger_from_ensemble(ens)
    verdicts = [check_energy_balance(ledger, "stochastic-mean")]
    verdicts += _gronwall_verdicts(cfg, model, ens, initial_state(cfg, basis))
    report.write_verdicts_csv(os.path.join(out, "verdicts.csv"), verdicts)
    report.render_moments_figure(os.path.join(out, "moments.png"), ens)
    report.render_balance_figure(os.path.join(out, "balance.png"), ledger)
    return ["moments.csv", "verdicts.csv", "moments.png", "balance.png"], verdicts


def _cmd_besov(cfg, out):
    _, form, basis = _setup(cfg)
    model, ens = _ensemble(cfg, basis, store_coeffs=True)
    scale = SpectralScale(basis)
    est = besov_estimate(ens.coeffs, ens.times, scale, cfg.gamma,
                         cfg.effective_delta)
    tot = est.total()
    p = ens.n_paths
    report.write_csv(
        os.path.join(out, "besov.csv"),
        ["gamma", "delta", "mean_total", "se_total",
         "mean_seminorm_sq", "se_seminorm_sq", "mean_l2_part", "se_l2_part"],
        [[cfg.gamma, cfg.effective_delta,
          tot.mean(), tot.std(ddof=1) / np.sqrt(p),
          est.seminorm_sq.mean(), est.seminorm_sq.std(ddof=1) / np.sqrt(p),
          est.l2_part.mean(), est.l2_part.std(ddof=1) / np.sqrt(p)]],
    )
    report.render_besov_figure(os.path.join(out, "besov.png"), tot,
                               cfg.gamma, cfg.effective_delta)
    return ["besov.csv", "besov.png"], []


def _cmd_weak_residual(cfg, out):
    _, form, basis = _setup(cfg)
    _, traj = _deterministic_run(cfg, basis)
    rep = weak_residual(traj, form,
                        lambda c: reconstruct(basis, ModalState(c)),
                        polynomial_bump())
    report.write_csv(
        os.path.join(out, "weak_residual.csv"),
        ["t", "residual"],
        np.column_stack([rep.times, rep.residual]),
    )
    report.render_residual_figure(os.path.join(out, "weak_residual.png"), rep)
    return ["weak_residual.csv", "weak_residual.png"], []


def _cmd_convergence(cfg, out):
    _, form, _ = _setup(cfg)
    ladder = sorted({max(2, cfg.n_modes // 8), max(2, cfg.n_modes // 4),
                     max(2, cfg.n_modes // 2), cfg.n_modes})
    trajs = []
    for n in ladder:
        basis = solve_eigenbasis(form, n)
        _, traj = _deterministic_run(cfg, basis)
        trajs.append(traj)
    dist = convergence_table(trajs)
    rows = [[ladder[i], ladder[i + 1], dist[i]] for i in range(len(dist))]
    report.write_csv(os.path.join(out, "convergence.csv"),
                     ["n_coarse", "n_fine", "l2t_distance"], rows)
    labels = [f"{a}->{b}" for a, b, _ in rows]
    report.render_convergence_figure(os.path.join(out, "convergence.png"),
                                     labels, dist)
    monotone = bool(np.all(np.diff(dist) < 0.0)) if dist.size > 1 else True
    verdicts = [CheckVerdict("convergence_monotone",
                             float(dist[-1] if dist.size else 0.0),
                             float(dist[0] if dist.size else 0.0), monotone)]
    report.write_verdicts_csv(os.path.join(out, "verdicts.csv"), verdicts)
    return ["convergence.csv", "convergence.png", "verdicts.csv"], verdicts


def _quick_operator_verdict(cfg):
    """Constant-image oracle on two meshes; error must shrink by >= 1.3x."""
    alpha = FractionalOrder(cfg.alpha)
    errs = []
    for n in (cfg.n_cells, 2 * cfg.n_cells):
        mesh = Mesh(n)
        form = assemble_form(mesh, alpha)
        u = Field(mesh, (1.0 - mesh.nodes**2) ** (cfg.alpha / 2.0))
        w = strong_image(form, u)
        inner = np.abs(mesh.nodes) <= 1.0 / 3.0
        errs.append(float(np.abs(
            symbol_factor(alpha) * w.values[inner] - getoor_constant(alpha)
        ).max()))
    ratio = errs[0] / errs[1]
    return CheckVerdict("operator_constant_image", ratio, 1.3, bool(ratio >= 1.3))


def _cancellation_verdict(cfg, basis):
    tensor = convection_tensor(basis)
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(20):
        c = rng.standard_normal(basis.n_modes)
        tc = np.einsum("kij,k,i,j->", tensor.T, c, c, c)
        scl = np.abs(np.einsum("kij,k,i,j->kij", np.abs(tensor.T),
                               np.abs(c), np.abs(c), np.abs(c))).sum()
        worst = max(worst, abs(tc) / scl)
    return CheckVerdict("convection_cancellation", worst, 1e-12,
                        bool(worst <= 1e-12))


def _cmd_check_all(cfg, out):
    from scipy.integrate import quad

    mesh, form, basis = _setup(cfg)
    verdicts = []

    # exterior-weight exactness against adaptive quadrature
    worst = 0.0
    for x in np.linspace(-0.9, 0.9, 7):
        left, _ = quad(lambda y: 2.0 * abs(x - y) ** (-1.0 - cfg.alpha),
                       -np.inf, -1.0)
        right, _ = quad(lambda y: 2.0 * abs(x - y) ** (-1.0 - cfg.alpha),
                        1.0, np.inf)
        exact = rho_weight(x, form.alpha)
        worst = max(worst, abs(left + right - exact) / exact)
    verdicts.append(CheckVerdict("weight_quadrature", worst, 1e-10,
                                 bool(worst <= 1e-10)))

    verdicts.append(_quick_operator_verdict(cfg))
    verdicts.append(_cancellation_verdict(cfg, basis))

    _, traj = _deterministic_run(cfg, basis)
    ledger = ledger_from_trajectory(
        traj, DET_BALANCE_REL_TOL(cfg.dt) * max(traj.h2()[0], 1e-30)
    )
    verdicts.append(check_energy_balance(ledger, "deterministic"))

    if cfg.noise_kind != "none":
        model, ens = _ensemble(cfg, basis, store_coeffs=False)
        verdicts.append(check_energy_balance(ledger_from_ensemble(ens),
                                             "stochastic-mean"))
        verdicts += _gronwall_verdicts(cfg, model, ens, initial_state(cfg, basis))

    report.write_verdicts_csv(os.path.join(out, "verdicts.csv"), verdicts)
    return ["verdicts.csv"], verdicts


_COMMANDS = {
    "assemble": _cmd_assemble,
    "eigs": _cmd_eigs,
    "run-det": _cmd_run_det,
    "run-sde": _cmd_run_sde,
    "mc-moments": _cmd_mc_moments,
    "besov": _cmd_besov,
    "weak-residual": _cmd_weak_residual,
    "convergence": _cmd_convergence,
    "check-all": _cmd_check_all,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fracburgers",
        description="Galerkin solver and verification suite for the nonlocal "
                    "Burgers equation on (-1, 1).",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("-c", "--config", help="path to a key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a single config key (repeatable)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = apply_overrides(cfg, args.set)
        extras = {}
        if "FRACBURGERS_SEED" in os.environ:
            cfg = apply_overrides(cfg, [f"seed={os.environ['FRACBURGERS_SEED']}"])
            extras["seed_source"] = "env:FRACBURGERS_SEED"
        if "FRACBURGERS_WORKERS" in os.environ:
            cfg = apply_overrides(
                cfg, [f"workers={os.environ['FRACBURGERS_WORKERS']}"]
            )
            extras["workers_source"] = "env:FRACBURGERS_WORKERS"

        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        files, verdicts = _COMMANDS[args.command](cfg, out)
        files.append(os.path.basename(report.write_config_copy(out, cfg)))
        report.write_manifest(out, cfg, files + ["manifest.txt"], extras)

        for v in verdicts:
            print(f"{v.check_id}: {v.verdict} "
                  f"(quantity={v.quantity:.6e}, threshold={v.threshold:.6e})")
        if any(not v.passed for v in verdicts):
            return EXIT_CHECK
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except FracBurgersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
