"""Static report figures rendered next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_run_summary(rows, path):
    """Energy budget and monitors along one run."""
    t = [r.t for r in rows]
    fig, (ax_e, ax_m) = plt.subplots(1, 2, figsize=(10.5, 4.0))
    ax_e.plot(t, [r.e_total for r in rows], label="total", lw=2, color="black")
    ax_e.plot(t, [r.e_kin_u for r in rows], label="kinetic u")
    ax_e.plot(t, [r.e_kin_omega for r in rows], label="kinetic omega")
    ax_e.plot(t, [r.e_grad for r in rows], label="interface")
    ax_e.plot(t, [r.e_pot for r in rows], label="potential")
    ax_e.set_xlabel("t")
    ax_e.set_ylabel("energy")
    ax_e.legend(fontsize=8)
    ax_e.set_title("energy budget")

    ax_m.plot(t[1:], [abs(r.energy_residual) for r in rows[1:]],
              label="|energy residual|")
    ax_m.plot(t, [r.d_total for r in rows], label="dissipation")
    ax_m.set_yscale("log")
    ax_m.set_xlabel("t")
    ax_m.legend(fontsize=8)
    ax_m.set_title("energy law monitors")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_fields(state, path):
    """Phase field, micro-rotation and speed of the final state."""
    grid = state.grid
    extent = (0, grid.box_length, 0, grid.box_length)
    speed = np.hypot(state.u.x.values, state.u.y.values)
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 3.8))
    panels = (
        (state.phi.values, "phi", "RdBu_r"),
        (state.omega.values, "omega", "PuOr"),
        (speed, "|u|", "viridis"),
    )
    for ax, (vals, label, cmap) in zip(axes, panels):
        im = ax.imshow(vals.T, origin="lower", extent=extent, cmap=cmap)
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title(label)
    fig.suptitle(f"t = {state.time:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_rate_fit(values, errors, slope, r2, xlabel, path):
    """Log-log sweep errors with the fitted power law."""
    v = np.asarray(values)
    e = np.asarray(errors)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.loglog(v, e, "o", label="measured")
    if len(v) >= 2 and np.isfinite(slope):
        anchor = e[0] / v[0] ** slope
        ax.loglog(v, anchor * v**slope, "--",
                  label=f"slope {slope:.3f} (R$^2$={r2:.4f})")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("combined squared error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_residual_vs_dt(dts, residuals, path):
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.loglog(dts, residuals, "o-", label="max |residual|")
    d = np.asarray(dts, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if r[0] > 0:
        ax.loglog(d, r[0] * d / d[0], "--", label="first order")
    ax.set_xlabel("dt")
    ax.set_ylabel("max energy residual")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_convergence(ns, errors, reference_n, path):
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.semilogy(ns, errors, "o-")
    ax.set_xlabel("grid size n")
    ax.set_ylabel(f"final-state gap to n={reference_n}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_mollifier(phi_before, phi_after, path):
    grid = phi_before.grid
    extent = (0, grid.box_length, 0, grid.box_length)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8))
    for ax, (f, label) in zip(
        axes, ((phi_before, "seed profile"), (phi_after, "mollified"))
    ):
        im = ax.imshow(f.values.T, origin="lower", extent=extent, cmap="RdBu_r")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
