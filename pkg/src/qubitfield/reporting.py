"""Optional matplotlib rendering of run artifacts (opt-in from the CLI)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def phase_portrait(record, path) -> None:
    """(q0, p0) and (q1, p1) loops of a stored trajectory."""
    fig, ax = plt.subplots(figsize=(5, 5))
    q0 = [s[0].q0 for s in record.states]
    p0 = [s[0].p0 for s in record.states]
    q1 = [s[0].q1 for s in record.states]
    p1 = [s[0].p1 for s in record.states]
    ax.plot(q0, p0, lw=0.7, label="channel 0")
    ax.plot(q1, p1, lw=0.7, label="channel 1")
    ax.set_xlabel("q")
    ax.set_ylabel("p")
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def energy_split(record, path) -> None:
    """Wave/particle shares of the conserved energy against time."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    t = record.times
    ax.plot(t, record.diagnostics["wave_energy"], label="wave share")
    ax.plot(t, record.diagnostics["particle_energy"], label="particle share")
    ax.plot(t, record.diagnostics["energy"], "k--", lw=0.8, label="total")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def orbit_distance_figure(record, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(record.times, np.maximum(record.diagnostics["orbit_distance"], 1e-18))
    ax.set_xlabel("t")
    ax.set_ylabel("distance to orbit")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def root_path_figure(points, a_inf, path) -> None:
    """Continuation path of a dispersion root in the (A, B) plane."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([p.A for p in points], [p.B for p in points], "o-")
    for p in points:
        ax.annotate(f"c={p.c:g}", (p.A, p.B), fontsize=7)
    ax.plot([a_inf], [0.0], "rx", label="frozen-field limit")
    ax.set_xlabel("Re lambda^2")
    ax.set_ylabel("Im lambda^2")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def spectrum_figure(eigs, path, essential=None) -> None:
    eigs = np.asarray(eigs, dtype=complex)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(eigs.real, eigs.imag, ".", ms=4)
    if essential:
        for x in essential:
            ax.axvline(x, color="0.7", lw=0.8, ls=":")
    ax.axhline(0, color="0.85", lw=0.6)
    ax.axvline(0, color="0.85", lw=0.6)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
