"""Deterministic figure rendering from validated artifacts.

Figures have fixed sizes and carry no timestamps; the caption file embeds
the manifest hash so a figure can always be traced to its run.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import SchemaMismatch  # noqa: E402
from .artifact import RunArtifact  # noqa: E402

FIGSIZE = (6.0, 4.0)
DPI = 110

KINDS = ("conjugate-limit", "cost", "contraction", "heatmap",
         "saturation-table")

_AUTO = {
    "conjugate-limit": "conjugate-limit",
    "moment-control": "cost",
    "local-exact": "contraction",
    "simulate": "heatmap",
    "saturation-check": "saturation-table",
}


def _save(fig, out_base: Path, caption: str, artifact: RunArtifact) -> list[Path]:
    png = out_base.with_suffix(".png")
    fig.savefig(png, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    cap = out_base.with_suffix(".txt")
    cap.write_text(caption + f"\n[manifest {artifact.manifest_hash}]\n")
    return [png, cap]


def _fig():
    return plt.figure(figsize=FIGSIZE)


def render_conjugate_limit(artifact: RunArtifact, outdir: Path) -> list[Path]:
    rows = artifact.table("errors.csv")
    deltas = np.array([r[0] for r in rows])
    errors = np.array([r[1] for r in rows])
    slope = float(np.polyfit(np.log(deltas), np.log(errors), 1)[0])
    fig = _fig()
    ax = fig.add_subplot(111)
    ax.loglog(deltas, errors, "o-", color="tab:blue")
    ref = errors[0] * (deltas / deltas[0]) ** slope
    ax.loglog(deltas, ref, "--", color="gray",
              label=f"fit slope {slope:.3f}")
    ax.set_xlabel("window length")
    ax.set_ylabel("H^s error vs multiplicative limit")
    ax.legend()
    ax.set_title("conjugated-dynamics convergence")
    fig.tight_layout()
    caption = (f"Error against the multiplicative limit over the window "
               f"grid; fitted log-log slope {slope:.3f}.")
    return _save(fig, outdir / "conjugate_limit", caption, artifact)


def render_cost(artifact: RunArtifact, outdir: Path) -> list[Path]:
    rows = artifact.table("cost.csv")
    inv_t = np.array([r[1] for r in rows])
    norms = np.array([r[2] for r in rows])
    order = np.argsort(inv_t)
    fig = _fig()
    ax = fig.add_subplot(111)
    ax.semilogy(inv_t[order], norms[order], "s-", color="tab:red")
    ax.set_xlabel("1 / T")
    ax.set_ylabel("control L2 norm")
    ax.set_title("null-control cost vs inverse horizon")
    fig.tight_layout()
    caption = ("Control cost against 1/T; the exponential-of-1/T bound "
               "appears as an asymptote on the semilog axes.")
    return _save(fig, outdir / "cost_vs_inverse_horizon", caption, artifact)


def render_contraction(artifact: RunArtifact, outdir: Path) -> list[Path]:
    rows = artifact.table("iterations.csv")
    sweeps = np.array([r[0] for r in rows])
    updates = np.array([r[1] for r in rows])
    ratios = np.array([r[2] for r in rows])
    fig = _fig()
    ax = fig.add_subplot(111)
    ax.semilogy(sweeps, updates, "o-", color="tab:green", label="update norm")
    ax2 = ax.twinx()
    finite = np.isfinite(ratios)
    ax2.plot(sweeps[finite], ratios[finite], "d--", color="tab:purple",
             label="ratio")
    ax2.axhline(0.5, color="gray", lw=0.8)
    ax2.set_ylabel("contraction ratio")
    ax.set_xlabel("sweep")
    ax.set_ylabel("source update norm")
    ax.set_title("fixed-point contraction")
    fig.tight_layout()
    caption = ("Source-term update norms and empirical contraction ratios "
               "per sweep; the 0.5 guide line marks the design bound.")
    return _save(fig, outdir / "fixed_point_contraction", caption, artifact)


def render_heatmap(artifact: RunArtifact, outdir: Path) -> list[Path]:
    rows = artifact.table("trajectory.csv")
    ts = sorted({r[0] for r in rows})
    ks = sorted({int(r[1]) for r in rows})
    if len(ts) < 2:
        raise SchemaMismatch("heatmap needs at least two time samples")
    K = max(abs(k) for k in ks)
    coeff = {(r[0], int(r[1])): complex(r[2], r[3]) for r in rows}
    M = max(4 * K + 4, 64)
    x = 2 * math.pi * np.arange(M) / M
    field = np.zeros((len(ts), M))
    for i, t in enumerate(ts):
        vals = np.zeros(M, dtype=complex)
        for k in ks:
            vals += coeff[(t, k)] * np.exp(1j * k * x)
        field[i] = vals.real
    fig = _fig()
    ax = fig.add_subplot(111)
    im = ax.imshow(field.T, aspect="auto", origin="lower",
                   extent=(ts[0], ts[-1], 0.0, 2 * math.pi), cmap="viridis")
    fig.colorbar(im, ax=ax, label="u(t, x)")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title("space-time field")
    fig.tight_layout()
    caption = "Space-time heatmap reconstructed from the sampled modes."
    return _save(fig, outdir / "spacetime_heatmap", caption, artifact)


def render_saturation_table(artifact: RunArtifact, outdir: Path) -> list[Path]:
    rows = artifact.table("derivation.csv")
    fig = _fig()
    ax = fig.add_subplot(111)
    ax.axis("off")
    cells = [[f"{int(n)}", f"{int(d)}", f"{int(c)}",
              "yes" if e else "no"] for n, d, c, e in rows]
    table = ax.table(cellText=cells,
                     colLabels=["mode n", "depth", "nodes", "exact"],
                     loc="center")
    table.scale(1.0, 1.4)
    ax.set_title("saturation ladder derivations")
    fig.tight_layout()
    caption = "Witness depth and size per trigonometric mode."
    return _save(fig, outdir / "saturation_table", caption, artifact)


_RENDERERS = {
    "conjugate-limit": render_conjugate_limit,
    "cost": render_cost,
    "contraction": render_contraction,
    "heatmap": render_heatmap,
    "saturation-table": render_saturation_table,
}


def render(artifact: RunArtifact, kind: str = "auto",
           outdir: Path | None = None) -> list[Path]:
    """Render one figure kind (or the artifact's natural kind) to files."""
    outdir = Path(outdir) if outdir is not None else artifact.root
    outdir.mkdir(parents=True, exist_ok=True)
    if kind == "auto":
        kind = _AUTO.get(artifact.subcommand)
        if kind is None:
            raise SchemaMismatch(
                f"no default figure for subcommand {artifact.subcommand!r}")
    if kind not in _RENDERERS:
        raise SchemaMismatch(f"unknown figure kind {kind!r}")
    return _RENDERERS[kind](artifact, outdir)
