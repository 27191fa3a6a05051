"""Report figures.  SVG output is byte-stable: fixed hash salt, no date."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "perco"
_META = {"Date": None, "Creator": None}


def set_stamp(text: str | None):
    """Text embedded as the SVG description of every later figure."""
    if text is None:
        _META.pop("Description", None)
    else:
        _META["Description"] = text


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def _planar(directions: np.ndarray):
    """Indices of directions lying in the plane of the first two axes."""
    if directions.shape[1] == 2:
        return np.arange(len(directions))
    return np.flatnonzero(np.all(directions[:, 2:] == 0, axis=1))


def shape_figure(est, path):
    """Estimated limit shape in the (e1, e2) plane: boundary points x / p(x)
    with radial error bars, their hull, and the unit l1 diamond."""
    from .estimators import _hull

    idx = _planar(est.directions)
    fig, ax = plt.subplots(figsize=(5, 5))
    dia = np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [1, 0]])
    ax.plot(dia[:, 0], dia[:, 1], "k--", lw=0.8, label=r"$\ell^1$ unit ball")
    if len(idx):
        x = est.directions[idx, :2].astype(float)
        p, se = est.p_hat[idx], est.stderr[idx]
        pts = x / p[:, None]
        inner = x / (p + se)[:, None]
        outer = x / np.maximum(p - se, 1e-12)[:, None]
        for a, b in zip(inner, outer):
            ax.plot([a[0], b[0]], [a[1], b[1]], color="C0", lw=1.5)
        ax.plot(pts[:, 0], pts[:, 1], "o", color="C0", ms=4, label="x / p(x)")
        if len(pts) >= 3:
            hv, _ = _hull(pts)
            poly = pts[np.append(hv, hv[0])]
            ax.plot(poly[:, 0], poly[:, 1], "-", color="C1", lw=1, label="hull")
    ax.set_aspect("equal")
    ax.axhline(0, color="0.8", lw=0.5)
    ax.axvline(0, color="0.8", lw=0.5)
    ax.set_xlabel("$e_1$")
    ax.set_ylabel("$e_2$")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def stretch_figure(est, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if len(est.ratios):
        ax.hist(est.ratios, bins=30, color="C0")
        q = np.quantile(est.ratios, 0.99)
        ax.axvline(q, color="C3", ls="--", label=f"q99 = {q:.3f}")
        ax.legend(fontsize=8)
    ax.set_xlabel(r"max $\rho(x, y) / R$ over probes")
    ax.set_ylabel("trials")
    ax.set_title(f"R = {est.R}")
    _save(fig, path)


def covariance_figure(est, d: int, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = est.distances.astype(float)
    ok = est.cov > 0
    ax.errorbar(r[ok], est.cov[ok], yerr=1.96 * est.stderr[ok], fmt="o", ms=4, capsize=2)
    if np.isfinite(est.slope) and ok.sum() >= 2:
        b = np.polyfit(np.log(r[ok]), np.log(est.cov[ok]), 1)
        ax.plot(r, np.exp(np.polyval(b, np.log(r))), "C0-", lw=1,
                label=f"fit slope {est.slope:.2f}")
        ref = est.cov[ok][0] * (r / r[ok][0]) ** (2 - d)
        ax.plot(r, ref, "k--", lw=0.8, label=f"slope {2 - d}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("distance")
    ax.set_ylabel("covariance")
    ax.legend(fontsize=8)
    _save(fig, path)


def torus_figure(est, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    Ns = [N for N in est.N_grid if len(est.ratios[N])]
    med = [est.median(N) for N in Ns]
    for N in Ns:
        ax.plot(np.full(len(est.ratios[N]), N), est.ratios[N], ".", color="0.7", ms=2)
    ax.plot(Ns, med, "o-", color="C0", label="median")
    if med:
        m = float(np.mean(med))
        ax.axhspan(0.85 * m, 1.15 * m, color="C0", alpha=0.1, label=r"$\pm$15%")
    ax.set_xlabel("N")
    ax.set_ylabel("diameter / N")
    ax.legend(fontsize=8)
    _save(fig, path)


def cluster_figure(labels: np.ndarray, path):
    """Component labels of one sample; middle slice when d > 2."""
    lab = labels
    while lab.ndim > 2:
        lab = np.take(lab, lab.shape[-1] // 2, axis=-1)
    fig, ax = plt.subplots(figsize=(5, 5))
    img = np.where(lab >= 0, (lab * 2654435761) % 97, -1).astype(float)
    img[lab < 0] = np.nan
    ax.imshow(img.T, origin="lower", cmap="tab20", interpolation="nearest")
    ax.set_xticks([])
    ax.set_yticks([])
    _save(fig, path)


def recursion_figure(report: dict, path):
    lv = report["levels"]
    k = [v["k"] for v in lv]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(k, [v["slack_a"] for v in lv], "o-", ms=3, label="condition (a)")
    ax.plot(k, [v["slack_b"] for v in lv], "s-", ms=3, label="condition (b)")
    ax.axhline(0, color="k", lw=0.6)
    ax.set_yscale("symlog")
    ax.set_xlabel("k")
    ax.set_ylabel("slack")
    ax.legend(fontsize=8)
    _save(fig, path)
