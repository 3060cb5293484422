"""Perturb a table and a chair, refine them against the rendered photograph
and plot the cost trace per pyramid level.

    python3 demos/refine_convergence.py [out.png] [cobyla|simplex]
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from roomcad.cadlib import load_library
from roomcad.refine import refine_scene
from roomcad.render import rasterize
from roomcad.synthetic import perturb, pose_errors, refinement_scene


def main(out="refine_convergence.png", method="cobyla"):
    models = {k: m.triangles for k, m in load_library().items()}
    truth, cam = refinement_scene()
    photo = rasterize(truth, cam, models).rgb
    start = perturb(truth, np.random.default_rng(707))
    res = refine_scene(start, cam, photo, budget=250, models=models, method=method)

    for (d0, a0), (d1, a1) in zip(pose_errors(start, truth), pose_errors(res.scene, truth)):
        print(f"position error {d0:.3f} -> {d1:.3f} m, yaw error {a0:.1f} -> {a1:.1f} deg")
    print(f"{len(res.trace)} evaluations, cost {res.initial_cost:.4f} -> {res.final_cost:.4f}")

    L = np.minimum.accumulate(res.layer_costs, axis=0)
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    ax[0].plot(res.costs, lw=0.7, alpha=0.5, label="evaluated")
    ax[0].plot(res.best_costs, lw=1.5, label="best so far")
    ax[0].set_xlabel("evaluation")
    ax[0].set_ylabel("mean cosine distance")
    ax[0].legend()
    for k in range(L.shape[1]):
        ax[1].plot(L[:, k] / max(L[0, k], 1e-12), label=f"level {k}")
    ax[1].set_xlabel("evaluation")
    ax[1].set_ylabel("running minimum / start")
    ax[1].legend()
    fig.tight_layout()
    fig.savefig(out, dpi=100)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
