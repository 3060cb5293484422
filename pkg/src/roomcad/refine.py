"""Render-and-match refinement of object poses.

The objects' 7N parameter vector (position, scale, yaw per object) is
adjusted so that the feature stack of the rendered scene matches the feature
stack of the input photograph under the mean per-layer cosine distance.
Windows and the room stay fixed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .features import extract, layer_cosine_costs
from .optimize import minimize
from .render import rasterize, render_room
from .scene import Scene

SCALE_MIN, SCALE_MAX = 0.05, 5.0
POSITION_MARGIN = 0.5
RHO_BEGIN, RHO_END = 0.2, 1e-3
DEFAULT_BUDGET = 250


@dataclass
class TraceRow:
    evaluation: int
    cost: float
    best: float
    layers: tuple


@dataclass
class RefineResult:
    scene: Scene
    trace: list = field(default_factory=list)
    initial_cost: float = math.nan
    final_cost: float = math.nan
    status: str = ""

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.trace])

    @property
    def best_costs(self) -> np.ndarray:
        return np.array([r.best for r in self.trace])

    @property
    def layer_costs(self) -> np.ndarray:
        """(evaluations, layers) array of per-layer cosine distances."""
        return np.array([r.layers for r in self.trace])


def variable_scales(scene: Scene) -> np.ndarray:
    """Per-coordinate scale so one normalized unit is comparable across
    positions (room diagonal), sizes (1 m) and yaw (pi)."""
    per = np.r_[np.full(3, scene.room.diagonal), np.ones(3), math.pi]
    return np.tile(per, len(scene.objects))


def bound_constraints(scene: Scene, x0, scales) -> list:
    """Constraints (>= 0 when satisfied) in normalized coordinates around x0."""
    lo = scene.room.lo - POSITION_MARGIN
    hi = scene.room.hi + POSITION_MARGIN
    cons = []

    def lower(i, bound):
        return lambda u: x0[i] + scales[i] * u[i] - bound

    def upper(i, bound):
        return lambda u: bound - (x0[i] + scales[i] * u[i])

    for k in range(len(scene.objects)):
        base = 7 * k
        for a in range(3):
            cons += [lower(base + a, lo[a]), upper(base + a, hi[a])]
        for a in range(3):
            cons += [lower(base + 3 + a, SCALE_MIN), upper(base + 3 + a, SCALE_MAX)]
    return cons


def refine_scene(
    scene: Scene,
    camera,
    input_image,
    extractor=None,
    budget: int = DEFAULT_BUDGET,
    models=None,
    method: str = "cobyla",
    rhobeg: float = RHO_BEGIN,
    rhoend: float = RHO_END,
) -> RefineResult:
    """Minimize the feature-space cosine distance between the rendered scene
    and ``input_image`` over all object poses.

    ``extractor`` maps an RGB image to a FeatureStack (default
    ``features.extract``).  The input stack and the room-only render are
    computed once.  Returns the scene at the best evaluated parameters and
    the per-evaluation trace.
    """
    if not scene.objects:
        raise ValueError("refine_scene needs at least one object")
    extractor = extractor or extract
    target = extractor(np.asarray(input_image))
    base = render_room(scene, camera)
    x0 = scene.param_vector()
    # keep yaw unwrapped around its start so the search is continuous
    scales = variable_scales(scene)
    trace = []
    best = [math.inf]

    def objective(u):
        x = x0 + scales * u
        img = rasterize(scene.with_param_vector(x), camera, models, base=base).rgb
        layers = layer_cosine_costs(extractor(img), target)
        cost = float(layers.mean())
        best[0] = min(best[0], cost)
        trace.append(TraceRow(len(trace) + 1, cost, best[0], tuple(float(v) for v in layers)))
        return cost

    cons = bound_constraints(scene, x0, scales)
    res = minimize(objective, np.zeros_like(x0), cons, budget=budget, rhobeg=rhobeg, rhoend=rhoend, method=method)
    out = scene.with_param_vector(x0 + scales * res.x)
    return RefineResult(out, trace, trace[0].cost, res.fun, res.status)


def write_trace_csv(trace, path) -> None:
    """Write the convergence trace as CSV: evaluation, cost, best, layer_0..."""
    n_layers = len(trace[0].layers) if trace else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["evaluation", "cost", "best"] + [f"layer_{i}" for i in range(n_layers)])
        for r in trace:
            w.writerow([r.evaluation, repr(r.cost), repr(r.best)] + [repr(v) for v in r.layers])


def read_trace_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            rows.append(TraceRow(int(rec[0]), float(rec[1]), float(rec[2]), tuple(float(v) for v in rec[3:])))
    return rows
