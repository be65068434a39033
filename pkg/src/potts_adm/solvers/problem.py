from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core_types import Labeling, PairwiseGraph
from ..energy import PROHIBITIVE, UnaryTable
from ..errors import InvalidArgument

ENERGY_RTOL = 1e-9


@dataclass(frozen=True)
class DiscreteProblem:
    """Unary + Potts energy over labelings of a ``height x width`` raster.

    The Potts weights in ``graph`` are used as-is (they already include the
    regularizer strength).
    """

    unary: UnaryTable
    graph: PairwiseGraph
    num_labels: int
    height: int = 0
    width: int = 0

    def __post_init__(self):
        n = self.unary.num_pixels
        if self.graph.num_pixels != n:
            raise InvalidArgument("unary table and graph disagree on pixel count")
        if self.unary.num_labels != self.num_labels:
            raise InvalidArgument("unary table width differs from num_labels")
        if self.height == 0 and self.width == 0:
            object.__setattr__(self, "height", 1)
            object.__setattr__(self, "width", n)
        if self.height * self.width != n:
            raise InvalidArgument("height * width must equal the pixel count")
        if np.any(self.graph.weights < 0):
            raise InvalidArgument("Potts weights must be nonnegative")
        if np.any(self.unary.costs >= PROHIBITIVE):
            bound = self.unary.max_feasible() + float(self.graph.weights.sum())
            if bound >= PROHIBITIVE:
                raise InvalidArgument(
                    f"feasible energies (up to {bound:g}) reach the prohibitive cost")

    @property
    def num_pixels(self) -> int:
        return self.unary.num_pixels

    def energy(self, labels) -> float:
        """Unary plus Potts energy of a flat or 2D labeling."""
        if isinstance(labels, Labeling):
            labels = labels.flat()
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.size != self.num_pixels:
            raise InvalidArgument("labeling size differs from the problem")
        u = float(self.unary.costs[np.arange(labels.size), labels].sum())
        e = self.graph.edges
        cut = labels[e[:, 0]] != labels[e[:, 1]]
        return u + float(self.graph.weights[cut].sum())

    def labeling(self, flat) -> Labeling:
        return Labeling.from_flat(flat, self.height, self.width, self.num_labels)

    def check_init(self, init) -> np.ndarray:
        if isinstance(init, Labeling):
            if init.num_labels != self.num_labels:
                raise InvalidArgument("init labeling has a different label count")
            init = init.flat()
        init = np.asarray(init, dtype=np.int64).reshape(-1)
        if init.size != self.num_pixels:
            raise InvalidArgument("init labeling size differs from the problem")
        if init.min() < 0 or init.max() >= self.num_labels:
            raise InvalidArgument("init labels out of range")
        return init.copy()


@dataclass(frozen=True)
class SolveReport:
    labeling: Labeling
    final_energy: float
    energy_trace: tuple = field(default=())
    sweeps: int = 0
    converged: bool = True


def make_report(problem: DiscreteProblem, labels, trace, sweeps, converged) -> SolveReport:
    """Build a report, re-evaluating the energy independently of the solver."""
    energy = problem.energy(labels)
    trace = tuple(float(v) for v in trace) or (energy,)
    if abs(trace[-1] - energy) > ENERGY_RTOL * max(1.0, abs(energy)):
        raise AssertionError(
            f"solver energy {trace[-1]!r} disagrees with re-evaluation {energy!r}")
    return SolveReport(problem.labeling(labels), energy, trace, int(sweeps), bool(converged))
