"""Input batteries and boundedness sweeps across grid refinements."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..coefficients import make_coefficient_field
from ..duhamel import apply_operator
from ..geometry import Grid, TimeGrid, build_grid
from ..operator import assemble_operator
from ..propagator import propagator_for
from ..tentspaces import SpaceTimeField, make_atom, tent_norm
from .exponents import admissible, p_L

# weight index shift of each operator's output space
TARGET_SHIFT = {"L1": 1.0, "Lhalf": 0.5, "L0": 0.0}


def make_battery(grid: Grid, tgrid: TimeGrid, seed: int, atoms: int = 4, noise: int = 2, bumps: int = 2,
                 m: float = 2) -> list[tuple[str, SpaceTimeField]]:
    """Seeded inputs: atoms, space-time noise and Whitney-localized bumps.

    Radii stay between four cells and a tenth of the period; every input
    lives on nodes below a quarter of ``t_max``.
    """
    rng = np.random.default_rng(seed)
    out = []
    r_lo = 4 * grid.h
    r_hi = min(0.1 * grid.period, tgrid.t_max ** (1 / m))
    for i in range(atoms):
        r = float(np.exp(rng.uniform(np.log(max(r_lo, tgrid.t_min ** (1 / m))), np.log(r_hi))))
        c = tuple(int(x) for x in rng.integers(0, grid.N, grid.dim))
        f, _ = make_atom(grid, tgrid, c, r, 1.0, 0.0, m, seed=int(rng.integers(2 ** 31)))
        out.append((f"atom{i}", f))
    shape = (tgrid.size,) + grid.shape
    early = tgrid.nodes <= tgrid.t_max / 4
    for i in range(noise):
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        v[~early] = 0
        out.append((f"noise{i}", SpaceTimeField(grid, tgrid, v)))
    coords = np.stack(np.indices(grid.shape), axis=-1) * grid.h
    for i in range(bumps):
        k = int(rng.integers(0, max(1, int(np.sum(early)) - 4)))
        t0 = tgrid.nodes[k]
        c = rng.uniform(0, grid.period, grid.dim)
        d = (coords - c + grid.period / 2) % grid.period - grid.period / 2
        s2 = np.sum(d * d, axis=-1) / max(t0, (4 * grid.h) ** 2)
        space = np.where(s2 < 1, (1 - s2) ** 2, 0.0)
        ks = tgrid.nodes_in(t0, 2 * t0)
        v = np.zeros(shape)
        v[ks] = space
        out.append((f"bump{i}", SpaceTimeField(grid, tgrid, v)))
    return out


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    maxima: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)

    def records(self) -> list[dict]:
        out = [dict(r, kind="sweep_ratio") for r in self.rows]
        for key, v in sorted(self.maxima.items()):
            out.append({"kind": "sweep_max", "key": list(key), "value": v})
        for key, v in sorted(self.drift.items()):
            out.append({"kind": "sweep_drift", "key": list(key), "value": v})
        return out


def boundedness_sweep(coefficients: list[dict], N_list, pairs, time_grid: dict, operators=("L1", "Lhalf", "L0"),
                      dim: int = 1, period: float = 1.0, battery: dict | None = None, seed: int = 0,
                      p_minus: float = 1.0, force: bool = False, m: float = 2,
                      extra_inputs=None) -> SweepResult:
    """Largest ratio ``|T f|_{T^p_{beta+s}} / |f|_{T^p_beta}`` over a battery, per grid.

    Coefficients and inputs are generated on the coarsest grid and carried to
    the finer ones by cell-block replication, so every grid sees the same
    continuum data. ``drift`` is the largest max-over-min of the maxima
    across grids for each (coefficient, operator, p, beta). Inputs with zero
    norm are skipped. ``extra_inputs`` holds ``(name, make(grid, tgrid))``
    pairs appended to the battery on the coarsest grid.
    """
    from ..geometry import build_time_grid

    N_list = sorted(int(n) for n in N_list)
    N0 = N_list[0]
    for p, beta in pairs:
        if not admissible(p, beta, dim, p_minus) and not force:
            raise ValueError(f"(p, beta) = ({p}, {beta}) is not admissible: p must exceed "
                             f"p_L(beta) = {p_L(dim, beta, p_minus)}; pass force to run anyway")
    base_grid = build_grid(dim, N0, period)
    tg0 = build_time_grid(time_grid["t_min"], time_grid["t_max"], time_grid.get("ratio", 2 ** 0.25))
    res = SweepResult()
    for ci, spec in enumerate(coefficients):
        label = spec.get("label", spec["kind"])
        base = make_coefficient_field(base_grid, spec["kind"], spec.get("params"), spec.get("seed", seed + ci))
        inputs = None
        for N in N_list:
            factor = N // N0
            coeffs = base.refined(factor)
            op = assemble_operator(coeffs)
            cache, tg = propagator_for(op, tg0)
            if inputs is None:
                inputs = make_battery(base_grid, tg, seed + 1000 + ci, m=m, **(battery or {}))
                inputs += [(name, SpaceTimeField(base_grid, tg, make(base_grid, tg)))
                           for name, make in (extra_inputs or [])]
            for name, f0 in inputs:
                f = f0.refined(factor) if factor > 1 else f0
                outs = {kind: apply_operator(cache, kind, f).u for kind in operators}
                for p, beta in pairs:
                    nin = tent_norm(f, p, beta, m).value
                    if nin == 0:
                        # zero inputs carry no information about the ratio
                        continue
                    for kind in operators:
                        nout = tent_norm(outs[kind], p, beta + TARGET_SHIFT[kind], m).value
                        ratio = nout / nin
                        res.rows.append({"coefficient": label, "N": N, "input": name, "operator": kind,
                                         "p": p, "beta": beta, "input_norm": nin, "output_norm": nout,
                                         "ratio": ratio})
                        key = (label, N, kind, p, beta)
                        res.maxima[key] = max(res.maxima.get(key, 0.0), ratio)
    for (label, N, kind, p, beta), v in list(res.maxima.items()):
        vals = [res.maxima.get((label, n, kind, p, beta), math.nan) for n in N_list]
        res.drift[(label, kind, p, beta)] = max(vals) / min(vals)
    return res
