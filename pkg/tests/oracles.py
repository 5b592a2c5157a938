"""Independent reference computations used by several test modules."""

import itertools

import numpy as np

from ies_dispatch.milp import LinExpr, MilpProblem


def random_boxed_lp(rng, n=3, m=3):
    """min c.x s.t. A x <= b, 0 <= x <= u, with b >= 0 so x = 0 is feasible."""
    A = rng.uniform(-5, 5, size=(m, n)).round(3)
    b = rng.uniform(0, 10, size=m).round(3)
    c = rng.uniform(-5, 5, size=n).round(3)
    u = rng.uniform(1, 8, size=n).round(3)
    return A, b, c, u


def lp_problem(A, b, c, u):
    p = MilpProblem("boxed")
    xs = [p.add_var(f"x{j}", 0.0, float(u[j])) for j in range(len(c))]
    for i in range(A.shape[0]):
        p.add_constraint(LinExpr.sum(LinExpr.var(xs[j], A[i, j]) for j in range(len(c))), "<=", float(b[i]))
    p.add_objective(LinExpr.sum(LinExpr.var(xs[j], c[j]) for j in range(len(c))))
    return p


def vertex_optimum(A, b, c, u, tol=1e-9):
    """Minimum of c.x over the polytope by enumerating every basic solution."""
    n = len(c)
    rows = [(A[i], b[i]) for i in range(A.shape[0])]
    rows += [(-np.eye(n)[j], 0.0) for j in range(n)]
    rows += [(np.eye(n)[j], u[j]) for j in range(n)]
    G = np.array([r for r, _ in rows])
    h = np.array([v for _, v in rows])
    best = np.inf
    for combo in itertools.combinations(range(len(rows)), n):
        M = G[list(combo)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[list(combo)])
        if np.all(G @ x <= h + tol):
            best = min(best, float(c @ x))
    return best


def ladder_encoded_cost(spec, bounds, delta, all_binaries=False):
    """Minimum of the encoded cost variable with the delta variable pinned."""
    from ies_dispatch.carbon import linearize_ladder
    from ies_dispatch.milp import MilpOptions, solve_milp

    p = MilpProblem("ladder")
    cost, dvar = linearize_ladder(spec, bounds, p, all_binaries=all_binaries)
    p.variables[dvar].lower = p.variables[dvar].upper = float(delta)
    p.add_objective(LinExpr.var(cost))
    rep = solve_milp(p, MilpOptions(mip_gap=0.0))
    return rep.objective, rep


def integrated_ladder(spec, delta):
    """Cost by integrating the slope sequence from zero, cutting at every knot."""
    lo, hi = sorted((0.0, float(delta)))
    cuts = [lo] + [k for k in spec.knots if lo < k < hi] + [hi]
    area = sum(spec.slope_at(0.5 * (a + b)) * (b - a) for a, b in zip(cuts, cuts[1:]))
    return area if delta >= 0 else -area


# -- four-hour micro dispatch ---------------------------------------------------------

MICRO = dict(
    load=[60.0, 80.0, 100.0, 70.0],
    wind=[20.0, 10.0, 0.0, 30.0],
    price=[30.0, 60.0, 90.0, 40.0],
    curtail=20.0,
    grid_max=100.0,
    quota=220.0,
    ladder=(10.0, 50.0, 0.5),
)


def micro_problem():
    """Plant + wind + one storage + grid + stepped carbon cost on grid purchases."""
    from ies_dispatch import devices
    from ies_dispatch.carbon import LadderSpec, linearize_ladder
    from ies_dispatch.model import Carrier, StorageParams, WastePlantParams

    T = 4
    p = MilpProblem("micro")
    wi = devices.build_waste_plant(
        WastePlantParams(100.0, 10.0, 40.0, 20.0, 0.0, 0.0, 0.0, 0.0, 0.0), p, T)
    sto = devices.build_storage(
        StorageParams(Carrier.ELECTRIC, 20.0, 20.0, 1.0, 1.0, 0.0, 40.0, 20.0), p, T)
    wind = p.add_vars("wind", T, 0.0, MICRO["wind"])
    grid = p.add_vars("grid", T, 0.0, MICRO["grid_max"])
    for t in range(T):
        supply = (LinExpr.var(grid[t]) + LinExpr.var(wind[t]) + wi.signal("wi_power")[t]
                  + sto.signal("electric_storage_discharge")[t] - sto.signal("electric_storage_charge")[t])
        p.add_constraint(supply, "=", MICRO["load"][t], name=f"balance_t{t}")
    spec = LadderSpec(*MICRO["ladder"])
    q = MICRO["quota"]
    cost, delta = linearize_ladder(spec, (-q, T * MICRO["grid_max"] - q), p)
    p.add_constraint(LinExpr.var(delta) - LinExpr.sum(LinExpr.var(g) for g in grid), "=", -q, name="delta_link")
    p.add_objective(LinExpr.sum(LinExpr.var(g, c) for g, c in zip(grid, MICRO["price"])))
    p.add_objective(LinExpr.sum(LinExpr.const(a) - LinExpr.var(w) for a, w in zip(MICRO["wind"], wind)),
                    MICRO["curtail"])
    p.add_objective(LinExpr.var(cost))
    return p


def micro_oracle(step=10.0):
    """Exhaustive search with every power on a ``step`` MW grid."""
    from ies_dispatch.carbon import LadderSpec, ladder_cost

    spec = LadderSpec(*MICRO["ladder"])
    load, avail, price = (np.array(MICRO[k]) for k in ("load", "wind", "price"))
    levels = np.arange(10.0, 40.0 + 1e-9, step)
    plants = [s for s in itertools.product(levels, repeat=4)
              if abs(sum(s) - 100.0) < 1e-9 and all(abs(b - a) <= 20.0 + 1e-9 for a, b in zip(s, s[1:]))]
    winds = list(itertools.product(*[np.arange(0.0, a + 1e-9, step) for a in avail]))
    nets = []
    for s in itertools.product(np.arange(-20.0, 20.0 + 1e-9, step), repeat=4):
        soc = 20.0 - np.cumsum(s)  # positive net = discharge
        if np.all(soc >= -1e-9) and np.all(soc <= 40.0 + 1e-9) and abs(soc[-1] - 20.0) < 1e-9:
            nets.append(s)
    best = np.inf
    for wi in plants:
        for w in winds:
            base = load - np.array(wi) - np.array(w)
            curt = MICRO["curtail"] * float(np.sum(avail - np.array(w)))
            for s in nets:
                g = base - np.array(s)
                if np.any(g < -1e-9) or np.any(g > MICRO["grid_max"] + 1e-9):
                    continue
                total = float(price @ g) + curt + ladder_cost(spec, float(g.sum()) - MICRO["quota"])
                best = min(best, total)
    return best
