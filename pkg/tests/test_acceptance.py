"""Acceptance criteria 1-8.

Run with ``pytest tests/test_acceptance.py -s`` to see one status line per
criterion. Each test prints its line before asserting, so a failure still
reports what was measured.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from rbsde2b.config import from_dict, load_config
from rbsde2b.model import (
    Absent,
    ExplicitReflected,
    ImplicitExplicitPenalization,
    ImplicitPenalization,
    ImplicitReflected,
    validate,
)
from rbsde2b.oracle import compare_with_recombining
from rbsde2b.schemes import (
    PICARD_RTOL,
    generator_point,
    picard_solve,
    root_value,
    solve_backward,
)
from rbsde2b.sim import sample_path

from conftest import martingale_problem

N_LIST = (400, 1000, 2000, 4000)
P_LIST = (20.0, 200.0, 2000.0, 2e4)

REFLECTED_EXPECTED = {400: -1.7312, 1000: -1.7142, 2000: -1.7084, 4000: -1.7055}
PENALIZED_EXPECTED = {
    400: (-1.8346, -1.7476, -1.7329, -1.7314),
    1000: (-1.8177, -1.7306, -1.7161, -1.7144),
    2000: (-1.8124, -1.7250, -1.7103, -1.7068),
    4000: (-1.8096, -1.7222, -1.7074, -1.7057),
}
TOL = 1e-3
FLAG_TOL = 5e-3


def report(number, ok, detail):
    print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def table(table5):
    """Root values of the reflected and penalized schemes, with timings."""
    values, seconds = {}, {}
    start = time.perf_counter()
    for n in N_LIST:
        tic = time.perf_counter()
        values[n, None] = root_value(solve_backward(table5, n, ExplicitReflected(), keep_grid=False))
        seconds[n] = time.perf_counter() - tic
        for p in P_LIST:
            sol = solve_backward(table5, n, ImplicitExplicitPenalization(p), keep_grid=False)
            values[n, p] = root_value(sol)
    return values, seconds, time.perf_counter() - start


def test_criterion_1_table_reproduction(table):
    values, seconds, total = table
    failed, flagged = [], []
    cells = [((n, None), REFLECTED_EXPECTED[n]) for n in N_LIST]
    cells += [((n, p), PENALIZED_EXPECTED[n][i]) for n in N_LIST for i, p in enumerate(P_LIST)]
    for key, expected in cells:
        err = abs(values[key] - expected)
        if err > FLAG_TOL:
            failed.append((key, values[key], expected))
        elif err > TOL:
            flagged.append((key, values[key], expected))
    for (n, p), got, expected in flagged:
        print(f"\n  flagged n={n} p={p}: got {got:.6f}, table {expected}")
    timing_ok = seconds[4000] < 10.0 and total < 180.0
    report(
        1, not failed and timing_ok,
        f"({len(cells) - len(failed) - len(flagged)}/{len(cells)} cells within {TOL}, "
        f"{len(flagged)} flagged, {len(failed)} failed; n=4000 reflected {seconds[4000]:.2f}s, "
        f"table {total:.1f}s)",
    )


def test_criterion_2_monotone_in_p(table):
    values = table[0]
    bad = []
    for n in N_LIST:
        roots = [values[n, p] for p in P_LIST]
        if not all(a < b for a, b in zip(roots, roots[1:])):
            bad.append((n, "not strictly increasing"))
        if max(roots) > values[n, None] + TOL:
            bad.append((n, "above the reflected value"))
    report(2, not bad, f"(violations: {bad})" if bad else "(all 4 rows increasing and bounded)")


def test_criterion_3_rate(table):
    values = table[0]
    gaps = [abs(values[400, p] - values[400, None]) for p in P_LIST[:3]]
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    ok = all(r <= 1 / math.sqrt(10) for r in ratios)
    report(3, ok, f"(gaps {[f'{g:.4g}' for g in gaps]}, ratios {[f'{r:.3f}' for r in ratios]})")


GENERATOR_POOL = (
    "-{c}*abs(y+z)-1",
    "{c}*max(y,0)-{c}*abs(z)+t",
    "-{c}*y+{c}*min(z,1)",
    "{c}*sqrt(1+y^2)-{c}*z",
    "{c}*min(y,z)",
)
TERMINAL_POOL = ("abs(x)", "x^2-1", "max(x,0)", "x", "0.5")


def random_problem(rng, clamp=False):
    """A Markovian problem with polynomial barriers and U = L + positive polynomial."""
    c = round(float(rng.uniform(0.1, 2.0)), 3)
    a0, a1, a2 = (round(float(v), 3) for v in rng.uniform(-1.5, 0.5, 3))
    a3 = round(float(rng.uniform(0.0, 1.0)), 3)
    b0, b1, b2 = (round(float(v), 3) for v in rng.uniform(0.05, 1.5, 3))
    lower = f"{a0}+{a1}*x+{a2}*t-{a3}*x^2"
    upper = f"({lower})+{b0}+{b1}*x^2+{b2}*t"
    data = {
        "version": 1,
        "horizon": 1.0,
        "mu": c,
        "generator": GENERATOR_POOL[rng.integers(len(GENERATOR_POOL))].format(c=c),
        "terminal": TERMINAL_POOL[rng.integers(len(TERMINAL_POOL))],
        "lower": {"kind": "functional", "expr": lower},
        "upper": {"kind": "functional", "expr": upper},
        "clamp_terminal": clamp,
    }
    return from_dict(data).problem()


def all_schemes(rng):
    p = float(rng.choice([20.0, 200.0, 2000.0]))
    return [ExplicitReflected(), ImplicitReflected(), ImplicitPenalization(p), ImplicitExplicitPenalization(p)]


def test_criterion_4_oracle_equivalence():
    rng = np.random.default_rng(20240604)
    worst_explicit, worst_implicit, checked = 0.0, 0.0, 0
    for _ in range(10):
        prob = random_problem(rng)
        n = int(rng.choice([6, 10, 12]))
        assert validate(prob, n).ok
        for scheme in all_schemes(rng):
            gap = compare_with_recombining(prob, n, scheme)
            if isinstance(scheme, (ExplicitReflected, ImplicitExplicitPenalization)):
                worst_explicit = max(worst_explicit, gap)
            else:
                worst_implicit = max(worst_implicit, gap)
            checked += 1
    ok = worst_explicit == 0.0 and worst_implicit <= 1e-10
    report(4, ok, f"({checked} runs; explicit max gap {worst_explicit:g}, implicit max gap {worst_implicit:g})")


def invariant_violation(sol, prob):
    """Worst scaled violation of the step invariants and the dynamics identity."""
    grid, scheme = sol.grid, sol.scheme
    reflected = isinstance(scheme, (ExplicitReflected, ImplicitReflected))
    worst = 0.0
    for j in range(grid.n + 1):
        y, L, U = sol.y.layer(j), sol.lower.layer(j), sol.upper.layer(j)
        if reflected:
            # the layer j = n is the clamped terminal
            worst = max(worst, float(np.max(L - y)), float(np.max(y - U)))
        if j == grid.n:
            break
        z, a, k = sol.z.layer(j), sol.a.layer(j), sol.k.layer(j)
        scale = np.maximum(1.0, np.abs(y))
        worst = max(worst, float(np.max(-a)), float(np.max(-k)), float(np.max(a * k / scale)))
        if reflected:
            worst = max(worst, float(np.max(np.abs((y - L) * a) / scale)),
                        float(np.max(np.abs((y - U) * k) / scale)))
        else:
            pd = scheme.p * grid.delta
            worst = max(worst, float(np.max(np.abs(a - pd * np.maximum(L - y, 0)) / scale)),
                        float(np.max(np.abs(k - pd * np.maximum(y - U, 0)) / scale)))
        nxt = sol.y.layer(j + 1)
        e = 0.5 * (nxt[1:] + nxt[:-1])
        g = prob.generator(grid.time(j), generator_point(scheme, y, e), z)
        drift = g * grid.delta + a - k
        for child, sign in ((nxt[1:], -1.0), (nxt[:-1], 1.0)):
            resid = y - (child + drift + sign * z * grid.sqrt_delta)
            worst = max(worst, float(np.max(np.abs(resid) / scale)))
    return worst


def test_criterion_5_invariants():
    rng = np.random.default_rng(77)
    worst, runs = 0.0, 0
    for _ in range(20):
        prob = random_problem(rng, clamp=True)
        n = int(rng.integers(4, 65))
        assert validate(prob, n).ok
        for scheme in all_schemes(rng):
            worst = max(worst, invariant_violation(solve_backward(prob, n, scheme), prob))
            runs += 1
    report(5, worst <= 1e-10, f"({runs} runs, worst scaled violation {worst:.3g})")


def one_barrier_reference(prob, n, implicit):
    """Lower-barrier-only scheme written out directly, returning (y, a) layers."""
    sol_grid = solve_backward(prob, n, ExplicitReflected())
    grid = sol_grid.grid
    y = sol_grid.y.layer(n)
    ys, az = [y], []
    for j in range(n - 1, -1, -1):
        t = grid.time(j)
        L = sol_grid.lower.layer(j)
        E = 0.5 * (y[1:] + y[:-1])
        z = (y[1:] - y[:-1]) / (2.0 * grid.sqrt_delta)
        g = prob.generator
        if not implicit:
            c = E + g(t, E, z) * grid.delta
            a = np.maximum(L - c, 0.0)
            y = np.maximum(c, L)
        else:
            gap = E + g(t, L, z) * grid.delta - L
            a = np.maximum(-gap, 0.0)
            y = L.copy()
            free = ~(gap < 0)
            if free.any():
                Ef, zf = E[free], z[free]
                # same arithmetic as the kernel fixed-point map, so results match bit for bit
                w = picard_solve(lambda v: (Ef + g(t, v, zf) * grid.delta + 0.0) / (1.0 + 0.0),
                                 Ef, g.mu * grid.delta, PICARD_RTOL * np.maximum(1.0, np.abs(Ef)))
                y[free] = np.maximum(w, L[free])
        ys.append(y)
        az.append(a)
    return ys[::-1], az[::-1]


def test_criterion_6_degenerate_cases(table5):
    mismatches = []
    # exact only where sqrt(delta) is a power of two, i.e. n a power of 4
    for n in (1, 4, 16, 64, 256):
        for scheme in (ExplicitReflected(), ImplicitReflected(), ImplicitPenalization(200.0),
                       ImplicitExplicitPenalization(200.0)):
            sol = solve_backward(martingale_problem(), n, scheme)
            for j in range(n + 1):
                if not np.array_equal(sol.y.layer(j), sol.grid.b_layer(j)):
                    mismatches.append((n, scheme.name, "y", j))
                if j < n and not (np.all(sol.z.layer(j) == 1.0) and not sol.a.layer(j).any()
                                  and not sol.k.layer(j).any()):
                    mismatches.append((n, scheme.name, "z/a/k", j))
    lower_only = dataclasses.replace(table5, upper=Absent())
    for scheme, implicit in ((ExplicitReflected(), False), (ImplicitReflected(), True)):
        sol = solve_backward(lower_only, 200, scheme)
        ref_y, ref_a = one_barrier_reference(lower_only, 200, implicit)
        for j in range(201):
            if not np.array_equal(sol.y.layer(j), ref_y[j]):
                mismatches.append((200, scheme.name, "one-barrier y", j))
            if j < 200 and not (np.array_equal(sol.a.layer(j), ref_a[j]) and not sol.k.layer(j).any()):
                mismatches.append((200, scheme.name, "one-barrier a/k", j))
    report(6, not mismatches, f"(mismatches: {mismatches[:5]})" if mismatches
           else "(martingale exact on dyadic n up to 256; one-barrier reduction bit-identical)")


def test_criterion_7_scheme_gap(table5):
    gaps = []
    for n in (400, 800, 1600):
        imp = root_value(solve_backward(table5, n, ImplicitReflected(), keep_grid=False))
        exp = root_value(solve_backward(table5, n, ExplicitReflected(), keep_grid=False))
        gaps.append(abs(imp - exp))
    ok = gaps[0] >= gaps[1] >= gaps[2] and gaps[2] < 5e-3
    report(7, ok, f"(gaps {[f'{g:.3g}' for g in gaps]})")


def test_criterion_8_path_properties():
    fig1 = load_config("fig1").problem()
    sol = solve_backward(fig1, 400, ExplicitReflected())
    bad = 0
    for seed in range(1000):
        s = sample_path(sol, seed)
        n = s.a.size
        ok = (np.all(np.diff(s.A) >= 0) and np.all(np.diff(s.K) >= 0)
              and not np.any((s.a > 0) & (s.k > 0))
              and np.all(np.abs(s.y[:n] - s.lower[:n])[s.a > 0] <= 1e-10))
        bad += not ok
    report(8, bad == 0, f"(1000 paths, {bad} violating)")
