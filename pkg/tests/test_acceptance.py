"""Acceptance criteria, one PASS/FAIL line each in the terminal summary.

Three stated bounds are false for the normalization used here; their literal
checks are kept as strict expected failures next to passing checks of the
corrected statements.
"""
import csv
import json
import math
import time

import numpy as np
import pytest

from landaulab.cli import main
from landaulab.eigenbasis import build_basis
from landaulab.grid import GridRep, TensorGrid
from landaulab.heatcontrol import ControlProblem, minimal_norm_control
from landaulab.magderiv import apply_magnetic_derivative
from landaulab.magfield import FieldMatrix, field_norms, normal_form
from landaulab.observability import observability_constant, single_hole_scan, theorem_bound
from landaulab.thickset import FullSpace, hole_radius, hole_set

pytestmark = pytest.mark.slow

PLANAR = {"blocks": [1.0]}
CONFIGS = {
    "mbi-d2": ("bernstein", {"field": PLANAR, "basis": {"E": 4, "l_max": 8}, "seed": 0,
                             "params": {"n_seeds": 20, "m_max": 4, "est1_m_max": 3}}),
    "mbi-d3": ("bernstein", {"field": {"blocks": [1.0], "nullity": 1},
                             "basis": {"E": 3, "l_max": 3, "null_spec": [[0.0], [0.5], [-0.5]]},
                             "seed": 0, "params": {"n_seeds": 20, "m_max": 4, "est1_m_max": 3}}),
    "mbi-d4": ("bernstein", {"field": {"blocks": [1.0, 1.0]},
                             "basis": {"E": 4.5, "l_max": 2, "n_nodes": 16}, "seed": 0,
                             "params": {"n_seeds": 20, "m_max": 4, "est1_m_max": 3}}),
    "good-bad": ("good-bad", {"field": PLANAR, "basis": {"E": 4, "l_max": 8}, "seed": 0,
                              "params": {"ell": 0.5, "n_seeds": 10, "ground_state": True}}),
    "remez": ("remez", {"seed": 0, "params": {"degree": 8, "E_measure": 0.1, "trials": 500}}),
    "necessity": ("necessity", {"params": {"C": 1.0, "R_list": [1, 2, 3], "half_width": 6.0,
                                           "resolution": 240}}),
    "heat-control": ("heat-control", {"field": PLANAR, "basis": {"E": 3, "l_max": 8},
                                      "set": {"variant": "periodic_holes", "L": 4, "rho": 0.9},
                                      "seed": 0, "params": {"T": 1.0, "n_time": 64}}),
}
RERUN = ("mbi-d2", "good-bad", "remez", "necessity", "heat-control")


def _cli(tmp_path, key, tag):
    command, cfg = CONFIGS[key]
    path = tmp_path / f"{key}-{tag}.json"
    path.write_text(json.dumps({"command": command, "config_id": key, **cfg}))
    out = tmp_path / f"{key}-{tag}"
    t0 = time.perf_counter()
    code = main([command, "--config", str(path), "--out", str(out)])
    return code, out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    return {key: _cli(root, key, "first") for key in CONFIGS} | {"_root": root}


def _rows(out, name):
    with open(out / name) as fh:
        return list(csv.DictReader(fh))


# 1 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def normal_form_suite():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst, half_viol, full_viol = 0.0, 0, 0
    for _ in range(10_000):
        d = int(rng.integers(2, 9))
        B = FieldMatrix.random(d, rng)
        nf = normal_form(B)
        U = nf.conjugator
        worst = max(worst, float(np.abs(U.T @ B.entries @ U - nf.block_matrix()).max()))
        n = field_norms(B)
        half_viol += n.frobenius_sq > 0.5 * d * n.one_norm_Bsq * (1 + 1e-12)
        full_viol += n.frobenius_sq > d * n.one_norm_Bsq * (1 + 1e-12)
    return worst, half_viol, full_viol, time.perf_counter() - t0


def test_criterion_01_reconstruction(normal_form_suite, acceptance):
    worst, _, full_viol, dt = normal_form_suite
    ok = worst <= 1e-10 and dt <= 30 and full_viol == 0
    acceptance(1, ok, f"reconstruction max {worst:.1e} in {dt:.1f}s, "
                      f"|B|_f^2 <= d|B^2|_1 violations {full_viol}")
    assert ok


@pytest.mark.xfail(strict=True, reason="|B|_f^2 <= (d/2)|B^2|_1 fails already for the planar "
                                       "field (2 > 1); the valid form is d|B^2|_1")
def test_criterion_01_half_dimension_frobenius_bound(normal_form_suite, acceptance):
    _, half_viol, _, _ = normal_form_suite
    acceptance(1, half_viol == 0, f"(d/2)|B^2|_1 form violations {half_viol}/10000")
    assert half_viol == 0


# 2 ---------------------------------------------------------------------------

def _random_packets(rng, grid, n):
    d = grid.dim
    x = [grid.coordinate(k) for k in range(d)]
    vals = []
    for _ in range(n):
        x0 = rng.uniform(-0.5, 0.5, d)
        c = rng.normal(0, 0.5, d)
        a = rng.normal(0, 0.3, d)
        env = np.exp(-sum((xk - x0k) ** 2 for xk, x0k in zip(x, x0)) / 2
                     + 1j * sum(ck * xk for ck, xk in zip(c, x)))
        vals.append((1 + sum(ak * xk for ak, xk in zip(a, x))) * env)
    return GridRep(grid, np.stack(vals))


def test_criterion_02_commutator(acceptance):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for d, nodes, batch in ((2, 32, 100), (3, 24, 50), (4, 26, 5)):
        B = FieldMatrix.random(d, rng)
        grid = TensorGrid((nodes,) * d, (1.0,) * d)
        for start in range(0, 100, batch):
            f = _random_packets(rng, grid, batch)
            nrm = f.norm_sq()
            f.check_resolution(1e-16)
            D = [apply_magnetic_derivative(f, k, B, check=False) for k in range(d)]
            for k in range(d):
                for l in range(k + 1, d):
                    kl = apply_magnetic_derivative(D[l], k, B, check=False).values
                    lk = apply_magnetic_derivative(D[k], l, B, check=False).values
                    r = f.with_values(kl - lk - 1j * B.entries[k, l] * f.values)
                    worst = max(worst, float(np.sqrt(r.norm_sq() / nrm).max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-7 and dt <= 60
    acceptance(2, ok, f"max relative residual {worst:.1e} over 100 functions per d in {dt:.1f}s")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_criterion_03_eigen_residuals(acceptance):
    t0 = time.perf_counter()
    b2 = build_basis(normal_form(FieldMatrix.from_blocks([1.0])), 9.0, 8)
    b4 = build_basis(normal_form(FieldMatrix.from_blocks([1.0, 1.0])), 6.0, 4, n_nodes=16)
    dt = time.perf_counter() - t0
    r2, r4 = float(b2.residuals.max()), float(b4.residuals.max())
    ok = max(r2, r4) <= 1e-6 and dt <= 120
    acceptance(3, ok, f"d=2 {b2.size} modes max {r2:.1e}; d=4 {b4.size} modes max {r4:.1e}; "
                      f"{dt:.1f}s")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_criterion_04_bernstein(runs, acceptance):
    worst, worst1, total = 0.0, 0.0, 0.0
    codes = []
    for key in ("mbi-d2", "mbi-d3", "mbi-d4"):
        code, out, dt = runs[key]
        codes.append(code)
        total += dt
        worst = max(worst, max(float(r["ratio"]) for r in _rows(out, "bernstein.csv")))
        worst1 = max(worst1, max(float(r["ratio"]) for r in _rows(out, "est1.csv")))
    ok = codes == [0, 0, 0] and worst <= 1 + 1e-4 and worst1 <= 1 + 1e-4 and total <= 300
    acceptance(4, ok, f"max lhs/bound {worst:.6f}, est1 max {worst1:.6f}, d=2,3,4 x 20 seeds "
                      f"in {total:.0f}s")
    assert ok


# 5 ---------------------------------------------------------------------------

def test_criterion_05_good_bad(runs, acceptance):
    code, out, _ = runs["good-bad"]
    rows = _rows(out, "good_bad.csv")
    low = min(float(r["good_fraction"]) for r in rows)
    ok = code == 0 and len(rows) == 11 and low >= 0.5
    acceptance(5, ok, f"min good-mass fraction {low:.4f} over {len(rows)} functions")
    assert ok


# 6 ---------------------------------------------------------------------------

def test_criterion_06_remez(runs, acceptance):
    code, out, _ = runs["remez"]
    summary = json.loads((out / "remez.json").read_text())
    ok = code == 0 and summary["violations"] == 0 and summary["trials"] == 500
    acceptance(6, ok, f"{summary['violations']} violations in {summary['trials']} trials, "
                      f"max ratio {summary['max_ratio']:.3g}")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_criterion_07_sandwich(acceptance):
    nf = normal_form(FieldMatrix.from_blocks([1.0]))
    L = 4.0
    lines, ok = [], True
    for E in (1.0, 3.0, 5.0):
        basis = build_basis(nf, E, 8)
        for rho in (0.8, 0.9, 0.95):
            S, rho_exact = hole_set(L, hole_radius(L, rho, 2), 2)
            res = observability_constant(basis, S, thickness_ell=(L, L))
            tb = theorem_bound((L, L), rho_exact, E, nf.field)
            good = (1 - 1e-8 <= res.constant and math.log(res.constant) <= tb.log_bound
                    and res.truncation_delta <= 0.05)
            ok &= good
            lines.append(f"{res.constant:.3f}")
    acceptance(7, ok, f"constants {', '.join(lines)} (E x rho grid), all deltas <= 5%, "
                      f"log bound ~ 2.8e7")
    assert ok


# 8 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def hole_scan():
    t0 = time.perf_counter()
    rep = single_hole_scan(1.0, [1.0, 1.5, 2.0, 2.5])
    return rep, time.perf_counter() - t0


def test_criterion_08_corrected_quadratic_law(hole_scan, acceptance):
    rep, dt = hole_scan
    err = max(abs(r["neg_log_mass"] - 0.5 * r["r"] ** 2) / (0.5 * r["r"] ** 2) for r in rep["rows"])
    ok = err <= 1e-8 and abs(rep["slope"] - 0.5) <= 1e-6 and dt <= 120
    acceptance(8, ok, f"-log mass = C r^2/2 to {err:.1e}, slope {rep['slope']:.6f}, {dt:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the normalized ground state carries exp(-C|x|^2/2) "
                                       "density, so the exponent is C r^2/2, not C r^2")
def test_criterion_08_literal_unit_slope(hole_scan, acceptance):
    rep, _ = hole_scan
    dev = max(abs(r["neg_log_mass"] - r["r"] ** 2) / r["r"] ** 2 for r in rep["rows"])
    ok = dev <= 0.05 and 0.95 <= rep["slope"] <= 1.05
    acceptance(8, ok, f"literal r^2 law: deviation {dev:.2f}, slope {rep['slope']:.3f} "
                      f"outside [0.95, 1.05]")
    assert ok


# 9 ---------------------------------------------------------------------------

def test_criterion_09_decay(runs, acceptance):
    code, out, _ = runs["necessity"]
    rows = _rows(out, "necessity.csv")
    m = [float(r["min_mass"]) for r in rows]
    gauss = [math.exp(-float(r["R"]) ** 2 / 2) for r in rows]
    ok = code == 0 and all(a > b for a, b in zip(m, m[1:])) and \
        all(x <= g + 1e-2 for x, g in zip(m, gauss))
    acceptance(9, ok, "min masses " + ", ".join(f"{x:.4f}" for x in m)
               + " strictly decreasing, <= exp(-R^2/2) + 1e-2")
    assert ok


@pytest.mark.xfail(strict=True, reason="the void mass of the ground state is exp(-C R^2/2), "
                                       "above exp(-R^2) + 1e-2 for every R in {1, 2, 3}")
def test_criterion_09_literal_bound(runs, acceptance):
    _, out, _ = runs["necessity"]
    rows = _rows(out, "necessity.csv")
    m = [float(r["min_mass"]) for r in rows]
    lim = [math.exp(-float(r["R"]) ** 2) + 1e-2 for r in rows]
    ok = all(x <= y for x, y in zip(m, lim))
    acceptance(9, ok, "literal exp(-R^2) + 1e-2 limits " + ", ".join(f"{y:.4f}" for y in lim))
    assert ok


# 10 --------------------------------------------------------------------------

def test_criterion_10_null_control(runs, acceptance):
    nf = normal_form(FieldMatrix.from_blocks([1.0]))
    single = build_basis(nf, 1.5, 0)
    worst = 0.0
    for T in (0.5, 1.0, 2.0):
        res = minimal_norm_control(ControlProblem(single, FullSpace(2), T, [1.0]))
        want = 2 * math.exp(-2 * T) / (1 - math.exp(-2 * T))
        worst = max(worst, abs(res.cost - want) / want)
    code, out, _ = runs["heat-control"]
    ctrl = json.loads((out / "control.json").read_text())
    rel = ctrl["final_norm"] / ctrl["u0_norm"]
    rel2 = ctrl["final_norm_check"] / ctrl["u0_norm"]
    ok = worst <= 1e-10 and code == 0 and rel <= 1e-8 and rel2 <= 1e-8
    acceptance(10, ok, f"full-space cost rel err {worst:.1e}; hole set |u(T)|/|u0| {rel:.1e}, "
                       f"halved step {rel2:.1e}")
    assert ok


# 11 --------------------------------------------------------------------------

def _artifacts(out):
    files = {}
    for p in sorted(out.iterdir()):
        data = p.read_bytes()
        if p.name == "manifest.json":
            m = json.loads(data)
            m.pop("timing")
            data = json.dumps(m, sort_keys=True).encode()
        files[p.name] = data
    return files


def test_criterion_11_determinism(runs, acceptance):
    root = runs["_root"]
    same = []
    for key in RERUN:
        _, first, _ = runs[key]
        _, second, _ = _cli(root, key, "second")
        same.append(_artifacts(first) == _artifacts(second))
    ok = all(same)
    acceptance(11, ok, f"{sum(same)}/{len(same)} configs byte-identical on rerun "
                       f"(manifest timing block excluded)")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
