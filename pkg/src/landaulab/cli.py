"""Command-line entry point: ``landaulab <command> --config FILE --out DIR``.

Every run validates its JSON config, writes JSON/CSV artifacts plus a
``manifest.json`` and exits with 0 when all asserted invariants pass, 1 when
one fails (its id is printed) and 2 when the config is invalid (the field
path is printed).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, defaults
from .eigenbasis import (BasisError, build_basis, ground_state, random_subspace_function,
                         verify_basis)
from .grid import GridRep
from .magderiv import (bernstein_bound, bernstein_lhs, bernstein_lhs_by_parts,
                       classical_derivative_report, verify_recursion)
from .magfield import (FieldError, FieldMatrix, brute_force_levels, enumerate_levels,
                       field_norms, normal_form)
from .observability import (good_bad_partition, necessity_probe, observability_constant,
                            optimality_scan, remez_1d_check, single_hole_scan, theorem_bound,
                            THEOREM_VARIANTS)
from .thickset import (FullSpace, PeriodicHoles, hole_set, set_from_dict, thickness_estimate,
                       void_bitmap)

COMMANDS = ("decompose", "spectrum", "basis-check", "bernstein", "recursion", "good-bad",
            "remez", "thickness", "observability", "optimality-scan", "necessity",
            "heat-control")
RANDOMIZED = {"bernstein", "recursion", "good-bad", "remez", "heat-control"}
NEEDS_BASIS = {"basis-check", "bernstein", "recursion", "good-bad", "observability", "heat-control"}
NEEDS_SET = {"thickness", "observability", "heat-control"}
NEEDS_FIELD = NEEDS_BASIS | {"decompose", "spectrum"}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


# --------------------------------------------------------------------------
# config schema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int0 = {"type": "integer", "minimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_posvec = {"type": "array", "items": _pos, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


FIELD_SCHEMA = {"oneOf": [
    {"type": "array", "items": {"type": "array", "items": _num}, "minItems": 2},
    _obj({"blocks": {"type": "array", "items": _pos}, "nullity": _int0}, ["blocks"]),
]}

BASIS_SCHEMA = _obj({
    "E": _pos, "l_max": _int0,
    "null_spec": {"type": "array", "items": _vec},
    "n_nodes": {"type": "integer", "minimum": 2},
    "sigma_null": _pos,
}, ["E"])

SET_SCHEMA = {"oneOf": [
    _obj({"variant": {"const": "full_space"}, "dim": {"type": "integer", "minimum": 1}}, ["variant"]),
    _obj({"variant": {"const": "periodic_holes"}, "dim": {"type": "integer", "minimum": 1},
          "L": _pos, "r": _pos, "rho": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
          "offset": _vec}, ["variant", "L"]),
    _obj({"variant": {"const": "stripes"}, "dim": {"type": "integer", "minimum": 1},
          "period": _pos, "width": _pos, "axis": _int0, "offset": _num},
         ["variant", "period", "width"]),
    _obj({"variant": {"const": "bitmap"}, "dim": {"type": "integer", "minimum": 1},
          "box": {"type": "array", "items": _vec, "minItems": 2, "maxItems": 2},
          "resolution": {"type": "array", "items": {"type": "integer", "minimum": 1}},
          "bits": {"type": "string"}, "outside": {"type": "boolean"}},
         ["variant", "box", "resolution", "bits"]),
    _obj({"variant": {"const": "void_bitmap"}, "center": _vec, "R": _pos,
          "half_width": _pos, "resolution": {"type": "integer", "minimum": 1}},
         ["variant", "center", "R", "half_width", "resolution"]),
]}

PARAM_SCHEMAS = {
    "decompose": _obj({}),
    "spectrum": _obj({"E": {"type": "number", "minimum": 0}}, ["E"]),
    "basis-check": _obj({}),
    "bernstein": _obj({"m_max": _int0, "n_seeds": {"type": "integer", "minimum": 1},
                       "est1_m_max": _int0, "by_parts_m_max": _int0}),
    "recursion": _obj({"m_max": _int0, "n_seeds": {"type": "integer", "minimum": 1}}),
    "good-bad": _obj({"ell": {"oneOf": [_pos, _posvec]}, "m_max": _int0,
                      "n_seeds": _int0, "ground_state": {"type": "boolean"}}),
    "remez": _obj({"degree": {"type": "integer", "minimum": 0, "maximum": 12},
                   "E_measure": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                   "trials": {"type": "integer", "minimum": 1}}),
    "thickness": _obj({"ell": {"oneOf": [_pos, _posvec]},
                       "resolution": {"type": "integer", "minimum": 2}}, ["ell"]),
    "observability": _obj({"ell": {"oneOf": [_pos, _posvec]}, "truncation": {"type": "boolean"},
                           "variant": {"enum": list(THEOREM_VARIANTS)},
                           "constants": _obj({k: _pos for k in ("C1", "C2", "C3", "C4", "c_d")})}),
    "optimality-scan": _obj({"C": _pos, "rho": {"type": "number", "exclusiveMinimum": 0,
                                                "exclusiveMaximum": 1},
                             "L_list": _posvec, "radii": _posvec}),
    "necessity": _obj({"C": _pos, "R_list": _posvec, "half_width": _pos,
                       "resolution": {"type": "integer", "minimum": 2},
                       "probe_offsets": {"type": "array", "items": _vec},
                       "threshold_constant": _pos}, ["R_list"]),
    "heat-control": _obj({"T": _pos, "n_time": {"type": "integer", "minimum": 2},
                          "u0": {"type": "array", "items": {"type": "array", "items": _num,
                                                            "minItems": 2, "maxItems": 2}},
                          "lebeau_robbiano": {"type": "boolean"}}),
}


def config_schema(command: str) -> dict:
    props = {
        "command": {"const": command},
        "config_id": {"type": "string"},
        "field": FIELD_SCHEMA,
        "basis": BASIS_SCHEMA,
        "set": SET_SCHEMA,
        "seed": {"type": "integer", "minimum": 0},
        "params": PARAM_SCHEMAS[command],
        "tolerances": _obj({k: _pos for k in defaults.TOLERANCES}),
    }
    required = []
    if command in NEEDS_FIELD:
        required.append("field")
    if command in NEEDS_BASIS:
        required.append("basis")
    if command in NEEDS_SET:
        required.append("set")
    if command in ("spectrum", "thickness", "necessity"):
        required.append("params")
    return _obj(props, required)


def validate_config(command: str, cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(config_schema(command))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(path, err.message)
    if command in RANDOMIZED and "seed" not in cfg:
        raise ConfigError("seed", "a seed is mandatory for randomized commands")


# --------------------------------------------------------------------------
# config interpretation

def _field(cfg) -> FieldMatrix:
    spec = cfg["field"]
    try:
        if isinstance(spec, dict):
            return FieldMatrix.from_blocks(spec["blocks"], spec.get("nullity", 0))
        return FieldMatrix(np.array(spec, dtype=float))
    except FieldError as exc:
        raise ConfigError("field", str(exc)) from exc


def _basis(cfg, nf, tol, verify=True):
    b = cfg["basis"]
    try:
        basis = build_basis(nf, b["E"], b.get("l_max", defaults.L_MAX), b.get("null_spec"),
                            n_nodes=b.get("n_nodes"), sigma_null=b.get("sigma_null"), verify=False)
    except ValueError as exc:
        raise ConfigError("basis", str(exc)) from exc
    if basis.size == 0:
        raise ConfigError("basis.E", "no mode lies below the energy cutoff")
    if verify:
        verify_basis(basis, tol["eta_orth"], tol["eta_eig"])
    return basis


def _set(cfg, d: int):
    spec = dict(cfg["set"])
    v = spec["variant"]
    try:
        if v == "void_bitmap":
            if len(spec["center"]) != d:
                raise ConfigError("set.center", f"expected {d} coordinates")
            return void_bitmap(spec["center"], spec["R"], spec["half_width"], spec["resolution"]), None
        spec.setdefault("dim", d)
        if spec["dim"] != d:
            raise ConfigError("set.dim", f"set dimension {spec['dim']} differs from field dimension {d}")
        rho = None
        if v == "periodic_holes":
            if "r" not in spec and "rho" not in spec:
                raise ConfigError("set", "periodic_holes needs r or rho")
            if "r" not in spec:
                from .thickset import hole_radius
                spec["r"] = hole_radius(spec["L"], spec["rho"], d)
            spec.pop("rho", None)
            _, rho = hole_set(spec["L"], spec["r"], d)
        return set_from_dict(spec), rho
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("set", str(exc)) from exc


def _ell(params, d, default=None):
    ell = params.get("ell", default)
    if ell is None:
        return None
    return tuple(float(v) for v in np.broadcast_to(np.asarray(ell, dtype=float), (d,)))


# --------------------------------------------------------------------------
# artifacts

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Run:
    """Collects artifacts and assertions of one command."""

    def __init__(self, out: Path):
        self.out = out
        self.files = {}
        self.assertions = {}
        self.nonfinite = []

    def check(self, ident: str, ok: bool, detail: str = "") -> None:
        self.assertions[ident] = {"passed": bool(ok), "detail": detail}

    def json(self, name: str, data) -> None:
        self.files[name] = json.dumps(_clean(data), sort_keys=True, indent=2) + "\n"

    def csv(self, name: str, columns: list, rows: list) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            for c in columns:
                v = row[c]
                if isinstance(v, (float, np.floating)) and not math.isfinite(v):
                    self.nonfinite.append(f"{name}:{c}")
            w.writerow([_fmt(row[c]) for c in columns])
        self.files[name] = buf.getvalue()

    def write(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (self.out / name).write_text(text)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# commands

def cmd_decompose(cfg, run, tol, jobs):
    B = _field(cfg)
    nf = normal_form(B)
    U = nf.conjugator
    recon = float(np.abs(U.T @ B.entries @ U - nf.block_matrix()).max())
    orth = float(np.abs(U.T @ U - np.eye(B.dim)).max())
    n = field_norms(B)
    run.json("decompose.json", {"normal_form": nf.to_dict(), "reconstruction_error": recon,
                                "orthogonality_error": orth,
                                "norms": {"frobenius_sq": n.frobenius_sq,
                                          "one_norm_Bsq": n.one_norm_Bsq, "op_norm": n.op_norm},
                                "frobenius_over_half_dim_one_norm":
                                    n.frobenius_sq / (0.5 * B.dim * n.one_norm_Bsq)
                                    if n.one_norm_Bsq > 0 else 0.0})
    run.check("normal-form-reconstruction", recon <= 1e-10, f"{recon:.3e}")
    run.check("normal-form-orthogonality", orth <= 1e-12, f"{orth:.3e}")
    run.check("frobenius-vs-one-norm", n.frobenius_sq <= B.dim * n.one_norm_Bsq * (1 + 1e-12))


def cmd_spectrum(cfg, run, tol, jobs):
    nf = normal_form(_field(cfg))
    E = cfg["params"]["E"]
    levels = enumerate_levels(nf, E)
    rows = [{"n": " ".join(map(str, lv.n)), "base_energy": lv.base_energy, "band": lv.band}
            for lv in levels]
    run.csv("spectrum.csv", ["n", "base_energy", "band"], rows)
    brute = brute_force_levels(nf, E)
    ok = len(levels) == len(brute) and all(
        tuple(lv.n) == tuple(n) and abs(lv.base_energy - e) <= 1e-12 * max(1.0, e)
        for lv, (n, e) in zip(levels, brute))
    run.check("levels-exhaustive", ok)


def cmd_basis_check(cfg, run, tol, jobs):
    nf = normal_form(_field(cfg))
    basis = _basis(cfg, nf, tol, verify=False)
    ok_orth, ok_eig, msg = True, True, ""
    try:
        verify_basis(basis, tol["eta_orth"], tol["eta_eig"])
    except BasisError as exc:
        msg = str(exc)
        ok_orth = "orthonormality" not in msg
        ok_eig = "eigen-residual" not in msg
    rows = []
    for i, m in enumerate(basis.modes):
        rows.append({"index": i, "n": " ".join(map(str, m.n)), "l": " ".join(map(str, m.l)),
                     "xi": " ".join(repr(float(v)) for v in m.xi), "energy": m.energy,
                     "residual": float(basis.residuals[i]) if basis.residuals is not None else -1.0,
                     "leakage": float(basis.leakage[i])})
    run.csv("modes.csv", ["index", "n", "l", "xi", "energy", "residual", "leakage"], rows)
    desc = basis.to_dict()
    desc["orth_error"] = basis.orth_error
    desc["leakage_flagged"] = int(np.sum(basis.leakage > tol["eta_leak"]))
    run.json("basis.json", desc)
    run.check("orthonormality", ok_orth, msg)
    run.check("eigen-residual", ok_eig, msg)


def _seed_functions(cfg, basis, n):
    seed = int(cfg["seed"])
    return [random_subspace_function(basis, seed + i) for i in range(n)]


def cmd_bernstein(cfg, run, tol, jobs):
    B = _field(cfg)
    nf = normal_form(B)
    basis = _basis(cfg, nf, tol)
    p = cfg.get("params", {})
    m_max = p.get("m_max", defaults.BERNSTEIN_M_MAX)
    n_seeds = p.get("n_seeds", defaults.N_SEEDS)
    est_m = p.get("est1_m_max", defaults.EST1_M_MAX)
    parts_m = p.get("by_parts_m_max", 2)
    funcs = _seed_functions(cfg, basis, n_seeds)
    cid = cfg.get("config_id", "bernstein")
    C = np.array([f.coefficients for f in funcs])
    g = basis.grid_values()
    batch = GridRep(basis.grid, np.tensordot(C, g.values, axes=(1, 0)))
    norms = batch.norm_sq()
    rows, worst = [], 0.0
    for m in range(m_max + 1):
        lhs = bernstein_lhs(batch, m, B)
        bound = bernstein_bound(nf.dim, basis.E, B, m) * norms
        for s, f in enumerate(funcs):
            ratio = float(lhs[s] / bound[s])
            worst = max(worst, ratio)
            rows.append({"m": m, "lhs": float(lhs[s]), "bound": float(bound[s]), "ratio": ratio,
                         "config_id": f"{cid}/seed={cfg['seed'] + s}"})
    run.csv("bernstein.csv", ["m", "lhs", "bound", "ratio", "config_id"], rows)
    run.check("mbi", worst <= 1 + tol["eta_bern"], f"max ratio {worst:.6f}")
    # integration-by-parts route on the first seed
    sym = 0.0
    for m in range(parts_m + 1):
        a = float(bernstein_lhs(funcs[0], m))
        b = float(bernstein_lhs_by_parts(funcs[0], m))
        sym = max(sym, abs(a - b) / max(abs(a), 1e-300))
    run.check("by-parts-symmetry", sym <= 1e-6, f"{sym:.3e}")
    est_rows, worst1 = [], 0.0

    def est(f):
        return classical_derivative_report(f, est_m, basis.E, B)[0]

    for s, reps in enumerate(_map(est, funcs, jobs)):
        for r in reps:
            worst1 = max(worst1, r.ratio)
            est_rows.append({"m": r.m, "lhs": r.lhs, "bound": r.bound, "ratio": r.ratio,
                             "config_id": f"{cid}/seed={cfg['seed'] + s}"})
    run.csv("est1.csv", ["m", "lhs", "bound", "ratio", "config_id"], est_rows)
    run.check("est1", worst1 <= 1 + tol["eta_bern"], f"max ratio {worst1:.6f}")
    run.json("bernstein.json", {"max_ratio": worst, "max_est1_ratio": worst1,
                                "by_parts_rel_diff": sym, "n_modes": basis.size,
                                "eta_bern": tol["eta_bern"]})


def cmd_recursion(cfg, run, tol, jobs):
    B = _field(cfg)
    nf = normal_form(B)
    basis = _basis(cfg, nf, tol)
    p = cfg.get("params", {})
    m_max = p.get("m_max", defaults.RECURSION_M_MAX)
    funcs = _seed_functions(cfg, basis, p.get("n_seeds", 5))
    reports = _map(lambda f: verify_recursion(f, m_max, B, basis.E, tol["eta_bern"]), funcs, jobs)
    rows, ok, ok0 = [], True, True
    for s, rep in enumerate(reports):
        ok &= rep["passed"]
        ok0 &= rep.get("energy_in_range", True)
        for r in rep["rows"]:
            rows.append({"seed": cfg["seed"] + s, "m": r.m, "q_X": r.q_X, "q_Y": r.q_Y,
                         "rhs_X": r.rhs_X, "rhs_Z": r.rhs_Z, "passed_X": r.passed_X,
                         "passed_Z": r.passed_Z})
    run.csv("recursion.csv", ["seed", "m", "q_X", "q_Y", "rhs_X", "rhs_Z", "passed_X", "passed_Z"], rows)
    run.check("recursion-bound", ok)
    run.check("energy-in-range", ok0)


def cmd_good_bad(cfg, run, tol, jobs):
    B = _field(cfg)
    nf = normal_form(B)
    basis = _basis(cfg, nf, tol)
    p = cfg.get("params", {})
    ell = _ell(p, nf.dim, defaults.GOOD_BAD_ELL)
    m_max = p.get("m_max", defaults.GOOD_BAD_M_MAX)
    funcs = []
    if p.get("ground_state", True) and nf.nullity == 0:
        funcs.append(("ground_state", ground_state(nf, n_nodes=basis.grid.n_nodes[0])))
    for s, f in enumerate(_seed_functions(cfg, basis, p.get("n_seeds", 10))):
        funcs.append((f"seed={cfg['seed'] + s}", f))
    reps = _map(lambda nf_: good_bad_partition(nf_[1], ell, basis.E, B, m_max), funcs, jobs)
    rows = []
    for (name, _), rep in zip(funcs, reps):
        d = rep.to_dict()
        rows.append({"function": name, "good_fraction": d["good_fraction"], "n_good": d["n_good"],
                     "n_cells": d["n_cells"], "flagged_empty": d["flagged_empty"]})
    run.csv("good_bad.csv", ["function", "good_fraction", "n_good", "n_cells", "flagged_empty"], rows)
    worst = min(r["good_fraction"] for r in rows)
    run.check("good-mass-half", worst >= 0.5, f"min fraction {worst:.4f}")


def cmd_remez(cfg, run, tol, jobs):
    p = cfg.get("params", {})
    rep = remez_1d_check(p.get("degree", defaults.REMEZ_DEGREE),
                         p.get("E_measure", defaults.REMEZ_MEASURE),
                         p.get("trials", defaults.REMEZ_TRIALS), int(cfg["seed"]))
    run.csv("remez.csv", ["trial", "degree", "sup_01", "sup_E", "M", "ratio"], rep["rows"])
    run.json("remez.json", {k: v for k, v in rep.items() if k != "rows"})
    run.check("remez-bound", rep["violations"] == 0, f"{rep['violations']} violations")


def cmd_thickness(cfg, run, tol, jobs):
    d = cfg["set"].get("dim", len(cfg["set"].get("center", [])) or 2)
    S, rho = _set(cfg, d)
    p = cfg["params"]
    ell = _ell(p, d)
    try:
        cert = thickness_estimate(S, ell, p.get("resolution", defaults.THICKNESS_RESOLUTION))
    except ValueError as exc:
        raise ConfigError("params.ell", str(exc)) from exc
    out = {"certificate": cert.to_dict(), "set": S.to_dict()}
    if rho is not None and isinstance(S, PeriodicHoles) and all(abs(e - S.L) < 1e-12 for e in ell):
        out["rho_formula"] = rho
        run.check("hole-formula", abs(cert.rho_lower - rho) <= cert.discretization_error,
                  f"{cert.rho_lower:.6f} vs {rho:.6f}")
    run.json("thickness.json", out)
    run.check("rho-range", 0.0 <= cert.rho_lower <= 1.0)


def cmd_observability(cfg, run, tol, jobs):
    B = _field(cfg)
    nf = normal_form(B)
    basis = _basis(cfg, nf, tol)
    S, rho = _set(cfg, nf.dim)
    p = cfg.get("params", {})
    default_ell = (S.L,) * nf.dim if isinstance(S, PeriodicHoles) else None
    ell = _ell(p, nf.dim, default_ell)
    res = observability_constant(basis, S, truncation=p.get("truncation", True), thickness_ell=ell)
    out = res.to_dict()
    if not isinstance(S, FullSpace) and ell is not None:
        rho_used = rho if rho is not None else res.thickness["rho_lower"]
        if rho_used > 0:
            tb = theorem_bound(ell, rho_used, basis.E, B, p.get("constants"),
                               p.get("variant", "abstract"))
            out["theorem_bound"] = tb.to_dict()
            ok = math.log(res.constant) <= tb.log_bound if math.isfinite(res.constant) else False
            run.check("sandwich-upper", ok, f"log C = {math.log(res.constant):.4f}, "
                                            f"log bound = {tb.log_bound:.4g}")
        out["rho"] = rho_used
    run.json("observability.json", out)
    run.check("sandwich-lower", res.constant >= 1 - tol["eta_orth"], f"{res.constant:.6f}")
    if res.truncation_delta is not None:
        run.check("truncation-delta", res.truncation_delta <= tol["truncation_delta"],
                  f"{res.truncation_delta:.4f}")


def cmd_optimality_scan(cfg, run, tol, jobs):
    p = cfg.get("params", {})
    C = p.get("C", 1.0)
    scan = optimality_scan(C, p.get("rho", 0.9), p.get("L_list", [4.0, 6.0, 8.0, 10.0]))
    run.csv("optimality_scan.csv", ["L", "r", "rho", "mass_in_S", "neg_log_mass"], scan["rows"])
    single = single_hole_scan(C, p.get("radii", [1.0, 1.5, 2.0, 2.5]))
    run.csv("single_hole.csv", ["r", "mass_in_S", "neg_log_mass", "closed_form"], single["rows"])
    run.json("optimality.json", {"lattice_slope": scan["slope"], "lattice_fit_rms": scan["fit_rms"],
                                 "floor": scan["floor"], "single_hole_slope": single["slope"],
                                 "single_hole_fit_rms": single["fit_rms"],
                                 "closed_form_slope": C / 2})
    run.check("slope-above-floor", scan["slope"] >= scan["floor"] - 0.05 * scan["floor"],
              f"{scan['slope']:.4f} vs floor {scan['floor']:.4f}")
    err = max(abs(r["mass_in_S"] - r["closed_form"]) / r["closed_form"] for r in single["rows"])
    run.check("single-hole-closed-form", err <= 1e-8, f"{err:.3e}")


def cmd_necessity(cfg, run, tol, jobs):
    p = cfg["params"]
    C = p.get("C", 1.0)
    nf = normal_form(FieldMatrix.from_blocks([C]))
    half = p.get("half_width", 6.0)
    res = p.get("resolution", 240)
    offsets = p.get("probe_offsets", [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [3.0, 3.0]])
    center = np.array([0.0, 0.0])
    rows = []
    for R in p["R_list"]:
        S = void_bitmap(center, R, max(half, R + 1), res)
        rep = necessity_probe(S, nf, [center + np.asarray(o) for o in offsets],
                              threshold_constant=p.get("threshold_constant"))
        rows.append({"R": float(R), "min_mass": rep["min_mass"],
                     "gaussian_law": math.exp(-0.5 * C * R * R),
                     "warnings": sum(1 for r in rep["rows"] if r["warning"])})
    run.csv("necessity.csv", ["R", "min_mass", "gaussian_law", "warnings"], rows)
    masses = [r["min_mass"] for r in rows]
    run.check("decay-strict", all(a > b for a, b in zip(masses, masses[1:])))


def cmd_heat_control(cfg, run, tol, jobs):
    from .heatcontrol import ControlProblem, lebeau_robbiano, minimal_norm_control

    B = _field(cfg)
    nf = normal_form(B)
    basis = _basis(cfg, nf, tol)
    S, _ = _set(cfg, nf.dim)
    p = cfg.get("params", {})
    if "u0" in p:
        if len(p["u0"]) != basis.size:
            raise ConfigError("params.u0", f"expected {basis.size} coefficients")
        u0 = np.array([complex(a, b) for a, b in p["u0"]])
    else:
        u0 = random_subspace_function(basis, int(cfg["seed"])).coefficients
    prob = ControlProblem(basis, S, p.get("T", defaults.HORIZON), u0)
    n_time = p.get("n_time", defaults.N_TIME)
    res = minimal_norm_control(prob, n_time)
    out = res.to_dict()
    if p.get("lebeau_robbiano", False):
        out["lebeau_robbiano"] = lebeau_robbiano(prob)
    run.json("control.json", out)
    t = np.linspace(0, prob.T, n_time + 1)
    run.csv("control_norm.csv", ["t", "norm"],
            [{"t": float(a), "norm": float(b)} for a, b in zip(t, res.norm_trajectory)])
    lim = tol["eta_ctrl"] * max(res.u0_norm, 1e-300)
    run.check("null-control", res.final_norm <= lim, f"{res.final_norm:.3e}")
    run.check("null-control-half-step", res.final_norm_check <= lim, f"{res.final_norm_check:.3e}")


HANDLERS = {
    "decompose": cmd_decompose, "spectrum": cmd_spectrum, "basis-check": cmd_basis_check,
    "bernstein": cmd_bernstein, "recursion": cmd_recursion, "good-bad": cmd_good_bad,
    "remez": cmd_remez, "thickness": cmd_thickness, "observability": cmd_observability,
    "optimality-scan": cmd_optimality_scan, "necessity": cmd_necessity,
    "heat-control": cmd_heat_control,
}


# --------------------------------------------------------------------------

def _versions() -> dict:
    import scipy

    return {"landaulab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landaulab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent scenario evaluations")
    parser.add_argument("--tolerances", type=Path, help="JSON file of tolerance overrides")
    return parser


def run(command: str, cfg: dict, out: Path, jobs: int = 1, tol_overrides: dict | None = None) -> int:
    """Validate, execute and write artifacts; returns the exit status."""
    t0 = time.perf_counter()
    try:
        validate_config(command, cfg)
        if tol_overrides:
            bad = set(tol_overrides) - set(defaults.TOLERANCES)
            if bad:
                raise ConfigError(f"tolerances.{sorted(bad)[0]}", "unknown tolerance")
        tol = defaults.tolerances({**cfg.get("tolerances", {}), **(tol_overrides or {})})
        r = Run(out)
        HANDLERS[command](cfg, r, tol, jobs)
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc.message}", file=sys.stderr)
        return 2
    if r.nonfinite:
        r.check("finite-output", False, ", ".join(sorted(set(r.nonfinite))))
    status = 0 if all(a["passed"] for a in r.assertions.values()) else 1
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    manifest = {
        "command": command,
        "config": cfg,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": cfg.get("seed"),
        "versions": _versions(),
        "artifacts": sorted(r.files),
        "assertions": r.assertions,
        "status": status,
        "timing": {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                   "wall_time_s": round(time.perf_counter() - t0, 3)},
    }
    r.json("manifest.json", manifest)
    r.write()
    for ident, a in sorted(r.assertions.items()):
        if not a["passed"]:
            print(f"assertion failed: {ident} {a['detail']}".rstrip(), file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error at <file>: {exc}", file=sys.stderr)
            return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    overrides = None
    if args.tolerances is not None:
        try:
            overrides = json.loads(args.tolerances.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error at <tolerances>: {exc}", file=sys.stderr)
            return 2
    return run(args.command, cfg, args.out, max(1, args.jobs), overrides)


if __name__ == "__main__":
    sys.exit(main())
