"""Command-line front end.

Every subcommand writes one JSON report (to ``--out``/<command>.json, or
stdout without ``--out``) plus a CSV table next to it.  Exit codes: 0 all
checks within tolerance, 1 tolerance breach, 2 usage error.

Configuration may come from a flat ``key=value`` file (``--config``); keys
are the long flag names with dashes or underscores.  Flags given on the
command line override file values.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import MODULE_VERSIONS, __version__
from .fileio import (MeshFileError, config_hash, dumps_json, load_mesh, mesh_summary,
                     rows_to_csv, save_mesh)

EXIT_PASS, EXIT_BREACH, EXIT_USAGE = 0, 1, 2
FAULT_ENV = "RIESZLAB_INJECT_FAULT"


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config


def parse_config_text(text: str) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def canonical_config(config: dict) -> str:
    """Sorted ``key=value`` text; parsing it back yields the same strings."""
    lines = []
    for k in sorted(config):
        v = config[k]
        if v is None:
            continue
        if isinstance(v, bool):
            v = "1" if v else "0"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _int_list(text) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _fault(text):
    if text in (None, "", "none"):
        return None
    try:
        i, j = (int(x) for x in str(text).split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"fault must be 'i,j' blade bitmasks: {text!r}") from exc
    return (i, j)


# --------------------------------------------------------------- arguments


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--out", help="output directory for the JSON report and CSV table")
    p.add_argument("--deterministic", type=_bool, nargs="?", const=True,
                   help="single-threaded run; omit timings so reports are byte-identical")
    p.add_argument("--tol-scale", type=float, help="multiply every tolerance (default 1)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")


DEFAULTS = {
    "verify-clifford": {"n": 3, "pairs": 10_000, "inject_fault": None},
    "verify-identities": {"family": "ellipse", "N": None, "exterior": False, "fields": 6},
    "semmes": {"poly": None, "n": 3, "points": 100},
    "expand": {"n": 2, "modes": None, "poly": None, "L_max": 9, "mschedule": "l2", "C": None},
    "regularity": {"family": "ellipse", "alpha": 0.5, "op": "riesz", "levels": [256, 1024, 4096],
                   "estimator": "second_difference", "p": None, "s": None, "expect": None,
                   "jitter": True},
    "mesh": {"action": "inspect", "family": "ellipse", "N": 256, "file": None, "field": None},
}
COMMON_DEFAULTS = {"config": None, "out": None, "deterministic": False, "tol_scale": 1.0,
                   "seed": 0}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rieszlab", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"rieszlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-clifford", help="Clifford algebra invariant suite",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--n", type=int, help="dimension, 1..6 (default 3)")
    p.add_argument("--pairs", type=int, help="random pairs for norm checks (default 10000)")
    p.add_argument("--inject-fault", type=_fault, help=argparse.SUPPRESS)

    p = sub.add_parser("verify-identities", help="boundary identity suite on a smooth domain",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--family", help="circle, ellipse or sphere (default ellipse)")
    p.add_argument("--N", type=int, help="node count (default 2048; sphere 3200)")
    p.add_argument("--exterior", type=_bool, nargs="?", const=True,
                   help="run on the unbounded complementary component")
    p.add_argument("--fields", type=int, help="trigonometric test fields (default 6)")

    p = sub.add_parser("semmes", help="Semmes decomposition residuals for a polynomial",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--poly", help="odd harmonic homogeneous polynomial, e.g. 'x1*x2*x3'")
    p.add_argument("--n", type=int, help="dimension (default 3)")
    p.add_argument("--points", type=int, help="random evaluation points (default 100)")

    p = sub.add_parser("expand", help="spherical-harmonic expansion and summability report",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--n", type=int, help="2 or 3 (default 2)")
    p.add_argument("--modes", help="explicit modes, e.g. 'l=3:1.0' or 'l=1:0.5,l=3:0:1'")
    p.add_argument("--poly", help="kernel P(x)/|x|^(n-1+deg P) sampled on the sphere")
    p.add_argument("--L-max", dest="L_max", type=int, help="highest degree (default 9)")
    p.add_argument("--mschedule", help="l2, zero or const:k (default l2)")
    p.add_argument("--C", type=float, help="use weight C^l 2^(l^2) instead of 4^(l^2)")

    p = sub.add_parser("regularity", help="refinement study of R_j 1 regularity",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("--family", help="circle, ellipse, square or bump_circle (default ellipse)")
    p.add_argument("--alpha", type=float, help="Hölder exponent (default 0.5)")
    p.add_argument("--op", help="riesz, rieszJ or normal (default riesz)")
    p.add_argument("--levels", type=_int_list, help="node counts (default 256,1024,4096)")
    p.add_argument("--N", type=int, help="shorthand for levels N/16, N/4, N")
    p.add_argument("--estimator", help="second_difference or holder")
    p.add_argument("--p", type=float, help="Besov p (with --s adds a Besov column)")
    p.add_argument("--s", type=float, help="Besov smoothness s")
    p.add_argument("--expect", help="exit 1 unless the verdict equals this")
    p.add_argument("--jitter", type=_bool, nargs="?", const=True,
                   help="repeat at +-10%% node counts (default on)")

    p = sub.add_parser("mesh", help="emit or inspect mesh files",
                       argument_default=argparse.SUPPRESS)
    _common(p)
    p.add_argument("action", nargs="?", choices=["emit", "inspect"], help="default inspect")
    p.add_argument("--family", help="family for emit (default ellipse)")
    p.add_argument("--N", type=int, help="node count for emit (default 256)")
    p.add_argument("--file", help="mesh file to write (emit) or read (inspect)")
    p.add_argument("--field", help="emit: append a field ('riesz' or 'normal')")
    return parser


def _coerce_config(parser: argparse.ArgumentParser, command: str, raw: dict) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[command]
    actions = {a.dest: a for a in sp._actions if a.dest != "help"}
    out = {}
    for key, text in raw.items():
        if key not in actions or key == "config":
            raise UsageError(f"unknown config key {key!r} for {command}")
        act = actions[key]
        try:
            out[key] = act.type(text) if act.type else text
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
        if act.choices and out[key] not in act.choices:
            raise UsageError(f"config key {key}: {out[key]!r} not in {sorted(act.choices)}")
    return out


def resolve_config(argv) -> dict:
    """Defaults, then config file, then explicit flags."""
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    cfg = {"command": command, **COMMON_DEFAULTS, **DEFAULTS[command]}
    if ns.get("config"):
        try:
            text = Path(ns["config"]).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        cfg.update(_coerce_config(parser, command, parse_config_text(text)))
    cfg.update(ns)
    if command == "regularity" and "N" in cfg:
        N = cfg.pop("N")
        if "levels" not in ns:
            cfg["levels"] = [N // 16, N // 4, N]
    if command == "verify-identities" and cfg["N"] is None:
        # 40 x 80 is the coarsest sphere whose far-side C1 check clears 1e-6 at depth 0.3
        cfg["N"] = 3200 if cfg["family"] == "sphere" else 2048
    if command == "verify-clifford" and cfg.get("inject_fault") is None and os.environ.get(FAULT_ENV):
        cfg["inject_fault"] = _fault(os.environ[FAULT_ENV])
    cfg["config"] = None  # the file itself is not part of the run identity
    return cfg


# ---------------------------------------------------------------- commands


def cmd_verify_clifford(cfg: dict) -> tuple[dict, list[dict], bool]:
    from .clifford import check_axioms

    n = cfg["n"]
    if not 1 <= n <= 6:
        raise UsageError("verify-clifford needs 1 <= n <= 6")
    rep = check_axioms(n, pairs=cfg["pairs"], seed=cfg["seed"], sign_fault=cfg["inject_fault"])
    rows = [{"check": "submultiplicativity", "value": rep["max_submult_ratio"],
             "bound": rep["submult_bound"]},
            {"check": "vector_isometry", "value": rep["max_isometry_rel_err"], "bound": 1e-12}]
    rows += [{"check": f["check"], "value": None, "bound": None,
              "blades": f.get("blades")} for f in rep["failures"]]
    if cfg["inject_fault"] is not None:
        rep["injected_fault"] = list(cfg["inject_fault"])
    return rep, rows, rep["passed"]


def cmd_verify_identities(cfg: dict) -> tuple[dict, list[dict], bool]:
    from .geometry import SMOOTH_FAMILIES, make_family
    from .identities import identity_suite

    fam = cfg["family"]
    if fam not in SMOOTH_FAMILIES:
        raise UsageError(
            f"identity suite refused for family {fam!r}: the identities are only "
            f"asserted on smooth boundaries ({', '.join(sorted(SMOOTH_FAMILIES))}); "
            "corners and cusps break the quadrature error model")
    mesh = make_family(fam, cfg["N"])
    if cfg["exterior"]:
        mesh = mesh.flipped()
    rep = identity_suite(mesh, tol_scale=cfg["tol_scale"], fields=cfg["fields"], seed=cfg["seed"])
    rows = [{"identity": r["name"], "residual": r["residual"], "tol": r["tol"],
             "passed": r["passed"]} for r in rep["rows"]]
    return rep, rows, rep["passed"]


def cmd_semmes(cfg: dict) -> tuple[dict, list[dict], bool]:
    from .polynomials import format_poly, parse_poly, semmes_decompose

    if not cfg["poly"]:
        raise UsageError("semmes needs --poly")
    n = cfg["n"]
    P = parse_poly(cfg["poly"], n)
    fam = semmes_decompose(P)
    rng = np.random.default_rng(cfg["seed"])
    x = rng.standard_normal((cfg["points"], n))
    x *= (rng.uniform(0.5, 2.0, len(x)) / np.linalg.norm(x, axis=1))[:, None]
    pro1 = float(np.abs(fam.pro1_residual(x)).max())
    tol1 = (1e-8 if n == 2 else 1e-9) * cfg["tol_scale"]
    tol2 = 1e-9 * cfg["tol_scale"]
    rows = [{"check": "pro1", "r": None, "s": None, "residual": pro1, "tol": tol1}]
    for r in range(1, n + 1):
        for s in range(1, n + 1):
            rows.append({"check": "pro2", "r": r, "s": s,
                         "residual": float(fam.pro2_residual(r, s, x).max()), "tol": tol2})
    for row in rows:
        row["passed"] = row["residual"] <= row["tol"]
    ok = all(r["passed"] for r in rows)
    if n == 2:
        imag_ok = fam.max_imag <= 1e-10 * cfg["tol_scale"]
        rows.append({"check": "imaginary_residue", "r": None, "s": None,
                     "residual": fam.max_imag, "tol": 1e-10 * cfg["tol_scale"], "passed": imag_ok})
        ok = ok and imag_ok
    rep = {"poly": format_poly(P), "n": n, "degree": P.degree, "path": fam.path,
           "points": cfg["points"],
           "P_rs": [[format_poly(Q) for Q in row] for row in fam.Prs],
           "max_pro1": pro1, "max_pro2": max(r["residual"] for r in rows if r["check"] == "pro2"),
           "passed": ok}
    return rep, rows, ok


def parse_modes(text: str, n: int, L_max: int):
    """``l=L:c[:c...]`` items separated by commas.

    n=2: ``c`` values are ``a[:b]`` for ``a cos(lt) + b sin(lt)``.  n=3:
    one value sets ``c_{l,0}``; ``2l+1`` values give ``m = -l..l``.
    """
    modes = [np.zeros(2) if n == 2 else np.zeros(2 * l + 1) for l in range(L_max + 1)]
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if not item.startswith("l="):
            raise UsageError(f"mode {item!r} must look like l=<degree>:<coeff>")
        head, _, rest = item[2:].partition(":")
        try:
            l = int(head)
            vals = [float(v) for v in rest.split(":")] if rest else []
        except ValueError as exc:
            raise UsageError(f"bad mode {item!r}") from exc
        if not 0 <= l <= L_max or not vals:
            raise UsageError(f"mode {item!r}: need 0 <= l <= L_max={L_max} and a coefficient")
        if n == 2:
            if len(vals) > 2:
                raise UsageError(f"mode {item!r}: at most a:b on S^1")
            modes[l][:len(vals)] = vals
            if l == 0:
                modes[l][1] = 0.0
        elif len(vals) == 1:
            modes[l][l] = vals[0]
        elif len(vals) == 2 * l + 1:
            modes[l][:] = vals
        else:
            raise UsageError(f"mode {item!r}: give 1 or {2 * l + 1} coefficients")
    return tuple(modes)


def cmd_expand(cfg: dict) -> tuple[dict, list[dict], bool]:
    from .polynomials import parse_poly, poly_eval
    from .spherical import (SphericalExpansion, expand_on_sphere,
                            single_mode_log_terms, sphere_grid, summability_report)

    n, L = cfg["n"], cfg["L_max"]
    if n not in (2, 3):
        raise UsageError("expand supports n = 2 or 3")
    if bool(cfg["modes"]) == bool(cfg["poly"]):
        raise UsageError("expand needs exactly one of --modes or --poly")
    if cfg["modes"]:
        exp = SphericalExpansion(n, parse_modes(cfg["modes"], n, L), L, cfg["mschedule"])
        source = {"modes": cfg["modes"]}
    else:
        P = parse_poly(cfg["poly"], n)
        if n == 2:
            M = max(8 * L, 64)
            t = 2 * np.pi * np.arange(M) / M
            pts = np.stack([np.cos(t), np.sin(t)], 1)
            exp = expand_on_sphere(poly_eval(P, pts), L, n=2, m_schedule=cfg["mschedule"])
        else:
            pts, w, _, _ = sphere_grid(L, n_polar=2 * L + 8, n_azim=4 * L + 8)
            exp = expand_on_sphere(poly_eval(P, pts), L, n=3, points=pts, weights=w,
                                   m_schedule=cfg["mschedule"])
        # quadrature round-off leaves ~1e-17 modes; zero them so exact kernels stay exact
        floor = 1e-12 * max(exp.sample_l2, 1e-300)
        kept = tuple(c if np.linalg.norm(c) > floor else np.zeros_like(c) for c in exp.modes)
        exp = SphericalExpansion(n, kept, L, exp.m_schedule, residual_l2=exp.residual_l2,
                                 sample_l2=exp.sample_l2)
        source = {"poly": cfg["poly"], "pruned_below": floor}
    rep = summability_report(exp, cfg["C"])
    norms = exp.mode_norms()
    nonzero = [l for l in range(L + 1) if norms[l] > 0]
    rows = [{"l": l, "mode_norm": float(norms[l]) if l <= L else 0.0, "term": t, "log_term": lt}
            for l, t, lt in zip(rep.ls, rep.terms, rep.log_terms)]
    out = {"n": n, "L_max": L, "source": source, "expansion": exp.to_json(),
           "residual_l2": exp.residual_l2, "summability": rep.to_json()}
    ok = True
    if len(nonzero) == 1 and cfg["C"] is None and rep.m_schedule == "l2":
        l0 = nonzero[0]
        logc = single_mode_log_terms(l0, n, float(norms[l0]), rep.ls)
        got = np.array(rep.log_terms)
        fin = np.isfinite(got) & np.isfinite(logc)
        # relative error of the terms themselves, measured through their logs
        rel = float(np.max(np.abs(np.expm1(got[fin] - logc[fin])))) if fin.any() else 0.0
        same_inf = bool(np.all(np.isfinite(got) == np.isfinite(logc)))
        ok = rel <= 1e-10 * cfg["tol_scale"] and same_inf
        out["closed_form"] = {"mode": l0, "max_relative_error": rel, "passed": ok}
    out["passed"] = ok
    return out, rows, ok


def cmd_regularity(cfg: dict) -> tuple[dict, list[dict], bool]:
    from .geometry import make_family
    from .regularity import _operator_field, besov_seminorm, normalize_diameter, refinement_study

    levels = cfg["levels"]
    if len(levels) < 3 or any(N < 16 for N in levels):
        raise UsageError("regularity needs at least 3 levels of 16 or more nodes")
    if not 0 < cfg["alpha"] < 1:
        raise UsageError("alpha must lie in (0, 1)")
    jitter = (0.9, 1.1) if cfg["jitter"] else ()
    rep = refinement_study(cfg["family"], cfg["op"], cfg["alpha"], levels=levels,
                           jitter=jitter, estimator=cfg["estimator"])
    rows = rep.table()
    if (cfg["p"] is None) != (cfg["s"] is None):
        raise UsageError("give both --p and --s for the Besov column")
    if cfg["p"] is not None:
        for row in rows:
            mesh = normalize_diameter(make_family(cfg["family"], row["N"]))
            row["besov"] = besov_seminorm(_operator_field(mesh, cfg["op"]), mesh,
                                          cfg["p"], cfg["s"]).value
    out = rep.to_json()
    out["table"] = rows
    ok = rep.stable
    if cfg["expect"]:
        out["expected"] = cfg["expect"]
        ok = ok and rep.verdict == cfg["expect"]
    out["passed"] = ok
    return out, rows, ok


def cmd_mesh(cfg: dict) -> tuple[dict, list[dict], bool]:
    from .geometry import make_family

    if cfg["action"] == "emit":
        mesh = make_family(cfg["family"], cfg["N"])
        values = None
        if cfg["field"] == "riesz":
            from .regularity import _operator_field
            values = _operator_field(mesh, "riesz")
        elif cfg["field"] == "normal":
            values = mesh.normals
        elif cfg["field"] is not None:
            raise UsageError(f"unknown field {cfg['field']!r}")
        path = cfg["file"] or str(Path(cfg["out"] or ".") / f"{cfg['family']}_{mesh.N}.mesh")
        save_mesh(mesh, path, values)
        summ = mesh_summary(mesh)
        summ["file"] = path
        summ["field"] = cfg["field"]
    else:
        if not cfg["file"]:
            raise UsageError("mesh inspect needs --file")
        try:
            mesh, values = load_mesh(cfg["file"])
        except OSError as exc:
            raise UsageError(f"cannot read mesh file: {exc}") from exc
        summ = mesh_summary(mesh)
        summ["file"] = cfg["file"]
        summ["value_columns"] = 0 if values is None else int(values.shape[1])
    ok = summ["normal_closure"] <= 1e-8 * max(1.0, summ["total_measure"]) * cfg["tol_scale"]
    summ["passed"] = ok
    rows = [{k: v for k, v in summ.items() if not isinstance(v, (list, dict))}]
    return summ, rows, ok


COMMANDS = {
    "verify-clifford": cmd_verify_clifford,
    "verify-identities": cmd_verify_identities,
    "semmes": cmd_semmes,
    "expand": cmd_expand,
    "regularity": cmd_regularity,
    "mesh": cmd_mesh,
}


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def run(cfg: dict) -> tuple[dict, str, int]:
    """Execute a resolved config; returns ``(report, csv_text, exit_code)``."""
    public = {k: v for k, v in cfg.items() if k not in ("config", "out", "deterministic")}
    t0 = time.perf_counter()
    result, rows, ok = COMMANDS[cfg["command"]](cfg)
    report = {
        "command": cfg["command"],
        "config": public,
        "config_canonical": canonical_config(public),
        "config_hash": config_hash(public),
        "version": __version__,
        "module_versions": MODULE_VERSIONS,
        "seed": cfg["seed"],
        "result": result,
        "passed": bool(ok),
        "exit_code": EXIT_PASS if ok else EXIT_BREACH,
    }
    if cfg["deterministic"]:
        report["result"] = _strip_timing(report["result"])
        report["deterministic"] = True
    else:
        report["runtime_s"] = time.perf_counter() - t0
    return report, rows_to_csv(rows), report["exit_code"]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = resolve_config(argv)
    except SystemExit as exc:  # argparse usage errors and --help/--version
        return int(exc.code or 0) and EXIT_USAGE
    except UsageError as exc:
        print(f"rieszlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    limiter = None
    if cfg["deterministic"]:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(1)
    try:
        report, csv_text, code = run(cfg)
    except UsageError as exc:
        print(f"rieszlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, MeshFileError) as exc:
        # invalid parameters rejected by the library (domain errors, bad literals)
        print(f"rieszlab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if limiter is not None:
            limiter.unregister()
    text = dumps_json(report)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        stem = cfg["command"].replace("-", "_")
        (out / f"{stem}.json").write_text(text)
        (out / f"{stem}.csv").write_text(csv_text)
        print(f"{cfg['command']}: {'pass' if code == 0 else 'FAIL'} "
              f"(report {out / (stem + '.json')})")
    else:
        sys.stdout.write(text)
    if code != EXIT_PASS:
        failed = _failures(report)
        if failed:
            print("breaches: " + "; ".join(failed), file=sys.stderr)
    return code


def _failures(report: dict) -> list[str]:
    res = report["result"]
    out = []
    for f in res.get("failures", []):
        out.append(f"{f['check']} blades={f.get('blades')}")
    for r in res.get("rows", []):
        if not r.get("passed", True):
            out.append(f"{r['name']} residual={r['residual']:.3g} tol={r['tol']:.3g}")
    if not out and not res.get("passed", True):
        out.append("see report")
    return out


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
