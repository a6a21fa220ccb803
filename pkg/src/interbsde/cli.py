"""Command line runner: ``interbsde {solve,verify,study} --config FILE``.

Output files (all carry the config hash and seed):

solve   solution.csv  k,j,m,Y_a,Z_a_l per (particle, node, path)
        picard.json   residual history and converged flag
        flow.csv      j,t,gamma2_to_terminal (path-averaged W2 to the terminal measure)
verify  verify.json   pass/fail per check
study   convergence.csv  N,terminal_gamma2_sq,max_flow_gamma2_sq,mean_sq_dY,int_sq_dZ,converged
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, config as cfgmod
from .solver import picard_iterate, uniqueness_probe
from .stochastic import simulate_paths
from .transport import wasserstein2_squared

logger = logging.getLogger("interbsde")


def _meta(cfg) -> dict:
    return {"config_sha256": cfg.sha256, "seed": cfg.seed, "schema_version": cfgmod.SCHEMA_VERSION}


def _csv_header(cfg) -> str:
    return f"# config_sha256={cfg.sha256}\n# seed={cfg.seed}\n"


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_all(out_dir: Path, files: dict[str, str]):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        tmp = out_dir / (name + ".tmp")
        tmp.write_text(text)
        tmp.replace(out_dir / name)


def _flow_table(cfg, sol) -> str:
    n = cfg.grid.n_steps
    terminal = sol.Y[:, n]
    rows = []
    for j in range(n + 1):
        d2 = [wasserstein2_squared(sol.Y[:, j, m], sol.weights, terminal[:, m], sol.weights)
              for m in range(sol.Y.shape[2])]
        rows.append((j, float(cfg.grid.nodes[j]), float(np.mean(np.sqrt(d2)))))
    buf = io.StringIO()
    buf.write(_csv_header(cfg))
    buf.write("j,t,gamma2_to_terminal\n")
    for j, t, g in rows:
        buf.write(f"{j},{t!r},{g!r}\n")
    return buf.getvalue()


def run_solve(cfg, threads: int):
    ensemble = simulate_paths(cfg.grid, cfg.dim, cfg.paths, cfg.seed, threads)
    sol, report = picard_iterate(cfg.mu0, cfg.terminal, cfg.driver, ensemble, cfg.solver)
    picard = {**_meta(cfg), **report.to_dict()}
    files = {
        "solution.csv": sol.to_table(cfg.output["max_paths"], header=_csv_header(cfg)),
        "picard.json": _dump_json(picard),
        "flow.csv": _flow_table(cfg, sol),
    }
    status = 0 if report.converged else 1
    if not report.converged:
        logger.error("Picard iteration did not converge in %d iterations", report.iterations)
    return status, files


def _default_probe(cfg):
    atoms = cfg.mu0.atoms
    center = atoms.mean(axis=0)
    spread = float(np.max(np.abs(atoms - center))) or 1.0
    return center, center + 0.1 * spread


def run_verify(cfg, threads: int):
    v = cfg.verify
    ensemble = simulate_paths(cfg.grid, cfg.dim, cfg.paths, cfg.seed, threads)
    checks = {}

    lip = analysis.check_driver_lipschitz(cfg.driver, v["lipschitz_trials"], cfg.seed, cfg.dim)
    checks["driver_lipschitz"] = {"passed": lip.passed, "worst_ratio": lip.worst_ratio,
                                  "violations": lip.violations, "trials": lip.trials,
                                  "declared_L1": cfg.driver.lipschitz}

    uq = uniqueness_probe(cfg.mu0, cfg.terminal, cfg.driver, ensemble, cfg.solver)
    checks["uniqueness"] = {"passed": uq.status == "ok" and uq.y_discrepancy <= v["uniqueness_y_tol"]
                            and uq.z_discrepancy <= v["uniqueness_z_tol"],
                            "status": uq.status, "y_rms": uq.y_discrepancy, "z_rms": uq.z_discrepancy}

    heavy = picard_iterate(cfg.mu0, cfg.terminal, cfg.driver, ensemble, cfg.solver)
    pair = (heavy, heavy)
    center, other = _default_probe(cfg)
    u1 = np.asarray(v["u1"], dtype=float) if v["u1"] is not None else center
    u2 = np.asarray(v["u2"], dtype=float) if v["u2"] is not None else other

    if not heavy[1].converged:
        checks["stability_identity"] = {"passed": False, "status": "inconclusive"}
        checks["stability_probe"] = {"passed": False, "status": "inconclusive"}
        checks["stability_scaling"] = {"passed": False, "status": "inconclusive"}
    else:
        same = analysis.check_stability(cfg.solver, cfg.driver, cfg.terminal, u1, u1, cfg.mu0, cfg.mu0,
                                        ensemble, threads, heavy=pair)
        checks["stability_identity"] = {"passed": same.converged and same.left <= v["identity_tol"],
                                        **same.to_dict()}
        probe = analysis.check_stability(cfg.solver, cfg.driver, cfg.terminal, u1, u2, cfg.mu0, cfg.mu0,
                                         ensemble, threads, heavy=pair)
        checks["stability_probe"] = {"passed": probe.converged and bool(np.isfinite(probe.ratio)),
                                     **probe.to_dict()}
        direction = np.ones(cfg.dim) / np.sqrt(cfg.dim)
        lefts = []
        for delta in v["deltas"]:
            rec = analysis.check_stability(cfg.solver, cfg.driver, cfg.terminal, u1, u1 + delta * direction,
                                           cfg.mu0, cfg.mu0, ensemble, threads, heavy=pair)
            lefts.append(rec.left_at_zero)
        ratios = [a / b if b > 0 else float("inf") for a, b in zip(lefts, lefts[1:])]
        lo, hi = v["scaling_band"]
        checks["stability_scaling"] = {"passed": all(lo <= r <= hi for r in ratios),
                                       "deltas": list(v["deltas"]), "left_at_zero": lefts, "ratios": ratios}

    passed = all(c["passed"] for c in checks.values())
    doc = {**_meta(cfg), "passed": passed, "checks": checks}
    return (0 if passed else 1), {"verify.json": _dump_json(doc)}


def run_study(cfg, threads: int):
    if cfg.family is None:
        raise cfgmod.ConfigError("measure.family", "a study needs a quantizable measure family")
    st = cfg.study
    ensemble = simulate_paths(cfg.grid, cfg.dim, cfg.paths, cfg.seed, threads)
    probes = [np.full(cfg.dim, p) if np.ndim(p) == 0 else p for p in st["probes"]]
    study = analysis.convergence_study(cfg.family, st["n_list"], st["reference_n"], cfg.driver, cfg.terminal,
                                       ensemble, cfg.solver, probes, threads, cfg.seed)
    buf = io.StringIO()
    buf.write(_csv_header(cfg))
    if study.aborted:
        buf.write("# partial=true\n")
    buf.write("N,terminal_gamma2_sq,max_flow_gamma2_sq,mean_sq_dY,int_sq_dZ,converged\n")
    for r in study.records:
        buf.write(f"{r.n_atoms},{r.terminal_gap!r},{r.max_flow_gap!r},{r.y_gap!r},{r.z_gap!r},"
                  f"{int(r.converged)}\n")
    if not study.trend_holds:
        logger.error("convergence trend assertions failed%s", " (study aborted)" if study.aborted else "")
    return (0 if study.trend_holds else 1), {"convergence.csv": buf.getvalue()}


COMMANDS = {"solve": run_solve, "verify": run_verify, "study": run_study}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="interbsde", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML/JSON experiment document")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--threads", type=int, default=1, help="parallelism hint; results do not depend on it")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        cfg = cfgmod.load(args.config, args.seed)
        status, files = COMMANDS[args.command](cfg, args.threads)
    except cfgmod.ConfigError as exc:
        logger.error("invalid config: %s", exc)
        return 2
    except (ValueError, RuntimeError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 3
    out_dir = Path(args.out or cfg.output["dir"])
    try:
        _write_all(out_dir, files)
    except OSError as exc:
        logger.error("cannot write outputs: %s", exc)
        return 4
    logger.info("wrote %s to %s", ", ".join(sorted(files)), out_dir)
    return status


if __name__ == "__main__":
    sys.exit(main())
