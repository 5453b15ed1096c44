"""Command line driver: one YAML config for every stage, CSV/JSON outputs stamped with
the config hash and the package version.

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, NumericalError

log = logging.getLogger("adiabatic_monodromy")

STAGES = ("bands", "momentum", "actions", "monodromy", "cocycle", "predict")

DEFAULTS = {
    "potential": {"cosine_coeffs": [0.0, 1.0], "sine_coeffs": []},
    "E": 0.3,
    "epsilon": float(2 * np.pi / 30),
    "approximant": None,
    "delta": 0.05,
    "e_max": 60.0,
    "output_dir": "out",
    "seed": 7,
    "stages": list(STAGES),
    "tolerances": {
        "bloch_identity": 1e-6,
        "symmetry": 1e-8,
        "gauge": 1e-5,
        "phi2_imag": 1e-6,
        "model_det": 1e-12,
        "exact_det": 1e-8,
        "periodicity": 1e-8,
        "containment": 0.95,
        "spacing_ratio": 3.0,
        "margin_eps": 0.2,
        "certificate_slack": 0.05,
    },
    "grids": {
        "certificate": 4096,
        "phi_samples": 16,
        "lyapunov_steps": 100000,
        "oracle_energies": 2001,
        "oracle_phases": 8,
        "quantization": 96,
    },
}

SCHEMA_NOTES = {
    "approximant": "mapping {N, p, q} with 2 pi / epsilon = N + p/q; overrides epsilon",
}


# ---------------------------------------------------------------------------
# config


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown key {key!r}", where)
        if isinstance(base[key], dict) and key not in ("potential",):
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", where)
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _positive(cfg, path, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", path) from None
    if not (np.isfinite(v) and v > 0):
        raise ConfigError(f"must be positive, got {value!r}", path)
    return v


def validate(raw) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping", "<root>")
    cfg = _merge(DEFAULTS, raw)
    from .hill import PeriodicPotential

    PeriodicPotential.from_dict(cfg["potential"])
    try:
        cfg["E"] = float(cfg["E"])
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {cfg['E']!r}", "E") from None
    if cfg["approximant"] is not None:
        ap = cfg["approximant"]
        if not isinstance(ap, dict) or set(ap) - {"N", "p", "q"}:
            bad = sorted(set(ap) - {"N", "p", "q"}) if isinstance(ap, dict) else []
            raise ConfigError(f"unknown key {bad[0]!r}" if bad else SCHEMA_NOTES["approximant"],
                              "approximant" + (f".{bad[0]}" if bad else ""))
        N, p, q = int(ap.get("N", 0)), int(ap.get("p", 0)), int(ap.get("q", 1))
        if N < 1 or q < 1 or not 0 <= p < q:
            raise ConfigError("need N >= 1, q >= 1, 0 <= p < q", "approximant")
        cfg["approximant"] = {"N": N, "p": p, "q": q}
        cfg["epsilon"] = float(2 * np.pi / (N + p / q))
    cfg["epsilon"] = _positive(cfg, "epsilon", cfg["epsilon"])
    cfg["delta"] = float(cfg["delta"])
    if cfg["delta"] < 0:
        raise ConfigError("must be non-negative", "delta")
    cfg["e_max"] = _positive(cfg, "e_max", cfg["e_max"])
    for key, value in cfg["tolerances"].items():
        cfg["tolerances"][key] = _positive(cfg, f"tolerances.{key}", value)
    for key, value in cfg["grids"].items():
        v = _positive(cfg, f"grids.{key}", value)
        if v != int(v):
            raise ConfigError("must be an integer", f"grids.{key}")
        cfg["grids"][key] = int(v)
    if not isinstance(cfg["seed"], int):
        raise ConfigError("must be an integer", "seed")
    stages = cfg["stages"]
    if not isinstance(stages, list) or any(s not in STAGES for s in stages):
        bad = [s for s in stages if s not in STAGES] if isinstance(stages, list) else [stages]
        raise ConfigError(f"unknown stage {bad[0]!r}; choose from {', '.join(STAGES)}", "stages")
    return cfg


def load_config(path=None, overrides=None) -> dict:
    raw = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(str(exc), str(path)) from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"YAML parse error: {exc}", str(path)) from None
    if overrides:
        raw = _merge_raw(raw, overrides)
    return validate(raw)


def _merge_raw(raw, overrides):
    out = copy.deepcopy(raw) if isinstance(raw, dict) else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", "--set")
        key, text = item.split("=", 1)
        value = yaml.safe_load(text)
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def config_hash(cfg) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# stage runner


class Run:
    def __init__(self, cfg, output_dir=None):
        from .hill import PeriodicPotential

        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.out = Path(output_dir or cfg["output_dir"])
        self.V = PeriodicPotential.from_dict(cfg["potential"])
        self._bs = None
        self._ctx = None
        self._actions = None
        self.summary = {"config_hash": self.hash, "version": __version__, "stages": {}, "order": []}

    @property
    def header(self):
        return [f"config_hash: {self.hash}", f"version: {__version__}"]

    def write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        return name

    def write_json(self, name, obj):
        stamped = {"config_hash": self.hash, "version": __version__, **obj}
        return self.write(name, json.dumps(_jsonable(stamped), sort_keys=True, indent=2) + "\n")

    @property
    def bs(self):
        if self._bs is None:
            from .hill import band_edges

            self._bs = band_edges(self.V, self.cfg["e_max"])
        return self._bs

    @property
    def ctx(self):
        if self._ctx is None:
            from .momentum import make_context

            self._ctx = make_context(self.V, self.cfg["E"], bs=self.bs)
        return self._ctx

    @property
    def actions(self):
        if self._actions is None:
            from .actions import compute_actions

            self._actions = compute_actions(self.ctx, self.cfg["epsilon"], self.cfg["delta"])
        return self._actions

    # stages ------------------------------------------------------------------

    def bands(self):
        path = self.write("bands.csv", self.bs.to_csv(self.header))
        return {"E1": self.bs.E1, "n_bands": len(self.bs.intervals()), "csv": path}

    def momentum(self):
        from .momentum import branch_points, stokes_csv, stokes_lines

        bp = branch_points(self.ctx, 3)
        lines = stokes_lines(self.ctx, bp.phi1, max_arc=6.0)
        path = self.write("stokes.csv", stokes_csv(lines, self.header))
        out = {"phi1": bp.phi1, "eta": {str(k): v for k, v in bp.eta.items()},
               "stokes_csv": path, "stokes_lines": len(lines)}
        self.write_json("momentum.json", out)
        return out

    def actions_stage(self):
        d = self.actions.to_dict()
        self.write_json("actions.json", d)
        return d

    def monodromy(self):
        from .monodromy import ExactMonodromy, assemble_model

        model = assemble_model(self.actions)
        self.write_json("model.json", model.to_dict())
        ex = ExactMonodromy(self.V, self.cfg["E"], self.cfg["epsilon"])
        phis = np.arange(self.cfg["grids"]["phi_samples"]) / self.cfg["grids"]["phi_samples"]
        path = self.write("exact_monodromy.csv", ex.to_csv(phis, self.header))
        return {"model_json": "model.json", "exact_csv": path, "h": ex.h}

    def cocycle(self):
        from .cocycle import MatrixCocycle, gap_certificate, iterate, lyapunov
        from .monodromy import assemble_model, shift_h

        model = assemble_model(self.actions)
        h = shift_h(self.cfg["epsilon"])
        cert = gap_certificate(model, h, self.cfg["grids"]["certificate"])
        self.write_json("certificate.json", cert.to_dict())
        c = MatrixCocycle(model, h)
        n = self.cfg["grids"]["lyapunov_steps"]
        est = lyapunov(c, 0.0, n, seed=self.cfg["seed"])
        traj = iterate(c, 0.0, min(n, 10000))
        path = self.write("trajectory.csv", traj.to_csv(self.header))
        out = {"certificate": cert.to_dict(), "lyapunov": est.to_dict(), "trajectory_csv": path}
        self.write_json("cocycle.json", out)
        return out

    def predict(self):
        from .momentum import window_interval
        from .spectrum import (compare, find_quantization_energies, oracle_spectrum, predicted_intervals,
                               rational_approximant)

        cfg = self.cfg
        J = window_interval(self.bs, cfg["delta"])
        roots = find_quantization_energies(self.V, cfg["epsilon"], J, self.bs, grid=cfg["grids"]["quantization"])
        pred = predicted_intervals(self.V, cfg["epsilon"], roots, J, self.bs)
        self.write("prediction.csv", pred.to_csv(self.header))
        self.write_json("prediction.json", pred.to_dict())
        ap = cfg["approximant"]
        N, p, q = (ap["N"], ap["p"], ap["q"]) if ap else rational_approximant(cfg["epsilon"])
        lo, hi = pred.window
        grid = np.linspace(lo, hi, cfg["grids"]["oracle_energies"])
        orc = oracle_spectrum(self.V, N, p, q, grid, n_phases=cfg["grids"]["oracle_phases"])
        self.write("oracle_bands.csv", orc.to_csv(self.header))
        rep = compare(pred, orc, cfg["tolerances"]["margin_eps"] * cfg["epsilon"],
                      min_fraction=cfg["tolerances"]["containment"],
                      max_spacing_ratio=cfg["tolerances"]["spacing_ratio"])
        self.write_json("comparison.json", rep)
        return {"n_centers": len(pred.entries), "comparison": rep}

    def run(self, stage):
        fn = {"actions": self.actions_stage}.get(stage) or getattr(self, stage)
        try:
            result = fn()
        except NumericalError as exc:
            raise StageError(stage, exc) from exc
        self.summary["stages"][stage] = result
        self.summary["order"].append(stage)
        return result

    def finish(self):
        self.write_json("summary.json", self.summary)


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage}: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.original = exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# verification


def _check(name, value, tol, ok=None):
    passed = bool(value <= tol) if ok is None else bool(ok)
    return {"check": name, "value": float(value), "tolerance": float(tol), "passed": passed}


def verify_checks(run: Run, stages):
    """Invariant checks for the selected stages; each entry records value, tolerance, verdict."""
    from .hill import check_lemma21, discriminant, quasi_momentum_real, PeriodicPotential, band_edges

    cfg, tol = run.cfg, run.cfg["tolerances"]
    V = run.V
    checks = []
    if "bands" in stages:
        free = PeriodicPotential()
        E = np.linspace(0.1, 100.0, 200)
        bs0 = band_edges(free, 110.0)
        k = quasi_momentum_real(bs0, free, E)
        checks.append(_check("free quasi-momentum = sqrt(E)", np.max(np.abs(k - np.sqrt(E))), 1e-9))
        D = discriminant(free, E).real
        checks.append(_check("free discriminant = 2 cos sqrt(E)", np.max(np.abs(D - 2 * np.cos(np.sqrt(E)))),
                             1e-9))
        bs = run.bs
        Es = np.concatenate([np.linspace(bs.edges[0] - 2.0, bs.edges[0] - 0.2, 5),
                             np.linspace(bs.edges[0] + 0.2, bs.edges[1] - 0.2, 5),
                             np.linspace(bs.edges[1] + 0.05, bs.edges[2] - 0.05, 5)]) if len(bs.edges) > 2 else []
        res = [check_lemma21(V, float(e), x) for e in Es for x in (0.3, 0.71)] if len(Es) else [0.0]
        checks.append(_check("Bloch product identity residual", max(res), tol["bloch_identity"]))
    if "momentum" in stages:
        from .momentum import KAPPA0, kappa

        rng = np.random.default_rng(cfg["seed"])
        pts = rng.uniform(-2.8, 2.8, 60) + 1j * rng.uniform(0.1, 1.5, 60) * rng.choice([-1, 1], 60)
        worst = 0.0
        for z in pts[:12]:
            a = kappa(run.ctx, KAPPA0, z)
            worst = max(worst, abs(kappa(run.ctx, KAPPA0, -z) - a),
                        abs(kappa(run.ctx, KAPPA0, np.conj(z)) + np.conj(a)))
        checks.append(_check("kappa0 symmetry residual", worst, tol["symmetry"]))
    if "actions" in stages:
        from .actions import gauge_identity_residual

        a = run.actions
        checks.append(_check("|Im phi2|", abs(a.phi2_imag), tol["phi2_imag"]))
        mid = 0.5 * (run.bs.edges[0] + run.bs.edges[1])
        checks.append(_check("gauge identity residual", gauge_identity_residual(run.ctx, mid), tol["gauge"]))
    if "monodromy" in stages:
        from .monodromy import ExactMonodromy, assemble_model, inner_det

        model = assemble_model(run.actions)
        phis = np.random.default_rng(cfg["seed"]).uniform(0, 1, 100)
        checks.append(_check("model det = 1 - t1^2", np.max(np.abs(inner_det(model, phis) - (1 - model.t1**2))),
                             tol["model_det"]))
        ex = ExactMonodromy(V, cfg["E"], cfg["epsilon"], cache=False)
        sample = phis[: cfg["grids"]["phi_samples"]]
        M = ex(sample)
        checks.append(_check("exact det = 1", np.max(np.abs(np.linalg.det(M) - 1)), tol["exact_det"]))
        scale = max(1.0, float(np.max(np.abs(M))))
        checks.append(_check("exact 1-periodicity (relative)", np.max(np.abs(ex(sample + 1) - M)) / scale,
                             tol["periodicity"]))
    if "cocycle" in stages:
        from .cocycle import MatrixCocycle, constant_cocycle, gap_certificate, lyapunov
        from .monodromy import assemble_model, shift_h

        cat = constant_cocycle([[2.0, 1.0], [1.0, 1.0]], (np.sqrt(5) - 1) / 2)
        cert = gap_certificate(cat.M, cat.h, 256)
        rate = np.log((3 + np.sqrt(5)) / 2)
        est = lyapunov(cat, 0.0, cfg["grids"]["lyapunov_steps"], seed=cfg["seed"])
        checks.append(_check("constant cocycle bounds collapse",
                             max(abs(cert.theta_lower - rate), abs(cert.theta_upper - rate)), 1e-12))
        checks.append(_check("constant cocycle rate / stderr", abs(est.value - rate) / est.stderr, 3.0))
        model = assemble_model(run.actions)
        h = shift_h(cfg["epsilon"])
        mcert = gap_certificate(model, h, cfg["grids"]["certificate"])
        if mcert.holds:
            mest = lyapunov(MatrixCocycle(model, h), 0.0, cfg["grids"]["lyapunov_steps"], seed=cfg["seed"])
            slack = tol["certificate_slack"]
            dist = max(0.0, mcert.theta_lower - slack - mest.value, mest.value - mcert.theta_upper - slack)
            checks.append(_check("model rate inside certificate bounds", dist, 0.0, ok=dist == 0.0))
    if "predict" in stages:
        rep = run.run("predict")["comparison"]
        frac = rep.get("containment")
        checks.append(_check("containment fraction", -1.0 if frac is None else frac, tol["containment"],
                             ok=frac is not None and frac >= tol["containment"]))
        ratio = rep.get("spacing_ratio", np.inf)
        checks.append(_check("spacing ratio c2/c1", ratio, tol["spacing_ratio"]))
    return checks


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="adiabatic-monodromy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {s: f"run the {s} stage" for s in STAGES}
    helps.update(run="run every stage listed under 'stages' in dependency order",
                 verify="run the invariant checks for the selected stages")
    for name in STAGES + ("run", "verify"):
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", "-c", help="YAML config file (defaults are used when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. --set E=0.4 or --set grids.certificate=1024")
        p.add_argument("--output-dir", "-o", help="directory for artifacts (overrides output_dir)")
        p.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run = Run(cfg, args.output_dir)
    try:
        if args.command == "verify":
            stages = [s for s in STAGES if s in cfg["stages"]]
            checks = verify_checks(run, stages)
            failed = [c for c in checks if not c["passed"]]
            run.summary["verify"] = {"checks": checks, "failed": len(failed)}
            run.write_json("verify.json", run.summary["verify"])
            run.finish()
            for c in checks:
                mark = "PASS" if c["passed"] else "FAIL"
                print(f"{mark}  {c['check']}: {c['value']:.3e} (tolerance {c['tolerance']:.3e})")
            return 4 if failed else 0
        todo = [s for s in STAGES if s in cfg["stages"]] if args.command == "run" else [args.command]
        for stage in todo:
            result = run.run(stage)
            print(json.dumps(_jsonable({"stage": stage, "config_hash": run.hash, **_brief(result)}),
                             sort_keys=True))
        run.finish()
        return 0
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _brief(result):
    return {k: v for k, v in result.items() if not isinstance(v, (dict, list))}


if __name__ == "__main__":
    sys.exit(main())
