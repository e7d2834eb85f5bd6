"""Command-line runner: ``deltadnls <subcommand> [--config FILE] [--set k=v ...] [--output DIR]``.

Every run writes its artifacts plus ``manifest.json`` (sha256 of each
artifact) into the output directory.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import itertools
import math
import sys
from pathlib import Path

import numpy as np

from .config import SUBCOMMANDS, ConfigError, ExperimentConfig, load_config
from .errors import DNLSError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# -- output formatting -----------------------------------------------------------


def fmt(x) -> str:
    """17 significant digits for floats; plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def to_json(obj, indent: int = 0) -> str:
    """Minimal JSON writer printing floats with 17 significant digits.

    Non-finite floats become the strings ``"nan"``, ``"inf"`` and ``"-inf"``.
    """
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt(obj)
        return f'"{s}"' if s in ("nan", "inf", "-inf") else s
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(to_json(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def csv_text(header: list[str], rows) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(fmt(v) for v in row) + "\n")
    return out.getvalue()


class Artifacts:
    """Collects output files and writes them with a manifest."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def write(self) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        manifest = {}
        for name in sorted(self.files):
            data = self.files[name].encode("ascii")
            (self.outdir / name).write_bytes(data)
            manifest[name] = hashlib.sha256(data).hexdigest()
        text = to_json({"artifacts": manifest}) + "\n"
        (self.outdir / "manifest.json").write_bytes(text.encode("ascii"))
        return self.outdir / "manifest.json"


# -- subcommands --------------------------------------------------------------


def _params(cfg: ExperimentConfig):
    from .lattice import ModelParams

    try:
        return ModelParams(dim=cfg["d"], gamma=cfg["gamma"], sigma=cfg["sigma"], v0=cfg["v0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_modes(cfg: ExperimentConfig, art: Artifacts) -> str:
    from .errors import NoBoundState
    from .lattice import ModelParams
    from .modes import defect_mode, eigensolve_check, mode_mass

    rows = []
    for d, v0 in itertools.product(cfg["d"], cfg["v0"]):
        p = ModelParams(dim=d, v0=v0)
        m = defect_mode(p)
        unit = mode_mass(type(m)(m.eta, m.omega, 1.0, m.staggering, m.dim))
        radius = cfg["radius"] or (60 if d == 1 else 30)
        try:
            mismatch = eigensolve_check(p, radius).mismatch
        except NoBoundState:
            mismatch = math.nan
        branch = "attractive" if v0 > 0 else "repulsive"
        rows.append((d, v0, branch, m.eta, m.omega, unit, mismatch))
    art.add("modes.csv", csv_text(["d", "V0", "branch", "eta", "omega", "mass_unitA", "eig_mismatch"], rows))
    return f"{len(rows)} mode(s) written"


def run_ground_state(cfg: ExperimentConfig, art: Artifacts) -> str:
    from .groundstate import minimize_action_m1, minimize_energy_m2
    from .lattice import write_snapshot

    p = _params(cfg)
    kw = dict(tol=cfg["tol"], step=cfg["step"], max_iter=cfg["max_iter"])
    if cfg["mode"] == "m1":
        gs = minimize_action_m1(cfg["omega"], p, cfg["radius"], **kw)
    else:
        gs = minimize_energy_m2(cfg["nu"], p, cfg["radius"], **kw)
    doc = {
        "omega": gs.omega, "nu": gs.nu, "J": gs.action, "E": gs.energy, "residual": gs.residual,
        "eta": gs.decay_eta, "gamma2": gs.gamma2, "iterations": gs.iterations,
        "found": gs.found, "converged": gs.converged,
    }
    if gs.diagnostic:
        doc["diagnostic"] = gs.diagnostic
    art.add("ground_state.json", to_json(doc) + "\n")
    if cfg["snapshot"]:
        buf = io.StringIO()
        write_snapshot(gs.profile, buf)
        art.add("profile.snapshot", buf.getvalue())
    return f"{cfg['mode']}: omega={fmt(gs.omega)} E={fmt(gs.energy)} residual={gs.residual:.3e}"


def run_threshold_scan(cfg: ExperimentConfig, art: Artifacts) -> str:
    from .thresholds import eta_scan, threshold_formulas

    p = _params(cfg)
    rep = eta_scan(p, cfg["nu"], cfg["grid"], cfg["branch"], cfg["kinetic"])
    formula = threshold_formulas(p)
    art.add("scan.csv", csv_text(["eta", "value"], rep.scan_curve))
    doc = {
        "regime": rep.regime.value, "nu_lower": rep.nu_lower, "nu_upper": rep.nu_upper,
        "inf_eta": rep.inf_eta, "inf_value": rep.inf_value,
        "exists_at_nu": rep.exists_at_nu,
        "formula_regime": formula.regime.value,
        "formula_nu_lower": formula.nu_lower, "formula_nu_upper": formula.nu_upper,
    }
    art.add("verdict.json", to_json(doc) + "\n")
    return f"regime={rep.regime.value} inf={fmt(rep.inf_value)}"


_TRAJ_HEADER = ["t", "mass", "energy", "l2", "l4", "linf", "core_fraction"]


def _initial_field(cfg: ExperimentConfig, p):
    from .dynamics import bound_state_vector
    from .lattice import Boundary, LatticeField

    R, nu = cfg["radius"], cfg["nu"]
    if cfg["init"] == "delta":
        return LatticeField.delta(p.dim, R, amplitude=complex(math.sqrt(nu)), boundary=Boundary.PERIODIC)
    if cfg["init"] == "mode":
        return bound_state_vector(p, R).scaled(complex(math.sqrt(nu)))
    rng = np.random.default_rng(cfg["seed"])
    shape = (2 * R + 1,) * p.dim
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return LatticeField(z * math.sqrt(nu) / np.linalg.norm(z), Boundary.PERIODIC)


def run_evolve(cfg: ExperimentConfig, art: Artifacts) -> str:
    from .dynamics import evolve

    p = _params(cfg)
    rec = evolve(_initial_field(cfg, p), p, cfg["T"], cfg["dt"], cfg["sample_every"])
    art.add("trajectory.csv", csv_text(_TRAJ_HEADER, rec.rows()))
    art.add("summary.json", to_json({"mass_drift": rec.mass_drift(), "energy_drift": rec.energy_drift(),
                                     "steps": rec.steps}) + "\n")
    return f"mass drift {rec.mass_drift():.3e}, energy drift {rec.energy_drift():.3e}"


def run_scatter(cfg: ExperimentConfig, art: Artifacts) -> str:
    from .dynamics import scatter_experiment

    p = _params(cfg)
    T = cfg["T"]
    window = (cfg["t_min"] if cfg["t_min"] is not None else T / 20,
              cfg["t_max"] if cfg["t_max"] is not None else T)
    recs: list = []
    fit = scatter_experiment(p, cfg["nu"], cfg["p"], cfg["radius"], T, cfg["dt"], window,
                             cfg["enforce"], cfg["sample_every"], record=recs)
    art.add("trajectory.csv", csv_text(_TRAJ_HEADER, recs[0].rows()))
    art.add("fit.json", to_json({"p": fit.p, "fitted": fit.fitted_exponent, "predicted": fit.predicted_exponent,
                                 "window": list(fit.fit_window), "r2": fit.r2}) + "\n")
    return f"fitted {fmt(fit.fitted_exponent)} vs predicted {fmt(fit.predicted_exponent)}"


def run_persist(cfg: ExperimentConfig, art: Artifacts) -> str:
    from .dynamics import persistence_experiment

    p = _params(cfg)
    res = persistence_experiment(p, cfg["eps"], cfg["cT"], cfg["radius"], cfg["dt"], cfg["sample_every"])
    art.add("persist.json", to_json({"eps": cfg["eps"], "sup_error": res.sup_error, "bound": res.bound,
                                     "within_bound": res.sup_error <= res.bound}) + "\n")
    return f"sup error {fmt(res.sup_error)} (bound {fmt(res.bound)})"


RUNNERS = {
    "modes": run_modes,
    "ground-state": run_ground_state,
    "threshold-scan": run_threshold_scan,
    "evolve": run_evolve,
    "scatter": run_scatter,
    "persist": run_persist,
}


def run(cfg: ExperimentConfig) -> tuple[int, str]:
    """Execute a validated configuration; returns ``(exit_code, message)``."""
    art = Artifacts(cfg.output_dir)
    try:
        msg = RUNNERS[cfg.subcommand](cfg, art)
    except ConfigError as exc:
        return EXIT_CONFIG, f"config error: {exc}"
    except (DNLSError, ArithmeticError) as exc:
        return EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    art.write()
    return EXIT_OK, msg


# -- argument parsing ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--output", help="output directory (default ./dnls-output)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary line")

    ap = argparse.ArgumentParser(prog="deltadnls", description="Point-defect DNLS lattice experiments")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "ground-state":
            sp.add_argument("--mode", choices=["m1", "m2"])
            for key in ("omega", "nu", "d", "sigma", "gamma", "v0", "radius", "tol"):
                sp.add_argument(f"--{key}")
    return ap


def _overrides(ns: argparse.Namespace) -> dict[str, str]:
    out = {}
    for item in ns.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if ns.subcommand == "ground-state":
        for key in ("mode", "omega", "nu", "d", "sigma", "gamma", "v0", "radius", "tol"):
            val = getattr(ns, key)
            if val is not None:
                out[key] = val
    return out


def main(argv: list[str] | None = None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        cfg = load_config(ns.subcommand, ns.config, _overrides(ns), ns.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, msg = run(cfg)
    if code != EXIT_OK:
        print(msg, file=sys.stderr)
    elif not ns.quiet:
        print(msg)
    return code


if __name__ == "__main__":
    sys.exit(main())
