"""Batch front end: ``catconv run CONFIG --out DIR [flags]``.

The configuration is flat ``key = value`` text, one key per line, ``#``
starts a comment.  Lists are comma separated.  Per-species profiles use
indexed keys (``inlet.1``, ``wall.1``, ...), species counted from 1.

Exit codes: 0 success, 2 configuration/validation error, 3 solver
non-convergence.  On any failure nothing is left in the output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundary import StepSizeError, contraction_probe_phi
from .coupling import (ConvergenceError, Setup, energy_audit, picard_solve,
                       stability_experiment, theta_continuation)
from .cylinder import lipschitz_probe_psi
from .kinetics import MODELS, make_model, verify_hypotheses
from .oracle import OracleError, solve_monolithic
from .problem import CosineProfile, PolynomialProfile, ProblemSpec
from .spaces import CylinderField, as_array

log = logging.getLogger("catconv")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default); default None means required
SCHEMA = {
    "n_species": (int, None),
    "beta_f": (_floats, None),
    "gamma_s": (_floats, None),
    "theta_Ns": (float, None),
    "theta_reg": (_floats, None),
    "delta": (_ints, None),
    "kinetics.name": (str, None),
    "kinetics.params": (_floats, ""),
    "horizon": (float, None),
    "grid.n_r": (int, "64"),
    "grid.n_z": (int, "32"),
    "grid.n_t": (int, "32"),
    "grid.m": (int, ""),
    "grid.radial": (str, "uniform"),
    "tol": (float, "1e-9"),
    "max_iter": (int, "100"),
    "seed": (int, "0"),
    "output.channel": (_bool, "true"),
    "continuation.thetas": (_floats, "0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625"),
    "continuation.tol": (float, "1e-3"),
    "sweep.horizons": (_floats, "0.015625, 0.03125, 0.0625, 0.125, 0.25, 0.5"),
}
INDEXED = ("inlet", "wall")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    raw: dict
    values: dict
    spec: ProblemSpec

    def echo(self) -> str:
        lines = ["# normalized configuration; rerun with: catconv run <this file> --out DIR"]
        for key in sorted(self.raw):
            lines.append(f"{key} = {self.raw[key]}")
        return "\n".join(lines) + "\n"


def read_config(path) -> dict:
    raw = {}
    problems = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            problems.append(f"{key}: duplicate key (line {lineno})")
        raw[key] = value
    if problems:
        raise ConfigError(problems)
    return raw


def parse_config(raw: dict) -> RunConfig:
    """Validate raw strings against SCHEMA and build the ProblemSpec."""
    problems = []
    values = {}
    full = {}
    for key in raw:
        base = key.split(".")[0]
        if key not in SCHEMA and base not in INDEXED:
            problems.append(f"{key}: unknown key")
    for key, (conv, default) in SCHEMA.items():
        if key not in raw:
            if default is None:
                problems.append(f"{key}: missing required key")
                continue
            text = default
        else:
            text = raw[key]
        if text == "" and default == "":
            values[key] = None
            continue
        full[key] = text
        try:
            values[key] = conv(text)
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)

    n = values["n_species"]
    if n < 1:
        problems.append("n_species: must be >= 1")
    for key, want in (("beta_f", n), ("gamma_s", n), ("delta", n), ("theta_reg", n - 1)):
        if len(values[key]) != want:
            problems.append(f"{key}: expected {want} entries, got {len(values[key])}")
    for key in ("beta_f", "gamma_s"):
        if any(x <= 0 for x in values[key]):
            problems.append(f"{key}: entries must be positive")
    if any(x < 0 for x in values["theta_reg"]):
        problems.append("theta_reg: entries must be nonnegative")
    if not values["theta_Ns"] > 0:
        problems.append("theta_Ns: must be positive")
    if any(s not in (-1, 1) for s in values["delta"]):
        problems.append("delta: entries must be -1 or +1")
    if not values["horizon"] > 0:
        problems.append("horizon: must be positive")
    for key in ("grid.n_r", "grid.n_z", "grid.n_t"):
        if values[key] < 3:
            problems.append(f"{key}: must be >= 3")
    if values["grid.m"] is not None and not 1 <= values["grid.m"] < values["grid.n_r"] - 2:
        problems.append("grid.m: must satisfy 1 <= m < grid.n_r - 2")
    if values["grid.radial"] not in ("uniform", "clustered"):
        problems.append("grid.radial: must be 'uniform' or 'clustered'")
    if not values["tol"] > 0:
        problems.append("tol: must be positive")
    if values["max_iter"] < 1:
        problems.append("max_iter: must be >= 1")
    if values["kinetics.name"] not in MODELS:
        problems.append(f"kinetics.name: unknown model {values['kinetics.name']!r}; "
                        f"choose from {sorted(MODELS)}")

    profiles = {}
    for base, cls in (("inlet", PolynomialProfile), ("wall", CosineProfile)):
        coeffs = []
        for i in range(1, max(n, 0) + 1):
            key = f"{base}.{i}"
            if key not in raw:
                problems.append(f"{key}: missing required key")
                continue
            full[key] = raw[key]
            try:
                coeffs.append(tuple(_floats(raw[key])) or (0.0,))
            except ValueError as exc:
                problems.append(f"{key}: {exc}")
        for key in raw:
            if key.startswith(base + "."):
                idx = key.split(".", 1)[1]
                if not (idx.isdigit() and 1 <= int(idx) <= n):
                    problems.append(f"{key}: species index out of range 1..{n}")
        profiles[base] = cls(tuple(coeffs))
    if problems:
        raise ConfigError(problems)

    try:
        model = make_model(values["kinetics.name"], values["kinetics.params"] or [],
                           values["delta"])
    except (ValueError, TypeError) as exc:
        raise ConfigError([f"kinetics.params: {exc}"]) from None
    hyp = verify_hypotheses(model, seed=values["seed"])
    if not hyp.passed:
        raise ConfigError([f"kinetics.name: model {model.name!r} fails the rate hypotheses "
                           f"(Lipschitz ratio {hyp.max_lipschitz_ratio:.3g} vs documented "
                           f"{model.lipschitz_k:g}, min rate {hyp.min_rate:.3g})"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = ProblemSpec(
            beta_f=tuple(values["beta_f"]), gamma_s=tuple(values["gamma_s"]),
            theta_Ns=values["theta_Ns"], theta_reg=tuple(values["theta_reg"]),
            model=model, inlet=profiles["inlet"], wall0=profiles["wall"],
            T=values["horizon"], n_r=values["grid.n_r"], n_z=values["grid.n_z"],
            n_t=values["grid.n_t"], m=values["grid.m"], radial_kind=values["grid.radial"])
    if model.lipschitz_k * spec.T / (spec.n_t - 1) > 1.0:
        raise ConfigError([f"grid.n_t: time step too large for kinetics rate "
                           f"{model.lipschitz_k:g}; need dt <= {1.0 / model.lipschitz_k:.3e}"])
    return RunConfig(full, values, spec)


def load_config(path) -> RunConfig:
    return parse_config(read_config(path))


# ---------------------------------------------------------------- output

def _write_csv(path, columns, header):
    data = np.column_stack([np.ravel(c) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


def write_fields(out: Path, u_s, u_f, disc, channel=True):
    out.mkdir(parents=True, exist_ok=True)
    us = as_array(u_s)
    Z, Tt = np.meshgrid(disc.axial_nodes, disc.time_nodes, indexing="ij")
    for i in range(us.shape[0]):
        _write_csv(out / f"wall_species{i + 1}.csv", [Z, Tt, us[i]], ["z", "t", "value"])
    if channel:
        uf = as_array(u_f)
        R, Z3, T3 = np.meshgrid(disc.radial_nodes, disc.axial_nodes, disc.time_nodes,
                                indexing="ij")
        for i in range(uf.shape[0]):
            _write_csv(out / f"channel_species{i + 1}.csv", [R, Z3, T3, uf[i]],
                       ["r", "z", "t", "value"])


def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


# ------------------------------------------------------------- pipelines

def _rel_l2(a, b, w):
    return float(np.sqrt(np.sum((a - b) ** 2 * w) / np.sum(b * b * w)))


def oracle_check(spec: ProblemSpec, u_s, u_f, disc) -> dict:
    of, os_ = solve_monolithic(spec)
    wzt = np.outer(disc.quad_w_z, disc.quad_w_t)
    wcyl = disc.quad_w_rw[:, None, None] * wzt[None]
    return dict(
        wall_rel_l2=_rel_l2(as_array(u_s), os_.values, wzt[None]),
        channel_rel_l2=_rel_l2(as_array(u_f), of.values, wcyl[None]),
    )


def audit_probes(spec: ProblemSpec, setup: Setup, seed: int, horizons) -> dict:
    """Psi / Phi probe summaries and the stability growth for the AuditReport."""
    rng = np.random.default_rng(seed)
    disc, basis = setup.disc, setup.basis
    z = disc.axial_nodes
    s = disc.time_nodes / disc.T
    n = spec.n_species

    def wall_pair():
        # perturbations vanish at z = 0 so both members share the inlet corner
        a = 0.1 * rng.normal(size=(n, 4, 3))
        out = np.zeros((n, disc.n_z, disc.n_t))
        for k in range(1, 5):
            for j in range(3):
                out += (a[:, k - 1, j][:, None, None] * (np.cos(k * np.pi * z) - 1)[None, :, None]
                        * (s ** j)[None, None, :])
        return setup.seed() + out

    psi = lipschitz_probe_psi(wall_pair(), wall_pair(), setup.inlet, disc, basis,
                              spec.beta_f).as_dict()

    amp = 0.05 * rng.uniform(0.5, 1.5)

    def channel(sign):
        def make(d):
            r, zz, t = d.radial_nodes, d.axial_nodes, d.time_nodes
            base = setup.wall0[:, None, :, None] * np.ones((1, d.n_r, 1, d.n_t))
            bump = ((1 - r * r)[:, None, None] * (zz + 0.3 * np.sin(np.pi * zz))[None, :, None]
                    * (1 + t)[None, None, :])
            return CylinderField(base + sign * amp * bump[None])
        return make

    phi = contraction_probe_phi(channel(1.0), channel(-1.0), setup.params, disc, basis,
                                horizons).as_dict()
    stab = stability_experiment(spec, 1e-3).as_dict()
    return dict(psi=psi, phi=phi, stability=stab)


def run_pipeline(cfg: RunConfig, out: Path, flags) -> int:
    spec = cfg.spec
    report = {}
    setup = Setup(spec)
    u_s, u_f, pic = picard_solve(spec, cfg.values["tol"], cfg.values["max_iter"], setup=setup)
    report["picard"] = pic.as_dict()
    audit = energy_audit(u_s, spec, setup.disc)
    if flags.audit:
        probes = audit_probes(spec, setup, flags.seed if flags.seed is not None
                              else cfg.values["seed"], cfg.values["sweep.horizons"])
        audit.psi_ratios = probes["psi"]
        audit.phi_ratios = probes["phi"]
        audit.stability_growth = probes["stability"]
    report["audit"] = audit.as_dict()
    write_fields(out, u_s, u_f, setup.disc, cfg.values["output.channel"])

    if flags.oracle_check:
        report["oracle_check"] = oracle_check(spec, u_s, u_f, setup.disc)

    if flags.sweep_T:
        sweep = []
        for T in cfg.values["sweep.horizons"]:
            sp = spec.replace(T=T)
            _, _, rep = picard_solve(sp, cfg.values["tol"], cfg.values["max_iter"],
                                     raise_on_failure=False)
            sweep.append(dict(T=T, contraction_ratio=rep.contraction_ratio,
                              converged=rep.converged, iterations=rep.iterations))
        ratios = [s["contraction_ratio"] for s in sweep]
        report["sweep"] = dict(runs=sweep, nondecreasing=bool(np.all(np.diff(ratios) >= 0)))

    if flags.theta_continuation:
        sols, crep = theta_continuation(
            spec, cfg.values["continuation.thetas"], cfg.values["continuation.tol"],
            picard_tol=cfg.values["tol"], max_iter=cfg.values["max_iter"])
        disc = setup.disc
        for th, (s_th, f_th) in sols.items():
            write_fields(out / f"theta_{th:.10g}", s_th, f_th, disc, cfg.values["output.channel"])
        _dump(out / "continuation.json", crep.as_dict())
        report["continuation"] = crep.as_dict()

    _dump(out / "report.json", report)
    (out / "config.cfg").write_text(cfg.echo())
    return EXIT_OK


def run(config_path, out, flags) -> int:
    try:
        cfg = load_config(config_path)
    except FileNotFoundError:
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
    try:
        code = run_pipeline(cfg, stage, flags)
    except ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    except StepSizeError as exc:
        print(f"config error: grid.n_t: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    if code != EXIT_OK:
        shutil.rmtree(stage, ignore_errors=True)
        return code
    out.mkdir(exist_ok=True)
    for item in stage.iterdir():
        target = out / item.name
        if target.is_dir():
            shutil.rmtree(target)
        elif target.exists():
            target.unlink()
        item.rename(target)
    stage.rmdir()
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catconv",
                                 description="Coupled channel/wall catalytic converter solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("run", help="solve one configuration")
    rp.add_argument("config")
    rp.add_argument("--out", required=True, help="output directory")
    rp.add_argument("--oracle-check", action="store_true",
                    help="compare with the monolithic finite-difference reference")
    rp.add_argument("--audit", action="store_true",
                    help="add Lipschitz, contraction and stability probes to the audit")
    rp.add_argument("--theta-continuation", action="store_true",
                    help="solve for the configured decreasing wall diffusivities")
    rp.add_argument("--sweep-T", action="store_true",
                    help="record the Picard contraction ratio over sweep.horizons")
    rp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    return run(args.config, args.out, args)


if __name__ == "__main__":
    sys.exit(main())
