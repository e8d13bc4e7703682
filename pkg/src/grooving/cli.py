"""Command-line runner: configuration, orchestration and artifact bookkeeping.

Configuration files are flat ``section.key = value`` lines (``#`` starts a
comment).  Unknown or repeated keys are errors.  ``--set key=value`` flags
override file entries.  Every run writes ``resolved-config.txt`` with all
keys after defaulting, ``result.json`` with the checks, and ``manifest.tsv``
listing each produced file with its SHA-256 digest.

Exit status: 0 when every check passes, 2 when a check fails or an
experiment raises, 1 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import logging
import math
import sys
import traceback
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import experiments as ex
from .field import GridSpec, write_snapshot
from .nonlinear import GrooveParams
from .solver import IterationReport, SolverConfig

log = logging.getLogger("grooving")

KINDS = ("kernel-check", "lrep-oracle", "solve", "selfsim", "stability", "decay", "lsp-sweep", "surface-check")
NEEDS_GAMMA = {"solve", "selfsim", "stability", "decay", "surface-check"}
EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration grammar


def _floats(text: str) -> tuple[float, ...]:
    items = [s for s in (p.strip() for p in text.split(",")) if s]
    if not items:
        raise ValueError("empty list")
    return tuple(float(s) for s in items)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in _floats(text) if float(v).is_integer() or _bad_int(v))


def _bad_int(v):
    raise ValueError(f"{v} is not an integer")


def _positive(v):
    return (v > 0 if not isinstance(v, tuple) else all(x > 0 for x in v)), "must be positive"


def _nonneg(v):
    return v >= 0, "must be nonnegative"


def _open_unit(v):
    return 0 < v < 1, "must lie in (0, 1)"


def _dim(v):
    return v in (1, 2), "must be 1 or 2"


def _odd(v):
    return v >= 5 and v % 2 == 1, "must be an odd integer >= 5"


def _sector(v):
    return 0 < v < math.pi / 2, "must lie in (0, pi/2)"


def _initial(v):
    return v in ("zero", "exp", "zero_mass", "far_field", "bump"), "must be one of zero, exp, zero_mass, far_field, bump"


def _any(v):
    return True, ""


@dataclasses.dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], tuple[bool, str]] = _any
    doc: str = ""


KEYS: dict[str, Key] = {
    "run.seed": Key(int, 0, _nonneg, "seed for randomized fixtures"),
    "params.gamma": Key(float, None, _any, "contact slope tan(theta); required for solver experiments"),
    "params.gamma0": Key(float, 0.0, _any, "background slope tan(theta0)"),
    "params.mu": Key(float, 0.5, _open_unit, "Hoelder exponent"),
    "params.delta": Key(float, 0.2, _open_unit, "ball radius for the sup-norm monitor"),
    "params.eps_star": Key(float, 0.05, _positive, "smallness of slope data"),
    "params.delta_star": Key(float, 0.2, _positive, "smallness of the solution"),
    "params.tol": Key(float, 1e-8, _positive, "Picard update tolerance"),
    "params.max_iter": Key(int, 50, _positive, "Picard sweep limit"),
    "grid.dim": Key(int, 1, _dim, "spatial dimension"),
    "grid.n_normal": Key(int, 2049, _odd, "points along x_N"),
    "grid.extent_normal": Key(float, 48.0, _positive, "domain length along x_N"),
    "grid.n_tangential": Key(int, 129, _odd, "points along x_1 (dim 2)"),
    "grid.extent_tangential": Key(float, 12.0, _positive, "half-width along x_1 (dim 2)"),
    "time.t_min": Key(float, 2.0**-10, _positive, "first ladder time"),
    "time.t_max": Key(float, 16.0, _positive, "last ladder time"),
    "time.nodes_per_octave": Key(int, 4, _positive, "ladder density"),
    "time.panels_per_decade": Key(int, 32, _positive, "Duhamel quadrature density"),
    "initial.kind": Key(str, None, _initial, "initial perturbation profile (default per experiment)"),
    "initial.amplitude": Key(float, 0.01, _any, "perturbation amplitude"),
    "experiment.sigmas": Key(_floats, None, _positive, "scaling factors (default per experiment)"),
    "experiment.x_max": Key(float, 2.0, _positive, "compact window [0, x_max]"),
    "experiment.fit_lo": Key(float, 2.0**-4, _positive, "first time of decay fits"),
    "experiment.fit_hi": Key(float, 16.0, _positive, "last time of decay fits"),
    "experiment.probe_pairs": Key(int, 20, _nonneg, "random pairs in the contraction probe"),
    "experiment.probe_delta": Key(float, 0.05, _positive, "sup norm of probe fields"),
    "lsp.gamma0s": Key(_floats, (0.0, 1.0, 5.0), _any, "background slopes swept"),
    "lsp.phi": Key(float, math.pi / 4, _sector, "sector angle"),
    "lsp.n_samples": Key(int, 1000, _positive, "samples per sweep"),
    "lsp.det_floor": Key(float, 1e-3, _positive, "floor for the normalized determinant"),
    "lrep.n_normal": Key(int, 1025, _odd, "base resolution of the representation check"),
    "lrep.extent": Key(float, 24.0, _positive, "domain length of the representation check"),
    "lrep.panels_per_decade": Key(int, 16, _positive, "base quadrature density"),
    "surface.levels": Key(_ints, (129, 257, 513), _positive, "1-D refinement levels"),
    "surface.levels_2d": Key(_ints, (65, 129, 257), _positive, "2-D refinement levels"),
}

KIND_DEFAULTS = {
    "solve": {"initial.kind": "zero"},
    "selfsim": {"experiment.sigmas": (2.0, 4.0)},
    "decay": {"initial.kind": "exp"},
    "stability": {"experiment.sigmas": (1.0, 4.0, 16.0), "initial.kind": "exp"},
}


@dataclasses.dataclass
class RunConfig:
    kind: str
    values: dict
    out: Path
    seed: int
    resume: bool = False

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def params(self) -> GrooveParams:
        v = self.values
        return GrooveParams(
            gamma=v["params.gamma"], gamma0=v["params.gamma0"], mu=v["params.mu"], delta=v["params.delta"],
            eps_star=v["params.eps_star"], delta_star=v["params.delta_star"], tol=v["params.tol"],
            max_iter=v["params.max_iter"],
        )

    @property
    def grid(self) -> GridSpec:
        v = self.values
        if v["grid.dim"] == 1:
            return GridSpec(1, v["grid.n_normal"], v["grid.extent_normal"])
        return GridSpec(2, v["grid.n_normal"], v["grid.extent_normal"], v["grid.n_tangential"], v["grid.extent_tangential"])

    @property
    def solver(self) -> SolverConfig:
        v = self.values
        return SolverConfig(self.grid, v["time.t_min"], v["time.t_max"], v["time.nodes_per_octave"], v["time.panels_per_decade"])

    def resolved_text(self) -> str:
        lines = [f"kind = {self.kind}"]
        for k in sorted(self.values):
            val = self.values[k]
            if isinstance(val, tuple):
                val = ",".join(_fmt(x) for x in val)
            elif val is None:
                val = "none"
            else:
                val = _fmt(val)
            lines.append(f"{k} = {val}")
        return "\n".join(lines) + "\n"


def read_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    entries: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in entries:
            raise ConfigError(f"{origin}:{n}: key {key!r} given twice")
        entries[key] = val
    return entries


def parse_config(kind: str, path: str | None = None, overrides=(), out: str | Path = "out",
                 seed: int | None = None, resume: bool = False) -> RunConfig:
    """Validated run configuration: file entries, then ``overrides``, then kind defaults."""
    if kind not in KINDS and kind != "verify-all":
        raise ConfigError(f"unknown experiment kind {kind!r}")
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} does not exist")
        raw.update(read_config_text(p.read_text(), str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        raw[k] = v
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    values = {}
    for k, spec in KEYS.items():
        if k in raw:
            try:
                val = spec.parse(raw[k])
            except ValueError as e:
                raise ConfigError(f"{k}: cannot parse {raw[k]!r} ({e})") from None
            ok, why = spec.check(val)
            if not ok:
                raise ConfigError(f"{k} = {raw[k]} {why}")
            values[k] = val
        else:
            values[k] = spec.default
    for k, v in KIND_DEFAULTS.get(kind, {}).items():
        if k not in raw:
            values[k] = v
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed must be nonnegative")
        values["run.seed"] = seed
    if (kind in NEEDS_GAMMA or kind == "verify-all") and values["params.gamma"] is None:
        raise ConfigError(f"params.gamma is required for {kind}")
    cfg = RunConfig(kind, values, Path(out), values["run.seed"], resume)
    if values["params.gamma"] is not None:
        try:
            cfg.params
        except ValueError as e:
            raise ConfigError(str(e)) from None
    if values["time.t_max"] <= values["time.t_min"]:
        raise ConfigError("time.t_max must exceed time.t_min")
    try:
        ladder = cfg.solver.ladder()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    _check_windows(kind, values, ladder)
    return cfg


def _check_windows(kind: str, v: dict, ladder: np.ndarray) -> None:
    """Cross-key checks: experiment windows must fit on the time ladder."""
    lo, hi = ladder[0] * (1 - 1e-12), ladder[-1] * (1 + 1e-12)
    if kind == "decay":
        if not lo <= v["experiment.fit_lo"] < v["experiment.fit_hi"] <= hi:
            raise ConfigError("experiment.fit_lo < experiment.fit_hi must lie within [time.t_min, time.t_max]")
        if math.log10(v["experiment.fit_hi"] / v["experiment.fit_lo"]) < 2 - 1e-9:
            raise ConfigError("decay fits need experiment.fit_hi / experiment.fit_lo >= 100")
    if kind == "stability" and v["experiment.sigmas"]:
        # rescaled solutions are read at time sigma for sigma in the list
        top = max(v["experiment.sigmas"])
        if top > hi:
            raise ConfigError(f"time.t_max must be at least {top:g} for the requested sigmas")


# --------------------------------------------------------------------------
# artifacts


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Artifacts:
    """Writes files under ``root`` and remembers them for the manifest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: set[str] = set()

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.add(rel)
        return p

    def text(self, rel: str, content: str) -> None:
        self.path(rel).write_text(content)

    def csv(self, rel: str, header, rows) -> None:
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(v) for v in r) + "\n")
        self.text(rel, buf.getvalue())

    def json(self, rel: str, obj) -> None:
        self.text(rel, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")

    def manifest(self, rel: str = "manifest.tsv") -> str:
        lines = []
        for f in sorted(self.files - {rel}):
            lines.append(f"{f}\t{hashlib.sha256((self.root / f).read_bytes()).hexdigest()}")
        content = "\n".join(lines) + "\n"
        (self.root / rel).write_text(content)
        return content


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _emit(art: Artifacts, outcome: ex.Outcome, kind: str) -> None:
    for name, (header, rows) in sorted(outcome.tables.items()):
        art.csv(name, header, rows)
    for name, field, extra in outcome.snapshots:
        write_snapshot(art.path(name), field, extra)
    art.json("result.json", {
        "kind": kind,
        "passed": outcome.passed,
        "checks": [c.record() for c in outcome.checks],
        "notes": outcome.notes,
    })


# --------------------------------------------------------------------------
# runners


def _solve_hooks(art: Artifacts, resume: bool):
    ck_w, ck_state = "checkpoint/w.npy", "checkpoint/state.json"

    def save(it, w, report):
        with art.path(ck_w).open("wb") as fh:
            np.save(fh, np.ascontiguousarray(w, "<f8"))
        art.json(ck_state, {"iterations": it, "update_norms": report.update_norms, "ratios": report.ratios})

    state = None
    if resume and (art.root / ck_w).exists() and (art.root / ck_state).exists():
        st = json.loads((art.root / ck_state).read_text())
        rep = IterationReport(iterations=st["iterations"], update_norms=st["update_norms"], ratios=st["ratios"])
        state = (np.load(art.root / ck_w), rep)
        art.files.update({ck_w, ck_state})
        log.info("resuming after sweep %d", rep.iterations)
    return save, state


def run_kind(cfg: RunConfig, art: Artifacts, shared: dict | None = None) -> ex.Outcome:
    shared = {} if shared is None else shared
    v = cfg.values
    kind = cfg.kind
    if kind == "kernel-check":
        return ex.run_kernel_check(v["params.gamma0"])
    if kind == "lrep-oracle":
        # linear representation, layer-potential reduction and flux identity
        out = ex.run_lrep(v["params.gamma0"], v["lrep.n_normal"], v["lrep.extent"], v["lrep.panels_per_decade"])
        for part in (ex.run_layer(extent=v["lrep.extent"]), ex.run_flux_identity()):
            out.checks += part.checks
            out.tables.update(part.tables)
        return out
    if kind == "lsp-sweep":
        return ex.run_lsp(v["lsp.gamma0s"], v["lsp.phi"], v["lsp.n_samples"], v["lsp.det_floor"])
    if kind == "surface-check":
        return ex.run_surface(cfg.params, v["surface.levels"], v["surface.levels_2d"])
    if kind == "solve":
        save, state = _solve_hooks(art, cfg.resume)
        out, _ = ex.run_solve(cfg.params, cfg.solver, v["initial.kind"] or "zero", v["initial.amplitude"], cfg.seed,
                              v["experiment.probe_pairs"], v["experiment.probe_delta"], save, state)
        return out
    if kind == "selfsim":
        out, traj = ex.run_selfsim(cfg.params, cfg.solver, v["experiment.sigmas"], v["experiment.x_max"])
        shared["selfsim"] = traj
        return out
    if kind == "decay":
        out = ex.run_decay(cfg.params, cfg.solver, v["experiment.fit_lo"], v["experiment.fit_hi"], shared.get("selfsim"))
        generic = ex.run_decay_generic(cfg.params, cfg.solver, v["initial.kind"], v["initial.amplitude"],
                                       v["experiment.fit_lo"], v["experiment.fit_hi"])
        out.merge(generic, "generic")
        return out
    if kind == "stability":
        return ex.run_stability(cfg.params, cfg.solver, v["initial.kind"] or "exp", v["initial.amplitude"],
                                v["experiment.sigmas"], v["experiment.x_max"])
    raise ConfigError(f"unknown experiment kind {kind!r}")


def execute(cfg: RunConfig, art: Artifacts, shared: dict | None = None) -> int:
    for stale in ("error.json", "result.json"):
        (art.root / stale).unlink(missing_ok=True)
    art.text("resolved-config.txt", cfg.resolved_text())
    try:
        outcome = run_kind(cfg, art, shared)
    except ConfigError:
        raise
    except Exception as e:  # module failures become a machine-readable record
        art.json("error.json", {"kind": cfg.kind, "error": type(e).__name__, "message": str(e)})
        art.manifest()
        log.error("%s failed: %s", cfg.kind, e)
        log.debug("%s", traceback.format_exc())
        return EXIT_FAIL
    _emit(art, outcome, cfg.kind)
    art.manifest()
    for c in outcome.checks:
        log.info("%-6s %s = %.6g (%s %g)", "PASS" if c.passed else "FAIL", c.name, c.value, c.relation, c.threshold)
    return EXIT_OK if outcome.passed else EXIT_FAIL


VERIFY_ORDER = ("kernel-check", "lrep-oracle", "lsp-sweep", "surface-check", "solve", "selfsim", "decay", "stability")


def verify_all(path, overrides, out, seed) -> int:
    top = Artifacts(Path(out))
    shared: dict = {}
    rows = []
    status = EXIT_OK
    for kind in VERIFY_ORDER:
        cfg = parse_config(kind, path, overrides, Path(out) / kind, seed, False)
        sub = Artifacts(cfg.out)
        log.info("== %s", kind)
        code = execute(cfg, sub, shared)
        top.files.update(f"{kind}/{f}" for f in sub.files | {"manifest.tsv"})
        rows.append((kind, int(code == EXIT_OK)))
        status = max(status, code)
    top.csv("summary.csv", ["kind", "passed"], rows)
    top.manifest()
    return status


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grooving", description="Groove-formation solver experiments.")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS + ("verify-all",):
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
        sp.add_argument("--out", default=f"runs/{kind}", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized fixtures")
        sp.add_argument("--resume", action="store_true", help="continue an interrupted solve from its checkpoint")
        sp.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("keys", help="list configuration keys with defaults")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.kind == "keys":
        for k, spec in KEYS.items():
            print(f"{k:28s} default={spec.default!r:24s} {spec.doc}")
        return EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        if args.kind == "verify-all":
            return verify_all(args.config, args.set, args.out, args.seed)
        cfg = parse_config(args.kind, args.config, args.set, args.out, args.seed, args.resume)
        return execute(cfg, Artifacts(cfg.out))
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"cannot write outputs: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
