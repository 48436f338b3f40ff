"""Command-line front end.

Every command reads one TOML configuration and writes its artifacts to an
output directory.  Exit codes: 0 success, 2 configuration error, 3 horizon
too short, 4 congestion detected, 5 inconsistent observation.
"""

from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

import numpy as np
import toml

from . import illposed, recon_flux, recon_k, recon_obstruction as ro
from .errors import ConfigError, FrontReconError, InconsistentObservation
from .fluxlib import CONCAVE, GENERAL, FluxCurve, SpatialCoeff, read_flux_csv
from .fronttrack import Profile, Scenario, write_snapshot_csv, write_trace_csv
from .observe import Observer

EXIT_OK = 0
EXIT_CONFIG = 2

# section -> field -> (types, default); REQUIRED marks mandatory fields
REQUIRED = object()
NUM = (int, float)
SCHEMA = {
    "": {"seed": (int, 0)},
    "flux": {"kind": (str, "quadratic"), "a": (NUM, 1.0), "b": (NUM, 1.0), "coeffs": (list, None),
             "lo": (NUM, None), "hi": (NUM, None), "shape": (str, "concave"), "inflections": (list, []),
             "lip_df": (NUM, None), "path": (str, None)},
    "coefficient": {"breakpoints": (list, []), "values": (list, [1.0])},
    "initial": {"breakpoints": (list, []), "values": (list, [0.0])},
    "run": {"T": (NUM, 1.0), "delta": (NUM, 1e-3), "snapshot_times": (list, []), "trace_points": (list, []),
            "trace_dt": (NUM, None)},
    "window": {"a": (NUM, None), "b": (NUM, None)},
    "probe": {"J": (list, None), "u_probe": (NUM, None), "k_bound": (NUM, 1.0), "x_tilde": (NUM, 1.0)},
    "flux_reconstruction": {"u_lo": (NUM, None), "u_hi": (NUM, None), "nu": (int, 4), "T": (NUM, 1.0),
                            "anchor": (NUM, 0.0), "oracle": (str, "front-tracking"), "delta": (NUM, 1e-3),
                            "snapshots": (list, [])},
    "obstruction": {"mode": (str, "stationary"), "method": (str, "discrete"), "fast": (bool, False),
                    "k_o": (NUM, 1.0), "u_a": (NUM, 0.0), "u_b": (NUM, None), "ubar": (NUM, None),
                    "features": (dict, None)},
    "illposed": {"family": (str, "widen"), "xi_start": (NUM, REQUIRED), "chis": (list, REQUIRED),
                 "ks": (list, REQUIRED), "k_o": (NUM, 1.0), "eps": (NUM, 0.0), "rho": (NUM, 0.0),
                 "left_state": (NUM, 0.1)},
}
CHOICES = {
    ("flux", "kind"): ("quadratic", "polynomial", "table"),
    ("flux", "shape"): ("concave", "general"),
    ("flux_reconstruction", "oracle"): ("front-tracking", "exact", "table"),
    ("obstruction", "mode"): ("stationary", "constant"),
    ("obstruction", "method"): ("discrete", "tangent", "closed-form"),
    ("illposed", "family"): ("widen", "shift", "merge", "swap"),
}


# ---------------------------------------------------------------------------
# configuration


def _check_field(where: str, val, types):
    if types is NUM and isinstance(val, bool):
        raise ConfigError(f"{where}: expected a number, got {val!r}")
    if not isinstance(val, types):
        name = "number" if types is NUM else types.__name__
        raise ConfigError(f"{where}: expected {name}, got {val!r}")


def normalize(raw: dict) -> dict:
    """Validate against the schema and fill defaults; unknown keys are errors."""
    for key, val in raw.items():
        if key in SCHEMA and key != "":
            if not isinstance(val, dict):
                raise ConfigError(f"{key}: expected a table")
        elif key not in SCHEMA[""]:
            raise ConfigError(f"{key}: unknown field")
    cfg = {}
    for sec, fields in SCHEMA.items():
        if sec == "":
            src = {k: v for k, v in raw.items() if k in fields}
        elif sec in raw:
            src = raw[sec]
        else:
            continue
        out = {}
        for key in src:
            if key not in fields:
                raise ConfigError(f"{sec}.{key}: unknown field")
        for key, (types, default) in fields.items():
            where = f"{sec}.{key}" if sec else key
            if key in src:
                _check_field(where, src[key], types)
                out[key] = float(src[key]) if types is NUM else copy.deepcopy(src[key])
                if (sec, key) in CHOICES and out[key] not in CHOICES[(sec, key)]:
                    raise ConfigError(f"{where}: expected one of {', '.join(CHOICES[(sec, key)])}, got {out[key]!r}")
            elif default is REQUIRED:
                raise ConfigError(f"{where}: required field missing")
            elif default is not None:
                out[key] = copy.deepcopy(default)
        if sec == "":
            cfg.update(out)
        else:
            cfg[sec] = out
    return cfg


def load_config(path) -> dict:
    try:
        raw = toml.load(str(path))
    except (toml.TomlDecodeError, OSError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    cfg = normalize(raw)
    cfg["_base"] = str(Path(path).resolve().parent)
    return cfg


def dump_config(cfg: dict) -> str:
    return toml.dumps({k: v for k, v in cfg.items() if not k.startswith("_")})


def build_flux(cfg: dict) -> FluxCurve:
    fx = cfg.get("flux", normalize({"flux": {}})["flux"])
    kind = CONCAVE if fx["shape"] == "concave" else GENERAL
    if fx["kind"] == "quadratic":
        return FluxCurve.quadratic_flux(fx["a"], fx["b"])
    if fx["kind"] == "polynomial":
        if fx.get("coeffs") is None or fx.get("lo") is None or fx.get("hi") is None:
            raise ConfigError("flux: polynomial needs coeffs, lo and hi")
        p = np.poly1d([float(c) for c in fx["coeffs"]])
        dp = p.deriv()
        return FluxCurve.from_callables(lambda u: float(p(u)), lambda u: float(dp(u)), fx["lo"], fx["hi"],
                                        kind=kind, lip_df=fx.get("lip_df"), inflections=fx["inflections"],
                                        name="polynomial")
    path = fx.get("path")
    if path is None:
        raise ConfigError("flux.path: required for a tabulated flux")
    return read_flux_csv(Path(cfg.get("_base", ".")) / path, kind=kind)


def build_coefficient(cfg: dict) -> SpatialCoeff:
    c = cfg.get("coefficient", {"breakpoints": [], "values": [1.0]})
    return SpatialCoeff(tuple(float(x) for x in c["breakpoints"]), tuple(float(v) for v in c["values"]))


def build_initial(cfg: dict) -> Profile:
    c = cfg.get("initial", {"breakpoints": [], "values": [0.0]})
    return Profile(np.array(c["breakpoints"], dtype=float), np.array(c["values"], dtype=float))


def _run(cfg: dict) -> dict:
    return cfg.get("run", normalize({"run": {}})["run"])


def _window(cfg: dict) -> tuple:
    w = cfg.get("window", {})
    if w.get("a") is None or w.get("b") is None:
        raise ConfigError("window.a, window.b: required for this command")
    return w["a"], w["b"]


def _write_lines(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n")


def _g(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict, out: Path, args) -> list:
    run = _run(cfg)
    s = Scenario(build_flux(cfg), build_coefficient(cfg), build_initial(cfg), run["delta"], run["T"])
    o = Observer(s)
    lines = [f"T = {_g(run['T'])}", f"delta = {_g(run['delta'])}"]
    times = run["snapshot_times"] or [run["T"]]
    for i, t in enumerate(times):
        p = out / f"snapshot_{i}.csv"
        write_snapshot_csv(p, o.jumps(float(t)))
        lines.append(f"snapshot {i}: t = {_g(float(t))} -> {p.name}")
    for i, x in enumerate(run["trace_points"]):
        p = out / f"trace_{i}.csv"
        write_trace_csv(p, o.trace(float(x)), run.get("trace_dt"))
        lines.append(f"trace {i}: x = {_g(float(x))} -> {p.name}")
    lines.append(f"fronts created = {len(o.front_set.history)}")
    return lines


def _snapshot_table(fr: dict) -> dict:
    table = {}
    for i, sn in enumerate(fr["snapshots"]):
        try:
            items = [(float(x), float(a), float(b)) for x, a, b in sn.get("jumps", [])]
            items += [recon_flux.Arc(*map(float, arc)) for arc in sn.get("arcs", [])]
            items.sort(key=lambda it: it.x_lo if isinstance(it, recon_flux.Arc) else it[0])
            ul, ur = float(sn["u_left"]), float(sn["u_right"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"flux_reconstruction.snapshots[{i}]: malformed entry ({exc})") from None
        table[(ul, ur)] = recon_flux.Snapshot(ul, ur, tuple(items), fr["T"])
    return table


def cmd_reconstruct_f(cfg: dict, out: Path, args) -> list:
    fr = cfg.get("flux_reconstruction")
    if fr is None:
        raise ConfigError("flux_reconstruction: section required")
    if fr["oracle"] == "table":
        oracle = recon_flux.table_oracle(_snapshot_table(fr))
        f = None
    else:
        f = build_flux(cfg)
        oracle = recon_flux.exact_fan_oracle(f, fr["T"]) if fr["oracle"] == "exact" \
            else recon_flux.front_tracking_oracle(f, fr["T"], fr["delta"])
    lo = fr.get("u_lo", f.lo if f is not None else None)
    hi = fr.get("u_hi", f.hi if f is not None else None)
    if lo is None or hi is None:
        raise ConfigError("flux_reconstruction.u_lo, u_hi: required with a table oracle")
    grid = recon_flux.ReconstructionGrid(lo, hi, fr["nu"], fr["anchor"], fr["T"])
    rec = recon_flux.reconstruct(grid, oracle)
    rec.write_csv(out / "flux.csv")
    lines = rec.report.lines()
    lines += [f"f({_g(u)}) = {_g(v)}" for u, v in zip(rec.report.nodes, rec.report.values)]
    if f is not None and rec.curve is not None:
        lines.append(f"max node error = {_g(recon_flux.node_error(f, rec))}")
    if not rec.report.complete:
        raise _Partial(lines, InconsistentObservation("reconstruction stopped at a missing observation"))
    return lines


def cmd_reconstruct_k(cfg: dict, out: Path, args) -> list:
    pr = cfg.get("probe", {})
    if pr.get("J") is None:
        raise ConfigError("probe.J: required for coefficient recovery")
    run = _run(cfg)
    f, k = build_flux(cfg), build_coefficient(cfg)
    J = tuple(float(v) for v in pr["J"])
    probe = recon_k.design_probe(J, run["T"], f, pr.get("u_probe"), pr["k_bound"])
    o = Observer(Scenario(f, k, probe.profile, run["delta"], run["T"]))
    rep = recon_k.reconstruct_coefficient(o, J, probe)
    recon_k.write_coefficient_csv(out / "coefficient.csv", rep.coefficient)
    lines = [f"tau = {_g(rep.tau)}", f"anchor = {_g(rep.anchor)}", f"probe state = {_g(probe.state)}",
             f"probe interval = [{_g(probe.interval[0])}, {_g(probe.interval[1])}]"]
    lines += [f"jump {i}: x = {_g(x)}" for i, x in enumerate(rep.jumps)]
    lines += [f"value {i}: k = {_g(v)}" for i, v in enumerate(rep.values)]
    lines += [f"residual {i} = {_g(r)}" for i, r in enumerate(rep.residuals)]
    return lines


def cmd_reconstruct_obstruction(cfg: dict, out: Path, args) -> list:
    ob = cfg.get("obstruction", normalize({"obstruction": {}})["obstruction"])
    mode = args.mode or ob["mode"]
    f = build_flux(cfg)
    if mode == "constant" and ob.get("features") is not None:
        feats = _features(ob)
        rep = ro.reconstruct_reflective(f, feats) if feats.t_a is not None else ro.reconstruct_transmissive(f, feats)
    else:
        a, b = _window(cfg)
        run = _run(cfg)
        k = build_coefficient(cfg)
        if mode == "constant":
            if ob.get("ubar") is None:
                raise ConfigError("obstruction.ubar: required for the constant-data protocol")
            world = ro.HiddenWorld(f, k, Profile.constant(ob["ubar"]), a, b, run["delta"])
            o = world.observe_constant(ob["ubar"], run["T"])
            rep = ro.reconstruct_constant_data(o, ob["ubar"], ob["k_o"], tangent=ob["method"] == "tangent")
        else:
            u_b = ob.get("u_b", ob["u_a"])
            amb = ro.StationaryAmbient(f, ob["k_o"], ob["u_a"], u_b, a, b)
            world = ro.HiddenWorld(f, k, build_initial(cfg), a, b, run["delta"])
            x_tilde = cfg.get("probe", {}).get("x_tilde", 1.0)
            if ob["fast"]:
                rep = ro.fast_probe_stationary(world, amb, x_tilde, run["T"], ob["method"])
            else:
                design = ro.probe_stationary(amb, x_tilde)
                rep = ro.reconstruct_stationary(world.observe(design.left, run["T"]), design, ob["method"])
    recon_k.write_coefficient_csv(out / "coefficient.csv", rep.coefficient)
    return rep.lines()


def _features(ob: dict) -> ro.ConstantDataFeatures:
    fe = dict(ob["features"])
    known = {"ubar", "a", "b", "t_a", "v_o", "sigma_a", "t_b", "v_1", "sigma_b", "rarefaction"}
    for key in fe:
        if key not in known:
            raise ConfigError(f"obstruction.features.{key}: unknown field")
    for key in ("ubar", "a", "b"):
        if key not in fe:
            raise ConfigError(f"obstruction.features.{key}: required field missing")
    if "rarefaction" in fe:
        fe["rarefaction"] = tuple(float(v) for v in fe["rarefaction"])
    return ro.ConstantDataFeatures(k_o=ob["k_o"], **{k: (float(v) if not isinstance(v, tuple) else v)
                                                      for k, v in fe.items()})


def cmd_illposed(cfg: dict, out: Path, args) -> list:
    ip = cfg.get("illposed")
    if ip is None:
        raise ConfigError("illposed: section required")
    a, b = _window(cfg)
    base = illposed.SpanCoefficient(ip["xi_start"], tuple(map(float, ip["chis"])), tuple(map(float, ip["ks"])),
                                    ip["k_o"])
    base.check_window(a, b)
    fam = ip["family"]
    members = {"base": base}
    if fam == "widen":
        members["widened"] = illposed.widen(base, ip["eps"], (a, b))
    elif fam == "shift":
        members["shifted"] = illposed.shift(base, ip["rho"])
    elif fam == "merge":
        mf = illposed.merge(base)
        members["merged"], members["collapsed"] = mf.merged, mf.collapsed
    else:
        members["swapped"] = illposed.swap(base)
    illposed.export_family(out, members)
    lines = [f"{name}: transit sum = {_g(m.transit_sum())}" for name, m in members.items()]
    run = _run(cfg)
    f = build_flux(cfg)
    init = illposed.probe_data(f, a, ip["left_state"])
    for name, m in members.items():
        if name == "base":
            continue
        _, cmp = illposed.indistinguishable(f, base.coefficient(), m.coefficient(), (a, b), init, run["T"],
                                            run["delta"])
        lines.append(f"{name}: mean trace deviation = {_g(cmp.deviation)} (delta = {_g(run['delta'])})")
    return lines


def cmd_verify(cfg: dict, out: Path, args) -> list:
    if args.reconstruction is None:
        raise ConfigError("--reconstruction: path to a coefficient CSV is required")
    run = _run(cfg)
    f, k_true = build_flux(cfg), build_coefficient(cfg)
    k_rec = recon_k.read_coefficient_csv(args.reconstruction)
    init = build_initial(cfg)
    pr = cfg.get("probe", {})
    if pr.get("J") is not None:
        probe = recon_k.design_probe(tuple(pr["J"]), run["T"], f, pr.get("u_probe"), pr["k_bound"])
        init = probe.profile
        lo, hi = map(float, pr["J"])
    else:
        lo, hi = _window(cfg)
    obs = Observer(Scenario(f, k_true, init, run["delta"], run["T"]))
    twin = Observer(Scenario(f, k_rec, init, run["delta"], run["T"]))
    n = 64
    ts = (np.arange(n) + 0.5) * run["T"] / n
    diff = sum(obs.history.profile(t).l1_distance(twin.history.profile(t), lo, hi) for t in ts) * run["T"] / n
    lines = [f"space-time L1 difference on [{_g(lo)}, {_g(hi)}] x [0, {_g(run['T'])}] = {_g(diff)}"]
    if cfg.get("window"):
        a, b = _window(cfg)
        for x in (a, b):
            gap = obs.trace(x).l1_distance(twin.trace(x)) / run["T"]
            lines.append(f"trace L1 difference per unit time at x = {_g(x)}: {_g(gap)}")
    return lines


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct-f": cmd_reconstruct_f,
    "reconstruct-k": cmd_reconstruct_k,
    "reconstruct-obstruction": cmd_reconstruct_obstruction,
    "illposed": cmd_illposed,
    "verify": cmd_verify,
}


class _Partial(Exception):
    """Report lines that must be written before failing."""

    def __init__(self, lines, error):
        super().__init__(str(error))
        self.lines, self.error = lines, error


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frontrecon", description="Front tracking and coefficient/flux recovery.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="TOML configuration file")
    p.add_argument("-o", "--out", default="out", help="output directory (default: out)")
    p.add_argument("--mode", choices=("stationary", "constant"), default=None,
                   help="obstruction protocol; overrides obstruction.mode")
    p.add_argument("--reconstruction", default=None, help="coefficient CSV to verify")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        lines = COMMANDS[args.command](cfg, out, args)
    except _Partial as exc:
        _write_lines(out / "report.txt", exc.lines)
        print(f"error: {exc.error}", file=sys.stderr)
        return exc.error.exit_code
    except FrontReconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    _write_lines(out / "report.txt", lines)
    print("\n".join(lines))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
