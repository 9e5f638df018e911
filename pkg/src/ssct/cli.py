"""Command-line orchestration: configs, experiment subcommands,
deterministic seeding, artifact outputs.

Config files are flat INI-style sections of key = value pairs;
environment variables prefixed SSCT_ override them (SSCT_GRID_N=32
overrides [grid] n). Reports are JSON, tables CSV, fields a small
binary format with magic "SSCT".
"""

import argparse
import configparser
import hashlib
import json
import math
import os
import struct
import sys
import time

import numpy as np

from . import __version__
from .geometry import BoxGrid, CapSelector, Field, gaussian_field, make_sphere, select_patch
from .potential import Potential, bump_cutoff

FIELD_MAGIC = b"SSCT"
FIELD_VERSION = 1


def write_field(path, field):
    """Binary dump: magic, version u32, d u32, n u32, L f64 LE, re/im f64."""
    grid = field.grid
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<III", FIELD_VERSION, grid.d, grid.n))
        fh.write(struct.pack("<d", grid.L))
        inter = np.empty(field.data.size * 2, dtype="<f8")
        flat = field.data.ravel()
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FIELD_MAGIC:
            raise ValueError("not a field file: bad magic %r" % magic)
        version, d, n = struct.unpack("<III", fh.read(12))
        if version != FIELD_VERSION:
            raise ValueError("unsupported field version %d" % version)
        (L,) = struct.unpack("<d", fh.read(8))
        grid = BoxGrid(d, L, n)
        raw = np.frombuffer(fh.read(), dtype="<f8")
        data = (raw[0::2] + 1j * raw[1::2]).reshape(grid.shape)
        return Field(grid, data.copy())


DEFAULTS = {
    "grid": {"d": "3", "L": "1.0", "n": "32"},
    "problem": {"lambda": "4.0"},
    "potential": {
        "v0": "gaussian", "v0_amplitude": "2.0", "v0_center": "0,0,0",
        "v0_width": "0.15",
        "shell": "none", "shell_radius": "0.5", "shell_alpha": "1.0",
        "shell_resolution": "16",
        "frac": "none", "frac_s": "0.75", "frac_g_amplitude": "1.0",
        "frac_g_width": "0.15", "frac_chi_radius": "0.4",
    },
    "surfaces": {
        "boundary_radius": "0.75", "boundary_resolution": "32",
        "sigma_axis": "0,0,1", "sigma_angle": "1.0",
    },
    "solver": {"tol": "1e-8", "max_iter": "200"},
    "cgo": {"m": "4.0", "tau_ladder": "8,16,32,64", "kappa": "6.283185307179586,0,0"},
    "run": {"seed": "12345", "threads": "1", "quick": "0"},
}


class ConfigError(ValueError):
    pass


def load_config(path=None, overrides=None):
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError("cannot read config %s" % path)
        for sec in parser.sections():
            cfg.setdefault(sec, {})
            for key, val in parser.items(sec):
                cfg[sec][key] = val
    for name, val in os.environ.items():
        if not name.startswith("SSCT_"):
            continue
        rest = name[5:].lower()
        for sec in cfg:
            prefix = sec + "_"
            if rest.startswith(prefix):
                cfg[sec][rest[len(prefix):]] = val
    if overrides:
        for (sec, key), val in overrides.items():
            cfg.setdefault(sec, {})[key] = str(val)
    _validate(cfg)
    return cfg


def _validate(cfg):
    try:
        n = int(cfg["grid"]["n"])
        L = float(cfg["grid"]["L"])
        lam = float(cfg["problem"]["lambda"])
        tol = float(cfg["solver"]["tol"])
        s = float(cfg["potential"]["frac_s"])
    except (KeyError, ValueError) as exc:
        raise ConfigError("malformed config: %s" % exc)
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigError("grid n must be a power of two")
    if L <= 0 or lam <= 0 or tol <= 0:
        raise ConfigError("L, lambda and tolerances must be positive")
    if not (0.5 < s < 1.0):
        raise ConfigError("fractional order s must lie in (1/2, 1)")


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


def _floats(text):
    return [float(t) for t in text.split(",")]


def build_grid(cfg):
    g = cfg["grid"]
    return BoxGrid(int(g["d"]), float(g["L"]), int(g["n"]))


def build_potential(cfg, grid):
    p = cfg["potential"]
    v0 = None
    if p.get("v0", "none") == "gaussian":
        v0 = gaussian_field(grid, float(p["v0_amplitude"]),
                            tuple(_floats(p["v0_center"])), float(p["v0_width"]))
    shell = None
    if p.get("shell", "none") == "sphere":
        surf = make_sphere(np.zeros(grid.d), float(p["shell_radius"]),
                           int(p["shell_resolution"]))
        shell = (surf, float(p["shell_alpha"]))
    frac = None
    if p.get("frac", "none") == "gaussian":
        g = gaussian_field(grid, float(p["frac_g_amplitude"]), None,
                           float(p["frac_g_width"]))
        chi = bump_cutoff(grid, float(p["frac_chi_radius"]))
        frac = (float(p["frac_s"]), g, chi)
    return Potential(grid, v0=v0, shell=shell, frac=frac)


def rng_from(cfg, stream):
    """Counter-based generator: Philox keyed by (seed, stream label)."""
    seed = int(cfg["run"]["seed"])
    label = int(hashlib.sha256(stream.encode()).hexdigest()[:8], 16)
    return np.random.Generator(np.random.Philox(key=seed + (label << 64)))


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(repr(obj))


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % v if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _manifest(out_dir, cfg, name, t0, extra=None):
    payload = {
        "subcommand": name,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "elapsed_seconds": round(time.time() - t0, 3),
        "numpy_version": np.__version__,
    }
    if extra:
        payload.update(extra)
    _write_json(os.path.join(out_dir, "manifest_%s.json" % name), payload)


# ---------------------------------------------------------------------------
# subcommands

def cmd_direct(cfg, out_dir):
    from .direct import equation_residual, solve_scattering, src_diagnostic
    t0 = time.time()
    grid = build_grid(cfg)
    lam = float(cfg["problem"]["lambda"])
    P = build_potential(cfg, grid)
    y = np.zeros(grid.d)
    y[0] = 0.75 * grid.L
    state = solve_scattering(lam, P, y, tol=float(cfg["solver"]["tol"]))
    write_field(os.path.join(out_dir, "u_sc.ssct"), state.grid_field)
    radii = [0.3 * grid.L, 0.4 * grid.L, 0.5 * grid.L]
    table = src_diagnostic(state.grid_field, lam, radii) if not P.is_zero \
        else [(r, 0.0) for r in radii]
    _write_csv(os.path.join(out_dir, "src_diagnostic.csv"),
               ["radius", "defect"], [(float(a), float(b)) for a, b in table])
    report = {
        "lambda": lam, "y": y, "iterations": state.iterations,
        "converged": state.converged, "method": state.method,
        "residual": equation_residual(state, P) if not P.is_zero else 0.0,
        "residual_history": state.residual_history,
    }
    _write_json(os.path.join(out_dir, "direct_report.json"), report)
    _manifest(out_dir, cfg, "direct", t0)
    return 0


def cmd_neumann(cfg, out_dir):
    from .layers import assemble_layers, neumann_solve
    t0 = time.time()
    grid = build_grid(cfg)
    lam = float(cfg["problem"]["lambda"])
    R = float(cfg["surfaces"]["boundary_radius"])
    res = int(cfg["surfaces"]["boundary_resolution"])
    boundary = make_sphere(np.zeros(grid.d), R, res)
    ops = assemble_layers(lam, None, boundary)
    f_vol = gaussian_field(grid, 1.0, None, 0.1 * grid.L)
    u, phi, diag = neumann_solve(lam, None, boundary, ops, f_vol=f_vol, grid=grid)
    write_field(os.path.join(out_dir, "neumann_u.ssct"), u)
    _write_json(os.path.join(out_dir, "neumann_report.json"), diag)
    _manifest(out_dir, cfg, "neumann", t0)
    return 0


def cmd_runge(cfg, out_dir):
    from .direct import incident_wave
    from .layers import assemble_layers, runge_fit
    t0 = time.time()
    grid = build_grid(cfg)
    lam = float(cfg["problem"]["lambda"])
    R = float(cfg["surfaces"]["boundary_radius"])
    boundary = make_sphere(np.zeros(grid.d), R,
                           int(cfg["surfaces"]["boundary_resolution"]))
    ops = assemble_layers(lam, None, boundary)
    axis = np.array(_floats(cfg["surfaces"]["sigma_axis"]))
    angle = float(cfg["surfaces"]["sigma_angle"])
    sigma = select_patch(boundary, CapSelector(axis, angle))
    z = np.zeros(grid.d)
    z[0] = 1.2 * R
    target_field = incident_wave(lam, grid, z) if np.max(np.abs(z)) < grid.L \
        else None
    rng = rng_from(cfg, "runge-eval")
    pts = _ball_points(rng, grid.d, 0.5 * R, 400)
    from .specfun import fundamental_solution_grid
    target = fundamental_solution_grid(lam, grid.d,
                                       np.linalg.norm(pts - z, axis=1))
    rows = []
    for frac in (0.25, 0.5, 1.0):
        take = sigma[: max(1, int(len(sigma) * frac))]
        _, err, det = runge_fit(ops, take, target, pts)
        rows.append((len(take), det["reg"], err))
    _write_csv(os.path.join(out_dir, "runge.csv"), ["dof", "reg", "error"], rows)
    _manifest(out_dir, cfg, "runge", t0)
    return 0


def _ball_points(rng, d, radius, count):
    pts = []
    while len(pts) < count:
        cand = rng.uniform(-radius, radius, size=(count, d))
        keep = cand[np.linalg.norm(cand, axis=1) <= radius]
        pts.extend(keep.tolist())
    return np.array(pts[:count])


def cmd_cgo(cfg, out_dir):
    from .cgo import carleman_check, make_zeta_pair, solve_remainder
    t0 = time.time()
    grid = build_grid(cfg)
    lam = float(cfg["problem"]["lambda"])
    P = build_potential(cfg, grid)
    M = float(cfg["cgo"]["m"])
    taus = _floats(cfg["cgo"]["tau_ladder"])
    kappa = np.array(_floats(cfg["cgo"]["kappa"]))
    from .inverse import _orthonormal_frame
    theta, eta = _orthonormal_frame(kappa)
    rows = []
    for tau in taus:
        pair = make_zeta_pair(lam, kappa, tau, theta, eta)
        s1 = solve_remainder(pair, 1, P, tol=float(cfg["solver"]["tol"]), M=M)
        s2 = solve_remainder(pair, 2, P, tol=float(cfg["solver"]["tol"]), M=M)
        rows.append((tau, s1.w.l2(), s2.w.l2(), s1.iterations, s1.residual))
    _write_csv(os.path.join(out_dir, "cgo_decay.csv"),
               ["tau", "w1_norm", "w2_norm", "iterations", "residual"], rows)
    rng = rng_from(cfg, "carleman-suite")
    suite = _carleman_suite(grid, rng, 20)
    pair = make_zeta_pair(lam, kappa, taus[-1], theta, eta)
    stats = carleman_check(suite, pair.zeta1, lam, P, M=M, R0=1.0)
    _write_json(os.path.join(out_dir, "carleman.json"), stats)
    _manifest(out_dir, cfg, "cgo", t0)
    return 0


def _carleman_suite(grid, rng, count):
    from .geometry import Field
    suite = []
    envelope = gaussian_field(grid, 1.0, None, 0.2 * grid.L).data
    for _ in range(count):
        kvec = rng.integers(-3, 4, size=grid.d) * math.pi / grid.L
        coords = grid.coords()
        phase = sum(c * k for c, k in zip(coords, kvec))
        amp = rng.normal() + 1j * rng.normal()
        suite.append(Field(grid, amp * envelope * np.exp(1j * phase)))
    return suite


def cmd_recover(cfg, out_dir):
    from .inverse import decay_sweep
    t0 = time.time()
    grid = build_grid(cfg)
    lam = float(cfg["problem"]["lambda"])
    P = build_potential(cfg, grid)
    taus = _floats(cfg["cgo"]["tau_ladder"])
    kappa = np.array(_floats(cfg["cgo"]["kappa"]))
    rows = decay_sweep(P, kappa, taus, lam=lam, tol=float(cfg["solver"]["tol"]))
    _write_csv(os.path.join(out_dir, "recover.csv"),
               ["tau", "pairing_error", "w_norm", "relative_error"],
               [(r["tau"], r["pairing_error"], r["w_norm"], r["relative_error"])
                for r in rows])
    ok = rows[-1]["relative_error"] <= 0.1
    _manifest(out_dir, cfg, "recover", t0,
              {"final_relative_error": rows[-1]["relative_error"], "pass": ok})
    return 0 if ok else 1


def cmd_verify(cfg, out_dir):
    """Full invariant suite; exit 0 iff every declared tolerance is met."""
    from .verify import run_verification
    t0 = time.time()
    quick = cfg["run"].get("quick", "0") not in ("0", "false", "no")
    report = run_verification(cfg, quick=quick)
    _write_json(os.path.join(out_dir, "verify_report.json"), report)
    ok = all(item["pass"] for item in report["checks"])
    _manifest(out_dir, cfg, "verify", t0, {"pass": ok})
    return 0 if ok else 1


COMMANDS = {
    "direct": cmd_direct,
    "neumann": cmd_neumann,
    "runge": cmd_runge,
    "cgo": cmd_cgo,
    "recover": cmd_recover,
    "verify": cmd_verify,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ssct",
                                     description="point-source scattering lab")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default=".")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides[("run", "seed")] = args.seed
    if args.threads is not None:
        overrides[("run", "threads")] = args.threads
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    code = COMMANDS[args.subcommand](cfg, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
