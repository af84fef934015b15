"""
Command-line front end.

    qndprop --config run.json [--mode verify] [--out results/] [--seed 7] [--tol 1e-9]

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 convergence or truncation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import oracle, oscillator, spin, structure
from .core import (
    ConvergenceError,
    OscillatorBathSpec,
    QNDError,
    SpinBathSpec,
    SystemParams,
    Tolerances,
    TruncationError,
    validate_bath,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODES = ("kernel", "verify", "dephasing", "structure")
EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_CONVERGENCE = 0, 1, 2, 3
DEFAULT_VERIFY_THRESHOLD = 1e-8


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    system: SystemParams
    bath: OscillatorBathSpec | SpinBathSpec
    times: np.ndarray
    tolerances: Tolerances = field(default_factory=Tolerances)
    mode: str = "kernel"
    alpha: np.ndarray | None = None
    alpha_prime: np.ndarray | None = None
    nu: complex = 0j
    nu_prime: complex = 0j
    sector: int | None = None
    sign: int = 1
    seed: int = 0
    n_random: int = 2
    random_radius: float = 0.5
    threshold: float = DEFAULT_VERIFY_THRESHOLD

    @property
    def is_spin(self) -> bool:
        return isinstance(self.bath, SpinBathSpec)

    @property
    def driven(self) -> bool:
        return self.system.drive_omega is not None


def _complex(value, where):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    raise ConfigError(f"config field '{where}': expected a number, [re, im] or {{re, im}}")


def _get(d, key, where, default=...):
    if not isinstance(d, dict):
        raise ConfigError(f"config field '{where}': expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"config field '{where}.{key}' is required".lstrip("."))
        return default
    return d[key]


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from decoded JSON."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config field 'schema_version': expected {SCHEMA_VERSION}, got {version!r}")

    sysd = _get(raw, "system", "")
    try:
        system = SystemParams(
            omega=float(_get(sysd, "omega", "system")),
            drive_omega=None if sysd.get("drive_omega") is None else float(sysd["drive_omega"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'system': {exc}") from None

    bathd = _get(raw, "bath", "")
    kind = _get(bathd, "kind", "bath")
    modes = _get(bathd, "modes", "bath")
    if not isinstance(modes, list):
        raise ConfigError("config field 'bath.modes': expected a list of [omega_k, coupling]")
    try:
        if kind == "oscillator":
            bath = OscillatorBathSpec(modes)
        elif kind == "spin":
            bath = SpinBathSpec(modes)
        else:
            raise ConfigError(f"config field 'bath.kind': expected 'oscillator' or 'spin', got {kind!r}")
        validate_bath(bath)
    except QNDError as exc:
        raise ConfigError(f"config field 'bath.modes': {exc}") from None
    except TypeError:
        raise ConfigError("config field 'bath.modes': each mode must be [omega_k, coupling]") from None

    grid = _get(raw, "time_grid", "")
    try:
        t0 = float(_get(grid, "t_start", "time_grid", 0.0))
        t1 = float(_get(grid, "t_end", "time_grid"))
        n = int(_get(grid, "n_points", "time_grid"))
    except (TypeError, ValueError):
        raise ConfigError("config field 'time_grid': t_start, t_end, n_points must be numbers") from None
    if t0 < 0 or n < 1 or (n > 1 and not t1 > t0) or not (math.isfinite(t0) and math.isfinite(t1)):
        raise ConfigError("config field 'time_grid': need 0 <= t_start < t_end and n_points >= 1")
    times = np.array([t0]) if n == 1 else np.linspace(t0, t1, n)

    told = raw.get("tolerances", {}) or {}
    try:
        tolerances = Tolerances(**told)
    except TypeError as exc:
        raise ConfigError(f"config field 'tolerances': {exc}") from None
    except QNDError as exc:
        raise ConfigError(f"config field 'tolerances': {exc}") from None

    mode = raw.get("mode", "kernel")
    if mode not in MODES:
        raise ConfigError(f"config field 'mode': expected one of {MODES}, got {mode!r}")

    cfg = ExperimentConfig(system=system, bath=bath, times=times, tolerances=tolerances, mode=mode)

    ends = raw.get("endpoints", {}) or {}
    if cfg.is_spin:
        sector = ends.get("sector", raw.get("sector"))
        if sector is not None and sector not in (1, -1):
            raise ConfigError("config field 'endpoints.sector': expected +1 or -1")
        cfg.sector = sector
    else:
        M = len(bath)
        for name in ("alpha", "alpha_prime"):
            vals = ends.get(name)
            if vals is None:
                arr = np.zeros(M, dtype=complex)
            else:
                if not isinstance(vals, list) or len(vals) != M:
                    raise ConfigError(f"config field 'endpoints.{name}': expected {M} amplitudes")
                arr = np.array([_complex(v, f"endpoints.{name}[{i}]") for i, v in enumerate(vals)])
            setattr(cfg, name, arr)
        cfg.nu = _complex(ends.get("nu", 0), "endpoints.nu")
        cfg.nu_prime = _complex(ends.get("nu_prime", 0), "endpoints.nu_prime")

    sign = raw.get("sign", 1)
    if sign not in (1, -1):
        raise ConfigError("config field 'sign': expected +1 or -1")
    cfg.sign = sign
    cfg.seed = int(raw.get("seed", 0))
    verify = raw.get("verify", {}) or {}
    cfg.n_random = int(verify.get("n_random", cfg.n_random))
    cfg.random_radius = float(verify.get("radius", cfg.random_radius))
    cfg.threshold = float(verify.get("threshold", cfg.threshold))
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return parse_config(raw)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.16e}"


def _cplx(name, z):
    return {f"{name}_re": float(np.real(z)), f"{name}_im": float(np.imag(z))}


def write_csv(path: Path, rows: list[dict]):
    header = list(rows[0].keys()) if rows else ["t"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[h]) for h in header])


def write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sectors(cfg):
    return (cfg.sector,) if cfg.sector is not None else (1, -1)


def kernel_rows(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for t in cfg.times:
        row = {"t": float(t)}
        if cfg.is_spin:
            for s in _sectors(cfg):
                tag = "up" if s == 1 else "down"
                K = spin.kernel_u3(cfg.system, cfg.bath, s, t, cfg.tolerances, cfg.sign)
                row.update(_cplx(f"{tag}_system_phase", K.system_phase))
                row[f"{tag}_order_used"] = K.order_used
                row[f"{tag}_tail_bound"] = K.tail_bound
                for k, U in enumerate(K.per_mode):
                    for i in range(2):
                        for j in range(2):
                            row.update(_cplx(f"{tag}_m{k}_{i}{j}", U[i, j]))
        else:
            a_star, a_p = np.conj(cfg.alpha), cfg.alpha_prime
            if cfg.driven:
                K = oscillator.kernel_u2(cfg.system, cfg.bath, t, np.conj(cfg.nu), cfg.nu_prime, a_star, a_p)
            else:
                K = oscillator.kernel_u1(cfg.system, cfg.bath, t, a_star, a_p)
            row.update(_cplx("A", K.phases.A))
            row.update(_cplx("B", K.phases.squeeze))
            row.update(_cplx("bath_prefactor", K.bath_prefactor))
            if cfg.driven:
                row.update(_cplx("drive_prefactor", K.drive_prefactor))
            row.update(_cplx("up", K.sector(1)))
            row.update(_cplx("down", K.sector(-1)))
            for s, tag in ((1, "up"), (-1, "down")):
                nu = cfg.nu if cfg.driven else None
                nu_p = cfg.nu_prime if cfg.driven else None
                row.update(_cplx(f"element_{tag}", oscillator.physical_matrix_element(
                    cfg.system, cfg.bath, t, cfg.alpha, cfg.alpha_prime, s, nu, nu_p)))
        rows.append(row)
    return rows


def _relative(a, b, floor=1e-300):
    return abs(a - b) / max(abs(b), floor) if abs(b) > 1e-14 else abs(a - b)


def verify_rows(cfg: ExperimentConfig, rng: np.random.Generator) -> list[dict]:
    rows = []
    if cfg.is_spin:
        for t in cfg.times:
            row = {"t": float(t)}
            for s in _sectors(cfg):
                tag = "up" if s == 1 else "down"
                K = spin.kernel_u3(cfg.system, cfg.bath, s, t, cfg.tolerances, cfg.sign)
                U = oracle.spin_sector_unitary(cfg.system, cfg.bath, s, t, cfg.sign)
                row[f"residual_{tag}"] = float(np.max(np.abs(K.full() - U)))
                row[f"tail_bound_{tag}"] = K.tail_bound
            row["max_residual"] = max(v for k, v in row.items() if k.startswith("residual_"))
            rows.append(row)
        return rows

    M = len(cfg.bath)
    ref = oracle.OscillatorOracle(cfg.system, cfg.bath, cfg.tolerances, driven=cfg.driven)

    def draw():
        r = cfg.random_radius * np.sqrt(rng.random(M + 1))
        ph = np.exp(2j * np.pi * rng.random(M + 1))
        z = r * ph
        return z[1:], complex(z[0])

    points = [(cfg.alpha, cfg.alpha_prime, cfg.nu, cfg.nu_prime)]
    for _ in range(cfg.n_random):
        a, n1 = draw()
        ap, n2 = draw()
        points.append((a, ap, n1, n2))
    for t in cfg.times:
        row = {"t": float(t)}
        worst_n = 0
        for s in (1, -1):
            tag = "up" if s == 1 else "down"
            worst = 0.0
            for a, ap, nu, nu_p in points:
                if cfg.driven:
                    val = oscillator.physical_matrix_element(cfg.system, cfg.bath, t, a, ap, s, nu, nu_p)
                    ora = ref.matrix_element(t, a, ap, s, nu, nu_p)
                else:
                    val = oscillator.physical_matrix_element(cfg.system, cfg.bath, t, a, ap, s)
                    ora = ref.matrix_element(t, a, ap, s)
                worst = max(worst, _relative(val, ora))
                worst_n = max(worst_n, ref.last_n_max or 0)
            row[f"residual_{tag}"] = worst
        row["n_max"] = worst_n
        row["max_residual"] = max(row["residual_up"], row["residual_down"])
        rows.append(row)
    return rows


def dephasing_rows(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for t in cfg.times:
        if cfg.is_spin:
            chi = np.zeros(2 ** len(cfg.bath), dtype=complex)
            chi[0] = 1.0
            up = spin.kernel_u3(cfg.system, cfg.bath, 1, t, cfg.tolerances, -1).full() @ chi
            down = spin.kernel_u3(cfg.system, cfg.bath, -1, t, cfg.tolerances, -1).full() @ chi
            ratio = complex(np.vdot(down, up))
        else:
            ratio = oscillator.dephasing_factor(cfg.system, cfg.bath, t)
        rho = oracle.reduced_density_matrix(cfg.system, cfg.bath, [1, 1], None, t, cfg.tolerances)
        ora = complex(rho[0, 1] / 0.5)
        rows.append({
            "t": float(t),
            "magnitude": abs(ratio),
            "phase": float(np.angle(ratio)),
            "oracle_magnitude": abs(ora),
            "oracle_phase": float(np.angle(ora)),
            "population_up": float(rho[0, 0].real),
            "residual": abs(ratio - ora),
        })
    return rows


def structure_report(cfg: ExperimentConfig) -> dict:
    points = []
    for t in cfg.times:
        if cfg.is_spin:
            rep = structure.kernel_structure_report(
                spin_kernel=spin.kernel_u3(cfg.system, cfg.bath, cfg.sector or 1, t, cfg.tolerances, cfg.sign)
            )
        else:
            a_star = np.conj(cfg.alpha)
            if cfg.driven:
                K = oscillator.kernel_u2(cfg.system, cfg.bath, t, np.conj(cfg.nu), cfg.nu_prime, a_star, cfg.alpha_prime)
            else:
                K = oscillator.kernel_u1(cfg.system, cfg.bath, t, a_star, cfg.alpha_prime)
            rep = structure.kernel_structure_report(osc_kernel=K)
        rep["t"] = float(t)
        points.append(rep)
    return {"points": points, "pass": all(p["pass"] for p in points)}


def run(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Execute one configured experiment and write its outputs to ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    summary = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "schema_version": SCHEMA_VERSION,
        "bath_kind": "spin" if cfg.is_spin else "oscillator",
        "n_points": int(len(cfg.times)),
    }
    if cfg.mode == "kernel":
        write_csv(out_dir / "kernel.csv", kernel_rows(cfg))
        status = EXIT_OK
    elif cfg.mode == "verify":
        rows = verify_rows(cfg, rng)
        write_csv(out_dir / "verify.csv", rows)
        max_res = max(r["max_residual"] for r in rows)
        summary.update(max_residual=max_res, threshold=cfg.threshold, **{"pass": bool(max_res < cfg.threshold)})
        status = EXIT_OK if summary["pass"] else EXIT_FAILED
    elif cfg.mode == "dephasing":
        rows = dephasing_rows(cfg)
        write_csv(out_dir / "dephasing.csv", rows)
        max_res = max(r["residual"] for r in rows)
        summary.update(max_residual=max_res, threshold=cfg.threshold, **{"pass": bool(max_res < cfg.threshold)})
        status = EXIT_OK if summary["pass"] else EXIT_FAILED
    else:
        report = structure_report(cfg)
        write_json(out_dir / "structure.json", report)
        summary["pass"] = report["pass"]
        status = EXIT_OK if report["pass"] else EXIT_FAILED
    write_json(out_dir / "summary.json", summary)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qndprop", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--mode", choices=MODES, help="override the configured mode")
    p.add_argument("--out", default="qndprop-out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for randomized verification draws (u64)")
    p.add_argument("--tol", type=float, help="override tolerances.rel_tol")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg.mode = args.mode
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.tol is not None:
            cfg.tolerances = replace(cfg.tolerances, rel_tol=args.tol)
    except (ConfigError, QNDError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        status = run(cfg, Path(args.out))
    except (ConvergenceError, TruncationError) as exc:
        bound = getattr(exc, "bound", getattr(exc, "population", float("nan")))
        print(f"error: {exc} [bound={bound:.3e}]", file=sys.stderr)
        return EXIT_CONVERGENCE
    except QNDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("finished %s with exit code %d", cfg.mode, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
