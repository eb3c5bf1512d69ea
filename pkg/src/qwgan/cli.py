"""Command-line experiments: expectations, learn, phase-scan, wgan, string-order.

Every command resolves a flat JSON config (defaults < config file < flags),
validates it completely, computes all outputs in memory and only then writes
``<out>/<command>-<seed>/`` with a ``manifest.json`` of content hashes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import zlib
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .ansatz import FAMILIES, AnsatzSpec, butterfly_circuit, phase_transition_circuit
from .classical_wgan import WGANConfig, sample_targets, train_wgan
from .interpolation import (
    LabeledSample,
    build_training_set,
    fit,
    label_grid,
    phase_scan_to_csv,
    samples_to_csv,
    string_order,
    target_at,
)
from .observables import (
    enumerate_observables,
    expectation_vector,
    expectations_to_csv,
    vectors_to_csv,
)
from .quantum_core import run_circuit
from .trainer import (
    MixtureGenerator,
    TrainingConfig,
    checkpoint_from_json,
    checkpoint_to_json,
    generator_state,
    train,
)


class ConfigError(ValueError):
    pass


# -- seeds -----------------------------------------------------------------


def child_seed(seed: int, purpose: str) -> int:
    """Independent 63-bit seed for one named use of the run seed."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(purpose.encode()),))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int((int(hi) << 31) ^ int(lo))


def child_rng(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, purpose))


# -- config schema -----------------------------------------------------------


def _int(lo: int, hi: Optional[int] = None) -> Callable:
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key} must be an integer")
        if v < lo or (hi is not None and v > hi):
            raise ConfigError(f"{key}={v} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return v
    return check


def _opt_int(lo: int) -> Callable:
    inner = _int(lo)
    return lambda key, v: None if v is None else inner(key, v)


def _pos_float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v) or v <= 0:
        raise ConfigError(f"{key} must be a positive number")
    return float(v)


def _nonneg_float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v) or v < 0:
        raise ConfigError(f"{key} must be a non-negative number")
    return float(v)


def _choice(*options) -> Callable:
    def check(key, v):
        if v not in options:
            raise ConfigError(f"{key}={v!r}; choose from {options}")
        return v
    return check


def _g_value(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not -1.0 <= v <= 1.0:
        raise ConfigError(f"{key} values must be numbers in [-1, 1]")
    return float(v)


def _g_list(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key} must be a non-empty list of numbers")
    out = [_g_value(key, x) for x in v]
    if len(set(out)) != len(out):
        raise ConfigError(f"{key} contains duplicates")
    return out


def _opt_g(key, v):
    return None if v is None else _g_value(key, v)


def _params(key, v):
    if v is None or v == "zeros":
        return v
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{key} must be null, \"zeros\" or a list of numbers")
    return [float(x) for x in v]


def _opt_path(key, v):
    if v is None:
        return None
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{key} must be a path string")
    return v


def _bool(key, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{key} must be true or false")
    return v


_COMMON = {"seed": (0, _int(0, 2**64 - 1)), "out": ("runs", _opt_path)}

SCHEMAS = {
    "expectations": {
        "ansatz": ("phase", _choice(*FAMILIES)),
        "n": (5, _int(1, 12)),
        "k": (1, _int(1)),
        "layers": (None, _opt_int(1)),
        "g": ([0.0], _g_list),
        "params": (None, _params),
    },
    "learn": {
        "n": (3, _int(1, 12)),
        "k": (2, _int(1)),
        "rank": (1, _int(1)),
        "ansatz": ("generic", _choice("generic", "butterfly", "ry")),
        "layers": (24, _opt_int(1)),
        "target_ansatz": ("generic", _choice(*FAMILIES)),
        "target_layers": (2, _opt_int(1)),
        "target_g": (None, _opt_g),
        "target_params": (None, _params),
        "learning_rate": (1e-3, _pos_float),
        "max_iters": (1000, _int(1)),
        "stop_tolerance": (1e-4, _nonneg_float),
        "stop_patience": (50, _int(1)),
        "resume": (None, _opt_path),
        "svg": (True, _bool),
    },
    "phase-scan": {
        "n": (5, _int(5, 12)),
        "k": (3, _int(1)),
        "m": (11, _int(2)),
        "g": ([-0.8, -0.7, -0.3, 0.3, 0.5, 0.8, 0.9], _g_list),
        "ansatz": ("generic", _choice("generic", "butterfly", "ry")),
        "layers": (6, _opt_int(1)),
        "rank": (1, _int(1)),
        "learning_rate": (0.01, _pos_float),
        "max_iters": (1500, _int(1)),
        "stop_tolerance": (1e-4, _nonneg_float),
        "stop_patience": (200, _int(1)),
    },
    "wgan": {
        "n": (6, _int(2, 12)),
        "k": (4, _int(1)),
        "training_size": (256, _int(1)),
        "samples": (5, _int(1)),
        "ansatz": ("butterfly", _choice("generic", "butterfly", "ry")),
        "layers": (None, _opt_int(1)),
        "rank": (4, _int(1)),
        "learning_rate": (0.05, _pos_float),
        "max_iters": (1000, _int(1)),
        "stop_tolerance": (1e-4, _nonneg_float),
        "stop_patience": (1000, _int(1)),
        "latent_dim": (16, _int(1)),
        "gp_lambda": (10.0, _nonneg_float),
        "wgan_learning_rate": (1e-3, _pos_float),
        "batch_size": (64, _int(1)),
        "critic_steps": (5, _int(1)),
        "generator_steps": (6000, _int(1)),
    },
    "string-order": {
        "n": (5, _int(5, 12)),
        "g": (None, lambda key, v: None if v is None else _g_list(key, v)),
        "m": (21, _int(2)),
    },
}


def resolve_config(command: str, file_data: Optional[dict], overrides: dict) -> dict:
    """defaults < config file < flags; every key validated, unknown keys rejected."""
    schema = {**_COMMON, **SCHEMAS[command]}
    cfg = {key: default for key, (default, _) in schema.items()}
    for source, data in (("config file", {} if file_data is None else file_data), ("flags", overrides)):
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(schema))
        if unknown:
            raise ConfigError(f"unknown {source} keys for {command}: {', '.join(unknown)}")
        cfg.update(data)
    cfg = {key: schema[key][1](key, cfg[key]) for key in schema}
    _cross_check(command, cfg)
    return cfg


def _cross_check(command: str, cfg: dict) -> None:
    def spec(family, layers, field="ansatz"):
        try:
            s = AnsatzSpec(family, cfg["n"], layers if family == "generic" else None)
            if family != "phase":
                s.build()
            return s
        except ValueError as exc:
            raise ConfigError(f"{field}: {exc}") from None

    if command in ("expectations", "learn", "wgan", "phase-scan"):
        if cfg["k"] > cfg["n"]:
            raise ConfigError(f"k={cfg['k']} exceeds n={cfg['n']}")
    if command == "expectations":
        s = spec(cfg["ansatz"], cfg["layers"])
        if s.family == "phase":
            if cfg["n"] < 3:
                raise ConfigError("the phase circuit needs n >= 3")
            if cfg["params"] is not None:
                raise ConfigError("the phase circuit has no free parameters; use g")
        else:
            if len(cfg["g"]) != 1 or cfg["g"][0] != 0.0:
                raise ConfigError("g only applies to the phase ansatz")
            if isinstance(cfg["params"], list) and len(cfg["params"]) != s.n_params:
                raise ConfigError(f"params has {len(cfg['params'])} entries, ansatz needs {s.n_params}")
    elif command == "learn":
        spec(cfg["ansatz"], cfg["layers"])
        t = spec(cfg["target_ansatz"], cfg["target_layers"], "target_ansatz")
        if t.family == "phase":
            if cfg["n"] < 3:
                raise ConfigError("the phase circuit needs n >= 3")
            if cfg["target_g"] is None:
                raise ConfigError("target_g is required for a phase target")
            if cfg["target_params"] is not None:
                raise ConfigError("the phase circuit has no free parameters; use target_g")
        else:
            if cfg["target_g"] is not None:
                raise ConfigError("target_g only applies to a phase target")
            if isinstance(cfg["target_params"], list) and len(cfg["target_params"]) != t.n_params:
                raise ConfigError(f"target_params has {len(cfg['target_params'])} entries, target needs {t.n_params}")
    elif command == "phase-scan":
        spec(cfg["ansatz"], cfg["layers"])
    elif command == "wgan":
        spec(cfg["ansatz"], cfg["layers"])
        if cfg["batch_size"] > cfg["training_size"]:
            raise ConfigError("batch_size exceeds training_size")


# -- SVG ---------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def line_chart(series, title: str, xlabel: str, ylabel: str, width: int = 640, height: int = 400) -> str:
    """Minimal SVG: axes, one polyline (or markers) per series, legend.

    ``series`` is a list of (name, xs, ys, markers_only).
    """
    left, right, top, bottom = 60, 150, 30, 45
    pts = [(x, y) for _, xs, ys, _ in series for x, y in zip(xs, ys) if np.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2:.1f})">{ylabel}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 15}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{left - 5}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    for i, (name, xs, ys, markers) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = [(sx(x), sy(y)) for x, y in zip(xs, ys) if np.isfinite(y)]
        if markers:
            out.extend(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color}"/>' for cx, cy in coords)
        elif coords:
            path = " ".join(f"{cx:.2f},{cy:.2f}" for cx, cy in coords)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = top + 14 * i + 8
        out.append(f'<rect x="{left + pw + 12}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 27}" y="{ly + 1}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- commands ----------------------------------------------------------------


def cmd_expectations(cfg: dict) -> dict:
    obs = enumerate_observables(cfg["n"], cfg["k"])
    spec = AnsatzSpec(cfg["ansatz"], cfg["n"], cfg["layers"])
    if spec.family == "phase":
        samples = [
            LabeledSample(g, expectation_vector(run_circuit(phase_transition_circuit(cfg["n"], g)), obs))
            for g in cfg["g"]
        ]
        return {"expectations.csv": samples_to_csv(samples)}
    circuit = spec.build()
    if cfg["params"] is None:
        params = child_rng(cfg["seed"], "params").uniform(-np.pi, np.pi, circuit.n_params)
    elif cfg["params"] == "zeros":
        params = np.zeros(circuit.n_params)
    else:
        params = np.array(cfg["params"])
    vec = expectation_vector(run_circuit(circuit, params), obs)
    return {
        "expectations.csv": expectations_to_csv(vec),
        "params.csv": "index,theta\n" + "".join(f"{i},{float(t)!r}\n" for i, t in enumerate(params)),
    }


def _learn_target(cfg: dict):
    spec = AnsatzSpec(cfg["target_ansatz"], cfg["n"], cfg["target_layers"])
    if spec.family == "phase":
        return run_circuit(spec.build(cfg["target_g"]))
    circuit = spec.build()
    if cfg["target_params"] is None:
        theta = child_rng(cfg["seed"], "target").uniform(-np.pi, np.pi, circuit.n_params)
    elif cfg["target_params"] == "zeros":
        theta = np.zeros(circuit.n_params)
    else:
        theta = np.array(cfg["target_params"])
    return run_circuit(circuit, theta)


def _training_config(cfg: dict, seed: int, stop_patience=None) -> TrainingConfig:
    return TrainingConfig(
        k=cfg["k"],
        max_iters=cfg["max_iters"],
        learning_rate=cfg["learning_rate"],
        seed=seed,
        stop_tolerance=cfg["stop_tolerance"],
        stop_patience=cfg["stop_patience"] if stop_patience is None else stop_patience,
        rank=cfg["rank"],
    )


def cmd_learn(cfg: dict) -> dict:
    obs = enumerate_observables(cfg["n"], cfg["k"])
    target_state = _learn_target(cfg)
    target = expectation_vector(target_state, obs)
    init_seed = child_seed(cfg["seed"], "init")
    tcfg = _training_config(cfg, init_seed)
    if cfg["resume"] is not None:
        try:
            text = Path(cfg["resume"]).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read checkpoint: {exc}") from None
        try:
            gen0, state, seed, k = checkpoint_from_json(text)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad checkpoint: {exc}") from None
        if seed != cfg["seed"] or k != cfg["k"]:
            raise ConfigError("checkpoint seed/k do not match the config")
        if (gen0.ansatz.family, gen0.ansatz.n_qubits, gen0.rank) != (cfg["ansatz"], cfg["n"], cfg["rank"]):
            raise ConfigError("checkpoint generator does not match the config")
    else:
        spec = AnsatzSpec(cfg["ansatz"], cfg["n"], cfg["layers"] if cfg["ansatz"] == "generic" else None)
        gen0 = MixtureGenerator.initialize(spec, cfg["rank"], init_seed)
        state = None
    gen, history = train(target, tcfg, gen0, target_state=target_state, state=state)
    files = {
        "history.csv": history.to_csv(),
        "checkpoint.json": checkpoint_to_json(gen, history.state, cfg["seed"], cfg["k"]),
    }
    if cfg["svg"]:
        it = [r.iter for r in history.records]
        files["history.svg"] = line_chart(
            [("W1", it, history.w1, False), ("fidelity", it, history.fidelity, False)],
            f"learn n={cfg['n']} k={cfg['k']} rank={cfg['rank']}", "iteration", "value",
        )
    return files


def cmd_phase_scan(cfg: dict) -> dict:
    n, k = cfg["n"], cfg["k"]
    samples = build_training_set(n, k, cfg["m"])
    f = fit(samples)
    obs = f.observables
    layers = cfg["layers"] if cfg["ansatz"] == "generic" else None
    spec = AnsatzSpec(cfg["ansatz"], n, layers)
    rows, files = [], {"training_set.csv": samples_to_csv(samples)}
    for i, g in enumerate(sorted(cfg["g"])):
        exact = run_circuit(phase_transition_circuit(n, g))
        seed = child_seed(cfg["seed"], f"init-{i}")
        gen0 = MixtureGenerator.initialize(spec, cfg["rank"], seed)
        gen, history = train(target_at(f, g), _training_config(cfg, seed), gen0, target_state=exact)
        mix = generator_state(gen)
        rows.append((g, string_order(exact, "S1"), string_order(exact, "SZY"), "exact"))
        rows.append((g, string_order(mix, "S1"), string_order(mix, "SZY"), "generated"))
        files[f"history_g{g:+.3f}.csv"] = history.to_csv()
    files["phase_scan.csv"] = phase_scan_to_csv(rows)
    dense = label_grid(41)
    ex = [run_circuit(phase_transition_circuit(n, float(g))) for g in dense]
    gen_rows = [r for r in rows if r[3] == "generated"]
    files["phase_scan.svg"] = line_chart(
        [
            ("S1 exact", dense, [string_order(s, "S1") for s in ex], False),
            ("SZY exact", dense, [string_order(s, "SZY") for s in ex], False),
            ("S1 generated", [r[0] for r in gen_rows], [r[1] for r in gen_rows], True),
            ("SZY generated", [r[0] for r in gen_rows], [r[2] for r in gen_rows], True),
        ],
        f"string order, N={n}", "g", "value",
    )
    return files


def cmd_wgan(cfg: dict) -> dict:
    n, k = cfg["n"], cfg["k"]
    obs = enumerate_observables(n, k)
    layers = cfg["layers"] if cfg["ansatz"] == "generic" else None
    spec = AnsatzSpec(cfg["ansatz"], n, layers)
    data_circuit = butterfly_circuit(n)
    rng = child_rng(cfg["seed"], "training-set")
    training = [
        expectation_vector(run_circuit(data_circuit, rng.uniform(-np.pi, np.pi, data_circuit.n_params)), obs)
        for _ in range(cfg["training_size"])
    ]
    wcfg = WGANConfig(
        latent_dim=cfg["latent_dim"],
        gp_lambda=cfg["gp_lambda"],
        learning_rate=cfg["wgan_learning_rate"],
        batch_size=cfg["batch_size"],
        critic_steps=cfg["critic_steps"],
        generator_steps=cfg["generator_steps"],
        seed=child_seed(cfg["seed"], "wgan"),
    )
    generator, _, wh = train_wgan(training, wcfg)
    targets = sample_targets(generator, cfg["samples"], child_rng(cfg["seed"], "samples"), obs)
    files = {
        "training_set.csv": vectors_to_csv(training, obs),
        "generator.json": generator.to_json(),
        "wgan_history.csv": "step,critic_loss,generator_loss,penalty\n" + "".join(
            f"{i + 1},{float(c)!r},{float(g)!r},{float(p)!r}\n"
            for i, (c, g, p) in enumerate(zip(wh.critic_loss, wh.generator_loss, wh.penalty))
        ),
        "samples.csv": vectors_to_csv(targets, obs),
    }
    summary = ["sample,first_w1,min_w1,final_w1,first_iter_below_1"]
    series = []
    for i, target in enumerate(targets):
        seed = child_seed(cfg["seed"], f"init-{i}")
        gen0 = MixtureGenerator.initialize(spec, cfg["rank"], seed)
        _, history = train(target, _training_config(cfg, seed), gen0)
        w1 = history.w1
        below = np.flatnonzero(w1 < 1.0)
        summary.append(
            f"{i},{float(w1[0])!r},{float(w1.min())!r},{float(w1[-1])!r},{int(below[0]) if below.size else ''}"
        )
        files[f"w1_sample_{i:02d}.csv"] = history.to_csv()
        series.append((f"sample {i}", [r.iter for r in history.records], w1, False))
    files["summary.csv"] = "\n".join(summary) + "\n"
    files["w1.svg"] = line_chart(series, f"W1 vs iteration, n={n} k={k}", "iteration", "LP-W1")
    return files


def cmd_string_order(cfg: dict) -> dict:
    grid = cfg["g"] if cfg["g"] is not None else [float(g) for g in label_grid(cfg["m"])]
    rows = []
    for g in sorted(grid):
        s = run_circuit(phase_transition_circuit(cfg["n"], g))
        rows.append((g, string_order(s, "S1"), string_order(s, "SZY"), "exact"))
    xs = [r[0] for r in rows]
    return {
        "string_order.csv": phase_scan_to_csv(rows),
        "string_order.svg": line_chart(
            [("S1", xs, [r[1] for r in rows], False), ("SZY", xs, [r[2] for r in rows], False)],
            f"exact string order, N={cfg['n']}", "g", "value",
        ),
    }


COMMANDS = {
    "expectations": cmd_expectations,
    "learn": cmd_learn,
    "phase-scan": cmd_phase_scan,
    "wgan": cmd_wgan,
    "string-order": cmd_string_order,
}


# -- persistence -------------------------------------------------------------


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_outputs(command: str, cfg: dict, files: dict) -> Path:
    out_dir = Path(cfg["out"]) / f"{command}-{cfg['seed']}"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    config_text = json.dumps(cfg, sort_keys=True)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "config_sha256": _sha256(config_text),
        "files": {name: _sha256(text) for name, text in sorted(files.items())},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out_dir


def run(command: str, cfg: dict) -> Path:
    return write_outputs(command, cfg, COMMANDS[command](cfg))


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwgan", description="Quantum Wasserstein GAN experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON object of config keys")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--k", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--rank", type=int)
        p.add_argument("--ansatz")
        p.add_argument("--g", type=float, action="append")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "out", "k", "n", "rank", "ansatz", "g")
        if getattr(args, key) is not None
    }
    try:
        file_data = None
        if args.config is not None:
            try:
                file_data = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load config: {exc}") from None
        cfg = resolve_config(args.command, file_data, overrides)
        out_dir = run(args.command, cfg)
    except ConfigError as exc:
        print(f"qwgan {args.command}: error: {exc}", file=sys.stderr)
        return 2
    print(out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
