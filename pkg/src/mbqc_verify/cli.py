"""Command-line front end: ``mbqcv {grover,cnot-grid,run,tomography-fit,rng-test}``.

Every command takes ``--seed`` (default from ``$MBQCV_SEED``, else 0) and an
optional ``--config`` JSON file whose keys mirror :class:`RunConfig`; flags
given on the command line override the file. Outputs depend only on the
configuration and seed, never on ``--workers``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rngtest, secretdep
from .graph import GraphError
from .pattern import (
    MeasurementPattern,
    cnot_grid_expected,
    cnot_grid_pattern,
    cnot_grid_vertex_count,
    grover_expected,
    grover_pattern,
    load_pattern,
)
from .protocol import ProtocolParams, run_protocol
from .simulator import KrausChannel, NoiseModel, StateVector, depolarizing, shot_rng

SEED_ENV = "MBQCV_SEED"


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------


@dataclass
class RunConfig:
    """Settings shared by the protocol commands.

    ``pattern`` names a built-in pattern (``grover`` or ``cnot-grid``) or is
    ``None`` when ``pattern_file`` points at a pattern JSON document;
    ``pattern_args`` holds the builder parameters.
    """

    pattern: str | None = "grover"
    pattern_args: dict = field(default_factory=dict)
    pattern_file: str | None = None
    d: int = 500
    t: int = 500
    w: int = 1
    x: list[int] = field(default_factory=list)
    noise: str = ""
    seed: int = 0
    workers: int = 1
    out_dir: str = "."
    bootstrap_sample: int = 800
    bootstrap_resamples: int = 10

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def build_pattern(self) -> tuple[MeasurementPattern, tuple[int, ...] | None]:
        """Pattern plus its expected decoded output, when an oracle is known."""
        if self.pattern_file:
            return load_pattern(self.pattern_file), None
        a = self.pattern_args
        if self.pattern == "grover":
            tau = int(a.get("tau", 0))
            return grover_pattern(tau), grover_expected(tau)
        if self.pattern == "cnot-grid":
            n, m, b = int(a["n"]), int(a["m"]), [int(v) for v in a["b"]]
            return cnot_grid_pattern(n, m, b), cnot_grid_expected(n, m, b)
        raise ConfigError(f"unknown pattern {self.pattern!r}")

    def params(self, pattern: MeasurementPattern) -> ProtocolParams:
        return ProtocolParams(self.d, self.t, self.w, pattern, tuple(self.x))


def _complex_matrix(m) -> np.ndarray:
    return np.array([[complex(*e) if isinstance(e, (list, tuple)) else complex(e) for e in row] for row in m])


def load_prep_kraus(path) -> dict[int, KrausChannel]:
    """``{"j": [K_1, K_2, ...]}`` with each ``K`` a 2x2 matrix of ``[re, im]`` entries."""
    doc = json.loads(Path(path).read_text())
    return {int(j): KrausChannel(tuple(_complex_matrix(k) for k in ops)) for j, ops in doc.items()}


def parse_noise(spec: str | None) -> NoiseModel:
    """``depol1=<p>,depol2=<p>,measflip=<p>,prepdep=<file>``; empty means noiseless."""
    kw: dict = {}
    for item in filter(None, (s.strip() for s in (spec or "").split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"noise term {item!r} is not key=value")
        try:
            if key == "depol1":
                kw["gate1"] = depolarizing(float(value), 1)
            elif key == "depol2":
                kw["gate2"] = depolarizing(float(value), 2)
            elif key == "measflip":
                kw["meas_flip"] = float(value)
            elif key == "prepdep":
                kw["prep_by_theta"] = load_prep_kraus(value)
            else:
                raise ConfigError(f"unknown noise term {key!r}")
        except ConfigError:
            raise
        except (ValueError, OSError) as exc:
            raise ConfigError(f"bad noise term {item!r}: {exc}") from exc
    return NoiseModel(**kw)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"${SEED_ENV} must be an integer, got {raw!r}") from None


def derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- commands --------------------------------------------------------------


def cmd_run(cfg: RunConfig, stem: str) -> dict:
    """Run the protocol once and write ``<stem>_report.json`` and ``<stem>_rounds.csv``."""
    pattern, truth = cfg.build_pattern()
    noise = parse_noise(cfg.noise)
    report = run_protocol(
        cfg.params(pattern),
        noise,
        seed=cfg.seed,
        truth=truth,
        workers=cfg.workers,
        bootstrap_sample=cfg.bootstrap_sample,
        bootstrap_resamples=cfg.bootstrap_resamples,
    )
    doc = report.to_dict()
    doc["expected_output"] = list(truth) if truth is not None else None
    doc["config"] = {k: v for k, v in asdict(cfg).items() if k not in ("workers", "out_dir")}
    out = Path(cfg.out_dir)
    _write(out / f"{stem}_report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write(out / f"{stem}_rounds.csv", report.rounds_csv(truth))
    return doc


def cmd_grover(cfg: RunConfig, tau: int) -> dict:
    if tau not in range(4):
        raise ConfigError(f"tau must be in 0..3, got {tau}")
    cfg.pattern, cfg.pattern_file, cfg.pattern_args = "grover", None, {"tau": tau}
    return cmd_run(cfg, f"grover_tau{tau}")


CELL_COLUMNS = [
    "n",
    "m",
    "vertices",
    "circuits",
    "rounds_per_circuit",
    "test_failure_mean",
    "test_failure_worst",
    "incorrect_output_mean",
    "incorrect_output_worst",
    "accepted_fraction",
]


def cnot_grid_cells(
    cfg: RunConfig,
    ns: Sequence[int],
    ms: Sequence[int],
    circuits: int,
    b: Sequence[int] | None = None,
) -> list[dict]:
    """Per-(n, m) summary over ``circuits`` random-input circuits.

    Circuit ``c`` of cell ``(n, m)`` draws its input bits and its protocol
    seed from the stream ``(seed, 10, n, m, c)``.
    """
    noise = parse_noise(cfg.noise)
    rows = []
    for n in ns:
        for m in ms:
            tests, comps, acc = [], [], 0
            for c in range(circuits):
                rng = shot_rng(cfg.seed, 10, n, m, c)
                bits = list(b) if b is not None else [int(v) for v in rng.integers(0, 2, n)]
                if len(bits) != n:
                    raise ConfigError(f"b has {len(bits)} bits but n = {n}")
                pattern = cnot_grid_pattern(n, m, bits)
                rep = run_protocol(
                    cfg.params(pattern),
                    noise,
                    seed=derived_seed(cfg.seed, 10, n, m, c),
                    truth=cnot_grid_expected(n, m, bits),
                    workers=cfg.workers,
                    bootstrap_sample=0,
                )
                tests.append(rep.test_failure_rate)
                comps.append(rep.incorrect_output_rate)
                acc += rep.accepted
            rows.append(
                {
                    "n": n,
                    "m": m,
                    "vertices": cnot_grid_vertex_count(n, m),
                    "circuits": circuits,
                    "rounds_per_circuit": cfg.d + cfg.t,
                    "test_failure_mean": float(np.mean(tests)),
                    "test_failure_worst": float(np.max(tests)),
                    "incorrect_output_mean": float(np.mean(comps)),
                    "incorrect_output_worst": float(np.max(comps)),
                    "accepted_fraction": acc / circuits,
                }
            )
    return rows


def cmd_cnot_grid(cfg: RunConfig, ns, ms, circuits: int, b=None) -> list[dict]:
    rows = cnot_grid_cells(cfg, ns, ms, circuits, b)
    path = Path(cfg.out_dir) / "cnot_grid_cells.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, CELL_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for row in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return rows


def cmd_tomography_fit(counts_csv: str | None, out: Path, starts: int, seed: int) -> dict:
    if counts_csv:
        data = secretdep.TomographyData.from_csv(counts_csv)
        if sorted(data.counts) != list(range(8)):
            raise ConfigError("tomography CSV must cover theta_index 0..7")
        states = {j: secretdep.reconstruct_state(data.counts[j]) for j in range(8)}
        source = str(counts_csv)
    else:
        states = secretdep.load_reference_states()
        source = "built-in reference tomography"
    doc = {"source": source, **secretdep.fit_report(states, starts=starts, seed=seed)}
    _write(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def simulate_bits(seed: int, noise: NoiseModel | None = None, n: int = rngtest.STREAM_LENGTH, attempt: int = 0) -> np.ndarray:
    """``n`` bits from ``|+>`` preparations measured in Z, one shot stream per bit."""
    noise = noise if noise is not None else NoiseModel()
    sv = StateVector(noise)
    return np.array([sv.sample_random_bit(0, shot_rng(seed, 3, attempt, k)) for k in range(n)], dtype=np.int8)


def cmd_rng_test(
    out: Path,
    file: str | None = None,
    seed: int = 0,
    noise: str = "",
    thresholds: str = "fips140-2",
    max_attempts: int = 1,
    bits_out: str | None = None,
) -> dict:
    th = rngtest.THRESHOLDS[thresholds]
    if file:
        bits = rngtest.read_bits(file)
        report = rngtest.fips_suite(bits, th)
        attempts = 1
    else:
        model = parse_noise(noise)
        for attempts in range(1, max_attempts + 1):
            bits = simulate_bits(seed, model, attempt=attempts - 1)
            report = rngtest.fips_suite(bits, th)
            if report.passed:
                break
        if bits_out:
            rngtest.write_ascii_bits(bits, bits_out)
    doc = {
        "source": file or "simulate",
        "thresholds": thresholds,
        "attempts": attempts,
        **report.to_dict(),
    }
    _write(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


# -- argument parsing ------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bits(text: str) -> list[int]:
    if not text or set(text) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"expected a 0/1 string, got {text!r}")
    return [int(c) for c in text]


def _protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig keys")
    p.add_argument("--d", type=int, help="computation rounds")
    p.add_argument("--t", type=int, help="test rounds")
    p.add_argument("--w", type=int, help="abort threshold on failed test rounds")
    p.add_argument("--noise", help="e.g. depol1=0.001,depol2=0.02,measflip=0.003,prepdep=kraus.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", dest="out_dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mbqcv", description="Verified MBQC protocol simulator and prerequisite checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grover", help="verified two-qubit Grover search")
    g.add_argument("--tau", type=int, choices=range(4), required=True, help="marked item")
    _protocol_flags(g)

    c = sub.add_parser("cnot-grid", help="volumetric sweep over CNOT-cascade patterns")
    c.add_argument("--n", type=_int_list, default=[2, 3], help="wire counts, e.g. 2,3,4")
    c.add_argument("--m", type=_int_list, default=[1, 2], help="layer counts, e.g. 1,2,3")
    c.add_argument("--b", type=_bits, help="fixed input bits (default: random per circuit)")
    c.add_argument("--circuits", type=int, default=5, help="random circuits per cell")
    _protocol_flags(c)

    r = sub.add_parser("run", help="protocol run on a pattern JSON file")
    r.add_argument("pattern_file")
    r.add_argument("--x", type=_bits, help="input bits")
    _protocol_flags(r)

    t = sub.add_parser("tomography-fit", help="best secret-independent preparation channel")
    t.add_argument("--counts", help="CSV with theta_index,basis,outcome,count (default: built-in fixture)")
    t.add_argument("--starts", type=int, default=5)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", default="tomography_fit.json")

    n = sub.add_parser("rng-test", help="FIPS 140-2 tests on 20,000 bits")
    src = n.add_mutually_exclusive_group(required=True)
    src.add_argument("--file", help="raw binary or ASCII 0/1 file")
    src.add_argument("--simulate", action="store_true", help="generate bits from |+> measurements")
    n.add_argument("--seed", type=int)
    n.add_argument("--noise", default="")
    n.add_argument("--thresholds", choices=sorted(rngtest.THRESHOLDS), default="fips140-2")
    n.add_argument("--max-attempts", type=int, default=1, help="regenerate a simulated stream on failure")
    n.add_argument("--bits-out", help="save the simulated stream as ASCII")
    n.add_argument("--out", default="rng_report.json")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig(seed=default_seed())
    for key in ("d", "t", "w", "noise", "seed", "workers", "out_dir"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if cfg.workers < 1:
        raise ConfigError("workers must be positive")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "grover":
            doc = cmd_grover(resolve_config(args), args.tau)
            print(f"{doc['decision']} output={doc['output']} c_fail={doc['c_fail']} test_failure_rate={doc['test_failure_rate']:.4f}")
        elif args.command == "cnot-grid":
            cfg = resolve_config(args)
            for row in cmd_cnot_grid(cfg, args.n, args.m, args.circuits, args.b):
                print(f"n={row['n']} m={row['m']} test_failure={row['test_failure_mean']:.4f} incorrect_output={row['incorrect_output_mean']:.4f}")
        elif args.command == "run":
            cfg = resolve_config(args)
            cfg.pattern, cfg.pattern_file = None, args.pattern_file
            if args.x is not None:
                cfg.x = args.x
            doc = cmd_run(cfg, Path(args.pattern_file).stem)
            print(f"{doc['decision']} output={doc['output']} c_fail={doc['c_fail']}")
        elif args.command == "tomography-fit":
            seed = args.seed if args.seed is not None else default_seed()
            doc = cmd_tomography_fit(args.counts, Path(args.out), args.starts, seed)
            print(f"eps_f={doc['eps_f']:.6f} eps_1={doc['eps_1']:.6f}")
        elif args.command == "rng-test":
            seed = args.seed if args.seed is not None else default_seed()
            doc = cmd_rng_test(Path(args.out), args.file, seed, args.noise, args.thresholds, args.max_attempts, args.bits_out)
            print("pass" if doc["passed"] else "fail", {t["name"]: t["passed"] for t in doc["tests"]})
    except (ConfigError, GraphError, ValueError, OSError, KeyError) as exc:
        print(f"mbqcv: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
