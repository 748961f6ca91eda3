"""Command-line front end: ``helix {basecall,simulate,mc,train-toy,report}``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    topology: str = "toy"
    bit_width: int | None = None  # None: float forward pass
    beam_width: int = 5
    coverage: int = 1
    variants: tuple[str, ...] = ("ISAAC", "16-bit", "SEAT", "ADC", "CTC", "Helix")
    topologies: tuple[str, ...] = ("guppy", "scrappie", "chiron")
    seed: int = 0
    out_dir: str = "."
    # basecall
    signal_path: str | None = None
    truth_path: str | None = None
    weights_path: str | None = None
    probs_path: str | None = None  # decode one probability matrix (CSV, steps x 5)
    reads_path: str | None = None  # vote on newline-delimited reads
    n_bases: int = 200
    noise: float = 0.3
    sub_noise: float = 0.0
    # mc
    mc_sizes: tuple[int, ...] = (40, 50, 60)
    mc_samples: int = 1_000_000
    mc_params_path: str | None = None
    comparator_samples: int = 100_000
    # train-toy
    loss: str = "loss0"
    steps: int = 20
    lr: float = 0.05
    eta: float = 1.0
    pretrain_steps: int = 0
    # report
    simulation_csv: str | None = None

    def __post_init__(self):
        if self.bit_width is not None and not 3 <= self.bit_width <= 32:
            raise ConfigError("bit_width must lie in [3, 32]")
        for name in ("beam_width", "coverage", "n_bases"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.sub_noise <= 1.0 or self.noise < 0:
            raise ConfigError("noise levels out of range")
        if self.loss not in ("loss0", "loss1"):
            raise ConfigError("loss must be loss0 or loss1")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        for name in ("signal_path", "truth_path", "weights_path", "probs_path", "reads_path", "mc_params_path", "simulation_csv"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name}: file {p} does not exist")

    @classmethod
    def from_mapping(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | None, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(raw)


# -- output helpers ---------------------------------------------------------------


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_summary(path_stem: Path, summary: dict, fmt: str) -> Path:
    if fmt == "json":
        path = path_stem.with_suffix(".json")
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        path = path_stem.with_suffix(".csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            for k in sorted(summary):
                w.writerow([k, summary[k]])
    return path


def read_signal(path: str) -> np.ndarray:
    """One sample per line (optionally a CSV column), or a ``.npy`` array."""
    p = Path(path)
    try:
        if p.suffix == ".npy":
            data = np.load(p, allow_pickle=False)
        else:
            lines = [ln.strip() for ln in p.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
            if lines and not _is_number(lines[0].split(",")[0]):
                lines = lines[1:]
            data = np.array([float(ln.split(",")[0]) for ln in lines])
    except (ValueError, OSError) as exc:
        raise ConfigError(f"malformed signal file {path}: {exc}") from None
    data = np.asarray(data, dtype=np.float64).ravel()
    if data.size == 0:
        raise ConfigError(f"signal file {path} is empty")
    if not np.all(np.isfinite(data)):
        raise ConfigError(f"signal file {path} contains non-finite samples")
    return data


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# -- commands ---------------------------------------------------------------------


def cmd_basecall(cfg: RunConfig, fmt: str) -> dict:
    from helix.ctc import beam_search
    from helix.genome import Read, classify_errors, read_accuracy
    from helix.nn import basecaller_forward, init_weights, load_topology, load_weights, window_starts
    from helix.synth import make_stream, threshold_toy_weights

    if cfg.probs_path:
        return _decode_probs(cfg, fmt)
    if cfg.reads_path:
        return _vote_read_file(cfg, fmt)
    topo = load_topology(cfg.topology)
    rng = np.random.default_rng(cfg.seed)
    stream = None
    if cfg.signal_path:
        signal = read_signal(cfg.signal_path)
        truth = Path(cfg.truth_path).read_text().strip().upper() if cfg.truth_path else None
    else:
        stream = make_stream(cfg.n_bases, rng, noise=cfg.noise)
        signal, truth = stream.signal, stream.bases
    if len(signal) < topo.input_length:
        raise ConfigError(f"signal has {len(signal)} samples; one window needs {topo.input_length}")

    if cfg.weights_path:
        weights = load_weights(cfg.weights_path)
    elif topo.name == "toy":
        weights = threshold_toy_weights(topo)
    else:
        print(f"warning: no weights for {topo.name}; using random weights", file=sys.stderr)
        weights = init_weights(topo, np.random.default_rng(cfg.seed + 1))

    starts = window_starts(len(signal), topo.input_length, topo.sliding_offset)
    windows = np.stack([signal[s : s + topo.input_length] for s in starts])
    probs = basecaller_forward(topo, weights, windows, cfg.bit_width)
    decoded = [beam_search(p, cfg.beam_width)[0].symbols for p in probs]

    noise_rng = np.random.default_rng([cfg.seed, 1])
    reads: list[tuple[int, int, Read]] = []
    for w, (s, sym) in enumerate(zip(starts, decoded)):
        origin = int(stream.base_of_sample[s]) if stream is not None else 0
        for k in range(cfg.coverage):
            reads.append((w, k, Read(_substitute(sym, cfg.sub_noise, noise_rng), origin)))
    cons, read_starts = _vote_windows(reads, len(starts))

    out = _out(cfg)
    with open(out / "reads.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["window", "pass", "origin_offset", "read"])
        for w, k, r in reads:
            wr.writerow([w, k, r.origin_offset, r.symbols])
    (out / "consensus.txt").write_text(cons.symbols + "\n")

    summary = {"windows": len(starts), "reads": len(reads), "consensus_length": len(cons.symbols), "gaps": len(cons.gaps)}
    if truth:
        if stream is not None:
            placed = [r for _, _, r in reads]
        else:
            placed = [Read(r.symbols, read_starts[i]) for i, (_, _, r) in enumerate(reads) if i in read_starts]
        covered = truth
        if stream is not None:  # bases past the last window are never called, so they are not scored
            covered = stream.truth(starts[0], starts[-1] + topo.input_length).symbols
        report = classify_errors(placed, covered)
        (out / "errors.json").write_text(report.to_json() + "\n")
        summary.update(
            read_accuracy=float(np.mean([read_accuracy(r.symbols, _truth_of(stream, topo, starts[w], truth)) for w, _, r in reads])),
            vote_accuracy=read_accuracy(cons.symbols, covered),
            random_errors=report.random_count,
            systematic_errors=report.systematic_count,
        )
    _write_summary(out / "basecall_summary", summary, fmt)
    return summary


def _decode_probs(cfg: RunConfig, fmt: str) -> dict:
    from helix.ctc import beam_search, load_prob_csv
    from helix.nn import ProbMatrix

    try:
        probs = ProbMatrix(load_prob_csv(cfg.probs_path))
    except ValueError as exc:
        raise ConfigError(f"malformed probability matrix {cfg.probs_path}: {exc}") from None
    read, prob = beam_search(np.asarray(probs), cfg.beam_width)
    summary = {"read": read.symbols, "probability": prob, "steps": len(probs), "beam_width": cfg.beam_width}
    _write_summary(_out(cfg) / "decode_summary", summary, fmt)
    return summary


def _vote_read_file(cfg: RunConfig, fmt: str) -> dict:
    from helix.genome import Read
    from helix.vote import align_and_vote

    lines = [ln.strip().upper() for ln in Path(cfg.reads_path).read_text().splitlines() if ln.strip()]
    try:
        reads = [Read(ln) for ln in lines]
        cons = align_and_vote(reads)
    except ValueError as exc:
        raise ConfigError(f"bad read file {cfg.reads_path}: {exc}") from None
    out = _out(cfg)
    (out / "consensus.json").write_text(cons.to_json() + "\n")
    summary = {"reads": len(reads), "consensus": cons.symbols, "gaps": len(cons.gaps)}
    _write_summary(out / "vote_summary", summary, fmt)
    return summary


def _vote_windows(reads, n_windows: int):
    """Place repeat reads of one window together, then vote over every read.

    Each window is represented by the column majority of its modal-length
    reads; representatives are chained in window order, and every read of a
    window starts where its representative does.
    """
    from collections import Counter

    from helix.genome import Read, majority
    from helix.vote import ConsensusRead, place_reads, vote_columns

    reps, rep_window = [], []
    for w in range(n_windows):
        group = [r.symbols for ww, _, r in reads if ww == w and len(r)]
        if not group:
            continue
        length = Counter(len(g) for g in group).most_common(1)[0][0]
        same = [g for g in group if len(g) == length]
        reps.append(Read("".join(majority(col) for col in zip(*same))))
        rep_window.append(w)
    if not reps:
        raise RuntimeError("no window produced a read")
    rep_starts, gaps = place_reads(reps)
    window_start = dict(zip(rep_window, rep_starts))
    placed, starts, read_starts = [], [], {}
    for i, (w, _, r) in enumerate(reads):
        if len(r) and w in window_start:
            placed.append(r)
            starts.append(window_start[w])
            read_starts[i] = window_start[w]
    symbols, columns = vote_columns(placed, starts)
    return ConsensusRead(symbols, tuple(columns), tuple(starts), tuple(gaps)), read_starts


def _truth_of(stream, topo, start: int, truth: str) -> str:
    if stream is None:
        return truth
    return stream.truth(start, start + topo.input_length).symbols


def _substitute(symbols: str, p: float, rng: np.random.Generator) -> str:
    if p <= 0 or not symbols:
        return symbols
    out = list(symbols)
    for i in np.flatnonzero(rng.random(len(out)) < p):
        choices = [b for b in "ACGT" if b != out[i]]
        out[i] = choices[int(rng.integers(3))]
    return "".join(out)


def cmd_simulate(cfg: RunConfig, fmt: str) -> dict:
    from helix.nn import load_topology
    from helix.pim.crossbar import CrossbarConfig
    from helix.pim.ledger import ledger_rollup
    from helix.pim.mapping import SCHEMES, calibrate_host, scheme_table
    from helix.report import schedule_row, write_simulation_csv

    if not cfg.variants:
        raise ConfigError("variant list is empty")
    bad = [v for v in cfg.variants if v not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown variants {bad}; choose from {list(SCHEMES)}")
    if not cfg.topologies:
        raise ConfigError("topology list is empty")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        topos = [load_topology(t) for t in cfg.topologies]
    xcfg = CrossbarConfig()
    cal = calibrate_host(topos, cfg=xcfg)
    table = scheme_table(topos, cal.host, xcfg, cfg.variants)
    out = _out(cfg)
    rows = [schedule_row(table[t.name][v]) for t in topos for v in cfg.variants]
    write_simulation_csv(rows, out / "simulation.csv")
    ledgers = {v: ledger_rollup(xcfg, v).summary() for v in ("isaac", "sot-adc", "helix")}
    summary = {
        "host": dataclasses.asdict(cal.host),
        "calibration": {f"{a}/{b}": {"model": cal.ratios[(a, b)], "target": cal.targets[(a, b)]} for a, b in cal.ratios},
        "ledger": ledgers,
    }
    if fmt == "json":
        _write_summary(out / "simulate_summary", summary, fmt)
    else:
        flat = {f"ledger.{v}.{k}": x for v, d in ledgers.items() for k, x in d.items() if k != "variant"}
        flat.update({f"calibration.{k}": v["model"] for k, v in summary["calibration"].items()})
        flat.update({f"host.{k}": v for k, v in summary["host"].items()})
        _write_summary(out / "simulate_summary", flat, fmt)
    return summary


def cmd_mc(cfg: RunConfig, fmt: str) -> dict:
    from helix import variation as var

    if cfg.mc_samples < var.MIN_SAMPLES:
        raise ConfigError(f"mc_samples must be >= {var.MIN_SAMPLES}")
    params = var.VariationParams()
    if cfg.mc_params_path:
        try:
            params = var.VariationParams.from_json(Path(cfg.mc_params_path).read_text())
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad variation parameter file: {exc}") from None
    out = _out(cfg)
    summary: dict = {"tau0_s": params.tau0, "jc0_A_per_m2": params.jc0, "limit_s": var.TARGET_WRITE_S}
    sizes = []
    for size in cfg.mc_sizes:
        res = var.mc_sweep(size, cfg.mc_samples, params, cfg.seed)
        var.histogram_csv(res, out / f"mc_hist_{size}F2.csv")
        sizes.append(res.summary())
    summary["sizes"] = sizes
    summary["extrapolated_exceed_60F2"] = var.exceed_probability(params)
    est = var.comparator_error_estimate(params, cfg.comparator_samples, cfg.seed)
    summary["comparator"] = {
        "per_cell_error": est.probability,
        "std_error": est.std_error,
        "analytic": est.analytic,
        "expected_errors_5.56e8_reads": est.expected_errors(5.56e8),
    }
    if fmt == "json":
        _write_summary(out / "mc_summary", summary, fmt)
    else:
        flat = {k: v for k, v in summary.items() if not isinstance(v, (list, dict))}
        for s in sizes:
            flat.update({f"{s['size_f2']}F2.{k}": v for k, v in s.items() if k != "size_f2"})
        flat.update({f"comparator.{k}": v for k, v in summary["comparator"].items()})
        _write_summary(out / "mc_summary", flat, fmt)
    return summary


def cmd_train_toy(cfg: RunConfig, fmt: str) -> dict:
    from helix import seat
    from helix.nn import init_weights, load_topology, weight_shapes
    from helix.synth import make_stream

    topo = load_topology(cfg.topology)
    n_params = sum(int(np.prod(s)) for s in weight_shapes(topo).values())
    if n_params > 2000:
        raise ConfigError(f"{topo.name} has {n_params} parameters; finite differences are limited to 2000")
    if cfg.loss == "loss1" and cfg.eta == 0:
        print("warning: loss1 with eta=0 has no likelihood term; training may not converge", file=sys.stderr)
    rng = np.random.default_rng(cfg.seed)
    stream = make_stream(cfg.n_bases, rng, noise=cfg.noise)
    samples = seat.make_samples(stream, topo)
    model = seat.ToyModel(topo, init_weights(topo, np.random.default_rng([cfg.seed, 2])))
    if cfg.pretrain_steps:
        model = seat.train_toy(model, samples, "loss0", cfg.pretrain_steps, cfg.lr, beam_width=cfg.beam_width).model
    model = seat.ToyModel(topo, model.weights, cfg.bit_width)
    result = seat.train_toy(model, samples, cfg.loss, cfg.steps, cfg.lr, seat.SeatConfig(eta=cfg.eta), beam_width=cfg.beam_width)
    out = _out(cfg)
    result.write_csv(out / "train_trace.csv")
    last = result.trace[-1]
    summary = {
        "loss": cfg.loss,
        "steps": cfg.steps,
        "bits": cfg.bit_width or 0,
        "final_loss": last.loss,
        "final_read_accuracy": last.read_accuracy,
        "final_vote_accuracy": last.vote_accuracy,
    }
    _write_summary(out / "train_summary", summary, fmt)
    return summary


def cmd_report(cfg: RunConfig, fmt: str) -> dict:
    from helix.report import read_simulation_csv, scheme_comparison

    out = _out(cfg)
    src = cfg.simulation_csv
    if src is None:
        cmd_simulate(cfg, fmt)
        src = str(out / "simulation.csv")
    try:
        rows = read_simulation_csv(src)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    schemes = tuple(v for v in cfg.variants)
    try:
        comp = scheme_comparison(rows, schemes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    comp.write_csv(out / "comparison.csv")
    comp.write_json(out / "comparison.json")
    return comp.summary()


COMMANDS = {
    "basecall": cmd_basecall,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
    "train-toy": cmd_train_toy,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subparser from resetting a flag given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="summary file format")

    parser = argparse.ArgumentParser(prog="helix", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basecall", parents=[common], help="base-call a signal and vote on the reads")
    p.add_argument("--signal", dest="signal_path")
    p.add_argument("--truth", dest="truth_path")
    p.add_argument("--weights", dest="weights_path")
    p.add_argument("--probs", dest="probs_path", help="decode one CSV probability matrix instead")
    p.add_argument("--reads", dest="reads_path", help="vote on newline-delimited reads instead")
    p.add_argument("--topology")
    p.add_argument("--bits", dest="bit_width", type=int)
    p.add_argument("--beam-width", type=int)
    p.add_argument("--coverage", type=int)
    p.add_argument("--sub-noise", type=float)
    p.add_argument("--n-bases", type=int)

    p = sub.add_parser("simulate", parents=[common], help="throughput, power and area per scheme")
    p.add_argument("--variants", nargs="*")
    p.add_argument("--topologies", nargs="+")

    p = sub.add_parser("mc", parents=[common], help="write-duration Monte Carlo and comparator error rate")
    p.add_argument("--samples", dest="mc_samples", type=int)
    p.add_argument("--sizes", dest="mc_sizes", type=int, nargs="+")
    p.add_argument("--params", dest="mc_params_path")

    p = sub.add_parser("train-toy", parents=[common], help="train a toy base-caller with loss0 or loss1")
    p.add_argument("--loss", choices=("loss0", "loss1"))
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--bits", dest="bit_width", type=int)
    p.add_argument("--pretrain-steps", type=int)
    p.add_argument("--n-bases", type=int)

    p = sub.add_parser("report", parents=[common], help="scheme comparison normalised to ISAAC")
    p.add_argument("--input", dest="simulation_csv")
    p.add_argument("--variants", nargs="*")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = vars(args).copy()
    command = opts.pop("command")
    config_path = opts.pop("config", None)
    fmt = opts.pop("format", None) or "json"
    for k in ("variants", "topologies", "mc_sizes"):
        if opts.get(k) is not None:
            opts[k] = list(opts[k])
    try:
        cfg = load_config(config_path, opts)
        COMMANDS[command](cfg, fmt)
    except ConfigError as exc:
        print(f"helix {command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to one exit code
        print(f"helix {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
