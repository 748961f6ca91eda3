"""Scheme comparison tables: throughput, throughput/W and throughput/mm² normalised to ISAAC."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from helix.pim.mapping import CALIBRATION_TARGETS, SCHEME_ORDER, Schedule, geomean

METRICS = ("bases_per_s", "bases_per_s_per_w", "bases_per_s_per_mm2")
SIM_FIELDS = (
    "topology",
    "scheme",
    "bases_per_s",
    "chip_w",
    "chip_mm2",
    "bases_per_s_per_w",
    "bases_per_s_per_mm2",
    "dnn_share",
    "ctc_share",
    "vote_share",
)


def schedule_row(s: Schedule) -> dict:
    shares = s.shares
    return {
        "topology": s.topology,
        "scheme": s.scheme,
        "bases_per_s": s.bases_per_s,
        "chip_w": s.chip_w,
        "chip_mm2": s.chip_mm2,
        "bases_per_s_per_w": s.bases_per_joule,
        "bases_per_s_per_mm2": s.bases_per_s_mm2,
        "dnn_share": shares["dnn"],
        "ctc_share": shares["ctc"],
        "vote_share": shares["vote"],
    }


def write_simulation_csv(rows: Iterable[Mapping], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SIM_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{r[k]:.9g}" if isinstance(r[k], float) else r[k]) for k in SIM_FIELDS})


def read_simulation_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no simulation rows")
    missing = [k for k in ("topology", "scheme", *METRICS) if k not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return [{k: (v if k in ("topology", "scheme") else float(v)) for k, v in r.items()} for r in rows]


@dataclass(frozen=True)
class Comparison:
    schemes: tuple[str, ...]
    topologies: tuple[str, ...]
    per_topology: dict[str, dict[str, dict[str, float]]]  # topology -> scheme -> metric -> ratio to ISAAC
    mean: dict[str, dict[str, float]]  # scheme -> metric -> geometric mean ratio to ISAAC

    def step_ratio(self, num: str, den: str, metric: str = "bases_per_s") -> float:
        return geomean(self.per_topology[t][num][metric] / self.per_topology[t][den][metric] for t in self.topologies)

    def monotone(self, metric: str = "bases_per_s", rtol: float = 1e-9) -> bool:
        """Each scheme at least matches its predecessor on every network."""
        for t in self.topologies:
            vals = [self.per_topology[t][s][metric] for s in self.schemes]
            if any(b < a * (1 - rtol) for a, b in zip(vals, vals[1:])):
                return False
        return True

    def target_check(self, targets: Mapping[tuple[str, str], float] = CALIBRATION_TARGETS) -> list[dict]:
        out = []
        for (a, b), v in targets.items():
            got = self.step_ratio(a, b)
            out.append({"ratio": f"{a}/{b}", "model": got, "target": v, "rel_err": got / v - 1})
        return out

    def rows(self) -> list[dict]:
        out = []
        for t in (*self.topologies, "geomean"):
            for s in self.schemes:
                src = self.mean[s] if t == "geomean" else self.per_topology[t][s]
                out.append({"topology": t, "scheme": s, **{m: src[m] for m in METRICS}})
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=("topology", "scheme", *METRICS))
            w.writeheader()
            for r in self.rows():
                w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})

    def summary(self) -> dict:
        return {
            "normalised_to": "ISAAC",
            "average": "geometric mean over base-callers",
            "schemes": list(self.schemes),
            "topologies": list(self.topologies),
            "mean": self.mean,
            "monotone_throughput": self.monotone(),
            "targets": self.target_check() if {"SEAT", "ISAAC", "CTC", "ADC", "Helix"} <= set(self.schemes) else [],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True))


def scheme_comparison(rows: Sequence[Mapping], schemes: Sequence[str] = SCHEME_ORDER) -> Comparison:
    """Normalise simulation rows to ISAAC per network and average with the geometric mean."""
    if "ISAAC" not in schemes:
        raise ValueError("the comparison is normalised to ISAAC, which must be among the schemes")
    table: dict[str, dict[str, Mapping]] = {}
    for r in rows:
        table.setdefault(r["topology"], {})[r["scheme"]] = r
    if not table:
        raise ValueError("no simulation results")
    for t, by_scheme in table.items():
        missing = [s for s in schemes if s not in by_scheme]
        if missing:
            raise ValueError(f"{t}: missing variant(s) {missing}")
    per = {
        t: {s: {m: float(by[s][m]) / float(by["ISAAC"][m]) for m in METRICS} for s in schemes}
        for t, by in table.items()
    }
    mean = {s: {m: geomean(per[t][s][m] for t in per) for m in METRICS} for s in schemes}
    return Comparison(tuple(schemes), tuple(table), per, mean)
