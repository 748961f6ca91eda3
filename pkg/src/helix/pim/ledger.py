"""Power/area roll-up from per-component records (engine -> tile -> chip)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from helix.pim.crossbar import CrossbarConfig

LEVELS = ("engine", "tile", "chip")

VARIANT_ALIASES = {
    "isaac": "isaac",
    "isaac-cmos-adc": "isaac",
    "sot-adc": "sot-adc",
    "helix-sot-adc": "sot-adc",
    "adc": "sot-adc",
    "helix": "helix",
    "+comparators": "helix",
    "helix+comparators": "helix",
}


def canonical_variant(name: str) -> str:
    try:
        return VARIANT_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown accelerator variant {name!r}") from None


@dataclass(frozen=True)
class Component:
    name: str
    level: str
    power_mw: float
    area_mm2: float
    count: int = 1
    variants: tuple[str, ...] | None = None  # None: present in every variant
    params: str = ""

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"component {self.name}: unknown level {self.level!r}")
        if self.power_mw < 0 or self.area_mm2 < 0 or self.count < 0:
            raise ValueError(f"component {self.name}: negative power, area or count")

    def used_by(self, variant: str) -> bool:
        return self.variants is None or variant in self.variants


@dataclass(frozen=True)
class EnergyAreaLedger:
    variant: str
    records: tuple[Component, ...]
    engines_per_tile: int
    tiles: int

    def _sum(self, level: str, attr: str) -> float:
        return sum(getattr(c, attr) * c.count for c in self.records if c.level == level)

    @property
    def engine_power_mw(self) -> float:
        return self._sum("engine", "power_mw")

    @property
    def engine_area_mm2(self) -> float:
        return self._sum("engine", "area_mm2")

    @property
    def engine_group_power_mw(self) -> float:
        return self.engine_power_mw * self.engines_per_tile

    @property
    def engine_group_area_mm2(self) -> float:
        return self.engine_area_mm2 * self.engines_per_tile

    @property
    def tile_power_mw(self) -> float:
        return self.engine_group_power_mw + self._sum("tile", "power_mw")

    @property
    def tile_area_mm2(self) -> float:
        return self.engine_group_area_mm2 + self._sum("tile", "area_mm2")

    @property
    def chip_power_w(self) -> float:
        return (self.tile_power_mw * self.tiles + self._sum("chip", "power_mw")) / 1000.0

    @property
    def chip_area_mm2(self) -> float:
        return self.tile_area_mm2 * self.tiles + self._sum("chip", "area_mm2")

    @property
    def power_density_w_per_mm2(self) -> float:
        return self.chip_power_w / self.chip_area_mm2 if self.chip_area_mm2 else 0.0

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "engine_group_mw": self.engine_group_power_mw,
            "engine_group_mm2": self.engine_group_area_mm2,
            "tile_mw": self.tile_power_mw,
            "tile_mm2": self.tile_area_mm2,
            "chip_w": self.chip_power_w,
            "chip_mm2": self.chip_area_mm2,
            "w_per_mm2": self.power_density_w_per_mm2,
        }


def components_from_dicts(rows: Sequence[Mapping]) -> list[Component]:
    return [
        Component(
            name=r["name"],
            level=r["level"],
            power_mw=float(r["power_mw"]),
            area_mm2=float(r["area_mm2"]),
            count=int(r.get("count", 1)),
            variants=tuple(r["variants"]) if r.get("variants") is not None else None,
            params=r.get("params", ""),
        )
        for r in rows
    ]


def load_component_table(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("helix").joinpath("data/table3.json").read_text()
    else:
        text = Path(path).read_text()
    table = json.loads(text)
    table["components"] = components_from_dicts(table["components"])
    return table


def ledger_rollup(
    cfg: CrossbarConfig = CrossbarConfig(),
    variant: str = "isaac",
    components: Sequence[Component] | None = None,
) -> EnergyAreaLedger:
    """Totals for one accelerator variant; geometry (engines/tile, tiles) comes from ``cfg``."""
    variant = canonical_variant(variant)
    comps = components if components is not None else load_component_table()["components"]
    known = {v for c in comps if c.variants for v in c.variants} | {"isaac", "sot-adc", "helix"}
    if variant not in known:
        raise ValueError(f"unknown accelerator variant {variant!r}")
    return EnergyAreaLedger(
        variant=variant,
        records=tuple(c for c in comps if c.used_by(variant)),
        engines_per_tile=cfg.engines_per_tile,
        tiles=cfg.tiles,
    )
