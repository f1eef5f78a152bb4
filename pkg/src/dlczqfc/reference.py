"""Access to the bundled file of published reference values."""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path


@lru_cache(maxsize=None)
def _load() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";",))
    parser.optionxform = str
    text = (Path(__file__).parent / "data" / "reference_values.ini").read_text()
    parser.read_string(text)
    return parser


def value(section: str, key: str) -> float:
    return _load().getfloat(section, key)


@dataclass(frozen=True)
class PublishedRow:
    write_power: float  # W
    p_cw_r_percent: float
    g2_cw_r: tuple[float, float]
    g2_cw_cw: tuple[float, float]
    g2_r_r: tuple[float, float]
    R: tuple[float, float]


def published_table() -> list[PublishedRow]:
    parser = _load()
    rows = []
    for name in sorted(s for s in parser.sections() if s.startswith("table.")):
        sec = parser[name]

        def pair(key):
            return (sec.getfloat(key), sec.getfloat(key + "_sigma"))

        rows.append(PublishedRow(
            write_power=sec.getfloat("write_power_mw") * 1e-3,
            p_cw_r_percent=sec.getfloat("p_cw_r_percent"),
            g2_cw_r=pair("g2_cw_r"),
            g2_cw_cw=pair("g2_cw_cw"),
            g2_r_r=pair("g2_r_r"),
            R=pair("R"),
        ))
    return rows
