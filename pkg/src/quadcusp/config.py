"""Experiment configuration: INI sections over built-in defaults, plus run manifests."""
from __future__ import annotations

import configparser
import hashlib
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {
        "seed": "20240611",
        "threads": "1",
        "out": "results",
        "experiments": "counting equidist geometry traces aprox crossover classifier ubiquity excursion",
    },
    "counting": {
        "forms": "circle sphere",
        "qmax": "4096 512",
        "base": "2",
        "patch": "cube:1",
        "slope_tol": "0.2",
        "min_r2": "0.97",
        "time_budget": "60",
    },
    "equidist": {
        "form": "sphere",
        "qmax": "512",
        "base": "2",
        "mirror_a": "box:0.1,-0.2;0.5,0.2",
        "mirror_b": "box:-0.5,-0.2;-0.1,0.2",
        "double": "box:-0.4,-0.2;0.4,0.2",
        "half": "box:0,-0.2;0.4,0.2",
    },
    "geometry": {
        "instances": "200",
        "T": "40",
        "busemann_tol": "1e-6",
        "odist_tol": "1e-5",
        "chart_tol": "1e-10",
        "sl_tol": "1e-9",
    },
    "traces": {
        "tau_min": "2",
        "tau_max": "10",
        "tau_points": "9",
        "tau_fixed": "4",
        "D_values": "0 1 2 3 4",
        "samples": "100000",
        "rel_tol": "0.15",
        "time_budget": "120",
    },
    "aprox": {
        "forms": "circle sphere",
        "alpha": "1/2",
        "qmax": "500",
        "trials": "5",
        "control_alpha": "3/2",
    },
    "crossover": {
        "forms": "circle sphere",
        "qmax": "4096 512",
        "alpha": "2",
        "patch": "cube:1",
        "s_step": "1/100",
        "tol": "0.15",
    },
    "classifier": {
        "alphas": "1 2 3 4 5",
        "delta": "1",
        "offsets": "-1/10 -1/1000 0 1/1000",
    },
    "ubiquity": {
        "form": "circle",
        "qmax": "4096",
        "patch": "cube:1",
        "balls": "50",
        "levels": "6",
        "kappa_min": "0.05",
    },
    "excursion": {
        "form": "circle",
        "qmax": "1024",
        "patch": "cube:1",
        "betas": "1/4 1/2 3/4",
        "tmax": "40",
        "dt": "0.05",
        "cusp_traces": "5",
        "generic_points": "100",
        "generic_beta": "99/100",
    },
}


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULTS.items()})
    source: Optional[str] = None

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[dict] = None) -> "ExperimentConfig":
        cfg = cls()
        if path is not None:
            parser = configparser.ConfigParser()
            parser.optionxform = str
            with open(path) as fh:
                parser.read_file(fh)
            for sec in parser.sections():
                if sec not in cfg.sections:
                    raise ValueError(f"unknown config section [{sec}]")
                for key, val in parser.items(sec):
                    if key not in cfg.sections[sec]:
                        raise ValueError(f"unknown key {key!r} in [{sec}]")
                    cfg.sections[sec][key] = val
            cfg.source = str(path)
        for (sec, key), val in (overrides or {}).items():
            cfg.sections[sec][key] = str(val)
        return cfg

    def get(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def getint(self, section: str, key: str) -> int:
        return int(self.get(section, key))

    def getfloat(self, section: str, key: str) -> float:
        return float(self.get(section, key))

    def getlist(self, section: str, key: str) -> list[str]:
        return self.get(section, key).split()

    @property
    def seed(self) -> int:
        return self.getint("run", "seed")

    def text(self, include_out: bool = True) -> str:
        """Canonical INI text; the hash of this string identifies the run."""
        lines = []
        for sec in sorted(self.sections):
            lines.append(f"[{sec}]")
            for key in sorted(self.sections[sec]):
                if sec == "run" and key == "out" and not include_out:
                    continue
                lines.append(f"{key} = {self.sections[sec][key]}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        # the output directory does not influence results
        return hashlib.sha256(self.text(include_out=False).encode()).hexdigest()

    def write(self, path, include_out: bool = True) -> None:
        Path(path).write_text(self.text(include_out))


def versions() -> dict:
    import matplotlib
    import mpmath
    import numpy
    import scipy

    from . import __version__
    return {
        "quadcusp": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "matplotlib": matplotlib.__version__,
    }


def manifest(cfg: ExperimentConfig, experiments: list[str]) -> dict:
    sections = {k: dict(v) for k, v in cfg.sections.items()}
    sections["run"].pop("out", None)
    return {
        "config_sha256": cfg.digest(),
        "config": sections,
        "experiments": experiments,
        "seed": cfg.seed,
        "versions": versions(),
    }
