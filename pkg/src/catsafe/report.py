"""Run manifests, CSV/JSON emission, and the flat key=value config format.

Every command writes a RunManifest next to its outputs; result files contain
no timestamps, so reruns with equal manifests (minus timestamp) are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .model import InputError
from .multiplicity import bonferroni
from .resample import CategoryTestResult
from .sim import StudyReport

SCHEMA_TAG = "#catsafe-report v1"
CONFIG_VERSION = "1"


@dataclass(frozen=True)
class RunManifest:
    command_line: str
    config: dict
    seed: int | None
    version: str
    input_digests: dict = field(default_factory=dict)
    timestamp: str = ""

    @staticmethod
    def create(command_line, config, seed, version, input_paths=()) -> "RunManifest":
        digests = {}
        for p in input_paths:
            if p is None:
                continue
            digests[str(p)] = sha256_file(p)
        return RunManifest(
            command_line=command_line,
            config=config,
            seed=seed,
            version=version,
            input_digests=digests,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )

    def write(self, path) -> None:
        payload = {
            "command_line": self.command_line,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "input_digests": self.input_digests,
            "timestamp": self.timestamp,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


_RESULT_COLUMNS = [
    "category", "m_c", "u_obs", "theta0", "p", "p_bonferroni", "method",
    "degenerate", "B", "u_null_mean", "u_null_se", "redraws", "R",
]


def write_results_csv(results: list[CategoryTestResult], path, alpha: float = 0.05) -> None:
    """Per-category results sorted by p (ties by name), Bonferroni-adjusted."""
    order = sorted(range(len(results)), key=lambda i: (results[i].p, results[i].category))
    adj = bonferroni([r.p for r in results], alpha).adjusted_p
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SCHEMA_TAG + "\n")
        writer = csv.DictWriter(fh, fieldnames=_RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for i in order:
            r = results[i]
            d = r.diagnostics
            writer.writerow({
                "category": r.category,
                "m_c": d.get("m_c", ""),
                "u_obs": repr(r.u_obs),
                "theta0": "" if r.theta0 is None else repr(r.theta0),
                "p": repr(r.p),
                "p_bonferroni": repr(float(adj[i])),
                "method": r.method,
                "degenerate": int(r.degenerate),
                "B": d.get("B", ""),
                "u_null_mean": _opt_repr(d.get("u_null_mean")),
                "u_null_se": _opt_repr(d.get("u_null_se")),
                "redraws": d.get("redraws", ""),
                "R": d.get("R", ""),
            })


def _opt_repr(v) -> str:
    return "" if v is None else repr(float(v))


def write_study_csv(report: StudyReport, path) -> None:
    """One row per test x alpha (calibration), test x grid point (power), or
    design x correlation (corr-map)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(SCHEMA_TAG + "\n")
        if report.ratio_rows:
            cols = ["test", "alpha", "n_pooled", "realized", "ratio"]
            rows = report.ratio_rows
        elif report.power_rows:
            cols = ["test", "c", "power", "mc_se"]
            rows = report.power_rows
        elif report.corr_rows:
            cols = ["design", "rho_x", "median_rho_t", "q05_rho_t", "q95_rho_t", "mean_rho_t"]
            rows = report.corr_rows
        else:
            raise InputError("study report has no rows to write")
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in cols})


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_study_summary(report: StudyReport, path) -> None:
    payload = {
        "scenario": report.scenario,
        "config": report.config,
        "fwer": report.fwer,
        "min_p": report.min_p,
        "flags": report.flags,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_ecdf_csv(report: StudyReport, out_dir) -> list[Path]:
    """Two-column (p, fraction) CSV per test, ready for external plotting."""
    out = []
    for test, table in sorted(report.ecdf.items()):
        p = Path(out_dir) / f"ecdf_{test}.csv"
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(SCHEMA_TAG + "\n")
            fh.write("p,ecdf\n")
            for x, f in table.T:
                fh.write(f"{x!r},{f!r}\n")
        out.append(p)
    return out


def parse_config_file(path) -> dict[str, str]:
    """Flat key=value study configuration.

    Lines starting with # are comments; a config_version key, when present,
    must match the supported version.
    """
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise InputError(f"{path}: line {lineno}: expected key = value")
        key, _, value = s.partition("=")
        key = key.strip()
        if key in out:
            raise InputError(f"{path}: line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    version = out.pop("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise InputError(f"{path}: unsupported config_version {version!r}")
    return out
