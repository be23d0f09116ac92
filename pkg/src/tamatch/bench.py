"""Sweep orchestration, CSV persistence and SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .algorithms import AblationFlags, TaMParams, greedy, ranking, test_and_match
from .core import InvalidInput
from .instances import (
    C25,
    CorruptionKind,
    CorruptionSpec,
    HardInstanceParams,
    arrival_sequence,
    corrupt_advice,
    gen_hard_instance,
    stream,
)
from .matching import max_matching_size

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

WORKERS_ENV = "TAMATCH_WORKERS"

CSV_HEADER = (
    "variant", "kind", "alpha", "seed", "m", "n_star", "ratio",
    "test_verdict", "l1_hat", "k_consumed", "wall_time_ms",
)


@dataclass(frozen=True)
class Variant:
    name: str
    algorithm: str  # "ranking", "greedy" or "tam"
    flags: AblationFlags | None = None


VARIANTS = {
    "Ranking": Variant("Ranking", "ranking"),
    "Greedy": Variant("Greedy", "greedy"),
    "TaM-all": Variant("TaM-all", "tam", AblationFlags()),
    "TaM-no-remap": Variant("TaM-no-remap", "tam", AblationFlags(use_remap=False)),
    "TaM-no-bucket": Variant("TaM-no-bucket", "tam", AblationFlags(use_bucket=False)),
    "TaM-no-patch": Variant("TaM-no-patch", "tam", AblationFlags(use_patch=False)),
}


@dataclass(frozen=True)
class SweepSpec:
    n: int = 2000
    seeds: tuple[int, ...] = tuple(range(10))
    alphas: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(11))
    kinds: tuple[str, ...] = ("add", "replace")
    variants: tuple[str, ...] = tuple(VARIANTS)
    c25: float = C25
    beta: float = 0.696
    epsilon: float | None = None
    delta: float = 0.05
    constant: float = 1.0
    gamma: float = 0.5
    bucket_fraction: float = 0.1
    record_wall_time: bool = True

    def __post_init__(self):
        for name in ("seeds", "alphas", "kinds", "variants"):
            value = getattr(self, name)
            if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
                raise InvalidInput(f"{name} must be a list")
            object.__setattr__(self, name, tuple(value))
            if not getattr(self, name):
                raise InvalidInput(f"{name} must be nonempty")
        if len(set(self.variants)) != len(self.variants):
            raise InvalidInput("variant names must be distinct")
        for v in self.variants:
            if v not in VARIANTS:
                raise InvalidInput(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
        for k in self.kinds:
            if k not in {c.value for c in CorruptionKind}:
                raise InvalidInput(f"unknown corruption kind {k!r}")
        for a in self.alphas:
            if not 0 <= a <= 1:
                raise InvalidInput(f"alpha {a} outside [0, 1]")
        HardInstanceParams(self.n, self.c25).validate()
        self.params()  # validates the budget knobs

    def params(self) -> TaMParams:
        return TaMParams(self.beta, self.epsilon, self.delta, self.constant, self.gamma, self.bucket_fraction)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise InvalidInput(f"unknown config keys: {', '.join(unknown)}")
        clean = {}
        for key, value in data.items():
            default = getattr(cls, key, None) if key != "epsilon" else None
            if key == "epsilon":
                if value == "auto":
                    value = None
                elif not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise InvalidInput("epsilon must be a number or \"auto\"")
            elif isinstance(default, tuple):
                if not isinstance(value, list):
                    raise InvalidInput(f"{key} must be a list")
            elif isinstance(default, bool):
                if not isinstance(value, bool):
                    raise InvalidInput(f"{key} must be true or false")
            elif isinstance(default, (int, float)):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise InvalidInput(f"{key} must be a number")
                if isinstance(default, int) and not isinstance(value, int):
                    raise InvalidInput(f"{key} must be an integer")
            clean[key] = value
        if "seeds" in clean and not all(isinstance(s, int) and not isinstance(s, bool) for s in clean["seeds"]):
            raise InvalidInput("seeds must be integers")
        if "alphas" in clean:
            clean["alphas"] = [float(a) for a in clean["alphas"]]
        return cls(**clean)

    @classmethod
    def from_toml(cls, path: str | Path) -> "SweepSpec":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidInput(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_toml(self) -> str:
        def fmt(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, str):
                return json.dumps(v)
            if isinstance(v, tuple):
                return "[" + ", ".join(fmt(x) for x in v) + "]"
            return repr(v)

        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {fmt(v) if v is not None else json.dumps('auto')}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResultRow:
    variant: str
    kind: str
    alpha: float
    seed: int
    m: int
    n_star: int
    test_verdict: str
    l1_hat: float = math.nan
    k_consumed: int = 0
    wall_time_ms: float = 0.0

    def __post_init__(self):
        # store at CSV precision so that rows survive a round trip unchanged
        object.__setattr__(self, "l1_hat", _round6(self.l1_hat))
        object.__setattr__(self, "wall_time_ms", round(float(self.wall_time_ms), 3))

    @property
    def ratio(self) -> float:
        return self.m / self.n_star if self.n_star else math.nan

    @property
    def key(self) -> tuple:
        return (self.kind, self.alpha, self.seed)


def _round6(x: float) -> float:
    return float(f"{x:.6f}") if not math.isnan(x) else math.nan


# -- running -------------------------------------------------------------------

def run_variant(variant: Variant, arrivals, n: int, advice, params: TaMParams, seed: int, n_star: int):
    """Returns ``(m, verdict, l1_hat, k)`` for one variant on a prepared cell."""
    if variant.algorithm == "ranking":
        return ranking(arrivals, n, stream(seed, "algorithm")).size, "baseline", math.nan, 0
    if variant.algorithm == "greedy":
        return greedy(arrivals, n).size, "baseline", math.nan, 0
    out = test_and_match(arrivals, n, advice, variant.flags, params, seed=seed, n_star=n_star)
    return out.m, out.verdict, out.l1_hat, out.k


def _run_seed(spec: SweepSpec, seed: int) -> list[ResultRow]:
    n = spec.n
    c_star = gen_hard_instance(HardInstanceParams(n, spec.c25, seed))
    n_star = max_matching_size(c_star)
    arrivals = arrival_sequence(c_star, seed)
    params = spec.params()
    rows = []
    for kind in spec.kinds:
        for alpha in spec.alphas:
            try:
                advice = corrupt_advice(c_star, CorruptionSpec(alpha, CorruptionKind(kind), seed))
            except Exception as exc:  # recorded, never fatal
                rows.extend(
                    ResultRow(v, kind, alpha, seed, 0, n_star, f"error:{type(exc).__name__}") for v in spec.variants
                )
                continue
            for name in spec.variants:
                start = time.perf_counter()
                try:
                    m, verdict, l1, k = run_variant(VARIANTS[name], arrivals, n, advice, params, seed, n_star)
                except Exception as exc:
                    m, verdict, l1, k = 0, f"error:{type(exc).__name__}", math.nan, 0
                elapsed = (time.perf_counter() - start) * 1000 if spec.record_wall_time else 0.0
                rows.append(ResultRow(name, kind, alpha, seed, m, n_star, verdict, l1, k, elapsed))
    return rows


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidInput(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[ResultRow]:
    """Every variant on the same instance, advice and arrival order per grid cell.

    Work is split by seed (each seed's instance and offline optimum are built
    once); the output is sorted by grid key, so it does not depend on
    scheduling.
    """
    workers = worker_count() if workers is None else workers
    seeds = list(dict.fromkeys(spec.seeds))
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            chunks = list(pool.map(_run_seed, [spec] * len(seeds), seeds))
    else:
        chunks = [_run_seed(spec, s) for s in seeds]
    order = {name: i for i, name in enumerate(spec.variants)}
    kinds = {k: i for i, k in enumerate(spec.kinds)}
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (kinds[r.kind], r.alpha, r.seed, order[r.variant]))
    return rows


# -- CSV -------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([
            r.variant, r.kind, repr(float(r.alpha)), r.seed, r.m, r.n_star, _fmt_float(r.ratio),
            r.test_verdict, _fmt_float(r.l1_hat), r.k_consumed, f"{r.wall_time_ms:.3f}",
        ])
    return buf.getvalue()


def emit_csv(rows: Sequence[ResultRow], path: str | Path) -> None:
    try:
        Path(path).write_text(rows_to_csv(rows), encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise InvalidInput(f"unexpected CSV header {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(CSV_HEADER):
            raise InvalidInput(f"line {lineno}: expected {len(CSV_HEADER)} fields")
        d = dict(zip(CSV_HEADER, rec))
        try:
            row = ResultRow(
                d["variant"], d["kind"], float(d["alpha"]), int(d["seed"]), int(d["m"]), int(d["n_star"]),
                d["test_verdict"], float(d["l1_hat"]), int(d["k_consumed"]), float(d["wall_time_ms"]),
            )
        except ValueError as exc:
            raise InvalidInput(f"line {lineno}: {exc}") from exc
        if _fmt_float(row.ratio) != d["ratio"]:
            raise InvalidInput(f"line {lineno}: ratio {d['ratio']} disagrees with m/n_star")
        rows.append(row)
    return rows


def read_csv(path: str | Path) -> list[ResultRow]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


# -- aggregation and plots ---------------------------------------------------------

def summarize(rows: Iterable[ResultRow], kind: str) -> dict[str, dict[float, tuple[float, float, int]]]:
    """``{variant: {alpha: (mean, sample std, count)}}`` of the ratio over seeds."""
    acc: dict[str, dict[float, list[float]]] = {}
    for r in rows:
        if r.kind != kind or math.isnan(r.ratio):
            continue
        acc.setdefault(r.variant, {}).setdefault(r.alpha, []).append(r.ratio)
    out: dict[str, dict[float, tuple[float, float, int]]] = {}
    for v, by_alpha in acc.items():
        out[v] = {}
        for a in sorted(by_alpha):
            xs = np.array(by_alpha[a])
            std = float(xs.std(ddof=1)) if len(xs) > 1 else 0.0
            out[v][a] = (float(xs.mean()), std, len(xs))
    return out


def plot(rows: Sequence[ResultRow], kind: str, path: str | Path, variants: Sequence[str] | None = None) -> dict:
    """Mean ratio against alpha per variant with sample-std error bars, as SVG.

    The plotted numbers are embedded as JSON in the SVG description.
    Returns that summary.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stats = summarize(rows, kind)
    if not stats:
        raise InvalidInput(f"no rows for corruption kind {kind!r}")
    wanted = list(variants) if variants is not None else sorted(stats, key=_variant_order)
    missing = [v for v in wanted if v not in stats]
    shown = [v for v in wanted if v in stats]

    with matplotlib.rc_context({"svg.hashsalt": "tamatch", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        for v in shown:
            alphas = sorted(stats[v])
            mean = [stats[v][a][0] for a in alphas]
            std = [stats[v][a][1] for a in alphas]
            ax.errorbar(alphas, mean, yerr=std, marker="o", ms=3, capsize=3, lw=1.2, label=v)
        ax.set_xlabel("alpha")
        ax.set_ylabel("competitive ratio")
        ax.set_ylim(0.4, 1.02)
        title = f"corruption: {kind}"
        if missing:
            title += f"\nwarning: no data for {', '.join(missing)}"
            warnings.warn(f"plot skipped variants without data: {missing}")
        ax.set_title(title, fontsize=10)
        ax.legend(fontsize=8, loc="lower left")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        summary = {
            "kind": kind,
            "missing": missing,
            "series": {v: {repr(a): list(stats[v][a]) for a in sorted(stats[v])} for v in shown},
        }
        meta = {"Date": None, "Creator": "tamatch", "Description": json.dumps(summary, sort_keys=True)}
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
    return summary


def read_plot_summary(path: str | Path) -> dict:
    """Recover the JSON summary embedded by :func:`plot`."""
    import html
    import re

    text = Path(path).read_text(encoding="utf-8")
    found = re.search(r"<dc:description>(.*?)</dc:description>", text, re.S)
    if not found:
        raise InvalidInput(f"{path} carries no embedded summary")
    return json.loads(html.unescape(found.group(1)))


def _variant_order(name: str) -> tuple:
    names = list(VARIANTS)
    return (names.index(name) if name in names else len(names), name)
