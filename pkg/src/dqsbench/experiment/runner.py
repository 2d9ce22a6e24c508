"""Protocol pipelines, record export and run summaries."""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..circuit import Circuit, compose
from ..isl import IslConfig, recompile_evolution
from ..kernels import permute_qubits
from ..metrics import (
    EvolutionRecord,
    ResourceLedger,
    amplitude_spread,
    dephasing,
    isl_ledger,
    median_abs_error,
    median_series,
)
from ..models import Model, build_model, exact_evolution
from ..simulator import (
    DensityMatrix,
    ExecutionCounter,
    StateVector,
    fidelity,
    overlap_probability,
    run_density,
    sample_shots,
)
from ..transpiler import CouplingGraph, transpile
from ..zne import mitigated_expectation
from .config import ExperimentConfig

CSV_COLUMNS = (
    "protocol",
    "model",
    "preset",
    "k",
    "threshold",
    "variant",
    "seed",
    "step",
    "t",
    "P",
    "fidelity",
    "depth",
    "cum_executions",
)
OUTPUT_ROOT_ENV = "DQSBENCH_OUTPUT_ROOT"


class RunError(RuntimeError):
    pass


def default_layout(model: Model, graph: CouplingGraph) -> tuple[int, ...]:
    """TCM puts the field on the best-connected qubit; HSC uses ``0..L-1``."""
    n = model.num_qubits
    if model.family == "tcm":
        hub = max(range(graph.num_qubits), key=lambda q: (graph.degree(q), -q))
        order = [hub] + [q for q in graph.neighbors(hub)]
        seen = set(order)
        frontier = list(order)
        while len(order) < n and frontier:
            nxt = []
            for q in frontier:
                for v in graph.neighbors(q):
                    if v not in seen:
                        seen.add(v)
                        order.append(v)
                        nxt.append(v)
            frontier = nxt
        return tuple(order[:n])
    return tuple(range(n))


@dataclass
class Cell:
    """One (k, threshold, seed) combination of an experiment."""

    k: int
    seed: int
    threshold: float | None = None

    @property
    def tag(self) -> str:
        th = "none" if self.threshold is None else f"{self.threshold:g}"
        return f"k{self.k}_th{th}_s{self.seed}"


@dataclass
class RunContext:
    cfg: ExperimentConfig
    model: Model
    graph: CouplingGraph
    layout: tuple[int, ...]
    reference_states: list[np.ndarray]
    reference_p: list[float]

    @classmethod
    def build(cls, cfg: ExperimentConfig) -> RunContext:
        model = build_model(cfg.preset, cfg.num_qubits, cfg.dt, cfg.n_steps, **cfg.overrides)
        layout = cfg.layout if cfg.layout is not None else default_layout(model, cfg.graph)
        sub = cfg.graph.subgraph(layout)
        if not sub.is_connected():
            raise RunError(f"device qubits {list(layout)} do not form a connected region")
        init = StateVector.basis(model.target)
        states, probs = [], []
        for step in range(1, cfg.n_steps + 1):
            psi = exact_evolution(model.terms(), step * cfg.dt, init)
            states.append(psi.amplitudes)
            probs.append(float(psi.probabilities()[int(model.target, 2)]))
        return cls(cfg, model, sub, tuple(layout), states, probs)

    def target_state(self, step: int, layout: tuple[int, ...]) -> StateVector:
        n = self.model.num_qubits
        return StateVector(n, permute_qubits(self.reference_states[step - 1], layout, n))

    def record(self, protocol: str, cell: Cell) -> EvolutionRecord:
        return EvolutionRecord(
            protocol,
            f"{self.model.family}_q{self.model.num_qubits}",
            self.cfg.preset,
            cell.k,
            cell.seed,
            self.cfg.dt,
            threshold=cell.threshold,
            variant=self.cfg.isl.variant if protocol in ("isl", "isl_zne") else "",
        )


def _state_fidelity(state: StateVector | DensityMatrix, target: StateVector) -> float:
    if isinstance(state, StateVector):
        return float(min(1.0, abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2))
    return fidelity(state, target)


def cumulative_circuits(ctx: RunContext) -> list[tuple[Circuit, tuple[int, ...]]]:
    """Transpiled ``U_st T^n`` for every step, with the final layout of each."""
    step = ctx.model.trotter_step()
    logical = ctx.model.state_prep()
    out = []
    for _ in range(ctx.cfg.n_steps):
        logical = compose(logical, step)
        native, rep = transpile(logical, ctx.graph)
        out.append((native, rep.final_layout))
    return out


def run_plain(ctx: RunContext, cell: Cell, circuits) -> EvolutionRecord:
    rec = ctx.record("plain", cell)
    counter = ExecutionCounter()
    noise = ctx.cfg.noise
    for idx, (native, layout) in enumerate(circuits, start=1):
        rho = run_density(native, None, noise)
        shots = sample_shots(rho, cell.k, noise, (cell.seed, idx), counter)
        p = overlap_probability(shots, ctx.model.target)
        rec.append(p, fidelity(rho, ctx.target_state(idx, layout)), native.depth(), counter.total)
    return rec


def run_zne(ctx: RunContext, cell: Cell, circuits) -> EvolutionRecord:
    rec = ctx.record("zne", cell)
    counter = ExecutionCounter()
    for idx, (native, _) in enumerate(circuits, start=1):
        est = mitigated_expectation(native, ctx.cfg.zne, ctx.cfg.noise, cell.k, (cell.seed, idx), ctx.model.target, counter)
        if est.extrapolation.fallback:
            rec.flags.append(f"step {idx}: extrapolation fallback ({est.extrapolation.reason})")
        rec.append(est.value, None, native.depth(), counter.total)
    return rec


@dataclass
class IslArtifacts:
    circuits: list[Circuit]
    layouts: list[tuple[int, ...]]
    cost_rows: list[tuple[int, int, float]] = field(default_factory=list)
    cost_evaluations: list[int] = field(default_factory=list)
    qst_pairs: list[int] = field(default_factory=list)


def run_isl(ctx: RunContext, cell: Cell) -> tuple[EvolutionRecord, IslArtifacts]:
    cfg = ctx.cfg
    isl_cfg = IslConfig(**{**asdict(cfg.isl), "cost_threshold": cell.threshold, "k": cell.k})
    counter = ExecutionCounter()
    evo = recompile_evolution(
        ctx.model.trotter_step(),
        ctx.model.state_prep(),
        cfg.n_steps,
        isl_cfg,
        ctx.graph,
        cfg.noise,
        seed=(cell.seed,),
        counter=counter,
    )
    rec = ctx.record("isl", cell)
    art = IslArtifacts(evo.circuits, evo.layouts)
    for idx in range(1, cfg.n_steps + 1):
        state, layout = evo.states[idx - 1], evo.layouts[idx - 1]
        f = _state_fidelity(state, ctx.target_state(idx, layout))
        rec.append(evo.probabilities[idx - 1], f, evo.depths[idx - 1], evo.cum_executions[idx - 1])
        r = evo.records[idx - 1]
        art.cost_rows += [(idx, li + 1, c) for li, c in enumerate(r.layer_costs)]
        art.cost_evaluations.append(r.cost_evaluations)
        art.qst_pairs.append(r.qst_pairs)
    return rec, art


def load_isl_circuits(source: Path, cell: Cell, n_steps: int) -> tuple[list[Circuit], list[tuple[int, ...]]]:
    folder = source / "circuits" / cell.tag
    if not folder.is_dir():
        raise RunError(f"no ISL circuits for {cell.tag} under {source}")
    circuits, layouts = [], []
    for idx in range(1, n_steps + 1):
        path = folder / f"step_{idx:03d}.txt"
        if not path.exists():
            raise RunError(f"missing ISL circuit {path}")
        text = path.read_text()
        header, _, body = text.partition("\n")
        if not header.startswith("# layout "):
            raise RunError(f"{path} lacks a layout header")
        layouts.append(tuple(int(x) for x in header[len("# layout ") :].split(",")))
        circuits.append(Circuit.from_text(body))
    return circuits, layouts


def run_isl_zne(ctx: RunContext, cell: Cell, source: Path) -> EvolutionRecord:
    circuits, _ = load_isl_circuits(source, cell, ctx.cfg.n_steps)
    rec = ctx.record("isl_zne", cell)
    counter = ExecutionCounter()
    for idx, native in enumerate(circuits, start=1):
        if len(native) == 0:
            rho = run_density(native, None, ctx.cfg.noise)
            shots = sample_shots(rho, cell.k, ctx.cfg.noise, (cell.seed, idx), counter)
            p = overlap_probability(shots, ctx.model.target)
        else:
            est = mitigated_expectation(
                native, ctx.cfg.zne, ctx.cfg.noise, cell.k, (cell.seed, idx), ctx.model.target, counter
            )
            p = est.value
            if est.extrapolation.fallback:
                rec.flags.append(f"step {idx}: extrapolation fallback ({est.extrapolation.reason})")
        rec.append(p, None, native.depth(), counter.total)
    return rec


# -- export ------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def record_rows(records: list[EvolutionRecord]) -> list[dict]:
    rows = []
    for r in records:
        for i in range(r.n_steps):
            rows.append(
                {
                    "protocol": r.protocol,
                    "model": r.model,
                    "preset": r.preset,
                    "k": r.k,
                    "threshold": r.threshold,
                    "variant": r.variant,
                    "seed": r.seed,
                    "step": i + 1,
                    "t": (i + 1) * r.dt,
                    "P": r.probabilities[i],
                    "fidelity": r.fidelities[i],
                    "depth": r.depths[i],
                    "cum_executions": r.cum_executions[i],
                }
            )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    return json.dumps({"columns": list(CSV_COLUMNS), "rows": rows}, indent=1) + "\n"


def rows_from_json(text: str) -> list[dict]:
    data = json.loads(text)
    if data.get("columns") != list(CSV_COLUMNS):
        raise RunError("JSON records do not follow the record schema")
    return data["rows"]


def _parse_cell(column: str, text: str):
    if text == "":
        return "" if column in ("variant",) else None
    if column in ("k", "seed", "step", "depth", "cum_executions"):
        return int(text)
    if column in ("threshold", "t", "P", "fidelity"):
        return float(text)
    return text


def rows_from_csv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise RunError("CSV records do not follow the record schema")
    return [{c: _parse_cell(c, v) for c, v in zip(CSV_COLUMNS, line)} for line in reader]


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def export(records: list[EvolutionRecord], directory: Path, formats: tuple[str, ...] = ("csv", "json")) -> list[Path]:
    rows = record_rows(records)
    written = []
    for fmt in formats:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown export format {fmt!r}")
        path = directory / f"records.{fmt}"
        write_atomic(path, rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows))
        written.append(path)
    return written


# -- summaries ---------------------------------------------------------------------


def summarize(
    records: list[EvolutionRecord],
    reference: list[float],
    ledger: ResourceLedger | None = None,
) -> dict:
    """Aggregate runs of one (protocol, model, k, threshold) group."""
    first = records[0]
    runs = [r.probabilities for r in records]
    med = median_series(runs)
    dt = first.dt
    lags = [dephasing(reference, r.probabilities, dt) for r in records]
    lag_values = [d.lag for d in lags if d.defined]
    med_lag = dephasing(reference, list(med), dt)
    out = {
        "protocol": first.protocol,
        "model": first.model,
        "preset": first.preset,
        "k": first.k,
        "threshold": first.threshold,
        "variant": first.variant,
        "runs": len(records),
        "median_abs_error": median_abs_error(list(med), reference),
        "dephasing": med_lag.lag,
        "dephasing_runs_mean": statistics.fmean(lag_values) if lag_values else None,
        "mean_spread": amplitude_spread(runs)[1] if len(runs) >= 2 else 0.0,
        "final_depth": float(statistics.median(r.depths[-1] for r in records)),
        "median_depth": float(statistics.median(d for r in records for d in r.depths)),
        "c_tot": int(statistics.median(r.cum_executions[-1] for r in records)),
        "c_model": ledger_value(first.protocol, ledger) if ledger is not None else None,
        "median_series": [float(x) for x in med],
        "flags": sorted({f for r in records for f in r.flags}),
    }
    return out


def ledger_value(protocol: str, ledger: ResourceLedger) -> int:
    if protocol == "plain":
        return ledger.c_trotter
    if protocol in ("zne", "isl_zne"):
        return ledger.c_zne
    return ledger.c_isl


@dataclass
class ExperimentResult:
    records: list[EvolutionRecord]
    summaries: list[dict]
    output_dir: Path
    reference: list[float]


def resolve_output(cfg: ExperimentConfig, override: str | None = None) -> Path:
    out = Path(override or cfg.output)
    if not out.is_absolute():
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / out
    return out


def resolve_source(cfg: ExperimentConfig) -> Path:
    src = Path(cfg.isl_source)
    if src.is_absolute() or src.exists():
        return src
    rooted = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / src
    if rooted.exists():
        return rooted
    if cfg.source_path:
        return Path(cfg.source_path).parent / src
    return src


def run_experiment(cfg: ExperimentConfig, output: str | Path | None = None, write: bool = True) -> ExperimentResult:
    ctx = RunContext.build(cfg)
    out_dir = resolve_output(cfg, str(output) if output is not None else None)
    thresholds: tuple[float | None, ...] = cfg.thresholds if cfg.uses_isl else (None,)
    circuits = cumulative_circuits(ctx) if cfg.protocol in ("plain", "zne") else None
    records: list[EvolutionRecord] = []
    summaries: list[dict] = []
    extra_files: dict[str, str] = {}
    cost_lines = ["tag,step,layer,cost"]
    for k in cfg.ks:
        for th in thresholds:
            group: list[EvolutionRecord] = []
            ledger_parts: tuple[list[int], list[int]] = ([], [])
            for seed in cfg.seeds:
                cell = Cell(k, seed, th)
                if cfg.protocol == "plain":
                    rec = run_plain(ctx, cell, circuits)
                elif cfg.protocol == "zne":
                    rec = run_zne(ctx, cell, circuits)
                elif cfg.protocol == "isl":
                    rec, art = run_isl(ctx, cell)
                    for idx, (c, lay) in enumerate(zip(art.circuits, art.layouts), start=1):
                        body = c.to_text()
                        extra_files[f"circuits/{cell.tag}/step_{idx:03d}.txt"] = (
                            f"# layout {','.join(map(str, lay))}\n{body}"
                        )
                    cost_lines += [f"{cell.tag},{s},{li},{_fmt(float(v))}" for s, li, v in art.cost_rows]
                    ledger_parts[0].extend(art.cost_evaluations)
                    ledger_parts[1].extend(art.qst_pairs)
                else:
                    rec = run_isl_zne(ctx, cell, resolve_source(cfg))
                group.append(rec)
            if cfg.protocol == "isl":
                ledger = isl_ledger(cfg.n_steps, k, ledger_parts[0], ledger_parts[1], len(ctx.graph.edges))
            else:
                ledger = ResourceLedger(cfg.n_steps, k, n_avg=cfg.zne.n_avg, n_lambdas=len(cfg.zne.lambdas))
            summaries.append(summarize(group, ctx.reference_p, ledger))
            records += group
    if write:
        export(records, out_dir)
        summary_text = json.dumps({"name": cfg.name, "reference": ctx.reference_p, "summaries": summaries}, indent=1) + "\n"
        write_atomic(out_dir / "summary.json", summary_text)
        write_atomic(out_dir / "summary.csv", summary_csv(summaries))
        if cfg.protocol == "isl":
            write_atomic(out_dir / "cost_records.csv", "\n".join(cost_lines) + "\n")
        for rel, text in sorted(extra_files.items()):
            write_atomic(out_dir / rel, text)
    return ExperimentResult(records, summaries, out_dir, ctx.reference_p)


SUMMARY_COLUMNS = (
    "protocol",
    "model",
    "preset",
    "k",
    "threshold",
    "variant",
    "runs",
    "median_abs_error",
    "dephasing",
    "mean_spread",
    "final_depth",
    "median_depth",
    "c_tot",
    "c_model",
)


def summary_csv(summaries: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        w.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


# -- comparison --------------------------------------------------------------------

COMPARE_METRICS = (
    ("median_abs_error", "eps"),
    ("dephasing", "lag"),
    ("final_depth", "depth"),
    ("c_tot", "c_tot"),
)


def compare(summaries: list[dict]) -> list[dict]:
    """Side-by-side metrics with the best value per metric flagged.

    Lower is better for every metric; dephasing compares magnitudes. Every
    summary must share model and shot count.
    """
    if len(summaries) < 2:
        raise ValueError("compare needs at least two summaries")
    axes = {(s["model"], s["k"]) for s in summaries}
    if len(axes) != 1:
        raise ValueError(f"summaries disagree on model/k: {sorted(axes)}")
    table = []
    best = {}
    for key, _ in COMPARE_METRICS:
        vals = [s[key] for s in summaries if s[key] is not None]
        if vals:
            best[key] = min(abs(v) for v in vals) if key == "dephasing" else min(vals)
    for s in summaries:
        row = {"label": _label(s)}
        for key, _ in COMPARE_METRICS:
            v = s[key]
            row[key] = v
            target = best.get(key)
            row[key + "_best"] = v is not None and target is not None and (abs(v) if key == "dephasing" else v) == target
        table.append(row)
    return table


def _label(s: dict) -> str:
    parts = [s["protocol"]]
    if s.get("variant"):
        parts.append(s["variant"])
    if s.get("threshold") is not None:
        parts.append(f"C={s['threshold']:g}")
    return "/".join(parts)


def format_table(table: list[dict]) -> str:
    header = ["method"] + [short for _, short in COMPARE_METRICS]
    lines = [header]
    for row in table:
        cells = [row["label"]]
        for key, _ in COMPARE_METRICS:
            v = row[key]
            text = "-" if v is None else (f"{v:.4g}" if isinstance(v, float) else str(v))
            cells.append(text + ("*" if row[key + "_best"] else ""))
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in lines)
