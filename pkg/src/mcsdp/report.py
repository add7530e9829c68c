"""Timing and clique-statistics reports."""

import json
from dataclasses import asdict, dataclass

from .ipm import Model, SolverParams, solve

SCHEMA = 1
CATEGORIES = (("S-ELEMENTS", "s_elements"), ("S-CHOLESKY", "s_cholesky"),
              ("P-MATRIX", "p_matrix"), ("Other", "other"))
SUB_ROWS = {"s_elements": ("(Sub-S-ELEMENTS)", "sub_s_elements"),
            "p_matrix": ("(Sub-P-MATRIX)", "sub_p_matrix")}


@dataclass
class TimingReport:
    s_elements: float
    s_cholesky: float
    p_matrix: float
    other: float
    total: float
    sub_s_elements: float
    sub_p_matrix: float
    iterations: int
    threads: int

    @classmethod
    def from_result(cls, result):
        t = result.timings
        return cls(t["s_elements"], t["s_cholesky"], t["p_matrix"], t["other"], t["total"],
                   t["sub_s_elements"], t["sub_p_matrix"], result.iterations, result.threads)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})

    def to_dict(self):
        return {"schema": SCHEMA, **asdict(self)}

    def speedup(self, baseline=None):
        """Per-category ratio ``baseline / self`` (1.0 against itself)."""
        base = self if baseline is None else baseline
        out = {}
        for _, key in CATEGORIES + (("Total", "total"),):
            mine = getattr(self, key)
            out[key] = getattr(base, key) / mine if mine > 0 else 1.0
        return out


@dataclass
class CliqueStatsReport:
    n: int
    m: int
    density: float  # |A| / n^2, counting both triangles
    ell: int
    ave_size: float
    max_size: int

    @classmethod
    def from_model(cls, model):
        st = model.structure
        sizes = [c.size for c in st.cliques]
        return cls(model.n, model.m, st.aggregate.full_count() / model.n ** 2, len(sizes),
                   sum(sizes) / len(sizes), max(sizes))

    def to_dict(self):
        return {"schema": SCHEMA, **asdict(self)}

    def to_text(self):
        return (f"n        {self.n}\nm        {self.m}\n"
                f"density  {100.0 * self.density:.4f}%\nell      {self.ell}\n"
                f"ave      {self.ave_size:.2f}\nmax      {self.max_size}\n")


def emit_timing_report(report, fmt="text", baseline=None):
    ratios = report.speedup(baseline)
    if fmt == "json":
        d = report.to_dict()
        d["speedup"] = ratios
        return json.dumps(d, indent=2, sort_keys=True)
    lines = [f"{'category':<18}{'time [s]':>12}{'speed-up':>10}"]
    for label, key in CATEGORIES:
        lines.append(f"{label:<18}{getattr(report, key):>12.3f}{ratios[key]:>9.2f}x")
        if key in SUB_ROWS:
            sub_label, sub_key = SUB_ROWS[key]
            lines.append(f"{sub_label:<18}{getattr(report, sub_key):>12.3f}")
    lines.append(f"{'Total':<18}{report.total:>12.3f}{ratios['total']:>9.2f}x")
    lines.append(f"iterations {report.iterations}, threads {report.threads}")
    return "\n".join(lines) + "\n"


def scaling_bench(problem, thread_list, params=None):
    """Solve once per thread count; objectives must agree bit for bit.

    Returns one row per thread count with the timing report and the ratios
    against the first row.
    """
    params = SolverParams() if params is None else params
    model = Model(problem, params.max_fill)
    rows = []
    for u in thread_list:
        p = SolverParams(**{**asdict(params), "threads": u})
        res = solve(problem, p, model=model)
        rows.append({"threads": u, "status": res.status, "primal_objective": res.primal_objective,
                     "dual_objective": res.dual_objective, "report": TimingReport.from_result(res)})
    ref = rows[0]
    for row in rows[1:]:
        if (row["primal_objective"] != ref["primal_objective"]
                or row["dual_objective"] != ref["dual_objective"]):
            raise AssertionError(f"objective differs between {ref['threads']} and {row['threads']} threads")
    for row in rows:
        row["speedup"] = row["report"].speedup(ref["report"])
    return rows


def format_scaling_table(rows):
    keys = [k for _, k in CATEGORIES] + ["total"]
    labels = [label for label, _ in CATEGORIES] + ["Total"]
    lines = [f"{'threads':>8}" + "".join(f"{label:>20}" for label in labels)]
    for row in rows:
        rep, sp = row["report"], row["speedup"]
        cells = "".join(f"{f'{getattr(rep, k):.3f} ({sp[k]:.2f}x)':>20}" for k in keys)
        lines.append(f"{row['threads']:>8}{cells}")
    return "\n".join(lines) + "\n"
