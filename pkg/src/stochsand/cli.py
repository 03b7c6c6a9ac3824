"""Command-line front end.

Every flag has a config-file key of the same name (dashes become
underscores).  Values resolve as: built-in default < ``--config`` file <
command-line flag.  ``--dump-config`` prints the resolved spec and exits.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import analytics as A
from . import grid2d as G
from . import markov as M
from . import single_source as S
from . import verify as V
from .lattice import BudgetExceeded, C, SandpileConfig, Uniform1D
from .oracle import StateSpaceTooLarge, absorption_distribution, oracle_vs_closed_forms
from .rng import make_rng

OUTPUT_DIR_ENV = "STOCHSAND_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_STATE_SPACE = 0, 2, 3, 4
SCHEMA_VERSION = 1


class InvalidSpec(ValueError):
    pass


@dataclass
class ExperimentSpec:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    mode: str = "float"

    def resolved_output(self):
        if self.output is not None:
            return self.output
        base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
        return str(base / f"{self.command}.{self.format}")


# per command: parameter defaults
DEFAULTS = {
    "sgr": {"n": 10},
    "holes": {"n": 10},
    "transition": {"n": 3, "empirical_samples": 0},
    "stationary": {"n": 5, "solve": True},
    "mcmc": {"n": 1, "burn_in": 1000, "samples": 100_000},
    "marginals": {"n_list": [10, 100, 1000], "a_size": 1},
    "oracle-check": {"n": 3, "k": None, "state_cap": 200_000},
    "density2d": {"L": 20, "p_list": [0.5, 1.0], "samples": 200, "burn_in": None,
                  "thinning": None, "literal_topplings": False, "step_budget": None},
    "percolation": {"L": 40, "p_list": [0.4, 0.64, 0.9], "samples": 200, "burn_in": None,
                    "thinning": None, "literal_topplings": False, "step_budget": None,
                    "pgm_prefix": None},
    "single-source": {"n_list": [100, 1000, 10_000], "runs": 20, "method": "auto",
                      "step_budget": None},
    "verify": {"max_n": 4},
}
COMMON = ("seed", "output", "format", "mode")


def _int_list(s):
    return [int(x) for x in s.split(",") if x]


def _float_list(s):
    return [float(x) for x in s.split(",") if x]


def build_parser():
    parser = argparse.ArgumentParser(prog="stochsand",
                                     description="Stochastic sandpiles: exact analytics and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, help):
        p = sub.add_parser(name, help=help, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with default values for the flags")
        p.add_argument("--dump-config", action="store_true", help="print the resolved spec and exit")
        p.add_argument("--seed", type=int)
        p.add_argument("--output", help="output path, '-' for stdout")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--mode", choices=list(A.MODES))
        return p

    p = cmd("sgr", "exit probabilities qL/qR/qB on C_n")
    p.add_argument("--n", type=int)
    p = cmd("holes", "hole probabilities h(n, i, j)")
    p.add_argument("--n", type=int)
    p = cmd("transition", "transition matrix on the recurrent states")
    p.add_argument("--n", type=int)
    p.add_argument("--empirical-samples", type=int, help="Monte Carlo samples per row (0 = exact)")
    p = cmd("stationary", "stationary distribution on C_n")
    p.add_argument("--n", type=int)
    p.add_argument("--no-solve", dest="solve", action="store_false",
                   help="use the closed form instead of a linear solve")
    p = cmd("mcmc", "visit frequencies of the driven chain")
    p.add_argument("--n", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--samples", type=int)
    p = cmd("marginals", "stationary probability that a window is full")
    p.add_argument("--n-list", type=_int_list)
    p.add_argument("--a-size", type=int)
    p = cmd("oracle-check", "exact oracle against the closed forms")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, help="dump the absorption law of 1 + delta_k as JSON")
    p.add_argument("--state-cap", type=int, help="maximum reachable states per instance")
    for name, help in (("density2d", "average density on a box"),
                       ("percolation", "height-3 left-right spanning probability")):
        p = cmd(name, help)
        p.add_argument("--L", type=int)
        p.add_argument("--p-list", type=_float_list)
        p.add_argument("--samples", type=int)
        p.add_argument("--burn-in", type=int)
        p.add_argument("--thinning", type=int)
        p.add_argument("--literal-topplings", action="store_true")
        p.add_argument("--step-budget", type=int, help="topplings allowed per stabilization")
        if name == "percolation":
            p.add_argument("--pgm-prefix", help="write <prefix>_p<p>_{heights,clusters}.pgm")
    p = cmd("single-source", "toppled set of n particles at the origin")
    p.add_argument("--n-list", type=_int_list)
    p.add_argument("--runs", type=int)
    p.add_argument("--method", choices=["auto", "direct", "segment"])
    p.add_argument("--step-budget", type=int, help="topplings allowed per run (direct method)")
    p = cmd("verify", "full cross-validation report")
    p.add_argument("--max-n", type=int)
    return parser


def resolve_spec(argv):
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    dump = args.pop("dump_config", False)
    merged = {"seed": 0, "output": None, "format": "csv", "mode": "float", **DEFAULTS[command]}
    config = args.pop("config", None)
    if config is not None:
        try:
            with open(config) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpec(f"cannot read config {config}: {exc}") from exc
        # accept the nested form printed by --dump-config
        from_file = {**from_file.pop("params", {}), **from_file}
        from_file = {k.replace("-", "_"): v for k, v in from_file.items()}
        from_file.pop("command", None)
        unknown = set(from_file) - set(merged)
        if unknown:
            raise InvalidSpec(f"unknown config keys for {command}: {sorted(unknown)}")
        merged.update(from_file)
    merged.update(args)
    common = {k: merged.pop(k) for k in COMMON}
    spec = ExperimentSpec(command, merged, **common)
    validate(spec)
    return spec, dump


def _need(cond, msg):
    if not cond:
        raise InvalidSpec(msg)


def validate(spec):
    q = spec.params
    _need(spec.format in ("csv", "json"), "format must be csv or json")
    _need(spec.mode in A.MODES, f"mode must be one of {A.MODES}")
    _need(isinstance(spec.seed, int) and 0 <= spec.seed < 2**64, "seed must be a 64-bit unsigned integer")
    c = spec.command
    if "n" in q:
        _need(isinstance(q["n"], int) and q["n"] >= 1, "n must be an integer >= 1")
    if c in ("sgr", "holes") and spec.mode == "rational":
        _need(q["n"] <= 64, "rational mode supports n <= 64")
    if c == "transition":
        _need(q["empirical_samples"] >= 0, "empirical_samples must be >= 0")
    if c == "mcmc":
        _need(q["burn_in"] >= 1 and q["samples"] >= 1, "burn_in and samples must be >= 1")
    if c == "marginals":
        _need(q["a_size"] >= 1, "a_size must be >= 1")
        _need(q["n_list"] and all(n >= q["a_size"] for n in q["n_list"]), "every n must be >= a_size")
    if c == "oracle-check":
        _need(q["n"] <= 8, "oracle supports n <= 8")
        _need(q["k"] is None or 1 <= q["k"] <= q["n"], "k must lie in 1..n")
        _need(q["state_cap"] >= 1, "state_cap must be >= 1")
    if c in ("density2d", "percolation"):
        _need(q["L"] >= 2, "L must be >= 2")
        _need(q["p_list"] and all(0.0 < p <= 1.0 for p in q["p_list"]), "every p must lie in (0, 1]")
        _need(q["samples"] >= 1, "samples must be >= 1")
        for key in ("burn_in", "thinning"):
            _need(q[key] is None or q[key] >= 0, f"{key} must be >= 0")
    if "step_budget" in q:
        _need(q["step_budget"] is None or q["step_budget"] >= 1, "step_budget must be >= 1")
    if c == "single-source":
        _need(q["n_list"] and all(n >= 1 for n in q["n_list"]), "every n must be >= 1")
        _need(q["runs"] >= 1, "runs must be >= 1")
    if c == "verify":
        _need(q["max_n"] >= 1, "max_n must be >= 1")
        _need(spec.mode == "float" or q["max_n"] <= 64, "rational mode supports max_n <= 64")


# --------------------------------------------------------------------------
# commands; each returns (output text, one-line summary[, passed])

def _json(obj):
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2, sort_keys=True,
                      default=str) + "\n"


def _csv(writer, *args):
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()


def _settings(q):
    return G.ChainSettings(burn_in=q["burn_in"], thinning=q["thinning"],
                           literal=q["literal_topplings"], step_budget=q["step_budget"])


def run_sgr(spec):
    n = spec.params["n"]
    t = A.sgr_solve_recurrence(n, spec.mode)
    if spec.format == "json":
        text = _json({"n": n, "mode": spec.mode, "header": A.SGR_HEADER,
                      "rows": [[n, k, *map(str, t.row(k))] for k in range(n + 2)]})
    else:
        text = _csv(A.write_sgr_csv, t)
    return text, f"sgr n={n} mode={spec.mode}: {n + 2} rows, qL(1)={t.qL[1]}"


def run_holes(spec):
    n = spec.params["n"]
    t = A.hole_solve_recurrence(n, spec.mode)
    if spec.format == "json":
        text = _json({"n": n, "mode": spec.mode,
                      "h": [[str(t(i, j)) for j in range(1, n + 1)] for i in range(1, n + 1)]})
    else:
        text = _csv(A.write_hole_csv, t)
    return text, f"holes n={n} mode={spec.mode}: {n * n} entries, h(1,1)={t(1, 1)}"


def run_transition(spec):
    n, samples = spec.params["n"], spec.params["empirical_samples"]
    if samples:
        P = M.transition_matrix_empirical(n, samples, make_rng(spec.seed))
    else:
        P = M.transition_matrix_exact(n, spec.mode)
    if spec.format == "json":
        text = _json({"n": n, "states": [s.label() for s in M.states(n)],
                      "entries": [[str(x) for x in row] for row in P.entries]})
    else:
        text = _csv(M.write_matrix_csv, P)
    kind = f"empirical ({samples}/row)" if samples else "exact"
    return text, f"transition n={n} {kind}: P(full,full)={P.entries[0, 0]}"


def run_stationary(spec):
    n = spec.params["n"]
    if spec.params["solve"]:
        pi = M.stationary_solve(M.transition_matrix_exact(n, spec.mode))
    else:
        pi = M.stationary_exact(n, spec.mode)
    if spec.format == "json":
        text = _json({"n": n, "pi": {s.label(): str(pi[s]) for s in M.states(n)}})
    else:
        text = _csv(M.write_stationary_csv, pi)
    return text, f"stationary n={n}: pi(full)={pi.full}"


def run_mcmc(spec):
    q = spec.params
    freq = M.mcmc_run(q["n"], q["burn_in"], q["samples"], make_rng(spec.seed))
    pi = M.StationaryDist(q["n"], freq)
    if spec.format == "json":
        text = _json({"n": q["n"], "burn_in": q["burn_in"], "samples": q["samples"],
                      "freq": {s.label(): float(freq[s.index]) for s in M.states(q["n"])}})
    else:
        text = _csv(M.write_stationary_csv, pi)
    return text, f"mcmc n={q['n']} samples={q['samples']}: freq(full)={freq[0]:.4f}"


def run_marginals(spec):
    q = spec.params
    vals = M.marginal_fullness(q["n_list"], q["a_size"], spec.mode)
    if spec.format == "json":
        text = _json({"a_size": q["a_size"], "values": {str(n): str(v) for n, v in zip(q["n_list"], vals)}})
    else:
        text = _csv(M.write_marginal_csv, q["n_list"], q["a_size"], vals)
    return text, f"marginals A={q['a_size']}: {len(vals)} values, last={vals[-1]}"


def run_oracle(spec):
    n, k = spec.params["n"], spec.params["k"]
    if k is not None:
        dist = absorption_distribution(SandpileConfig.full(C(n)).add(k), Uniform1D(),
                                       state_cap=spec.params["state_cap"])
        return dist.to_json() + "\n", f"oracle n={n} k={k}: {len(dist.outcomes)} outcomes, {dist.n_states} states"
    rows = []
    for m in range(1, n + 1):
        rows += oracle_vs_closed_forms(m, state_cap=spec.params["state_cap"])
    if spec.format == "json":
        text = _json({"rows": [{"name": r.name, "expected": str(r.expected), "got": str(r.got),
                                "ok": r.ok} for r in rows]})
    else:
        buf = io.StringIO()
        buf.write("check,expected,got,ok\n")
        for r in rows:
            buf.write(f"{r.name},{r.expected},{r.got},{int(r.ok)}\n")
        text = buf.getvalue()
    bad = sum(not r.ok for r in rows)
    return text, f"oracle-check n<={n}: {len(rows)} comparisons, {bad} mismatches"


def run_density(spec):
    q = spec.params
    pts = G.density_sweep(q["L"], q["p_list"], q["samples"], spec.seed, _settings(q))
    if spec.format == "json":
        text = _json({"points": [asdict(p) for p in pts]})
    else:
        text = _csv(G.write_density_csv, pts)
    desc = ", ".join(f"rho({p.p:g})={p.rho:.4f}" for p in pts)
    return text, f"density2d L={q['L']}: {desc}"


def run_percolation(spec):
    q = spec.params
    results = []
    for p in q["p_list"]:
        res = G.spanning_probability(q["L"], p, q["samples"], spec.seed, _settings(q))
        results.append(res)
    if q["pgm_prefix"]:
        for p in q["p_list"]:
            chain = G.BoxChain(q["L"], p, make_rng(spec.seed, q["L"], int(p * 1e6), 1 << 20),
                               _settings(q))
            h = next(chain.samples(1))
            labels, _ = G.label_clusters(map(tuple, G.np.argwhere(h == 3)), q["L"])
            with open(f"{q['pgm_prefix']}_p{p:g}_heights.pgm", "w") as fh:
                G.write_pgm(h, fh, maxval=3)
            with open(f"{q['pgm_prefix']}_p{p:g}_clusters.pgm", "w") as fh:
                G.write_pgm(G.cluster_image(labels), fh, maxval=6)
    if spec.format == "json":
        text = G.cluster_histogram_json(results) + "\n"
    else:
        text = _csv(G.write_percolation_csv, results)
    desc = ", ".join(f"P({r.p:g})={r.spanning_prob:.3f}" for r in results)
    return text, f"percolation L={q['L']}: {desc}"


def run_single_source(spec):
    q = spec.params
    rows, results = S.shape_sweep(q["n_list"], q["runs"], spec.seed, q["method"], q["step_budget"])
    if spec.format == "json":
        text = _json({"summary": [asdict(r) for r in rows],
                      "runs": {str(n): [{"D_left": x.D_left, "D_right": x.D_right, "steps": x.steps}
                                        for x in res] for n, res in results.items()}})
    else:
        text = _csv(S.write_runs_csv, results)
    desc = ", ".join(f"n={r.n}: {r.mean_right:.4f}" for r in rows)
    return text, f"single-source mean D_right/(n/2): {desc}"


def run_verify(spec):
    rows = V.verify_all(spec.params["max_n"])
    if spec.format == "json":
        text = _json({"rows": [asdict(r) for r in rows]})
    else:
        text = V.format_report(rows) + "\n"
    bad = sum(not r.passed for r in rows)
    return text, f"verify max_n={spec.params['max_n']}: {len(rows) - bad}/{len(rows)} passed", not bad


RUNNERS = {
    "sgr": run_sgr, "holes": run_holes, "transition": run_transition,
    "stationary": run_stationary, "mcmc": run_mcmc, "marginals": run_marginals,
    "oracle-check": run_oracle, "density2d": run_density, "percolation": run_percolation,
    "single-source": run_single_source, "verify": run_verify,
}


def run(spec):
    """Execute a validated spec; returns ``(exit status, summary)``."""
    text, summary, *flag = RUNNERS[spec.command](spec)
    out = spec.resolved_output()
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(text)
        summary = f"{summary} -> {out}"
    return (EXIT_OK if all(flag) else 1), summary


def _error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None):
    try:
        spec, dump = resolve_spec(argv)
    except InvalidSpec as exc:
        return _error("InvalidSpec", str(exc), EXIT_INVALID)
    if dump:
        print(json.dumps(asdict(spec), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        status, summary = run(spec)
    except BudgetExceeded as exc:
        return _error("BudgetExceeded", str(exc), EXIT_BUDGET)
    except StateSpaceTooLarge as exc:
        return _error("StateSpaceTooLarge", str(exc), EXIT_STATE_SPACE)
    except ValueError as exc:
        return _error("InvalidSpec", str(exc), EXIT_INVALID)
    print(summary, file=sys.stderr if spec.resolved_output() == "-" else sys.stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
