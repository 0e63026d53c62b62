"""Scenario runner: ``lacunary run <scenario.json> [--out DIR] [--threads N] [--tol-scale X] [--seed S]``.

Exit status: 0 when every command ran and every declared assertion held, 1 when
a command failed or an assertion did not hold, 2 when the scenario does not
match the schema.
"""

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from importlib import resources
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import jsonschema
import numpy as np

from . import experiments, meromorphics, perturbation, polya, spectra
from .errors import LacunaryError
from .reports import dumps, emit_report, report_document

log = logging.getLogger("lacunary")

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

GENERATOR_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "explicit"}, "values": {"type": "array", "items": _PAIR, "minItems": 1}},
            "required": ["kind", "values"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "geometric"},
                "ratio": _NUM,
                "count": _POS_INT,
                "start": {"type": "integer"},
                "scale": _NUM,
            },
            "required": ["kind", "ratio", "count"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "integer-shifted"},
                "count": _POS_INT,
                "start": {"type": "integer"},
                "shift": _NUM,
            },
            "required": ["kind", "count"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "stretched-exp"},
                "power": _NUM,
                "count": _POS_INT,
                "start": {"type": "integer"},
            },
            "required": ["kind", "power", "count"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "jacobi"},
                "N": _POS_INT,
                "diag": {"anyOf": [_NUM, {"type": "array", "items": _NUM}]},
                "offdiag": {"type": "array", "items": _NUM},
                "q": _NUM,
            },
            "required": ["kind", "N"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "convolution-symbol"},
                "tau1": {"anyOf": [_NUM, _PAIR]},
                "tau2": {"anyOf": [_NUM, _PAIR]},
                "r": _NUM,
                "R": _NUM,
                "a": _NUM,
                "n_max": _POS_INT,
                "form": {"enum": ["exact", "leading"]},
            },
            "required": ["kind", "tau1", "tau2", "r", "R", "a", "n_max"],
            "additionalProperties": False,
        },
    ]
}

PERTURBATION_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"preset": {"const": "psi"}, "n_terms": _POS_INT},
            "required": ["preset"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"enum": ["bounded", "singular"]},
                "weights": {"type": "array", "items": _PAIR},
                "a": {"type": "array", "items": _PAIR},
                "b": {"type": "array", "items": _PAIR},
                "kappa": _PAIR,
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

ASSERT_SCHEMA = {
    "type": "object",
    "additionalProperties": {
        "type": "object",
        "properties": {"le": _NUM, "ge": _NUM, "lt": _NUM, "gt": _NUM, "eq": {}},
        "additionalProperties": False,
        "minProperties": 1,
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "generator": GENERATOR_SCHEMA,
        "perturbation": PERTURBATION_SCHEMA,
        "output_dir": {"type": "string"},
        "commands": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "op": {"type": "string"},
                    "params": {"type": "object"},
                    "assert": ASSERT_SCHEMA,
                },
                "required": ["op"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["name", "commands"],
    "additionalProperties": False,
}


class ScenarioError(Exception):
    pass


class Context:
    def __init__(self, scenario, threads=1, tol_scale=1.0, seed=0):
        self.scenario = scenario
        self.threads = threads
        self.tol_scale = tol_scale
        self.rng = np.random.default_rng(seed)
        self._seq = None
        self._data = None
        self._beta = None

    @property
    def seq(self):
        if self._seq is None:
            if self.scenario.get("generator") is None:
                if (self.scenario.get("perturbation") or {}).get("preset") != "psi":
                    raise ScenarioError("command needs a generator")
                return self.data.spectrum
            self._seq = make_sequence(self.scenario["generator"])
        return self._seq

    @property
    def data(self):
        if self._data is None and self.scenario.get("perturbation") is not None:
            self._data = make_data(self.scenario["perturbation"], self)
        return self._data

    @property
    def beta(self):
        if self._beta is None:
            p = self.scenario.get("perturbation")
            if p is None:
                raise ScenarioError("command needs a perturbation")
            if p.get("preset") == "psi":
                self._beta = meromorphics.psi_meromorphic_sum(p.get("n_terms", 40))
            else:
                self._beta = meromorphics.MeromorphicSum.from_rank_one(self.data)
        return self._beta

    def tol(self, params, key, default):
        return float(params.get(key, default)) * self.tol_scale


def _cx(p):
    return complex(p[0], p[1]) if isinstance(p, (list, tuple)) else complex(p)


def make_sequence(g):
    kind = g["kind"]
    if kind == "explicit":
        return spectra.SpectrumSequence.from_values(np.array([_cx(p) for p in g["values"]]), origin="explicit")
    if kind == "geometric":
        return spectra.geometric_sequence(g["ratio"], g["count"], g.get("start", 1), g.get("scale", 1.0))
    if kind == "integer-shifted":
        return spectra.integer_sequence(g["count"], g.get("start", 1), g.get("shift", 0.0))
    if kind == "stretched-exp":
        return spectra.stretched_exp_sequence(g["power"], g["count"], g.get("start", 1))
    if kind == "jacobi":
        N = g["N"]
        off = g.get("offdiag")
        if off is None:
            if "q" not in g:
                raise ScenarioError("jacobi generator needs offdiag or q")
            off = spectra.q_oscillator_offdiag(g["q"], max(N - 1, 1))
        return spectra.jacobi_truncated_eigenvalues(g.get("diag", 0.0), off, N)
    if kind == "convolution-symbol":
        return spectra.convolution_symbol_sequence(
            _cx(g["tau1"]), _cx(g["tau2"]), g["r"], g["R"], g["a"], g["n_max"], g.get("form", "exact")
        )
    raise ScenarioError(f"unknown generator {kind!r}")


def make_data(p, ctx):
    if p.get("preset") == "psi":
        return meromorphics.psi_rank_one_data(p.get("n_terms", 40))
    seq = ctx.seq
    kind = p["kind"]
    kappa = _cx(p.get("kappa", [1.0, 0.0]))
    if "weights" in p:
        w = np.array([_cx(x) for x in p["weights"]])
        return perturbation.RankOneData.from_weights(seq, w, kind, kappa)
    if "a" in p and "b" in p:
        a = np.array([_cx(x) for x in p["a"]])
        b = np.array([_cx(x) for x in p["b"]])
        return perturbation.RankOneData(seq, a, b, kappa, kind)
    raise ScenarioError("perturbation needs weights or a and b")


# command implementations: each returns (summary, tables)


def _table(columns, rows):
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def op_check_lacunary(ctx, p):
    rep = spectra.check_lacunary(ctx.seq, p.get("threshold", spectra.DEFAULT_LACUNARITY_THRESHOLD))
    pair = list(rep.witness_pair) if rep.witness_pair is not None else None
    return {"is_lacunary": rep.is_lacunary, "best_epsilon": rep.best_epsilon, "witness_pair": pair}, {}


def op_log2_density_test(ctx, p):
    radii = p.get("radii")
    if radii is None:
        top = float(np.abs(ctx.seq.values).max())
        radii = np.geomspace(2.0, top, p.get("n_radii", 30))
    v = spectra.log2_density_test(ctx.seq, radii, p.get("threshold", spectra.DEFAULT_DIVERGENCE_THRESHOLD))
    summary = {
        "satisfies_beglog2": v.satisfies_beglog2,
        "limsup_proxy": v.limsup_proxy,
        "window_maxima": v.window_maxima,
        "window_saturated": v.window_saturated,
    }
    return summary, {"ratios": _table(["radius", "ratio"], zip(v.radii, v.ratios))}


def op_bon_witness(ctx, p):
    w = spectra.bon_witness(ctx.seq, float(p["R"]))
    if w is None:
        return {"found": False}, {}
    bound = 2.0 ** (1 - w.M)
    return {
        "found": True,
        "index": w.index,
        "log_product": w.log_product,
        "product": w.product_value,
        "M": w.M,
        "bound": bound,
        "within_bound": w.product_value <= bound,
    }, {}


def op_sparseness_product(ctx, p):
    rows = []
    for n in p["indices"]:
        lp = spectra.log_sparseness_product(ctx.seq, n, p["N"])
        rows.append([n, float(ctx.seq.values[n].real), lp])
    return {"count": len(rows)}, {"products": _table(["index", "t", "log_product"], rows)}


def op_moment_check(ctx, p):
    mc = perturbation.moment_equalities_check(ctx.data, p.get("k_max", 3), ctx.tol(p, "tol", perturbation.MOMENT_TOL))
    rows = [
        [r.k, r.partial_sum.real, r.partial_sum.imag, complex(r.target).real, complex(r.target).imag,
         r.tail_ratio, r.converges_absolutely, r.satisfied]
        for r in mc
    ]
    cols = ["k", "sum_re", "sum_im", "target_re", "target_im", "tail_ratio", "converges", "satisfied"]
    return {"first_failing": mc.first_failing, "all_satisfied": all(r.satisfied for r in mc)}, {
        "moments": _table(cols, rows)
    }


def op_kernel_chain(ctx, p):
    data = ctx.data
    if data.kind == "singular":
        data = perturbation.singular_to_bounded(data)
    L = perturbation.build_truncated_matrix(data, p.get("N"))
    kc = perturbation.kernel_chain_dims(L, p.get("j_max", 3), ctx.tol(p, "tol", perturbation.RANK_TOL))
    return {"dims": kc.dims, "cond_estimate": kc.cond_estimate, "precision_warning": kc.precision_warning}, {}


def op_beta_zeros(ctx, p):
    f = ctx.beta
    r_in, r_out = p.get("r_in"), p.get("r_out")
    if r_in is None or r_out is None:
        a, b = meromorphics.zero_free_radii(f)
        r_in = meromorphics.nudge_radius(f, a, -1) if r_in is None else r_in
        r_out = meromorphics.nudge_radius(f, b, 1) if r_out is None else r_out
    zs = meromorphics.beta_zeros(f, (float(r_in), float(r_out)), ctx.tol(p, "tol", 1e-10))
    rows = []
    for z, m, res in zip(zs.zeros, zs.multiplicities, zs.polish_residuals):
        e = 1 / z
        rows.append([z.real, z.imag, abs(z), e.real, e.imag, abs(e), m, res])
    cols = ["zero_re", "zero_im", "zero_modulus", "eig_re", "eig_im", "eig_modulus", "multiplicity", "residual"]
    return {"count": zs.count, "winding_total": zs.winding_total, "poles_enclosed": zs.poles_enclosed}, {
        "zeros": _table(cols, rows)
    }


def op_psi_reproduction(ctx, p):
    r = experiments.psi_reproduction(
        p.get("n_min", 2), p.get("n_max", 12), p.get("k_min", 3), p.get("k_max", 10),
        p.get("n_terms", 40), tol=ctx.tol(p, "tol", 1e-10),
    )
    zeros = [[z.real, z.imag, abs(z), abs(1 / z), math.log2(abs(z))] for z in r.zeros]
    decay = list(zip(r.circle_radii, r.circle_maxima))
    return {
        "max_rel_zero_error": r.max_rel_zero_error,
        "first_moment": r.first_moment,
        "first_moment_error": abs(r.first_moment + 1),
        "decay_exponent": r.decay_exponent,
        "decay_exponent_error": abs(r.decay_exponent + 1),
        "decay_constant": r.decay_constant,
    }, {
        "zeros": _table(["zero_re", "zero_im", "zero_modulus", "eig_modulus", "log2_modulus"], zeros),
        "decay": _table(["radius", "max_abs_psi"], decay),
    }


def op_resolvent_probe(ctx, p):
    radii = np.geomspace(p.get("r_min", 2.0), p.get("r_max", 1e4), p.get("n_radii", 200))
    pr = meromorphics.resolvent_norm_probe(ctx.seq, p.get("delta", 1.5), radii, p.get("tol", 2.0))
    rows = list(zip(pr.radii, pr.sup_values, pr.kept))
    return {"kept_fraction": pr.kept_fraction, "block_fractions": [list(x) for x in pr.block_fractions]}, {
        "resolvent": _table(["radius", "sup", "kept"], rows)
    }


def op_limst_probe(ctx, p):
    radii = np.geomspace(p.get("r_min", 2.0), p.get("r_max", 1e4), p.get("n_radii", 200))
    pr = meromorphics.limst_probe(ctx.beta, p.get("s", 1), radii, p.get("tau"), p.get("n_samples", 256))
    return {"tau": pr.tau, "block_maxima": [list(x) for x in pr.block_maxima]}, {
        "circles": _table(["radius", "value", "kept"], pr.rows)
    }


def op_lower_bound_probe(ctx, p):
    pr = polya.lacunary_lower_bound_probe(ctx.beta, p.get("u"), p.get("require_divergence", True))
    rows = [[r.index, r.ring[0], r.ring[1], r.observed_min, r.bound, r.method] for r in pr.rows]
    return {"floor": pr.floor, "holds": pr.holds, "inconclusive": pr.inconclusive, "reason": pr.reason}, {
        "rings": _table(["index", "r_lo", "r_hi", "observed_min", "bound", "method"], rows)
    }


def op_sector_check(ctx, p):
    annuli = [tuple(a) for a in p["annuli"]]
    rep = meromorphics.sector_localization_check(
        ctx.beta, p["ray_angles"], p["eps"], annuli, ctx.tol(p, "tol", 1e-10), ctx.threads
    )
    return {"outliers": len(rep.outliers), "zeros": sum(z.count for z in rep.zero_sets)}, {}


def op_random_oracle(ctx, p):
    rows = []
    for i in range(p.get("count", 20)):
        data = experiments.random_rank_one(ctx.rng, p.get("n_max", 50))
        r = experiments.oracle_comparison(data, ctx.tol(p, "tol", 1e-10))
        rows.append([i, r.n, r.n_eigenvalues, r.n_zeros, r.max_rel_error])
    worst = max((r[4] for r in rows), default=0.0)
    return {"instances": len(rows), "worst_rel_error": worst}, {
        "instances": _table(["instance", "N", "eigenvalues", "zeros", "max_rel_error"], rows)
    }


def op_counterexample(ctx, p):
    window = tuple(p["window"]) if "window" in p else None
    run = experiments.counterexample_experiment(
        ctx.seq, p.get("max_blocks", 6), p.get("growth", 4.0), p.get("sandwich", "enforce"),
        p.get("n_samples", 20), window, ctx.tol(p, "rank_tol", 1e-8), p.get("force_tilde", False),
    )
    b, s = run.bundle, run.sums
    t = b.sequence.values.real
    s1, s2 = b.S1_trace, b.S2_trace
    blocks = []
    for k, T in enumerate(b.blocks):
        blocks.append([
            k + 1, b.anchors[k], t[b.anchors[k]], len(T), b.S1_increments[k], b.S2_increments[k],
            s1[k], s2[k], b.sandwich_min[k], b.sandwich_max[k], run.minimality[k][0], run.minimality[k][1],
        ])
    d = run.defect
    summary = {
        "blocks": len(b.blocks),
        "anchors": b.anchor_values(),
        "S1_total": s1[-1] if s1 else 0.0,
        "S2_total": s2[-1] if s2 else 0.0,
        "S1_diverges_proxy": s.S1_diverges_proxy,
        "S2_converges_proxy": s.S2_converges_proxy,
        "S2_constant": s.S2_constant,
        "sums_reason": s.reason,
        "minimal": all(after <= 0.0 < full for full, after in run.minimality),
        "sandwich_holds": all(0.5 <= lo and hi <= 2.0 for lo, hi in zip(b.sandwich_min, b.sandwich_max)),
        "used_tilde": b.used_tilde,
        "interpolation_residual": run.interpolation.max_residual,
        "rejected_samples": len(run.interpolation.rejected),
        "defect_deficiency": d.deficiency if d else 0,
        "defect_expected": d.expected if d else 0,
        "defect_matches": (d.deficiency == d.expected) if d else True,
        "bundle": b.to_json(),
    }
    tables = {
        "blocks": _table(
            ["block", "anchor_index", "anchor", "size", "S1_increment", "S2_increment", "S1_partial",
             "S2_partial", "sandwich_min", "sandwich_max", "log_block_sum", "max_log_sum_after_removal"],
            blocks,
        ),
        "interpolation": _table(
            ["z_re", "z_im", "residual"],
            [[z.real, z.imag, r] for z, r in zip(np.delete(run.samples, run.interpolation.rejected),
                                                  run.interpolation.residuals)],
        ),
    }
    if d is not None:
        tables["defect"] = _table(
            ["dimension", "numerical_rank", "deficiency", "expected", "cond_estimate", "precision_warning"],
            [[d.dimension, d.numerical_rank, d.deficiency, d.expected, d.cond_estimate, d.precision_warning]],
        )
    return summary, tables


OPS = {
    "check_lacunary": op_check_lacunary,
    "log2_density_test": op_log2_density_test,
    "bon_witness": op_bon_witness,
    "sparseness_product": op_sparseness_product,
    "moment_check": op_moment_check,
    "kernel_chain": op_kernel_chain,
    "beta_zeros": op_beta_zeros,
    "psi_reproduction": op_psi_reproduction,
    "resolvent_probe": op_resolvent_probe,
    "limst_probe": op_limst_probe,
    "lower_bound_probe": op_lower_bound_probe,
    "sector_check": op_sector_check,
    "random_oracle": op_random_oracle,
    "counterexample": op_counterexample,
}


def check_assertions(summary, asserts):
    failed = []
    for key, cond in (asserts or {}).items():
        if key not in summary:
            failed.append(f"{key}: missing from results")
            continue
        v = summary[key]
        for rel, ref in cond.items():
            try:
                ok = {
                    "le": lambda: v <= ref,
                    "ge": lambda: v >= ref,
                    "lt": lambda: v < ref,
                    "gt": lambda: v > ref,
                    "eq": lambda: v == ref,
                }[rel]()
            except TypeError:
                ok = False
            if not ok:
                failed.append(f"{key} {rel} {ref!r} failed (value {v!r})")
    return failed


def load_scenario(path):
    p = Path(path)
    if not p.exists():
        bundled = resources.files("lacunary") / "scenarios" / p.name
        if bundled.is_file():
            return json.loads(bundled.read_text()), bundled.read_bytes()
    raw = p.read_bytes()
    return json.loads(raw), raw


def bundled_scenarios():
    root = resources.files("lacunary") / "scenarios"
    return sorted(x.name for x in root.iterdir() if x.name.endswith(".json"))


def tool_version():
    try:
        return version("lacunary")
    except PackageNotFoundError:
        return "0+unknown"


def run_scenario(path, out=None, threads=1, tol_scale=1.0, seed=0):
    """Run a scenario file; returns the exit status."""
    try:
        scenario, raw = load_scenario(path)
        jsonschema.validate(scenario, SCENARIO_SCHEMA)
        unknown = [c["op"] for c in scenario["commands"] if c["op"] not in OPS]
        if unknown:
            raise jsonschema.ValidationError(f"unknown operation(s): {', '.join(unknown)}")
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as e:
        msg = e.message if isinstance(e, jsonschema.ValidationError) else str(e)
        print(f"scenario error: {msg}", file=sys.stderr)
        return 2
    out_dir = Path(out or scenario.get("output_dir") or f"out/{scenario['name']}")
    ctx = Context(scenario, threads, tol_scale, seed)
    entries, all_failed = [], []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, cmd in enumerate(scenario["commands"]):
            stem = f"{i:02d}_{cmd['op']}"
            t0 = time.perf_counter()
            try:
                summary, tables = OPS[cmd["op"]](ctx, cmd.get("params", {}))
                failed = check_assertions(summary, cmd.get("assert"))
                status = "failed" if failed else "ok"
            except (LacunaryError, ScenarioError, ValueError, KeyError, TypeError) as e:
                summary, tables = {"error": f"{type(e).__name__}: {e}"}, {}
                failed = [f"{stem}: {type(e).__name__}: {e}"]
                status = "error"
            wall = time.perf_counter() - t0
            doc = report_document(cmd["op"], status, summary, tables, failed)
            files = emit_report(doc, out_dir, stem)
            all_failed += [f"{stem}: {f}" if not f.startswith(stem) else f for f in failed]
            entries.append({"op": cmd["op"], "status": status, "wall_time_s": wall,
                            "files": [f.name for f in files]})
            log.info("%s %s (%.3fs)", stem, status, wall)
        manifest = {
            "tool": "lacunary",
            "version": tool_version(),
            "numpy": np.__version__,
            "scenario": scenario["name"],
            "scenario_sha256": hashlib.sha256(raw).hexdigest(),
            "threads": threads,
            "tol_scale": tol_scale,
            "seed": seed,
            "commands": entries,
            "failed_checks": all_failed,
        }
        (out_dir / "manifest.json").write_text(dumps(manifest) + "\n")
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1
    for f in all_failed:
        print(f"FAILED {f}", file=sys.stderr)
    return 1 if all_failed else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="lacunary", description="Run numerical experiments from scenario files.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file (or the name of a bundled scenario)")
    run.add_argument("scenario")
    run.add_argument("--out", help="output directory (default: the scenario's output_dir)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--tol-scale", type=float, default=1.0, help="multiplier applied to every tolerance")
    run.add_argument("--seed", type=int, default=0, help="seed for randomized commands")
    run.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("list", help="list bundled scenarios")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in bundled_scenarios():
            print(name)
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1 or args.tol_scale <= 0 or not 0 <= args.seed < 2 ** 64:
        print("invalid --threads, --tol-scale or --seed", file=sys.stderr)
        return 2
    return run_scenario(args.scenario, args.out, args.threads, args.tol_scale, args.seed)


if __name__ == "__main__":
    sys.exit(main())
