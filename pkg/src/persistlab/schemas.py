"""JSON Schemas of the report files and column contracts of the tabular outputs.

Column lists are versioned with ``SCHEMA_VERSION``; a change to any of them
bumps the version.
"""

SCHEMA_VERSION = 1

COLUMNS = {
    "equilibria": ["label", "N", "S", "I", "lambda1_re", "lambda1_im", "lambda2_re",
                   "lambda2_im", "lambda3_re", "lambda3_im", "classification"],
    "cycle": ["t", "N", "S"],
    "persist": ["seed", "tail_min_N", "tail_min_S", "tail_min_I", "extinct_I"],
    "sweep": ["value", "r0_star", "r0_bar", "supcycle_holds", "tau", "extinct_fraction"],
    "counterexample": ["t", "x", "y", "z"],
}

_num = {"type": "number"}
_opt_num = {"type": ["number", "null"]}
_params = {
    "type": "object",
    "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in ("r", "h", "m", "mu", "beta")},
    "required": ["r", "h", "m", "mu", "beta"],
}
_supcycle = {
    "type": ["object", "null"],
    "properties": {
        "holds": {"type": "boolean"},
        "tau": _opt_num,
        "margin": _num,
        "horizon": _num,
        "n_phase": {"type": "integer", "minimum": 2},
    },
    "required": ["holds", "tau", "margin", "horizon", "n_phase"],
}


def _report(command: str, props: dict, required: list[str]) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "command": {"const": command},
            **props,
        },
        "required": ["schema_version", "command", *required],
    }


REPORTS = {
    "analyze": _report("analyze", {
        "params": _params,
        "regime": {"enum": ["LogisticStable", "InteriorEquilibriumStable", "LimitCycle"]},
        "threshold_lower": _num,
        "threshold_upper": _num,
        "non_hyperbolic": {"type": "boolean"},
        "dissipativity_bound": _num,
        "r0_star": _opt_num,
        "interior_equilibrium": {"type": "boolean"},
        "equilibria": {"type": "array", "items": {
            "type": "object",
            "properties": {
                "label": {"type": "string"},
                "point": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                "eigenvalues": {"type": "array", "minItems": 3, "maxItems": 3,
                                "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                "classification": {"enum": ["saddle", "stable", "unstable", "non-hyperbolic"]},
            },
            "required": ["label", "point", "eigenvalues", "classification"],
        }},
    }, ["params", "regime", "r0_star", "equilibria", "dissipativity_bound"]),
    "cycle": _report("cycle", {
        "params": _params,
        "period": _num,
        "s_mean": _num,
        "anchor": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "closure_residual": _num,
        "multiplier": _num,
        "r0_bar": _num,
        "floquet": _num,
        "supcycle": _supcycle,
    }, ["params", "period", "s_mean", "r0_bar", "floquet", "supcycle"]),
    "persist": _report("persist", {
        "params": _params,
        "em_holds": {"type": "boolean"},
        "r0_star": _opt_num,
        "r0_bar": _opt_num,
        "supcycle": _supcycle,
        "theorem_satisfied": {"type": "boolean"},
        "k_used": _num,
        "chain": {"type": "array", "items": {
            "type": "object",
            "properties": {"step": {"type": "string"}, "passed": {"type": "boolean"}, "note": {"type": "string"}},
            "required": ["step", "passed", "note"],
        }},
        "t_end": _num,
        "floor": _num,
        "eta_estimate": _num,
        "extinct_I_fraction": _num,
    }, ["params", "em_holds", "r0_star", "theorem_satisfied", "k_used", "eta_estimate"]),
    "sweep": _report("sweep", {
        "params": _params,
        "sweep_param": {"enum": ["r", "h", "m", "mu", "beta"]},
        "values": {"type": "array", "items": _num, "minItems": 2},
    }, ["params", "sweep_param", "values"]),
    "counterexample": _report("counterexample", {
        "eps": _num,
        "delta": _num,
        "y0": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
        "t_end": _num,
        "z_min_time": _num,
        "z_min": _num,
        "z_end": _num,
        "cycle_period": _num,
        "cycle_integral": _num,
    }, ["eps", "delta", "y0", "z_min_time", "z_min", "z_end"]),
}
