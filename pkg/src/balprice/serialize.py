"""JSON instance schema: environment + deterministic agents + optional
per-agent valuation distribution.

The encoding is strict (unknown keys rejected) and canonical (sorted keys,
fixed separators), so generated instances round-trip byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .core import (
    AdditiveValuation,
    CombinatorialAuctionEnv,
    Environment,
    ExplicitEnv,
    KnapsackEnv,
    MarketValuation,
    Matroid,
    MatroidEnv,
    MphValuation,
    PipEnv,
    ProductEnv,
    ScalarValuation,
    SingleItemEnv,
    TableValuation,
    ThresholdValuation,
    Valuation,
    XosValuation,
    bitmask_items,
)
from .stochastic import ProductDistribution


class SchemaError(ValueError):
    """Malformed or non-conforming instance document."""


@dataclass(frozen=True)
class Instance:
    env: Environment
    profile: tuple[Valuation, ...]
    distribution: Optional[ProductDistribution] = None

    def to_json(self) -> str:
        doc = {
            "environment": encode_environment(self.env),
            "agents": [encode_valuation(v) for v in self.profile],
        }
        if self.distribution is not None:
            doc["distribution"] = [
                [{"valuation": encode_valuation(v), "prob": p} for v, p in atoms]
                for atoms in self.distribution.supports
            ]
        return json.dumps(doc, sort_keys=True, separators=(",", ": "), indent=1)


def _expect_keys(obj: dict, required: set, optional: set = frozenset(), what: str = "object"):
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be a JSON object")
    keys = set(obj)
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise SchemaError(f"{what} missing keys {sorted(missing)}")
    if unknown:
        raise SchemaError(f"{what} has unknown keys {sorted(unknown)}")


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------


def encode_valuation(v: Valuation) -> dict:
    if isinstance(v, AdditiveValuation):
        return {"kind": "additive", "values": list(v.values)}
    if isinstance(v, XosValuation):
        return {"kind": "xos", "clauses": [list(c) for c in v.clauses]}
    if isinstance(v, MphValuation):
        return {
            "kind": "mph",
            "clauses": [
                [{"items": list(bitmask_items(e)), "weight": w} for e, w in clause]
                for clause in v.clauses
            ],
        }
    if isinstance(v, ThresholdValuation):
        return {"kind": "knapsack_threshold", "value": v.value_at_size, "size": v.size}
    if isinstance(v, ScalarValuation):
        return {"kind": "scalar", "value": v.rate}
    if isinstance(v, TableValuation):
        return {
            "kind": "table",
            "entries": [{"outcome": tok, "value": val} for tok, val in v.entries],
        }
    if isinstance(v, MarketValuation):
        return {"kind": "product", "parts": [encode_valuation(p) for p in v.parts]}
    raise SchemaError(f"cannot encode valuation {v!r}")


def decode_valuation(doc: dict) -> Valuation:
    _expect_keys(doc, {"kind"}, {"values", "clauses", "value", "size", "entries", "parts"},
                 "valuation")
    kind = doc["kind"]
    if kind == "additive":
        _expect_keys(doc, {"kind", "values"}, what="additive valuation")
        return AdditiveValuation(tuple(float(x) for x in doc["values"]))
    if kind == "xos":
        _expect_keys(doc, {"kind", "clauses"}, what="xos valuation")
        return XosValuation(tuple(tuple(float(x) for x in c) for c in doc["clauses"]))
    if kind == "mph":
        _expect_keys(doc, {"kind", "clauses"}, what="mph valuation")
        clauses = []
        for clause in doc["clauses"]:
            edges = []
            for edge in clause:
                _expect_keys(edge, {"items", "weight"}, what="hyperedge")
                mask = 0
                for j in edge["items"]:
                    mask |= 1 << int(j)
                edges.append((mask, float(edge["weight"])))
            clauses.append(tuple(edges))
        return MphValuation(tuple(clauses))
    if kind == "knapsack_threshold":
        _expect_keys(doc, {"kind", "value", "size"}, what="threshold valuation")
        return ThresholdValuation(float(doc["value"]), float(doc["size"]))
    if kind == "scalar":
        _expect_keys(doc, {"kind", "value"}, what="scalar valuation")
        return ScalarValuation(float(doc["value"]))
    if kind == "table":
        _expect_keys(doc, {"kind", "entries"}, what="table valuation")
        entries = []
        for e in doc["entries"]:
            _expect_keys(e, {"outcome", "value"}, what="table entry")
            entries.append((_decode_token(e["outcome"]), float(e["value"])))
        return TableValuation(tuple(entries))
    if kind == "product":
        _expect_keys(doc, {"kind", "parts"}, what="product valuation")
        return MarketValuation(tuple(decode_valuation(p) for p in doc["parts"]))
    raise SchemaError(f"unknown valuation kind {kind!r}")


def _decode_token(tok):
    if isinstance(tok, bool):
        raise SchemaError("boolean outcome token")
    if isinstance(tok, int):
        return tok
    if isinstance(tok, float):
        return tok
    if isinstance(tok, list):
        return tuple(_decode_token(t) for t in tok)
    raise SchemaError(f"unsupported outcome token {tok!r}")


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


def encode_environment(env: Environment) -> dict:
    if isinstance(env, SingleItemEnv):
        return {"kind": "single_item", "agents": env.n}
    if isinstance(env, MatroidEnv):
        m = env.matroid
        if m.kind == "uniform":
            mdoc = {"kind": "uniform", "rank": m.rank_bound, "ground": m.ground}
        elif m.kind == "partition":
            mdoc = {
                "kind": "partition",
                "blocks": [list(b) for b in m.blocks],
                "capacities": list(m.capacities),
            }
        elif m.kind == "graphic_k4":
            mdoc = {"kind": "graphic_k4"}
        else:
            raise SchemaError(f"cannot encode matroid kind {m.kind}")
        return {
            "kind": "matroid",
            "agents": env.n,
            "matroid": mdoc,
            "elements": [list(e) for e in env.elements],
        }
    if isinstance(env, CombinatorialAuctionEnv):
        return {"kind": env.kind, "agents": env.n, "items": env.items}
    if isinstance(env, KnapsackEnv):
        doc = {"kind": "knapsack", "agents": env.n, "step": env.step}
        if env.max_share != 1.0:
            doc["max_share"] = env.max_share
        return doc
    if isinstance(env, PipEnv):
        return {
            "kind": "pip",
            "agents": env.n,
            "matrix": [list(r) for r in env.matrix],
            "capacities": list(env.capacities),
        }
    if isinstance(env, ExplicitEnv):
        return {
            "kind": "explicit",
            "agents": env.n,
            "outcomes": [list(t) for t in env.outcome_tokens],
            "feasible": sorted([list(a) for a in env.feasible_set]),
        }
    if isinstance(env, ProductEnv):
        return {
            "kind": "product",
            "markets": [encode_environment(m) for m in env.markets],
        }
    raise SchemaError(f"cannot encode environment {env!r}")


def decode_environment(doc: dict) -> Environment:
    _expect_keys(
        doc,
        {"kind"},
        {"agents", "items", "step", "max_share", "matroid", "elements", "matrix",
         "capacities", "outcomes", "feasible", "markets"},
        "environment",
    )
    kind = doc["kind"]
    if kind == "single_item":
        _expect_keys(doc, {"kind", "agents"}, what="single_item environment")
        return SingleItemEnv(n=int(doc["agents"]))
    if kind == "matroid":
        _expect_keys(doc, {"kind", "agents", "matroid", "elements"}, what="matroid environment")
        mdoc = doc["matroid"]
        _expect_keys(mdoc, {"kind"}, {"rank", "ground", "blocks", "capacities"}, "matroid")
        if mdoc["kind"] == "uniform":
            matroid = Matroid.uniform(int(mdoc["rank"]), int(mdoc["ground"]))
        elif mdoc["kind"] == "partition":
            matroid = Matroid.partition(mdoc["blocks"], mdoc["capacities"])
        elif mdoc["kind"] == "graphic_k4":
            matroid = Matroid.graphic_k4()
        else:
            raise SchemaError(f"unknown matroid kind {mdoc['kind']!r}")
        elements = tuple(tuple(int(e) for e in owned) for owned in doc["elements"])
        return MatroidEnv(n=int(doc["agents"]), matroid=matroid, elements=elements)
    if kind in ("combinatorial_auction", "fractional_ca"):
        _expect_keys(doc, {"kind", "agents", "items"}, what="auction environment")
        return CombinatorialAuctionEnv(
            n=int(doc["agents"]), items=int(doc["items"]),
            fractional=(kind == "fractional_ca"),
        )
    if kind == "knapsack":
        _expect_keys(doc, {"kind", "agents", "step"}, {"max_share"}, "knapsack environment")
        return KnapsackEnv(
            n=int(doc["agents"]),
            step=float(doc["step"]),
            max_share=float(doc.get("max_share", 1.0)),
        )
    if kind == "pip":
        _expect_keys(doc, {"kind", "agents", "matrix", "capacities"}, what="pip environment")
        return PipEnv(
            n=int(doc["agents"]),
            matrix=tuple(tuple(float(a) for a in row) for row in doc["matrix"]),
            capacities=tuple(float(c) for c in doc["capacities"]),
        )
    if kind == "explicit":
        _expect_keys(doc, {"kind", "agents", "outcomes", "feasible"}, what="explicit environment")
        return ExplicitEnv(
            n=int(doc["agents"]),
            outcome_tokens=tuple(
                tuple(_decode_token(t) for t in toks) for toks in doc["outcomes"]
            ),
            feasible_set=frozenset(
                tuple(_decode_token(t) for t in alloc) for alloc in doc["feasible"]
            ),
        )
    if kind == "product":
        _expect_keys(doc, {"kind", "markets"}, what="product environment")
        return ProductEnv(markets=tuple(decode_environment(m) for m in doc["markets"]))
    raise SchemaError(f"unknown environment kind {kind!r}")


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


def load_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    _expect_keys(doc, {"environment", "agents"}, {"distribution"}, "instance")
    env = decode_environment(doc["environment"])
    profile = tuple(decode_valuation(v) for v in doc["agents"])
    if len(profile) != env.n:
        raise SchemaError(f"{len(profile)} agent records for {env.n} agents")
    dist = None
    if "distribution" in doc:
        supports = []
        for atoms in doc["distribution"]:
            decoded = []
            for atom in atoms:
                _expect_keys(atom, {"valuation", "prob"}, what="distribution atom")
                decoded.append((decode_valuation(atom["valuation"]), float(atom["prob"])))
            supports.append(tuple(decoded))
        if len(supports) != env.n:
            raise SchemaError("distribution length differs from agent count")
        dist = ProductDistribution(tuple(supports))
    return Instance(env=env, profile=profile, distribution=dist)


def load_instance_file(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return load_instance(fh.read())


def dump_instance_file(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance.to_json())
        fh.write("\n")
