"""Command-line front end: instance I/O, pricing-construction registry, and
the balance / simulate / ratio / permeability / catalog subcommands.

Exit codes: 0 success or certification pass, 1 certification failure,
2 input error, 3 resource cap exceeded.  Every report embeds the resolved
run configuration so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

from .balance import check_balanced, check_weakly_balanced
from .catalog import GENERATORS
from .core import (
    AdditiveValuation,
    CapExceeded,
    CombinatorialAuctionEnv,
    KnapsackEnv,
    MarketValuation,
    MatroidEnv,
    MphValuation,
    PipEnv,
    ProductEnv,
    SingleItemEnv,
    welfare,
)
from .mechanism import (
    adaptive_adversary_welfare,
    run_posted_price,
    worst_order_welfare,
)
from .oracle import (
    AllocationRule,
    ExchangeFamily,
    GREEDY_RULE,
    OPT_RULE,
    default_family,
    fractional_opt_config_lp,
    greedy,
    knapsack_dp,
    opt,
    permeability,
)
from .pricing import (
    BalanceParams,
    PricingError,
    PricingRule,
    bundle_split_item_prices,
    compose_add,
    compose_max,
    expected_scaled_prices,
    fractional_ca_item_prices,
    greedy_derived_prices,
    knapsack_prices,
    matroid_dynamic_prices,
    monotone_critical_prices,
    mphk_item_prices,
    opt_derived_prices,
    pip_prices,
    single_item_prices,
    xos_item_prices,
)
from .serialize import Instance, SchemaError, dump_instance_file, load_instance_file
from .stochastic import (
    ProductDistribution,
    exact_ratio,
    expected_opt,
    monte_carlo_ratio,
)

RATIO_SCHEMA = "balprice.ratio.v1"
REPORT_SCHEMA = "balprice.report.v1"


def _default_cap() -> int:
    raw = os.environ.get("BALPRICE_CAP")
    if raw:
        try:
            return int(raw)
        except ValueError as exc:
            raise SchemaError(f"BALPRICE_CAP must be an integer, got {raw!r}") from exc
    return 200_000


# ---------------------------------------------------------------------------
# Pricing-construction registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Construction:
    name: str
    build: Callable[[Instance], Callable[[tuple], PricingRule]]
    params: Callable[[Instance], BalanceParams]
    family: Callable[[Instance], ExchangeFamily]
    reference: Callable[[Instance, tuple], tuple]  # (env-aware) profile -> allocation


def _need(env_cls, env, name):
    if not isinstance(env, env_cls):
        raise PricingError(f"--pricing {name} does not apply to a {env.kind} environment")


def _mph_rank(instance: Instance) -> int:
    ranks = [v.rank for v in instance.profile if isinstance(v, MphValuation)]
    if instance.distribution is not None:
        for atoms in instance.distribution.supports:
            ranks.extend(v.rank for v, _ in atoms if isinstance(v, MphValuation))
    return max(ranks, default=1)


def _pip_sparsity(env: PipEnv) -> int:
    return max(env.column_sparsity(i) for i in range(env.n))


def _matroid_constructor(instance: Instance):
    env = instance.env
    _need(MatroidEnv, env, "matroid")

    def constructor(profile):
        if all(isinstance(v, AdditiveValuation) for v in profile):
            return matroid_dynamic_prices(env, profile)
        base = greedy(env, profile)
        return compose_max(
            matroid_dynamic_prices, env, profile, base, rule=GREEDY_RULE
        )

    return constructor


def _measured_gamma(instance: Instance, rule: AllocationRule, cap: int) -> float:
    env = instance.env
    from .oracle import agent_value

    grid = sorted({0.0} | {agent_value(env, instance.profile, i) for i in range(env.n)})
    return permeability(env, rule, grid, cap)


def _compose_market_rule(market, profile_parts):
    if isinstance(market, SingleItemEnv):
        return single_item_prices(market, profile_parts)
    if isinstance(market, MatroidEnv):
        return matroid_dynamic_prices(market, profile_parts)
    if isinstance(market, CombinatorialAuctionEnv):
        return xos_item_prices(market, profile_parts, opt(market, profile_parts))
    raise PricingError(f"compose-add has no default construction for {market.kind}")


def _compose_add_constructor(instance: Instance):
    env = instance.env
    _need(ProductEnv, env, "compose-add")

    def constructor(profile):
        rules = []
        for ell, market in enumerate(env.markets):
            parts = tuple(
                v.parts[ell] if isinstance(v, MarketValuation) else v for v in profile
            )
            rules.append(_compose_market_rule(market, parts))
        return compose_add(env, rules)

    return constructor


def _compose_max_constructor(instance: Instance):
    env = instance.env
    if isinstance(env, MatroidEnv):
        return _matroid_constructor(instance)
    if isinstance(env, CombinatorialAuctionEnv):
        def constructor(profile):
            alloc = opt(env, profile)
            return compose_max(
                lambda e, p: xos_item_prices(e, p, alloc), env, profile, alloc,
                rule=OPT_RULE,
            )

        return constructor
    raise PricingError(f"compose-max does not apply to a {env.kind} environment")


def _registry(cap: int) -> dict[str, Construction]:
    def ref_opt(inst, profile):
        return opt(inst.env, profile, cap)

    def ref_greedy(inst, profile):
        return greedy(inst.env, profile)

    def ref_dp(inst, profile):
        return knapsack_dp(inst.env, profile)

    return {
        "single-item": Construction(
            name="single-item",
            build=lambda inst: (
                _need(SingleItemEnv, inst.env, "single-item")
                or (lambda p: single_item_prices(inst.env, p))
            ),
            params=lambda inst: BalanceParams(alpha=1.0, beta=1.0),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "intro-bundle": Construction(
            name="intro-bundle",
            build=lambda inst: (
                _need(CombinatorialAuctionEnv, inst.env, "intro-bundle")
                or (lambda p: bundle_split_item_prices(inst.env, p, opt(inst.env, p, cap)))
            ),
            params=lambda inst: BalanceParams(
                alpha=float(inst.env.items), beta1=0.0, beta2=1.0
            ),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "xos": Construction(
            name="xos",
            build=lambda inst: (
                _need(CombinatorialAuctionEnv, inst.env, "xos")
                or (lambda p: xos_item_prices(inst.env, p, opt(inst.env, p, cap)))
            ),
            params=lambda inst: BalanceParams(alpha=1.0, beta=1.0),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "mph": Construction(
            name="mph",
            build=lambda inst: (
                _need(CombinatorialAuctionEnv, inst.env, "mph")
                or (lambda p: mphk_item_prices(inst.env, p, opt(inst.env, p, cap)))
            ),
            params=lambda inst: BalanceParams(
                alpha=1.0, beta1=1.0, beta2=float(_mph_rank(inst) - 1)
            ),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "fractional-ca": Construction(
            name="fractional-ca",
            build=lambda inst: (
                _need(CombinatorialAuctionEnv, inst.env, "fractional-ca")
                or (
                    lambda p: fractional_ca_item_prices(
                        inst.env, p, fractional_opt_config_lp(inst.env, p)
                    )
                )
            ),
            params=lambda inst: BalanceParams(
                alpha=1.0, beta1=1.0, beta2=float(inst.env.items - 1)
            ),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "knapsack": Construction(
            name="knapsack",
            build=lambda inst: (
                _need(KnapsackEnv, inst.env, "knapsack")
                or (
                    lambda p: knapsack_prices(
                        inst.env, p, welfare(p, knapsack_dp(inst.env, p))
                    )
                )
            ),
            params=lambda inst: BalanceParams(alpha=2.0, beta=1.0),
            family=lambda inst: default_family(inst.env),
            reference=ref_dp,
        ),
        "pip": Construction(
            name="pip",
            build=lambda inst: (
                _need(PipEnv, inst.env, "pip")
                or (lambda p: pip_prices(inst.env, p, opt(inst.env, p, cap)))
            ),
            params=lambda inst: BalanceParams(
                alpha=2.0, beta1=0.0, beta2=float(_pip_sparsity(inst.env))
            ),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "matroid": Construction(
            name="matroid",
            build=_matroid_constructor,
            params=lambda inst: BalanceParams(alpha=1.0, beta=1.0),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "warmup": Construction(
            name="warmup",
            build=lambda inst: (lambda p: monotone_critical_prices(inst.env, p, OPT_RULE, cap=cap)),
            params=lambda inst: BalanceParams(alpha=1.0, beta=3.0),
            family=lambda inst: ExchangeFamily("canonical_contraction", inst.env),
            reference=ref_opt,
        ),
        "alg1-greedy": Construction(
            name="alg1-greedy",
            build=lambda inst: (lambda p: greedy_derived_prices(inst.env, p, cap=cap)),
            params=lambda inst: (
                lambda g: BalanceParams(alpha=g, beta1=0.0, beta2=g)
            )(_measured_gamma(inst, GREEDY_RULE, cap)),
            family=lambda inst: ExchangeFamily("canonical_contraction", inst.env),
            reference=ref_greedy,
        ),
        "alg2-opt": Construction(
            name="alg2-opt",
            build=lambda inst: (lambda p: opt_derived_prices(inst.env, p, cap=cap)),
            params=lambda inst: (
                lambda g: BalanceParams(alpha=1.0, beta1=0.0, beta2=g * g)
            )(_measured_gamma(inst, OPT_RULE, cap)),
            family=lambda inst: ExchangeFamily("canonical_contraction", inst.env),
            reference=ref_opt,
        ),
        "compose-add": Construction(
            name="compose-add",
            build=_compose_add_constructor,
            params=lambda inst: BalanceParams(alpha=1.0, beta=1.0),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
        "compose-max": Construction(
            name="compose-max",
            build=_compose_max_constructor,
            params=lambda inst: BalanceParams(alpha=1.0, beta=1.0),
            family=lambda inst: default_family(inst.env),
            reference=ref_opt,
        ),
    }


def resolve_params(args, construction: Construction, instance: Instance) -> BalanceParams:
    """Flags override the construction's defaults; --beta selects the strong
    form, --beta1/--beta2 the weak form."""
    weak_flags = args.beta1 is not None or args.beta2 is not None
    if args.beta is not None and weak_flags:
        raise PricingError("give either --beta or --beta1/--beta2, not both")
    defaults = construction.params(instance)
    alpha = args.alpha if args.alpha is not None else defaults.alpha
    if args.beta is not None:
        return BalanceParams(alpha=alpha, beta=args.beta)
    if weak_flags:
        return BalanceParams(
            alpha=alpha, beta1=args.beta1 or 0.0, beta2=args.beta2 or 0.0
        )
    if defaults.weak:
        return BalanceParams(alpha=alpha, beta1=defaults.beta1, beta2=defaults.beta2)
    return BalanceParams(alpha=alpha, beta=defaults.beta)


# ---------------------------------------------------------------------------
# Flag parsing helpers
# ---------------------------------------------------------------------------


def parse_order(raw: Optional[str], n: int):
    """Returns ("fixed", perm) | ("all", None) | ("random", None) |
    ("adversary", None); permutations are written 1-based on the CLI."""
    if raw is None or raw == "fixed":
        return "fixed", tuple(range(n))
    if raw in ("all", "random", "adversary"):
        return raw, None
    body = raw[len("fixed:"):] if raw.startswith("fixed:") else raw
    try:
        perm = tuple(int(tok) - 1 for tok in body.split(","))
    except ValueError as exc:
        raise SchemaError(f"cannot parse order {raw!r}") from exc
    if sorted(perm) != list(range(n)):
        raise SchemaError(f"order {raw!r} is not a permutation of 1..{n}")
    return "fixed", perm


TIE_BY_FLAG = {
    "null": "prefer_null",
    "buy": "prefer_buy_lexmin",
    "adversarial": "adversarial_min_welfare",
}


def _run_config(args, extra: dict) -> dict:
    config = {
        "subcommand": args.command,
        "instance": getattr(args, "instance", None),
        "pricing": getattr(args, "pricing", None),
        "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None),
        "beta1": getattr(args, "beta1", None),
        "beta2": getattr(args, "beta2", None),
        "order": getattr(args, "order", None),
        "tie": getattr(args, "tie", None),
        "trials": getattr(args, "trials", None),
        "seed": getattr(args, "seed", None),
        "exact": getattr(args, "exact", None),
        "cap_feasible": getattr(args, "cap_feasible", None),
        "jobs": getattr(args, "jobs", None),
        "output": getattr(args, "output", None),
    }
    config.update(extra)
    return config


def _emit_report(args, payload: dict, extra_config: Optional[dict] = None) -> None:
    doc = {
        "schema": REPORT_SCHEMA,
        "config": _run_config(args, extra_config or {}),
        "result": payload,
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ": "), indent=1)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")
    else:
        print(text)


def _distribution(instance: Instance) -> ProductDistribution:
    if instance.distribution is not None:
        return instance.distribution
    return ProductDistribution.deterministic(instance.profile)


def _scaled_rule(instance: Instance, construction: Construction, params, cap):
    constructor = construction.build(instance)
    return expected_scaled_prices(
        instance.env, _distribution(instance), constructor, params, cap=cap
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_balance(args) -> int:
    cap = args.cap_feasible
    instance = load_instance_file(args.instance)
    construction = _registry(cap)[args.pricing]
    params = resolve_params(args, construction, instance)
    constructor = construction.build(instance)
    profile = instance.profile
    rule = constructor(profile)
    reference = construction.reference(instance, profile)
    family = construction.family(instance)
    order_kind, perm = parse_order(args.order, instance.env.n)
    if order_kind in ("random", "adversary"):
        raise SchemaError("balance supports --order all or a fixed permutation")
    if args.order is None:
        # default: quantify over every indexing at desk scale
        order_mode = "all" if instance.env.n <= 6 else "declared"
    else:
        order_mode = "all" if order_kind == "all" else "declared"
    check = check_weakly_balanced if params.weak else check_balanced
    report = check(
        instance.env, profile, rule, reference, family, params,
        order=perm, order_mode=order_mode, cap=cap,
    )
    verdict = "PASS" if report.passed else "FAIL"
    label = (
        f"({params.alpha:g},{params.beta1:g},{params.beta2:g})"
        if params.weak
        else f"({params.alpha:g},{params.beta:g})"
    )
    print(
        f"{verdict} {args.pricing} {label} "
        f"slack_a={report.condition_a_min_slack:.3g} "
        f"slack_b={report.condition_b_min_slack:.3g} "
        f"checked {report.checked_allocations} allocations"
    )
    for w in report.witnesses[:3]:
        print(f"  worst witness: condition {w[0]} x={w[1]} member={w[2]} lhs={w[3]:.6g} rhs={w[4]:.6g}")
    _emit_report(args, report.as_dict())
    return 0 if report.passed else 1


def cmd_simulate(args) -> int:
    cap = args.cap_feasible
    instance = load_instance_file(args.instance)
    construction = _registry(cap)[args.pricing]
    params = resolve_params(args, construction, instance)
    rule = _scaled_rule(instance, construction, params, cap)
    tie = TIE_BY_FLAG[args.tie]
    order_kind, perm = parse_order(args.order, instance.env.n)
    if order_kind == "fixed":
        trace = run_posted_price(instance.env, rule, instance.profile, perm, tie)
        print(
            f"welfare={trace.welfare:g} revenue={trace.revenue:g} "
            f"order={[i + 1 for i in trace.order]}"
        )
        _emit_report(args, {"trace": trace.as_dict()})
        return 0
    if order_kind == "all":
        w, order = worst_order_welfare(instance.env, rule, instance.profile, tie)
        print(f"worst-order welfare={w:g} order={[i + 1 for i in order]}")
        _emit_report(args, {"worst_order_welfare": w, "order": [i + 1 for i in order]})
        return 0
    if order_kind == "adversary":
        w = adaptive_adversary_welfare(instance.env, rule, _distribution(instance))
        print(f"adaptive-adversary expected welfare={w:g}")
        _emit_report(args, {"adaptive_adversary_welfare": w})
        return 0
    raise SchemaError("simulate supports fixed, all, or adversary orders")


def cmd_ratio(args) -> int:
    cap = args.cap_feasible
    instance = load_instance_file(args.instance)
    construction = _registry(cap)[args.pricing]
    params = resolve_params(args, construction, instance)
    rule = _scaled_rule(instance, construction, params, cap)
    dist = _distribution(instance)
    tie = TIE_BY_FLAG[args.tie]
    order_kind, perm = parse_order(args.order, instance.env.n)
    if args.exact or args.trials == 0:
        if order_kind == "adversary":
            mech = adaptive_adversary_welfare(instance.env, rule, dist)
            benchmark = expected_opt(instance.env, dist)
            est_dict = {
                "expected_mechanism_welfare": mech,
                "expected_opt": benchmark,
                "ratio": mech / benchmark,
                "mode": "exact",
                "trials": 0,
                "seed": args.seed,
                "ci95_halfwidth": 0.0,
            }
        elif order_kind == "all":
            from .stochastic import worst_order_expected_welfare

            mech = worst_order_expected_welfare(instance.env, rule, dist, tie)
            benchmark = expected_opt(instance.env, dist)
            est_dict = {
                "expected_mechanism_welfare": mech,
                "expected_opt": benchmark,
                "ratio": mech / benchmark,
                "mode": "exact",
                "trials": 0,
                "seed": args.seed,
                "ci95_halfwidth": 0.0,
            }
        else:
            est = exact_ratio(instance.env, rule, dist, order=perm, tie=tie)
            est_dict = est.as_dict()
    else:
        mode = {"fixed": "fixed", "random": "random"}.get(order_kind)
        if mode is None:
            raise SchemaError("sampled ratio supports fixed or random orders")
        est = monte_carlo_ratio(
            instance.env, rule, dist,
            order_mode=mode, trials=args.trials, seed=args.seed,
            tie=tie, fixed_order=perm,
        )
        est_dict = est.as_dict()
    print(
        f"ratio={est_dict['ratio']:.6g} welfare={est_dict['expected_mechanism_welfare']:.6g} "
        f"opt={est_dict['expected_opt']:.6g} mode={est_dict['mode']}"
    )
    _write_ratio_csv(args, est_dict)
    return 0


def _write_ratio_csv(args, est: dict) -> None:
    row = {
        "instance": args.instance,
        "pricing": args.pricing,
        "order_mode": args.order or "fixed",
        "trials": est.get("trials", 0),
        "seed": est.get("seed", 0),
        "welfare": est["expected_mechanism_welfare"],
        "opt": est["expected_opt"],
        "ratio": est["ratio"],
        "ci95_halfwidth": est.get("ci95_halfwidth", 0.0),
        "schema": RATIO_SCHEMA,
    }
    if args.output:
        exists = os.path.exists(args.output)
        with open(args.output, "a", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            if not exists:
                writer.writeheader()
            writer.writerow(row)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)


def cmd_permeability(args) -> int:
    cap = args.cap_feasible
    instance = load_instance_file(args.instance)
    rule = {"opt": OPT_RULE, "greedy": GREEDY_RULE}[args.rule]
    if args.grid:
        grid = [float(tok) for tok in args.grid.split(",")]
    else:
        from .oracle import agent_value

        grid = sorted(
            {0.0}
            | {agent_value(instance.env, instance.profile, i) for i in range(instance.env.n)}
        )
    gamma = permeability(instance.env, rule, grid, cap)
    shown = "UNBOUNDED" if math.isinf(gamma) else f"{gamma:.6g}"
    print(f"permeability({args.rule}) >= {shown} on grid {grid}")
    _emit_report(args, {"gamma": None if math.isinf(gamma) else gamma,
                        "unbounded": math.isinf(gamma), "grid": grid})
    return 0


def cmd_catalog(args) -> int:
    gen = GENERATORS[args.name]
    kwargs = {}
    for key in ("d", "n", "k", "m", "seed", "rank", "ground", "clauses", "markets"):
        val = getattr(args, key, None)
        if val is not None:
            kwargs[key] = val
    if args.q is not None:
        kwargs["q"] = args.q
    if args.step is not None:
        kwargs["step"] = args.step
    if args.kind is not None:
        kwargs["kind"] = args.kind
    try:
        instance = gen(**kwargs)
    except TypeError as exc:
        raise SchemaError(f"bad parameters for {args.name}: {exc}") from exc
    if args.output:
        dump_instance_file(instance, args.output)
        print(f"wrote {args.name} instance to {args.output}")
    else:
        print(instance.to_json())
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, help="instance JSON path")
    p.add_argument("--pricing", required=True, choices=sorted(_registry(1)))
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--order", default=None,
                   help="fixed:<perm> (1-based), a bare permutation, all, random, or adversary")
    p.add_argument("--tie", choices=sorted(TIE_BY_FLAG), default="adversarial")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--cap-feasible", dest="cap_feasible", type=int, default=_default_cap())
    p.add_argument("--jobs", type=int, default=1, help="worker bound (advisory)")
    p.add_argument("-o", "--output", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balprice",
        description="Balanced posted prices: construction, certification, simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (
        ("balance", cmd_balance),
        ("simulate", cmd_simulate),
        ("ratio", cmd_ratio),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("permeability")
    p.add_argument("--instance", required=True)
    p.add_argument("--rule", choices=("opt", "greedy"), default="opt")
    p.add_argument("--grid", default=None, help="comma-separated bid grid")
    p.add_argument("--cap-feasible", dest="cap_feasible", type=int, default=_default_cap())
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=cmd_permeability)

    p = sub.add_parser("catalog")
    p.add_argument("name", choices=sorted(GENERATORS))
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--ground", type=int, default=None)
    p.add_argument("--clauses", type=int, default=None)
    p.add_argument("--markets", type=int, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--kind", default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(fn=cmd_catalog)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be positive")
    try:
        return args.fn(args)
    except (SchemaError, PricingError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
