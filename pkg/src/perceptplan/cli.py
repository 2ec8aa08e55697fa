"""Command-line surface: train, exact, eval, probe, validate.

Exit codes: 0 success, 2 invalid configuration or input, 3 non-finite
gradient, 4 enumeration cap exceeded, 5 zero-probability evidence.
Numeric output is printed with six significant digits. Run directories
are self-describing: manifest.json records the resolved configuration and
input-file hashes, and rerunning train with --from-manifest reproduces
report.csv byte for byte.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .automata import load_dfa
from .errors import (ConfigError, EnumerationInfeasibleError, EvidenceImpossibleError,
                     InputError, NonFiniteGradientError)
from .gradient import TrainConfig, train, write_report_csv
from .model import build_product, load_pomdp, validate_pomdp
from .objective import (ObservationRecord, exact_conditional_entropy,
                        exact_success_prob, secret_posterior)
from .oomodel import build_operators, seq_prob, smooth
from .policy import load_policy, make_policy, save_policy
from .scenarios import (build_scenario_pomdp, build_task_dfa, evaluate_under_prior,
                        load_scenario)

g6 = "{:.6g}".format


def _default_workers() -> int:
    return int(os.environ.get("PERCEPTPLAN_WORKERS", "1"))


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _load_model_inputs(args):
    """Resolve (--scenario, --dfa) or (--pomdp, --dfa) into model plus DFA."""
    world = cfg = None
    if getattr(args, "scenario", None):
        world, cfg = load_scenario(args.scenario)
        m = build_scenario_pomdp(cfg, world)
        if args.dfa == "auto":
            dfa, added = build_task_dfa(cfg.variant), False
        else:
            dfa, added = load_dfa(args.dfa)
    elif getattr(args, "pomdp", None):
        if args.dfa == "auto":
            raise ConfigError("--dfa auto requires --scenario; give a DFA file")
        m = load_pomdp(args.pomdp)
        dfa, added = load_dfa(args.dfa)
    else:
        raise ConfigError("one of --scenario or --pomdp is required")
    return m, dfa, added, world, cfg


TRAIN_ARG_NAMES = ("scenario", "dfa", "horizon", "samples", "iters", "step", "alpha",
                   "seed", "memory", "log_base", "estimator", "workers", "timings")


def cmd_train(args) -> int:
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            manifest = json.load(fh)
        saved = manifest.get("args", {})
        for name in TRAIN_ARG_NAMES:
            if name in saved:
                setattr(args, name, saved[name])
    if not args.out:
        raise ConfigError("--out is required")
    if not args.scenario:
        raise ConfigError("--scenario is required")

    world, scen_cfg = load_scenario(args.scenario)
    m = build_scenario_pomdp(scen_cfg, world)
    if args.dfa == "auto":
        dfa = build_task_dfa(scen_cfg.variant)
    else:
        dfa, _ = load_dfa(args.dfa)
    oo = build_operators(build_product(m, dfa))
    pol = make_policy(args.memory, m.observations, m.actions)
    cfg = TrainConfig(horizon=args.horizon, batch_size=args.samples,
                      iterations=args.iters, step_size=args.step, alpha=args.alpha,
                      seed=args.seed, log_base=args.log_base,
                      estimator=args.estimator, workers=args.workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hashes = {args.scenario: _sha256(args.scenario)}
    if args.dfa != "auto":
        hashes[args.dfa] = _sha256(args.dfa)
    manifest = {
        "tool": "perceptplan", "version": __version__, "command": "train",
        "args": {name: getattr(args, name) for name in TRAIN_ARG_NAMES},
        "config_hashes": hashes, "master_seed": args.seed,
        "started": _utcnow(), "finished": None,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")

    final_pol, rows = train(cfg, pol, oo)

    with open(out / "report.csv", "w") as fh:
        write_report_csv(rows, fh, timings=args.timings)
    with open(out / "timings.csv", "w") as fh:
        fh.write("iter,wallclock_ms\n")
        for r in rows:
            fh.write(f"{r.iteration},{r.wallclock_ms:.3f}\n")
    save_policy(final_pol, str(out / "policy.json"))
    manifest["finished"] = _utcnow()
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")

    last = rows[-1]
    print(f"iterations: {len(rows)}")
    print(f"final entropy estimate: {g6(last.entropy)}")
    print(f"final success estimate: {g6(last.success)}")
    print(f"final objective: {g6(last.objective)}")
    print(f"outputs: {out / 'report.csv'}, {out / 'policy.json'}, "
          f"{out / 'manifest.json'}")
    return 0


def _policy_for(args, m):
    if args.policy:
        if not Path(args.policy).exists():
            raise ConfigError(f"policy checkpoint {args.policy} does not exist")
        pol = load_policy(args.policy)
        if pol.observations != m.observations or pol.actions != m.actions:
            raise ConfigError("policy checkpoint alphabets do not match the model")
        return pol
    return make_policy(args.memory, m.observations, m.actions)


def cmd_exact(args) -> int:
    m, dfa, _, _, _ = _load_model_inputs(args)
    oo = build_operators(build_product(m, dfa))
    pol = _policy_for(args, m)
    h = exact_conditional_entropy(pol, oo, args.horizon, args.log_base, args.cap)
    p = exact_success_prob(pol, oo, args.horizon, args.cap)
    print(f"exact conditional entropy: {g6(h)}")
    print(f"exact success probability: {g6(p)}")
    print(f"exact objective (alpha={g6(args.alpha)}): {g6(h - args.alpha * p)}")
    return 0


def cmd_eval(args) -> int:
    if not args.scenario:
        raise ConfigError("--scenario is required for eval")
    world, scen_cfg = load_scenario(args.scenario)
    if args.policy is None or not Path(args.policy).exists():
        raise ConfigError(f"policy checkpoint {args.policy} does not exist")
    m = build_scenario_pomdp(scen_cfg, world)
    pol = _policy_for(args, m)
    dfa = None
    if args.dfa != "auto":
        dfa, _ = load_dfa(args.dfa)
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    report = evaluate_under_prior(pol, world, scen_cfg, args.horizon,
                                  prior=args.prior, M=args.samples, seed=args.seed,
                                  alpha=args.alpha, log_base=args.log_base,
                                  workers=args.workers, dfa=dfa)
    print(f"prior: {args.prior}")
    print(f"entropy estimate: {g6(report.entropy)} +/- {g6(report.entropy_se)}")
    print(f"success estimate: {g6(report.success_prob)} +/- {g6(report.success_se)}")
    print(f"objective: {g6(report.objective)}")
    return 0


def cmd_probe(args) -> int:
    m, dfa, _, _, _ = _load_model_inputs(args)
    prod = build_product(m, dfa)
    oo = build_operators(prod)
    try:
        y_raw = json.loads(args.y)
        obs_names, act_names = y_raw["obs"], y_raw["acts"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"--y must be JSON with 'obs' and 'acts' lists ({exc})") from None
    try:
        obs = tuple(m.observations.index(o) for o in obs_names)
        acts = tuple(m.actions.index(a) for a in act_names)
    except ValueError as exc:
        raise InputError(f"unknown symbol in --y: {exc}") from None
    y = ObservationRecord(obs, acts)
    p = seq_prob(oo, obs, acts)
    print(f"P(obs | acts): {g6(p)}")
    print(f"secret posterior P(Z_T=1 | y): {g6(secret_posterior(oo, y))}")
    post = smooth(oo, obs, acts, args.t)
    shown = ", ".join(f"{prod.vname(v)}: {g6(pv)}"
                      for v, pv in enumerate(post) if pv > args.min_prob)
    print(f"smoothing at t={args.t}: {{{shown}}}")
    return 0


def cmd_validate(args) -> int:
    problems = []
    m, dfa, added, world, _ = _load_model_inputs(args)
    problems.extend(validate_pomdp(m))
    if added:
        print("note: DFA was incomplete; a sink state was added")
    if not dfa.is_complete():
        problems.append("DFA transition function is not total")
    labels = set(m.label)
    missing = labels - set(dfa.alphabet)
    if missing:
        problems.append(f"state labels {sorted(missing)} missing from the DFA alphabet")
    else:
        build_product(m, dfa)
    if problems:
        for line in problems:
            print(f"violation: {line}")
        return 2
    print(f"ok: {len(m.states)} states, {len(m.actions)} actions, "
          f"{len(m.observations)} observations; DFA {len(dfa.states)} states")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perceptplan",
        description="Joint control and active-perception policy synthesis")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_args(p, scenario_only=False):
        p.add_argument("--scenario", help="scenario JSON file")
        if not scenario_only:
            p.add_argument("--pomdp", help="labeled POMDP JSON file")
        p.add_argument("--dfa", default="auto",
                       help="task DFA JSON file, or 'auto' for the scenario's built-in one")

    def add_common(p):
        p.add_argument("--horizon", type=int, default=5)
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--log-base", choices=("e", "2"), default="e")
        p.add_argument("--memory", type=int, default=2,
                       help="policy memory length K (ignored with --policy)")
        p.add_argument("--workers", type=int, default=_default_workers())

    p = sub.add_parser("train", help="run gradient descent and write a run directory")
    add_model_args(p, scenario_only=True)
    add_common(p)
    p.add_argument("--samples", type=int, default=1000, help="batch size per iteration")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimator", choices=("sampled", "exact"), default="sampled")
    p.add_argument("--out", help="output directory for report.csv/policy.json/manifest.json")
    p.add_argument("--timings", action="store_true",
                   help="write measured wallclock into report.csv "
                        "(breaks byte-level reproducibility)")
    p.add_argument("--from-manifest", help="reuse the arguments of a previous run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("exact", help="exact objective for a policy on a small model")
    add_model_args(p)
    add_common(p)
    p.add_argument("--policy", help="policy checkpoint JSON (default: uniform)")
    p.add_argument("--cap", type=int, default=10 ** 7, help="enumeration cap")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("eval", help="Monte-Carlo evaluation under a prior override")
    add_model_args(p, scenario_only=True)
    add_common(p)
    p.add_argument("--policy", required=True, help="policy checkpoint JSON")
    p.add_argument("--prior", default="mixed",
                   help="prior preset: mixed, nominal, or adversarial")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="likelihood, posterior, and smoothing for one record")
    add_model_args(p)
    p.add_argument("--y", required=True,
                   help='record JSON, e.g. {"obs": ["blip"], "acts": ["look"]}')
    p.add_argument("--t", type=int, default=0, help="smoothing time index")
    p.add_argument("--min-prob", type=float, default=1e-9,
                   help="suppress smoothing entries at or below this mass")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("validate", help="check model and DFA invariants")
    add_model_args(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteGradientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EnumerationInfeasibleError as exc:
        print(f"error: {exc} (needs {exc.required}, cap {exc.cap})", file=sys.stderr)
        return 4
    except EvidenceImpossibleError as exc:
        print(f"error: evidence has probability zero ({exc})", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
