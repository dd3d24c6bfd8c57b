"""Command-line entry point.

Subcommands: make-suite, attack, baseline, sweep, bruteforce, serve,
verify-remote. Exit codes: 0 success, 2 usage / bad manifest, 3 oracle
unreachable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bruteforce import brute_force_sample
from .core import UNIT_BOX, l2_distance
from .engine import AttackConfig
from .errors import (
    BudgetExhausted,
    ContractViolation,
    EncodingInvalid,
    OracleUnreachable,
    ProtocolError,
    SuiteConstructionFailed,
)
from .latent import (
    LatentAttackJob,
    LatentNormalizer,
    image_space_attack,
    latent_attack,
    run_manifest,
    write_json,
)
from .metrics import DEFAULT_GRID, default_embedder, make_pairs, run_sweep
from .oracles import QueryLedger
from .remote import OracleBinding, OracleServer, connect, verify_remote
from .synthetic import SyntheticSuite, make_suite

REMOTE_ENV = "LATENTBOUNDARY_REMOTE"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNREACHABLE = 3


def _fail(msg: str, code: int) -> int:
    print(json.dumps({"ok": False, "error": msg}), file=sys.stderr)
    return code


def _parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _load_suite(path: str) -> SyntheticSuite:
    try:
        return SyntheticSuite.load(path)
    except (OSError, KeyError, ValueError) as exc:
        raise ContractViolation(f"cannot load suite {path!r}: {exc}") from exc


def _pick_pair(suite: SyntheticSuite, src: int, trg: int):
    n = len(suite.sample_labels)
    if not (0 <= src < n and 0 <= trg < n):
        raise ContractViolation(f"sample indices must be in [0, {n})")
    y_src = int(suite.sample_labels[src])
    y_trg = int(suite.sample_labels[trg])
    if y_src == y_trg:
        raise ContractViolation("source and target samples share a class")
    return suite.sample_image(src), suite.sample_image(trg), y_trg


def cmd_make_suite(args) -> int:
    suite = make_suite(
        latent_dim=args.latent_dim,
        image_dim=args.image_dim,
        num_classes=args.classes,
        seed=args.seed,
        samples_per_class=args.samples_per_class,
        sample_radius=args.sample_radius,
    )
    suite.save(args.out)
    print(json.dumps({"ok": True, "out": args.out, "classes": suite.num_classes,
                      "latent_dim": suite.latent_dim, "image_dim": suite.image_dim}))
    return EXIT_OK


def _attack_cfg(args, checkpoints=()) -> AttackConfig:
    return AttackConfig(
        max_queries=args.budget,
        bounds=UNIT_BOX,
        seed=args.seed,
        theta_bin=args.theta,
        b0=args.b0,
        checkpoints=tuple(checkpoints),
    )


def _resolve_oracles(args, suite: SyntheticSuite):
    """In-process suite oracles, or remote views when an address is given."""
    address = getattr(args, "remote", None) or os.environ.get(REMOTE_ENV)
    if not address:
        return suite.classifier, suite.generator, suite.encoder, None
    oracles = connect(_parse_address(address))
    return oracles.classifier, oracles.generator, oracles.encoder, oracles


def cmd_attack(args) -> int:
    suite = _load_suite(args.suite)
    x_src, x_trg, y_trg = _pick_pair(suite, args.src, args.trg)
    classifier, generator, encoder, _ = _resolve_oracles(args, suite)
    cfg = _attack_cfg(args)
    embedder = default_embedder(suite.image_dim)
    job = LatentAttackJob(
        x_src=x_src, x_trg=x_trg, target_label=y_trg, cfg=cfg,
        classifier=classifier, generator=generator, encoder=encoder,
        embedder=embedder,
    )
    result = latent_attack(job)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = {
        "final_latent_dist": result.final_latent_dist,
        "final_image_dist": result.final_image_dist,
        "similarity_scores": result.similarity_scores,
        "attack_queries": result.attack_ledger.classify_count,
        "pre_attack_queries": result.pre_attack_ledger.classify_count,
        "terminal_reason": result.trace.terminal_reason,
    }
    write_json(out / "manifest.json",
               run_manifest(cfg, result.normalizer, f"suite:{suite.seed}", metrics, "latent"))
    write_json(out / "trace.json", result.trace.to_dict())
    print(json.dumps({"ok": True, "out_dir": str(out), **metrics}))
    return EXIT_OK


def cmd_baseline(args) -> int:
    suite = _load_suite(args.suite)
    x_src, x_trg, y_trg = _pick_pair(suite, args.src, args.trg)
    classifier, _, _, _ = _resolve_oracles(args, suite)
    cfg = _attack_cfg(args)
    x_adv, trace, ledger = image_space_attack(x_src, x_trg, y_trg, classifier, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = {
        "final_image_dist": l2_distance(x_adv, x_src),
        "attack_queries": ledger.classify_count,
        "terminal_reason": trace.terminal_reason,
    }
    write_json(out / "manifest.json",
               run_manifest(cfg, None, f"suite:{suite.seed}", metrics, "image"))
    write_json(out / "trace.json", trace.to_dict())
    print(json.dumps({"ok": True, "out_dir": str(out), **metrics}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    suite = _load_suite(args.suite)
    grid = [int(b) for b in args.grid.split(",")]
    pairs = make_pairs(suite, args.pairs, seed=args.pair_seed)
    report = run_sweep(
        suite, pairs, grid=grid, seeds=range(args.seeds), methods=args.methods.split(","),
    )
    report.write_csv(args.out)
    print(json.dumps({"ok": True, "out": args.out, "rows": len(report.rows)}))
    return EXIT_OK


def cmd_bruteforce(args) -> int:
    suite = _load_suite(args.suite)
    budgets = [int(b) for b in args.budgets.split(",")]
    table, bank = brute_force_sample(
        suite.generator, suite.classifier, budgets, sampler=args.sampler, seed=args.seed,
    )
    table.write_csv(args.out)
    if args.bank:
        bank.save(args.bank)
    print(json.dumps({"ok": True, "out": args.out,
                      "coverage": dict(zip(table.query_budgets, table.count_any))}))
    return EXIT_OK


def cmd_serve(args) -> int:
    suite = _load_suite(args.suite)
    server = OracleServer(OracleBinding.from_suite(suite), host=args.host, port=args.port)
    host, port = server.address
    print(json.dumps({"ok": True, "address": f"{host}:{port}"}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_verify_remote(args) -> int:
    address = args.address or os.environ.get(REMOTE_ENV)
    if not address:
        raise ContractViolation(f"no address given and {REMOTE_ENV} unset")
    oracles = connect(_parse_address(address), allow_nondeterministic=True)
    suite = _load_suite(args.suite) if args.suite else None
    result = verify_remote(oracles, local_suite=suite, probes=args.probes, seed=args.seed)
    ok = result["deterministic_probe_ok"] and result["equivalence_ok"] is not False
    print(json.dumps({"ok": ok, **result}))
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latentboundary",
                                description="Hard-label boundary attacks in input or latent space")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("make-suite", help="generate and serialize a synthetic oracle suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--classes", type=int, default=10)
    sp.add_argument("--latent-dim", type=int, default=32)
    sp.add_argument("--image-dim", type=int, default=256)
    sp.add_argument("--samples-per-class", type=int, default=20)
    sp.add_argument("--sample-radius", type=float, default=0.2)
    sp.add_argument("--out", default="suite.json")
    sp.set_defaults(fn=cmd_make_suite)

    def attack_flags(sp):
        sp.add_argument("--suite", required=True)
        sp.add_argument("--src", type=int, required=True, help="source sample index")
        sp.add_argument("--trg", type=int, required=True, help="target sample index")
        sp.add_argument("--budget", type=int, default=5000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--theta", type=float, default=1e-3)
        sp.add_argument("--b0", type=int, default=20)
        sp.add_argument("--remote", help=f"host:port (or set {REMOTE_ENV})")
        sp.add_argument("--out-dir", default="run")

    sp = sub.add_parser("attack", help="latent-space attack for one source/target pair")
    attack_flags(sp)
    sp.set_defaults(fn=cmd_attack)

    sp = sub.add_parser("baseline", help="image-space attack for one source/target pair")
    attack_flags(sp)
    sp.set_defaults(fn=cmd_baseline)

    sp = sub.add_parser("sweep", help="budget-grid sweep over pairs, seeds, and methods")
    sp.add_argument("--suite", required=True)
    sp.add_argument("--pairs", type=int, default=5)
    sp.add_argument("--pair-seed", type=int, default=0)
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--grid", default=",".join(str(b) for b in DEFAULT_GRID))
    sp.add_argument("--methods", default="latent,image")
    sp.add_argument("--out", default="sweep.csv")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("bruteforce", help="random-latent class coverage study")
    sp.add_argument("--suite", required=True)
    sp.add_argument("--budgets", default="100,1000,10000")
    sp.add_argument("--sampler", choices=["uniform_box", "gaussian"], default="uniform_box")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="coverage.csv")
    sp.add_argument("--bank", default="", help="optional target-bank JSON output")
    sp.set_defaults(fn=cmd_bruteforce)

    sp = sub.add_parser("serve", help="serve a suite's oracles over the wire protocol")
    sp.add_argument("--suite", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=0)
    sp.set_defaults(fn=cmd_serve)

    sp = sub.add_parser("verify-remote", help="handshake + determinism/equivalence probe")
    sp.add_argument("--address", help=f"host:port (or set {REMOTE_ENV})")
    sp.add_argument("--suite", help="optional local suite for the equivalence check")
    sp.add_argument("--probes", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_verify_remote)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ContractViolation, EncodingInvalid, SuiteConstructionFailed, ValueError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    except (OracleUnreachable,) as exc:
        return _fail(str(exc), EXIT_UNREACHABLE)
    except (ProtocolError, BudgetExhausted) as exc:
        return _fail(str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
