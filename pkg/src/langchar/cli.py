"""Command-line entry points."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAULT = 2


def build_parser():
    p = argparse.ArgumentParser(prog="langchar", description="language-directed character control")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=str, default=None, help="JSON config overrides")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate the synthetic captioned-clip corpus")
    g.add_argument("--out", required=True)

    e = sub.add_parser("train-embed", help="train the motion/text skill embedding")
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--steps", type=int, default=None)

    t = sub.add_parser("train-policy", help="train a latent-conditioned policy")
    t.add_argument("--task", required=True, choices=["facing", "location", "strike", "none"])
    t.add_argument("--data", required=True)
    t.add_argument("--embed", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--log", default=None, help="CSV training-log path")

    c = sub.add_parser("eval-coverage", help="coverage curve for a trained policy")
    c.add_argument("--data", required=True)
    c.add_argument("--embed", required=True)
    c.add_argument("--policy", required=True)
    c.add_argument("--out", required=True)

    i = sub.add_parser("eval-interp", help="slerp interpolation sweep")
    i.add_argument("--data", required=True)
    i.add_argument("--embed", required=True)
    i.add_argument("--policy", required=True)
    i.add_argument("--caption-a", required=True)
    i.add_argument("--caption-b", required=True)
    i.add_argument("--out", required=True)

    a = sub.add_parser("eval-ablation", help="joint-vs-marginal discriminator ablation")
    a.add_argument("--data", required=True)
    a.add_argument("--embed", required=True)
    a.add_argument("--epochs", type=int, default=60)
    a.add_argument("--out", required=True)

    s = sub.add_parser("serve", help="interactive WebSocket session")
    s.add_argument("--port", type=int, default=8765)
    s.add_argument("--embed", required=True)
    s.add_argument("--policy-facing", required=True)
    s.add_argument("--policy-location", required=True)
    s.add_argument("--policy-strike", required=True)
    s.add_argument("--record", default=None, help="JSON-lines session trace output")
    return p


def _load_overrides(path):
    if not path:
        return {}
    with open(path) as f:
        return json.load(f)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return _dispatch(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAULT


def _dispatch(args):
    from . import motion_data as md

    overrides = _load_overrides(args.config)

    if args.command == "gen-data":
        cfg = md.CorpusConfig(**overrides.get("corpus", {}))
        md.save_dataset(md.generate_synthetic_dataset(cfg, seed=args.seed), args.out)
        print(f"wrote {args.out}")
        return EXIT_OK

    if args.command == "train-embed":
        from .skill_embed import EmbedConfig, train_embedding

        dataset = md.load_dataset(args.data)
        kw = overrides.get("embedding", {})
        if args.steps is not None:
            kw["steps"] = args.steps
        cfg = EmbedConfig(seed=args.seed, **kw)
        emb, log = train_embedding(dataset, cfg)
        emb.save(args.out)
        print(f"wrote {args.out}; recon {log['recon'][0]:.4f} -> {log['recon'][-1]:.4f}")
        return EXIT_OK

    if args.command == "train-policy":
        from .skill_embed import SkillEmbedding
        from .ppo import PpoConfig, PpoTrainer, EmbeddingLatents

        dataset = md.load_dataset(args.data)
        emb = SkillEmbedding.load(args.embed)
        kw = overrides.get("ppo", {})
        if args.epochs is not None:
            kw["epochs"] = args.epochs
        cfg = PpoConfig(seed=args.seed, **kw)
        trainer = PpoTrainer(args.task, dataset, EmbeddingLatents(emb), cfg,
                             log_path=args.log)
        trainer.train(progress=lambda r: print(
            f"epoch {r['epoch']}: r_skill {r['r_skill']:.3f} r_task {r['r_task']:.3f}"))
        trainer.save(args.out)
        print(f"wrote {args.out}")
        return EXIT_OK

    if args.command == "eval-coverage":
        from .skill_embed import SkillEmbedding
        from .ppo import GaussianPolicy, EmbeddingLatents
        from . import coverage as cov

        dataset = md.load_dataset(args.data)
        emb = SkillEmbedding.load(args.embed)
        policy = GaussianPolicy.load(args.policy)
        cfg = cov.CoverageConfig(seed=args.seed, **overrides.get("coverage", {}))
        curve = cov.coverage_curve(policy, EmbeddingLatents(emb), dataset, cfg)
        cov.write_coverage_csv(curve, args.out)
        print(f"wrote {args.out}; coverage@1.0 = {cov.coverage_at(curve, 1.0):.3f}")
        return EXIT_OK

    if args.command == "eval-interp":
        from .skill_embed import SkillEmbedding
        from .ppo import GaussianPolicy, EmbeddingLatents
        from . import coverage as cov

        emb = SkillEmbedding.load(args.embed)
        policy = GaussianPolicy.load(args.policy)
        rows = cov.interpolation_sweep(policy, EmbeddingLatents(emb),
                                       args.caption_a, args.caption_b, seed=args.seed)
        cov.write_sweep_csv(rows, args.out)
        print(f"wrote {args.out}")
        return EXIT_OK

    if args.command == "eval-ablation":
        from .skill_embed import SkillEmbedding
        from .ppo import PpoConfig, PpoTrainer, EmbeddingLatents
        from . import coverage as cov

        dataset = md.load_dataset(args.data)
        emb = SkillEmbedding.load(args.embed)
        results = {}
        for marginal in (False, True):
            kw = dict(overrides.get("ppo", {}))
            kw["marginal_disc"] = marginal
            kw["epochs"] = args.epochs  # flag wins over config file
            cfg = PpoConfig(seed=args.seed, **kw)
            trainer = PpoTrainer("none", dataset, EmbeddingLatents(emb), cfg)
            policy = trainer.train()
            curve = cov.coverage_curve(policy, EmbeddingLatents(emb), dataset)
            mos, per_skill = cov.min_over_skills(curve, dataset, 1.0)
            results["marginal" if marginal else "joint"] = {
                "min_over_skills": mos, "per_skill": per_skill,
                "mean": cov.coverage_at(curve, 1.0),
            }
        with open(args.out, "w") as f:
            json.dump(results, f, indent=2)
        print(f"wrote {args.out}")
        return EXIT_OK

    if args.command == "serve":
        from .service import serve_blocking

        serve_blocking(args)
        return EXIT_OK

    raise ValueError(f"unknown subcommand {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
