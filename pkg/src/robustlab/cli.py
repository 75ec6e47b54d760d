"""Command-line entry point: ``robustlab <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
Numeric libraries are imported lazily so ``--threads`` can pin the BLAS
thread count before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__

EPILOG = """\
outputs by command:
  train / extend / iat   per-epoch adversarial + clean loss curves (CSV, SVG) and a checkpoint;
                         extend reproduces warm-started training at a larger budget,
                         iat grows the budget every epoch and stops on a loss jump
  landscape              adversarial loss along the segment between two checkpoints
                         (--mode connectivity scores it at the first model's budget)
  surface                input-space loss surface along adversarial and random directions
  saliency               input-gradient map of one test digit, clean or attacked
  evaluate               sanity-check battery (JSON) for a robust model vs a baseline
  theory gaussian        optimal clean / l2-robust errors for two Gaussians, with Monte Carlo
  theory bernoulli       optimal l0 / l-inf robust error frontier for Bernoulli centres
  reduce / d3is          graph -> robust classification instance, distance-3 independent set

config files are YAML with sections: data, model, train, attack, probe, theory,
output_dir, seed. Unknown keys are rejected. Command-line flags override the file.
$ROBUSTLAB_DATA points at a directory holding full MNIST IDX files.
"""

DEFAULTS = {
    "data": {"n_train": 2000, "n_test": 1000, "seed": 0, "data_dir": None},
    "model": {"sizes": [256, 128], "init": "glorot_uniform"},
    "train": {"epochs": 10, "batch_size": 128, "optimizer": "adam", "lr": 1e-3, "weight_decay": 0.0,
              "momentum": 0.0, "attack": "train-pgd", "epsilon": 0.0, "p": "inf", "clamp01": True},
    "attack": {"preset": "eval-200", "n_examples": 200},
    "probe": {"points": 200, "batch": 512, "grid": 100, "preset": "profile-pgd"},
    "theory": {},
    "output_dir": "runs",
    "seed": 0,
}


class ConfigError(Exception):
    pass


def load_config(path) -> dict:
    import copy

    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    import yaml

    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    for key, val in doc.items():
        if key not in cfg:
            raise ConfigError(f"unknown config section {key!r}")
        if isinstance(cfg[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for sub in val:
                if key != "theory" and sub not in cfg[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


def parse_p(text) -> float:
    import math

    s = str(text).lower()
    if s in ("inf", "infinity", "linf"):
        return math.inf
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"bad norm order {text!r}")


def parse_grid(text: str) -> list[float]:
    """``a..b`` (unit steps), ``a..b:step`` or a comma list."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (float(v) for v in span.split(".."))
            step = float(step) if step else 1.0
            n = int(round((hi - lo) / step))
            return [round(lo + i * step, 12) for i in range(n + 1)]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}")


def _meta(args, cfg, **extra) -> dict:
    return {"version": __version__, "command": args.command, "seed": cfg["seed"], **extra}


def _outdir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_ckpt(path):
    from .tensornet import load_checkpoint

    if path is None or not Path(path).exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _train_cfg(cfg, **over):
    from .training import TrainConfig

    t = dict(cfg["train"])
    t["p"] = parse_p(t["p"])
    t.update(over)
    try:
        return TrainConfig(seed=cfg["seed"], **t)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def _data(cfg):
    from .data import desk_mnist

    d = cfg["data"]
    return desk_mnist(d["n_train"], d["n_test"], d["seed"], d["data_dir"])


def _write_report(report, out: Path, stem: str, meta: dict):
    from . import svg

    report.to_csv(out / f"{stem}.csv", meta)
    ep = [r.epoch for r in report.records]
    svg.line_plot(out / f"{stem}.svg", {"adversarial": (ep, report.adv_losses), "clean": (ep, report.clean_losses)},
                  "epoch", "training loss", stem)


def cmd_train(args, cfg):
    from .tensornet import Architecture, init_params, save_checkpoint
    from .training import train_adversarial

    tcfg = _train_cfg(cfg)
    train, _ = _data(cfg)
    arch = Architecture((train.dim, *cfg["model"]["sizes"], 10))
    p0 = init_params(arch, cfg["model"]["init"], cfg["seed"])
    params, report = train_adversarial(p0, train, tcfg)
    out = _outdir(cfg)
    stem = f"train_eps{tcfg.epsilon:g}_seed{cfg['seed']}"
    save_checkpoint(out / f"{stem}.npz", params, epsilon=tcfg.epsilon, seed=cfg["seed"], attack=tcfg.attack)
    _write_report(report, out, stem, _meta(args, cfg, epsilon=tcfg.epsilon, preset=tcfg.attack))
    print(out / f"{stem}.csv")


def cmd_extend(args, cfg):
    from .tensornet import save_checkpoint
    from .training import train_extended

    p0, meta = _load_ckpt(args.from_)
    eps0 = float(meta.get("epsilon", 0.0))
    tcfg = _train_cfg(cfg, epochs=args.epochs or 5)
    if tcfg.epsilon < eps0:
        raise ConfigError(f"--eps {tcfg.epsilon} is below the checkpoint's {eps0}")
    train, _ = _data(cfg)
    params, report = train_extended(p0, train, tcfg, eps0)
    out = _outdir(cfg)
    stem = f"extend_eps{eps0:g}_to{tcfg.epsilon:g}_seed{cfg['seed']}"
    save_checkpoint(out / f"{stem}.npz", params, epsilon=tcfg.epsilon, seed=cfg["seed"], from_epsilon=eps0)
    _write_report(report, out, stem, _meta(args, cfg, from_epsilon=eps0, epsilon=tcfg.epsilon, preset=tcfg.attack))
    print(out / f"{stem}.csv")


def cmd_iat(args, cfg):
    from .tensornet import Architecture, init_params, save_checkpoint
    from .training import EpsSchedule, train_iat

    tcfg = _train_cfg(cfg)
    ratio = None if args.stop_ratio is not None and args.stop_ratio <= 0 else (args.stop_ratio or 1.5)
    try:
        sched = EpsSchedule("linear_step", delta=args.step, eps_max=args.eps_max, stop_ratio=ratio)
    except ValueError as exc:
        raise ConfigError(str(exc))
    train, _ = _data(cfg)
    arch = Architecture((train.dim, *cfg["model"]["sizes"], 10))
    p0 = init_params(arch, cfg["model"]["init"], cfg["seed"])
    params, report, stop = train_iat(p0, train, tcfg, sched, args.epochs)
    out = _outdir(cfg)
    stem = f"iat_step{args.step:g}_seed{cfg['seed']}"
    reached = report.eps[stop - 2] if stop else report.eps[-1]
    save_checkpoint(out / f"{stem}.npz", params, epsilon=reached, seed=cfg["seed"], stop_epoch=stop)
    _write_report(report, out, stem, _meta(args, cfg, step=args.step, stop_ratio=ratio, stop_epoch=stop,
                                           preset=tcfg.attack))
    print(json.dumps({"stop_epoch": stop, "eps_reached": reached}))


def _pset(eps, cfg):
    from .attacks import PerturbationSet

    return PerturbationSet(parse_p(cfg["train"]["p"]), eps, cfg["train"]["clamp01"])


def cmd_evaluate(args, cfg):
    from .checklist import ChecklistConfig, evaluate_checklist

    model, _ = _load_ckpt(args.model)
    baseline, _ = _load_ckpt(args.baseline)
    surrogate = _load_ckpt(args.surrogate)[0] if args.surrogate else None
    _, test = _data(cfg)
    n = args.n or cfg["attack"]["n_examples"]
    ds = test.take(list(range(min(n, len(test)))))
    ccfg = ChecklistConfig(seed=cfg["seed"], brute_samples=args.brute_samples)
    report = evaluate_checklist(model, baseline, ds, _pset(args.eps, cfg), ccfg, surrogate)
    out = _outdir(cfg) / f"checklist_eps{args.eps:g}.json"
    text = report.to_json(_meta(args, cfg, epsilon=args.eps, preset="train-pgd"))
    out.write_text(text + "\n")
    print(text)


def cmd_landscape(args, cfg):
    from . import attacks, svg
    from .probes import interpolate_loss

    th0, m0 = _load_ckpt(args.from_)
    th1, m1 = _load_ckpt(args.to)
    train, _ = _data(cfg)
    nb = args.batch or cfg["probe"]["batch"]
    b = train.take(list(range(min(nb, len(train)))))
    eps_train = float(m0.get("epsilon", 0.0))
    eps = eps_train if args.mode == "connectivity" else (args.eps if args.eps is not None else float(m1.get("epsilon", 0.0)))
    preset = args.attack or cfg["probe"]["preset"]
    prof = interpolate_loss(th0, th1, _pset(eps, cfg), attacks.preset(preset, eps) if eps > 0 else None,
                            (b.inputs, b.labels), args.points or cfg["probe"]["points"], seed=cfg["seed"])
    out = _outdir(cfg)
    stem = f"landscape_{args.mode}_train{eps_train:g}_eval{eps:g}_{preset}"
    prof.to_csv(out / f"{stem}.csv", _meta(args, cfg, preset=preset, eps_train=eps_train))
    svg.line_plot(out / f"{stem}.svg", {"adversarial loss": (prof.alphas, prof.losses)}, "alpha", "loss", stem)
    print(out / f"{stem}.csv")


def cmd_surface(args, cfg):
    from . import svg
    from .probes import input_surface

    p, meta = _load_ckpt(args.model)
    _, test = _data(cfg)
    x, y = test.inputs[args.index], int(test.labels[args.index])
    eps = args.eps if args.eps is not None else float(meta.get("epsilon", 0.3))
    surf = input_surface(p, x, y, _pset(eps, cfg), args.grid or cfg["probe"]["grid"], seed=cfg["seed"])
    out = _outdir(cfg)
    stem = f"surface_eps{eps:g}_idx{args.index}"
    surf.to_csv(out / f"{stem}.csv", _meta(args, cfg, epsilon=eps, index=args.index))
    svg.heatmap(out / f"{stem}.svg", surf.losses, stem)
    print(out / f"{stem}.csv")


def cmd_saliency(args, cfg):
    from . import svg
    from .probes import saliency, saliency_to_csv

    p, _ = _load_ckpt(args.model)
    _, test = _data(cfg)
    x, y = test.inputs[args.index], int(test.labels[args.index])
    pset = _pset(args.eps, cfg) if args.eps else None
    sal = saliency(p, x, y, pset, seed=cfg["seed"])
    shape = (28, 28) if sal.size == 784 else None
    out = _outdir(cfg)
    stem = f"saliency_eps{args.eps:g}_idx{args.index}"
    saliency_to_csv(sal, out / f"{stem}.csv", shape, _meta(args, cfg, epsilon=args.eps, index=args.index,
                                                            preset="train-pgd" if pset else "none"))
    svg.heatmap(out / f"{stem}.svg", sal.reshape(shape or (1, -1)), stem)
    print(out / f"{stem}.csv")


def cmd_theory(args, cfg):
    if args.model_kind == "gaussian":
        from .theory.gaussian import GaussianModel, error_table

        model = GaussianModel.symmetric(args.d, args.dist, args.sigma)
        rows = error_table(model, parse_grid(args.eps), args.mc, cfg["seed"])
        payload = {"meta": _meta(args, cfg, dist=args.dist, sigma=args.sigma, d=args.d, mc=args.mc),
                   "rows": rows}
        if len(rows) == 1:
            payload.update(payload["rows"][0])
        _emit_json(payload, args.out)
        return
    import math

    from .theory import bernoulli

    p = parse_p(args.p)
    rows = []
    for eps in parse_grid(args.eps):
        if p == 0:
            s, err = bernoulli.l0_optimal_error(args.k, args.t, eps, verify=False)
            rows.append({"eps": eps, "s_star": s, "error": err})
        elif p == math.inf:
            err = bernoulli.bayes_error(args.k, args.t) if eps < 1 else 0.5
            rows.append({"eps": eps, "s_star": "", "error": err})
        else:
            raise ConfigError("bernoulli frontier is defined for p = 0 or inf")
    meta = _meta(args, cfg, k=args.k, t=args.t, p=args.p, bayes=bernoulli.bayes_error(args.k, args.t))
    lines = [f"# {k}: {v}" for k, v in meta.items()] + ["eps,s_star,error"]
    lines += [f"{r['eps']:g},{r['s_star']},{r['error']!r}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)


def _graph(path):
    from .hardness import read_graph

    if not Path(path).exists():
        raise ConfigError(f"graph file not found: {path}")
    try:
        return read_graph(path)
    except ValueError as exc:
        raise ConfigError(str(exc))


def cmd_reduce(args, cfg):
    from .hardness import build_reduction, optimal_robust_value

    g = _graph(args.graph)
    p = parse_p(args.p)
    try:
        inst = build_reduction(g, p, None if p == 0 and args.eps is None else args.eps)
    except ValueError as exc:
        raise ConfigError(str(exc))
    payload = {"meta": _meta(args, cfg), **inst.as_dict()}
    if args.solve:
        count, labeling = optimal_robust_value(inst)
        payload["optimal_safe_count"] = count
        payload["optimal_labeling"] = labeling
    _emit_json(payload, args.out)


def cmd_d3is(args, cfg):
    from .hardness import distance3_mis

    g = _graph(args.graph)
    size, witness = distance3_mis(g)
    _emit_json({"meta": _meta(args, cfg), "n": g.n, "size": size, "witness": witness}, args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustlab", description="Desk-scale robust learning laboratory.",
                                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="YAML run config")
    ap.add_argument("--threads", type=int, default=None, help="BLAS threads (1 gives bitwise determinism)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out-dir", dest="output_dir", default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    def training_flags(sp, eps_required=False):
        sp.add_argument("--eps", type=float, required=eps_required, default=None, help="l-inf budget")
        sp.add_argument("--epochs", type=int, default=None)
        sp.add_argument("--batch-size", type=int, default=None)
        sp.add_argument("--lr", type=float, default=None)
        sp.add_argument("--n-train", type=int, default=None)

    sp = sub.add_parser("train", help="adversarial (or, at --eps 0, standard) training from random init")
    training_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("extend", help="warm-started adversarial training from a checkpoint at a larger budget")
    sp.add_argument("--from", dest="from_", required=True, help="checkpoint (.npz)")
    training_flags(sp, eps_required=True)
    sp.set_defaults(func=cmd_extend)

    sp = sub.add_parser("iat", help="budget grown every epoch, halting on a loss jump")
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--eps-max", type=float, default=0.4)
    sp.add_argument("--stop-ratio", type=float, default=1.5, help="<= 0 disables the stop rule")
    training_flags(sp)
    sp.set_defaults(func=cmd_iat)

    sp = sub.add_parser("evaluate", help="sanity-check battery, JSON report")
    sp.add_argument("--model", required=True)
    sp.add_argument("--baseline", required=True, help="standard-trained checkpoint")
    sp.add_argument("--surrogate", default=None, help="checkpoint for the semi-black-box transfer")
    sp.add_argument("--eps", type=float, default=0.3)
    sp.add_argument("--n", type=int, default=None, help="test examples")
    sp.add_argument("--brute-samples", type=int, default=1000)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("landscape", help="adversarial loss along the segment between two checkpoints")
    sp.add_argument("--from", dest="from_", required=True)
    sp.add_argument("--to", required=True)
    sp.add_argument("--mode", choices=("interpolate", "connectivity"), default="interpolate")
    sp.add_argument("--eps", type=float, default=None, help="evaluation budget (default: the --to model's)")
    sp.add_argument("--points", type=int, default=None)
    sp.add_argument("--batch", type=int, default=None)
    sp.add_argument("--attack", default=None, help="attack preset name")
    sp.set_defaults(func=cmd_landscape)

    sp = sub.add_parser("surface", help="input-space loss surface of one test digit")
    sp.add_argument("--model", required=True)
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--grid", type=int, default=None)
    sp.set_defaults(func=cmd_surface)

    sp = sub.add_parser("saliency", help="input-gradient map of one test digit")
    sp.add_argument("--model", required=True)
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--eps", type=float, default=0.0, help="attack first at this budget (0: clean point)")
    sp.set_defaults(func=cmd_saliency)

    sp = sub.add_parser("theory", help="closed-form optimal robust errors")
    tsub = sp.add_subparsers(dest="model_kind", required=True)
    g = tsub.add_parser("gaussian")
    g.add_argument("--dist", type=float, required=True, help="distance between the class means")
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--eps", default="0", help="budget, list a,b,c or range a..b[:step]")
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--mc", type=int, default=0, help="Monte Carlo samples (0: formulas only)")
    g.add_argument("--out", default=None)
    b = tsub.add_parser("bernoulli")
    b.add_argument("--k", type=int, required=True, help="effective dimensions")
    b.add_argument("--t", type=float, required=True)
    b.add_argument("--p", default="0", help="0 or inf")
    b.add_argument("--eps", default="0..8")
    b.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("reduce", help="graph -> robust classification instance (JSON)")
    sp.add_argument("--graph", required=True, help="edge list, 0-indexed; optional 'nodes N' line")
    sp.add_argument("--p", default="inf")
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--solve", action="store_true", help="also search the optimal labeling")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("d3is", help="maximum distance-3 independent set of a graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_d3is)
    return ap


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    t = cfg["train"]
    for flag, key in (("eps", "epsilon"), ("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr")):
        val = getattr(args, flag, None)
        if val is not None and args.command in ("train", "extend", "iat"):
            t[key] = val
    if getattr(args, "n_train", None) is not None:
        cfg["data"]["n_train"] = args.n_train


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads is not None:
        if "numpy" in sys.modules:
            print("warning: numpy already loaded, --threads may not take effect", file=sys.stderr)
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
