"""Command-line experiment runner.

Subcommands write deterministic CSV files (plus a JSON run manifest) into the
output directory; rerunning with the same config and seed reproduces every
byte. Exit codes: 0 success, 1 configuration or input error, 2 numerical
failure (divergence, unreachable tolerance, covering failure, audit
violation).

    basinlab train-toy --config cfg.json --out runs/a
    basinlab estimate-llc --config cfg.json --out runs/a
    basinlab quantize-sweep --config cfg.json --out runs/a --epsilon 0.5
    basinlab analyze --config cfg.json --out runs/a
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .analysis import analyze as analyze_fit
from .bernoulli import SingularBernoulli
from .compress import (
    SweepRecord,
    critical_compression_fraction,
    critical_nq,
    critical_sigma,
    noise_delta_loss,
    prune_and_retrain,
    quantization_delta_loss,
)
from .errors import ConfigError
from .landscapes import Bounds, NormalCrossingSpec, make_normal_crossing, make_quadratic
from .llc import LlcConfig, Preconditioner, estimate_llc
from .mdl import build_eps_net, two_part_redundancy, validate_kl_l2, validate_triangle, validate_variance_bound, validate_volume_inclusions
from .mlp import MlpSpec, make_teacher_task
from .rng import rng_stream
from .simplex import SimplexDist, kl_bernoulli, sample_restricted
from .training import load_checkpoint, train_sgd
from .volume import default_ladder, fit_scaling, volume_curve

LN2 = float(np.log(2.0))

DEFAULT_CONFIG = {
    "seed": 0,
    "out": "runs/default",
    "model": {"layer_sizes": [4, 16, 16, 4], "loss": "mse"},
    "data": {"n_samples": 1024, "seed": 13, "teacher_gain": 3.0, "input_scale": 1.0},
    "training": {
        "steps": 51200, "learning_rate": 0.03, "batch_size": 32, "seed": 1,
        "checkpoint_schedule": [400, 800, 1600, 3200, 6400, 12800, 25600, 51200],
    },
    "llc": {
        "nbeta": 30.0, "gamma": 300.0, "step_size": 2e-4, "chains": 8,
        "steps_per_chain": 1500, "burn_in": 300, "batch_size": 64,
        "baseline_batches": 16, "seed": 7, "preconditioner": "none",
        "write_traces": False,
    },
    "epsilons": [0.25, 0.5, 1.0],
    "quantize": {"mode": "loss_min", "nq_cap": 65536},
    "factorize": {},
    "noise": {"mode": "relative", "noise_draws": 8, "seed": 2},
    "prune": {
        "keep_fractions": [0.9375, 0.875, 0.75, 0.5, 0.25], "learning_rate": 0.003,
        "retrain_steps": 1000, "batch_size": 32, "seed": 3,
    },
    "volume": {
        "landscape": "quadratic", "dim": 2, "exponents": None, "active_dims": None,
        "half_width": 1.0, "ladder_min_k": 2, "ladder_max_k": 10,
        "samples": 1_000_000, "seed": 0, "multiplicity_mode": "select_by_fit",
        "max_epsilon": 0.25,
    },
    "mdl": {
        "n_powers": [6, 7, 8, 9, 10, 11, 12, 13, 14], "a": 0.1, "n_seeds": 50,
        "mc_samples": 1_000_000, "net_seed": 0, "m_simplex": 0.2,
    },
    "audit": {"instances": 10_000, "m_simplex": 0.2, "outcomes": 3,
              "inclusion_configs": 20, "seed": 0},
    "analyze": {"scheme": "quantize", "epsilon": 0.5, "excluded_steps": [], "gnuplot": False},
}


def load_config(path: str | None, seed: int | None, out: str | None, epsilons: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON: {e}")
        for key, value in user.items():
            if key not in cfg:
                raise ConfigError(key, "unknown key")
            if isinstance(cfg[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(key, "expected an object")
                for sub, sval in value.items():
                    if sub not in cfg[key]:
                        raise ConfigError(f"{key}.{sub}", "unknown key")
                    cfg[key][sub] = sval
            else:
                cfg[key] = value
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["out"] = out
    if epsilons is not None:
        try:
            cfg["epsilons"] = [float(tok) for tok in epsilons.split(",") if tok]
        except ValueError:
            raise ConfigError("epsilons", f"cannot parse {epsilons!r}")
    if not cfg["epsilons"] or any(e <= 0 for e in cfg["epsilons"]):
        raise ConfigError("epsilons", "must be a nonempty list of positive numbers")
    return cfg


def build_task(cfg: dict):
    model = cfg["model"]
    data = cfg["data"]
    spec = MlpSpec(layer_sizes=tuple(model["layer_sizes"]), loss=model["loss"])
    return make_teacher_task(
        spec,
        n_samples=int(data["n_samples"]),
        seed=int(data["seed"]),
        teacher_gain=float(data["teacher_gain"]),
        input_scale=float(data["input_scale"]),
    )


def build_llc_config(cfg: dict) -> LlcConfig:
    c = cfg["llc"]
    pc = c["preconditioner"]
    precond = Preconditioner(kind=pc) if isinstance(pc, str) else Preconditioner(**pc)
    return LlcConfig(
        nbeta=float(c["nbeta"]), gamma=float(c["gamma"]), step_size=float(c["step_size"]),
        chains=int(c["chains"]), steps_per_chain=int(c["steps_per_chain"]),
        burn_in=None if c["burn_in"] is None else int(c["burn_in"]),
        batch_size=int(c["batch_size"]), baseline_batches=int(c["baseline_batches"]),
        preconditioner=precond,
    )


def build_landscape(cfg: dict):
    v = cfg["volume"]
    name = v["landscape"]
    d = int(v["dim"])
    bounds = Bounds.symmetric(d, float(v["half_width"]))
    if name == "quadratic":
        return make_quadratic(d, bounds)
    if name == "normal_crossing":
        if not v["exponents"]:
            raise ConfigError("volume.exponents", "required for normal_crossing")
        spec = NormalCrossingSpec(
            dim=d, exponents=tuple(v["exponents"]),
            active_dims=None if v["active_dims"] is None else tuple(v["active_dims"]),
        )
        return make_normal_crossing(spec, bounds)
    if name == "bernoulli_kl":
        return SingularBernoulli().kl_landscape()
    raise ConfigError("volume.landscape", f"unknown landscape {name!r}")


def checkpoints_dir(cfg: dict) -> Path:
    return Path(cfg["out"]) / "checkpoints"


def load_checkpoints(cfg: dict):
    d = checkpoints_dir(cfg)
    files = sorted(d.glob("ckpt_*.bin"))
    if not files:
        raise ConfigError("out", f"no checkpoint files under {d}; run train-toy first")
    return [load_checkpoint(f) for f in files]


def experiment_hash(cfg: dict) -> str:
    # the output location is environment, not experiment identity
    trimmed = {k: v for k, v in cfg.items() if k != "out"}
    return csvio.config_hash(trimmed)


def manifest_for(cfg: dict, subcommand: str) -> dict:
    return {
        "subcommand": subcommand,
        "config": experiment_hash(cfg),
        "seed": cfg["seed"],
        "version": csvio.__version__,
    }


def out_dir(cfg: dict) -> Path:
    d = Path(cfg["out"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train_toy(cfg: dict) -> int:
    task = build_task(cfg)
    tr = cfg["training"]
    cks = train_sgd(
        task, steps=int(tr["steps"]), learning_rate=float(tr["learning_rate"]),
        batch_size=int(tr["batch_size"]), seed=int(tr["seed"]),
        checkpoint_schedule=tuple(tr["checkpoint_schedule"]),
        out_dir=checkpoints_dir(cfg),
    )
    d = out_dir(cfg)
    csvio.write_csv(
        d / "training.csv", ["step", "train_loss"],
        [(c.step, c.train_loss) for c in cks],
        manifest=manifest_for(cfg, "train-toy"),
    )
    csvio.write_manifest(d / "train-toy.manifest.json", "train-toy",
                         experiment_hash(cfg), cfg["seed"])
    print(f"wrote {len(cks)} checkpoints to {checkpoints_dir(cfg)}")
    return 0


def cmd_estimate_llc(cfg: dict) -> int:
    task = build_task(cfg)
    llc_cfg = build_llc_config(cfg)
    seed = int(cfg["llc"]["seed"])
    rows = []
    trace_rows = []
    for ck in load_checkpoints(cfg):
        est = estimate_llc(task, llc_cfg, seed=seed, w_star=ck.params)
        rows.append((ck.step, est.lambda_hat, llc_cfg.nbeta, llc_cfg.gamma,
                     llc_cfg.step_size, llc_cfg.chains, seed))
        if cfg["llc"]["write_traces"]:
            trace_rows.extend((ck.step, s, c, loss) for s, c, loss in est.trace_rows())
    d = out_dir(cfg)
    if cfg["llc"]["write_traces"]:
        csvio.write_csv(d / "llc_traces.csv", ["checkpoint_step", "step", "chain", "loss"],
                        trace_rows, manifest=manifest_for(cfg, "estimate-llc"))
    csvio.write_csv(
        d / "llc.csv",
        ["step", "lambda_hat", "nbeta", "gamma", "step_size", "chains", "seed"],
        rows, manifest=manifest_for(cfg, "estimate-llc"),
    )
    csvio.write_manifest(d / "estimate-llc.manifest.json", "estimate-llc",
                         experiment_hash(cfg), cfg["seed"])
    print(f"estimated {len(rows)} checkpoints -> {d / 'llc.csv'}")
    return 0


SWEEP_HEADER = ["step", "scheme", "control_parameter", "delta_loss",
                "critical_value", "epsilon", "seed"]


def sweep_row(rec: SweepRecord) -> tuple:
    return (rec.checkpoint_step, rec.scheme, rec.control_parameter, rec.delta_loss,
            rec.critical_value, rec.epsilon, rec.seed)


def cmd_quantize_sweep(cfg: dict) -> int:
    task = build_task(cfg)
    q = cfg["quantize"]
    records = []
    for ck in load_checkpoints(cfg):
        for eps in cfg["epsilons"]:
            nq = critical_nq(ck.params, float(eps), task.full_loss,
                             mode=q["mode"], nq_cap=int(q["nq_cap"]))
            dl = quantization_delta_loss(ck.params, nq, task.full_loss, mode=q["mode"])
            records.append(SweepRecord(ck.step, "quantize", float(nq), dl,
                                       float(eps), cfg["seed"], critical_value=float(nq)))
    d = out_dir(cfg)
    csvio.write_csv(
        d / "sweep_quantize.csv", SWEEP_HEADER,
        [sweep_row(r) for r in records], manifest=manifest_for(cfg, "quantize-sweep"),
    )
    csvio.write_manifest(d / "quantize-sweep.manifest.json", "quantize-sweep",
                         experiment_hash(cfg), cfg["seed"])
    print(f"wrote {len(records)} rows -> {d / 'sweep_quantize.csv'}")
    return 0


def cmd_factorize_sweep(cfg: dict) -> int:
    task = build_task(cfg)
    records = []
    for ck in load_checkpoints(cfg):
        for eps in cfg["epsilons"]:
            res = critical_compression_fraction(task.model, ck.params, float(eps), task.full_loss)
            records.append(SweepRecord(ck.step, "factorize", res.keep_fraction, res.delta_loss,
                                       float(eps), cfg["seed"],
                                       critical_value=res.compression_fraction))
    d = out_dir(cfg)
    csvio.write_csv(
        d / "sweep_factorize.csv", SWEEP_HEADER,
        [sweep_row(r) for r in records], manifest=manifest_for(cfg, "factorize-sweep"),
    )
    csvio.write_manifest(d / "factorize-sweep.manifest.json", "factorize-sweep",
                         experiment_hash(cfg), cfg["seed"])
    print(f"wrote {len(records)} rows -> {d / 'sweep_factorize.csv'}")
    return 0


def cmd_noise_sweep(cfg: dict) -> int:
    task = build_task(cfg)
    nz = cfg["noise"]
    mode = nz["mode"]
    records = []
    for ck in load_checkpoints(cfg):
        for eps in cfg["epsilons"]:
            sigma = critical_sigma(ck.params, float(eps), mode, task.full_loss,
                                   noise_draws=int(nz["noise_draws"]), seed=int(nz["seed"]))
            dl = noise_delta_loss(ck.params, sigma, mode, task.full_loss,
                                  noise_draws=int(nz["noise_draws"]), seed=int(nz["seed"]))
            records.append(SweepRecord(ck.step, f"noise_{mode}", sigma, dl,
                                       float(eps), cfg["seed"], critical_value=sigma))
    d = out_dir(cfg)
    csvio.write_csv(
        d / "sweep_noise.csv", SWEEP_HEADER,
        [sweep_row(r) for r in records], manifest=manifest_for(cfg, "noise-sweep"),
    )
    csvio.write_manifest(d / "noise-sweep.manifest.json", "noise-sweep",
                         experiment_hash(cfg), cfg["seed"])
    print(f"wrote {len(records)} rows -> {d / 'sweep_noise.csv'}")
    return 0


def cmd_prune_sweep(cfg: dict) -> int:
    task = build_task(cfg)
    pr = cfg["prune"]
    records = []
    for ck in load_checkpoints(cfg):
        for frac in pr["keep_fractions"]:
            res = prune_and_retrain(
                task, ck.params, keep_fraction=float(frac),
                learning_rate=float(pr["learning_rate"]),
                retrain_steps=int(pr["retrain_steps"]),
                batch_size=int(pr["batch_size"]), seed=int(pr["seed"]),
            )
            # rugged curves: no critical-threshold search for pruning
            records.append(SweepRecord(ck.step, "prune", float(frac), res.delta_loss,
                                       cfg["epsilons"][0], cfg["seed"]))
    d = out_dir(cfg)
    csvio.write_csv(
        d / "sweep_prune.csv", SWEEP_HEADER,
        [sweep_row(r) for r in records], manifest=manifest_for(cfg, "prune-sweep"),
    )
    csvio.write_manifest(d / "prune-sweep.manifest.json", "prune-sweep",
                         experiment_hash(cfg), cfg["seed"])
    print(f"wrote {len(records)} rows -> {d / 'sweep_prune.csv'}")
    return 0


def cmd_volume_fit(cfg: dict) -> int:
    v = cfg["volume"]
    landscape = build_landscape(cfg)
    ladder = default_ladder(int(v["ladder_min_k"]), int(v["ladder_max_k"]))
    curve = volume_curve(landscape, ladder, int(v["samples"]), seed=int(v["seed"]))
    mode = v["multiplicity_mode"]
    fit = fit_scaling(curve, multiplicity_mode=mode if mode == "select_by_fit" else int(mode),
                      max_epsilon=float(v["max_epsilon"]))
    d = out_dir(cfg)
    csvio.write_csv(
        d / "volume.csv", ["epsilon", "volume", "se"],
        list(zip(curve.epsilons.tolist(), curve.volumes.tolist(), curve.standard_errors.tolist())),
        manifest=manifest_for(cfg, "volume-fit"),
    )
    csvio.write_csv(
        d / "volume_fit.csv",
        ["landscape", "lambda", "multiplicity", "log_c", "r_squared", "eps_min", "eps_max", "n_points"],
        [(landscape.name, fit.lam, fit.multiplicity, fit.log_c, fit.r_squared,
          fit.epsilon_window[0], fit.epsilon_window[1], fit.n_points)],
        manifest=manifest_for(cfg, "volume-fit"),
    )
    csvio.write_manifest(d / "volume-fit.manifest.json", "volume-fit",
                         experiment_hash(cfg), cfg["seed"])
    print(f"{landscape.name}: lambda={fit.lam:.4f} m={fit.multiplicity} R2={fit.r_squared:.5f}")
    return 0


def cmd_mdl_redundancy(cfg: dict) -> int:
    m = cfg["mdl"]
    model = SingularBernoulli(m_simplex=float(m["m_simplex"]))
    a = float(m["a"])
    d = out_dir(cfg)
    rows = []
    for k in m["n_powers"]:
        n = 2 ** int(k)
        net = build_eps_net(model, a / n, int(m["mc_samples"]), seed=int(m["net_seed"]))
        csvio.write_csv(
            d / f"net_n{n}.csv",
            ["center_index", "p_one", "vr_volume", "code_length"],
            [(i, float(net.thetas[i]), float(net.vr_volumes[i]), float(net.code_lengths[i]))
             for i in range(net.n_centers)],
            manifest=manifest_for(cfg, "mdl-redundancy"),
        )
        for s in range(int(m["n_seeds"])):
            run = two_part_redundancy(model, model.truth, n=n, a=a, seed=s, net=net)
            # lengths reported in bits at the CSV boundary
            rows.append((run.n, run.a, run.seed, run.code_length / LN2,
                         run.excess_data_nats / LN2, run.redundancy / LN2))
    csvio.write_csv(
        d / "redundancy.csv",
        ["n", "a", "seed", "code_length", "excess_bits", "redundancy"],
        rows, manifest=manifest_for(cfg, "mdl-redundancy"),
    )
    csvio.write_manifest(d / "mdl-redundancy.manifest.json", "mdl-redundancy",
                         experiment_hash(cfg), cfg["seed"])
    print(f"wrote {len(rows)} rows -> {d / 'redundancy.csv'}")
    return 0


def cmd_lemma_audit(cfg: dict) -> int:
    au = cfg["audit"]
    n = int(au["instances"])
    m_simplex = float(au["m_simplex"])
    outcomes = int(au["outcomes"])
    rng = rng_stream(int(au["seed"]), 0)

    def draw(count):
        return [SimplexDist(p, lower_bound=m_simplex)
                for p in sample_restricted(rng, count, outcomes, m_simplex)]

    results = []
    qs, ps, p2s = draw(n), draw(n), draw(n)
    results.append(("kl_l2", n, sum(not validate_kl_l2(q, p, m_simplex).passed
                                    for q, p in zip(qs, ps))))
    results.append(("triangle", n, sum(not validate_triangle(q, p, p2, m_simplex).passed
                                       for q, p, p2 in zip(qs, ps, p2s))))
    results.append(("variance", n, sum(not validate_variance_bound(q, p).passed
                                       for q, p in zip(qs, ps))))

    model = SingularBernoulli(m_simplex=m_simplex)
    rng_inc = rng_stream(int(au["seed"]), 1)
    violations = 0
    n_inc = int(au["inclusion_configs"])
    for i in range(n_inc):
        eps = float(np.exp(rng_inc.uniform(np.log(1e-4), np.log(1e-1))))
        w_q = model.bounds.sample(rng_inc, 1)[0]
        theta_q = float(model.prob_one(w_q))
        # pick a center within the KL ball of radius eps around q
        lo, hi = model.image_interval()
        grid = np.linspace(lo, hi, 20_001)
        ok = grid[kl_bernoulli(theta_q, grid) <= eps]
        theta_star = float(rng_inc.choice(ok))
        chk = validate_volume_inclusions(model, theta_q, theta_star, eps,
                                         mc_samples=200_000, seed=int(au["seed"]) + i)
        violations += not (chk.passed_pointwise and chk.passed_3se)
    results.append(("volume_inclusion", n_inc, violations))

    d = out_dir(cfg)
    csvio.write_csv(
        d / "audit.csv", ["validator", "instances", "violations"], results,
        manifest=manifest_for(cfg, "lemma-audit"),
    )
    csvio.write_manifest(d / "lemma-audit.manifest.json", "lemma-audit",
                         experiment_hash(cfg), cfg["seed"])
    total = sum(v for _, _, v in results)
    for name, count, v in results:
        print(f"{name}: {v} violations in {count} instances")
    return 0 if total == 0 else 2


def cmd_analyze(cfg: dict) -> int:
    an = cfg["analyze"]
    d = out_dir(cfg)
    scheme = an["scheme"]
    sweep_path = d / f"sweep_{scheme}.csv"
    llc_path = d / "llc.csv"
    for p in (sweep_path, llc_path):
        if not p.exists():
            raise ConfigError("analyze", f"missing input {p}")
    _, _, sweep_rows = csvio.read_csv(sweep_path)
    _, _, llc_rows = csvio.read_csv(llc_path)
    eps = float(an["epsilon"])
    lam_by_step = {int(r[0]): float(r[1]) for r in llc_rows}
    joined = []
    for r in sweep_rows:
        step, crit, row_eps = int(r[0]), r[4], float(r[5])
        if row_eps == eps and crit != "" and step in lam_by_step:
            joined.append((step, lam_by_step[step], float(crit)))
    steps = [j[0] for j in joined]
    lams = [j[1] for j in joined]
    crits = [j[2] for j in joined]
    result = analyze_fit(steps, lams, crits, excluded_steps=tuple(an["excluded_steps"]))
    csvio.write_csv(
        d / "analysis.csv",
        ["scheme", "epsilon", "slope", "intercept", "r_squared", "n_included", "n_rows"],
        [(scheme, eps, result.slope, result.intercept, result.r_squared,
          int(result.included.sum()), len(steps))],
        manifest=manifest_for(cfg, "analyze"),
    )
    resid = []
    fitted = {True: iter(result.fit.residuals.tolist())}
    for i, (step, lam, crit) in enumerate(joined):
        inc = bool(result.included[i])
        resid.append((step, lam, crit, inc, next(fitted[True]) if inc else None))
    csvio.write_csv(
        d / "analysis_residuals.csv",
        ["step", "lambda_hat", "critical_value", "included", "residual"],
        resid, manifest=manifest_for(cfg, "analyze"),
    )
    if an["gnuplot"]:
        script = (
            "set datafile separator ','\n"
            f"set xlabel 'lambda_hat'\nset ylabel 'critical value ({scheme})'\n"
            f"plot 'analysis_residuals.csv' skip 2 using 2:3 with points title '{scheme}', \\\n"
            f"     {result.slope:.17g}*x + {result.intercept:.17g} title 'fit'\n"
        )
        (d / "analysis.gp").write_text(script, encoding="utf-8", newline="\n")
    csvio.write_manifest(d / "analyze.manifest.json", "analyze",
                         experiment_hash(cfg), cfg["seed"])
    print(f"{scheme} vs lambda_hat: slope={result.slope:.4f} "
          f"intercept={result.intercept:.4f} R2={result.r_squared:.4f} "
          f"({int(result.included.sum())}/{len(steps)} checkpoints)")
    return 0


COMMANDS = {
    "train-toy": cmd_train_toy,
    "estimate-llc": cmd_estimate_llc,
    "volume-fit": cmd_volume_fit,
    "quantize-sweep": cmd_quantize_sweep,
    "factorize-sweep": cmd_factorize_sweep,
    "noise-sweep": cmd_noise_sweep,
    "prune-sweep": cmd_prune_sweep,
    "mdl-redundancy": cmd_mdl_redundancy,
    "lemma-audit": cmd_lemma_audit,
    "analyze": cmd_analyze,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="basinlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override top-level seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--epsilon", default=None, help="comma-separated loss tolerances")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.out, args.epsilon)
        return COMMANDS[args.subcommand](cfg)
    except ValueError as e:
        print(f"error ({args.subcommand}): {e}", file=sys.stderr)
        return 1
    except RuntimeError as e:
        print(f"numerical failure ({args.subcommand}): {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
