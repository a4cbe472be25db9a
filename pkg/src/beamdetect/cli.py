"""Command-line entry point: ``beamdetect {validate,generate,train,detect,compare,variations}``.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import InputKind, load_dataset, save_dataset
from .detect import DEFAULT_THRESHOLD, detect
from .errors import BeamDetectError
from .experiments import (VARIATIONS, build_config, check_dataset, make_dataset,
                          parse_config_text, run_training)
from .fem import BeamSpec, exact_cantilever_response, solve_static
from .lm import StopReason, load_log, save_log

log = logging.getLogger("beamdetect")

VALIDATION_RTOL = 0.0015
ZERO_ATOL = 1e-9

# flag dest -> config key
FLAG_KEYS = {
    "length": "length_m", "width": "width_m", "height": "height_m",
    "youngs_modulus": "youngs_modulus_pa", "n_elements": "n_elements",
    "load": "load_newton", "load_node": "load_node", "support": "support",
    "input_kind": "input_kind", "hidden": "hidden_sizes", "beta": "beta",
    "error_goal": "error_goal", "max_epochs": "max_epochs", "mu_init": "mu_init",
    "n_samples": "n_samples", "seed": "seed", "variation": "variation",
    "p_damaged": "p_element_damaged", "ee_floor": "ee_floor",
    "max_damaged": "max_damaged_elements", "workers": "workers",
}


class UsageError(Exception):
    pass


def _add_common(p, experiment=True):
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    g = p.add_argument_group("beam")
    g.add_argument("--length", type=float, help="beam length (m)")
    g.add_argument("--width", type=float, help="section width (m)")
    g.add_argument("--height", type=float, help="section height (m)")
    g.add_argument("--youngs-modulus", type=float, help="E (Pa)")
    g.add_argument("--n-elements", type=int)
    g.add_argument("--load", type=float, help="point load (N), positive downward")
    g.add_argument("--load-node", type=int, help="1-based node of the load (default: tip)")
    g.add_argument("--support", choices=["cantilever", "simply_supported"])
    if not experiment:
        return
    g = p.add_argument_group("experiment")
    g.add_argument("--variation", choices=sorted(VARIATIONS),
                   help="preset input kind / hidden layers / beta")
    g.add_argument("--input-kind", choices=[k.value for k in InputKind])
    g.add_argument("--hidden", type=lambda s: tuple(int(v) for v in s.replace(",", " ").split()),
                   help='hidden layer sizes, e.g. "16 8"')
    g.add_argument("--beta", type=float)
    g.add_argument("--error-goal", type=float)
    g.add_argument("--max-epochs", type=int)
    g.add_argument("--mu-init", type=float)
    g.add_argument("--n-samples", type=int)
    g.add_argument("--p-damaged", type=float, help="per-element damage probability")
    g.add_argument("--ee-floor", type=float, help="smallest sampled stiffness factor")
    g.add_argument("--max-damaged", type=int, help="cap on damaged elements per scenario")
    g.add_argument("--workers", type=int, help="threads for dataset generation")


def config_from_args(args):
    values = parse_config_text(args.config.read_text()) if args.config else {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[key] = value
    return build_config(values)


def _sci(x):
    return f"{x:.3e}"


def cmd_validate(args):
    cfg = config_from_args(args)
    spec = cfg.beam
    fem = solve_static(spec)
    exact = exact_cantilever_response(spec)
    rows, ok = [], True
    for i in range(spec.n_nodes):
        row = [i + 1]
        for got, ref in ((fem.displacements_m[i], exact.displacements_m[i]),
                         (fem.strains[i], exact.strains[i])):
            if ref == 0.0:
                rel = None
                ok &= abs(got) <= ZERO_ATOL
            else:
                rel = abs(got - ref) / abs(ref)
                ok &= rel <= VALIDATION_RTOL
            row += [got, ref, rel]
        rows.append(row)

    print(f"{'node':>4} {'v FEM (m)':>11} {'v exact (m)':>11} {'rel err':>9}   "
          f"{'eps FEM':>10} {'eps exact':>10} {'rel err':>9}")
    for node, vf, ve, vr, sf, se, sr in rows:
        print(f"{node:>4} {_sci(vf):>11} {_sci(ve):>11} {'-' if vr is None else _sci(vr):>9}   "
              f"{_sci(sf):>10} {_sci(se):>10} {'-' if sr is None else _sci(sr):>9}")
    print("PASS" if ok else f"FAIL: relative error above {VALIDATION_RTOL:.2%}")
    if args.out:
        with args.out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "disp_fem", "disp_exact", "disp_rel_err",
                        "strain_fem", "strain_exact", "strain_rel_err"])
            for row in rows:
                w.writerow([row[0]] + ["" if v is None else repr(float(v)) for v in row[1:]])
    return 0 if ok else 1


def dataset_summary(ds):
    targets = ds.targets
    counts = np.sum(targets < 1.0, axis=1)
    lines = [f"{len(ds)} samples, input_kind={ds.input_kind.value}, "
             f"n_elements={targets.shape[1]}", "damaged elements per sample:"]
    hist = np.bincount(counts, minlength=targets.shape[1] + 1)
    for k, c in enumerate(hist):
        if c:
            lines.append(f"  {k:>2}: {c}")
    damaged = targets[targets < 1.0]
    if damaged.size:
        q = np.quantile(damaged, [0.0, 0.25, 0.5, 0.75, 1.0])
        lines.append("damaged ee quartiles (min/25/50/75/max): "
                     + " ".join(f"{v:.3f}" for v in q))
    return "\n".join(lines)


def cmd_generate(args):
    if args.out is None:
        raise UsageError("generate needs --out")
    cfg = config_from_args(args)
    ds = make_dataset(cfg)
    save_dataset(ds, args.out)
    print(dataset_summary(ds))
    print(f"wrote {args.out}")
    return 0


def _table_row(code, hidden, beta, mse, epochs, stop):
    layer = " ".join(str(h) for h in hidden)
    return f"{code or '-':<9} {layer:<8} {beta:>4g} {mse:>12.4e} {epochs:>6} {stop}"


TABLE_HEADER = f"{'Code':<9} {'Layer':<8} {'beta':>4} {'MSE':>12} {'Epoch':>6} stop"


def _train_and_save(cfg, ds, ckpt_path, log_path):
    net, params, tlog = run_training(cfg, ds)
    save_checkpoint(ckpt_path, net, params, cfg.input_kind,
                    meta={"variation": cfg.variation_code, "seed": cfg.seed})
    save_log(tlog, log_path, meta={"variation": cfg.variation_code or "-",
                                   "input_kind": cfg.input_kind.value})
    return tlog


def cmd_train(args):
    if args.out is None:
        raise UsageError("train needs --out (checkpoint path)")
    cfg = config_from_args(args)
    if args.dataset:
        ds = load_dataset(args.dataset, spec=cfg.beam)
        check_dataset(cfg, ds)
    else:
        ds = make_dataset(cfg)
    log_path = args.log or args.out.with_name(args.out.stem + ".log.csv")
    tlog = _train_and_save(cfg, ds, args.out, log_path)
    print(TABLE_HEADER)
    print(_table_row(cfg.variation_code, cfg.hidden_sizes, cfg.beta, tlog.final_mse,
                     tlog.epochs, tlog.stop_reason.value))
    return 0


def _read_numbers(text):
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        raise UsageError(f"bad response value: {exc}") from None


def cmd_detect(args):
    if args.checkpoint is None:
        raise UsageError("detect needs --checkpoint")
    if (args.response is None) == (args.response_file is None):
        raise UsageError("give exactly one of --response or --response-file")
    net, params, _, _ = load_checkpoint(args.checkpoint)
    text = args.response if args.response is not None else args.response_file.read_text()
    report = detect(net, params, _read_numbers(text), args.threshold)
    print(f"{'element':>7} {'ee':>7} {'severity':>9}")
    for e, ee in enumerate(report.predicted_factors, start=1):
        flag = f"{1 - ee:>9.3f}  DAMAGED" if e in report.damaged_elements else ""
        print(f"{e:>7} {ee:>7.3f} {flag}")
    if not report.damaged_elements:
        print(f"no element below threshold {args.threshold}")
    doc = json.dumps(report.to_dict(), indent=1)
    if args.out:
        args.out.write_text(doc + "\n")
    else:
        print(doc)
    return 0


def _code_for(loaded):
    code = loaded.meta.get("variation", "-")
    return loaded.path.stem if code in ("", "-") else code


def _kind_for(loaded, code):
    kind = loaded.meta.get("input_kind")
    if kind:
        return kind
    if code.startswith("nns"):
        return InputKind.STRAIN.value
    if code.startswith("nnd"):
        return InputKind.DISPLACEMENT.value
    return "-"


def compare_logs(paths):
    """Summary rows sorted by variation code plus the per-metric winning input kind."""
    if len(paths) < 2:
        raise UsageError("compare needs at least two logs")
    rows = []
    for p in paths:
        loaded = load_log(p)
        code = _code_for(loaded)
        rows.append({
            "variation": code,
            "input_kind": _kind_for(loaded, code),
            "final_mse": loaded.final_mse,
            "epochs": loaded.total_epochs,
            "goal_reached": loaded.stop_reason is StopReason.ERROR_GOAL,
            "stop_reason": loaded.stop_reason.value,
            "log": Path(p).name,
        })
    rows.sort(key=lambda r: (r["variation"], r["log"]))
    winners = {}
    for metric in ("final_mse", "epochs"):
        by_kind = {}
        for r in rows:
            if r["input_kind"] != "-":
                by_kind.setdefault(r["input_kind"], []).append(r[metric])
        medians = {k: float(np.median(v)) for k, v in by_kind.items()}
        winners[metric] = None
        if len(medians) == 2:
            (ka, va), (kb, vb) = sorted(medians.items())
            if va != vb:
                winners[metric] = ka if va < vb else kb
    return rows, winners


def cmd_compare(args):
    rows, winners = compare_logs(args.logs)
    print(f"{'Code':<12} {'input':<13} {'MSE':>12} {'Epoch':>6} goal")
    for r in rows:
        print(f"{r['variation']:<12} {r['input_kind']:<13} {r['final_mse']:>12.4e} "
              f"{r['epochs']:>6} {'yes' if r['goal_reached'] else 'no'}")
    for metric, kind in winners.items():
        print(f"lower median {metric}: {kind or 'no winner'}")
    if args.out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variation", "input_kind", "final_mse", "epochs", "goal_reached",
                    "stop_reason", "log"])
        for r in rows:
            w.writerow([r["variation"], r["input_kind"], repr(r["final_mse"]), r["epochs"],
                        int(r["goal_reached"]), r["stop_reason"], r["log"]])
        for metric, kind in winners.items():
            buf.write(f"# winner_{metric}={kind or 'none'}\n")
        args.out.write_text(buf.getvalue())
    return 0


def cmd_variations(args):
    """Run the selected reference variations on one shared dataset per input kind."""
    if args.out is None:
        raise UsageError("variations needs --out (directory)")
    base = config_from_args(args)
    args.out.mkdir(parents=True, exist_ok=True)
    datasets, logs = {}, []
    print(TABLE_HEADER)
    for code in args.codes or sorted(VARIATIONS):
        cfg = base.with_variation(code)
        if cfg.input_kind not in datasets:
            ds = make_dataset(cfg)
            save_dataset(ds, args.out / f"dataset_{cfg.input_kind.value}.csv")
            datasets[cfg.input_kind] = ds
        log_path = args.out / f"{code}.log.csv"
        tlog = _train_and_save(cfg, datasets[cfg.input_kind],
                               args.out / f"{code}.ckpt.json", log_path)
        logs.append(log_path)
        print(_table_row(code, cfg.hidden_sizes, cfg.beta, tlog.final_mse, tlog.epochs,
                         tlog.stop_reason.value), flush=True)
    if len(logs) >= 2:
        print()
        cmd_compare(argparse.Namespace(logs=logs, out=args.out / "summary.csv"))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="beamdetect", description="Beam damage detection from static responses.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="compare FEM with the exact cantilever solution")
    _add_common(p, experiment=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a random-damage dataset CSV")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a network with Levenberg-Marquardt")
    _add_common(p)
    p.add_argument("--dataset", type=Path, help="dataset CSV (generated from config if omitted)")
    p.add_argument("--log", type=Path, help="training log CSV (default: <out>.log.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="estimate element damage from a response vector")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--response", help="comma/space separated nodal values")
    p.add_argument("--response-file", type=Path)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", type=Path, help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("compare", help="summarize training logs")
    p.add_argument("logs", nargs="*", type=Path)
    p.add_argument("--out", type=Path, help="merged CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("variations", help="train the eight reference variations")
    _add_common(p)
    p.add_argument("--codes", nargs="+", choices=sorted(VARIATIONS))
    p.set_defaults(func=cmd_variations)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"beamdetect {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (BeamDetectError, OSError) as exc:
        print(f"beamdetect {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
