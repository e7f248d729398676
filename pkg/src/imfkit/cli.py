"""Batch front-end: model validation, impact-mitigation evaluation, oracle
campaigns, reward evaluation over trajectory logs, metrics reports,
discriminator training, and gradient checking.

Every command is file-in/file-out and deterministic given its arguments
(seeds are explicit).  Exit codes: 0 success, 1 validation/domain failure,
2 usage error, 3 I/O error.  CSV output carries a header row; floats are
printed with 17 significant digits so determinism checks are byte-exact.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import discriminator as disc
from . import metrics as metrics_mod
from . import rewards as rewards_mod
from . import trajlog
from .dynamics import SingularConfigurationError, UnknownFrameError, forward_kinematics, mass_matrix
from .imf import impact_mitigation, imf_reward
from .model import ModelError, RobotState, load_bundled_model, load_model, bundled_model_names
from .oracle import run_oracle_campaign

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3

ORACLE_TOLERANCE = 1e-8
GRADCHECK_TOLERANCE = 1e-4


def _fmt(x):
    return format(float(x), ".17g")


def _print_json(obj, stream=None):
    json.dump(obj, stream or sys.stdout, indent=2)
    (stream or sys.stdout).write("\n")


def _load_model_arg(path):
    if path in bundled_model_names():
        return load_bundled_model(path)
    return load_model(path)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_model_validate(args):
    try:
        model = _load_model_arg(args.model)
    except ModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(
        f"ok: {args.model}: {model.n} joints ({model.n_act} actuated), "
        f"{len(model.links) + 1} links, {len(model.contact_frames)} contact frames"
    )
    return EXIT_OK


def _load_state_file(path, model):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return RobotState.from_dict(obj)


def _load_state_lines(path):
    states = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                states.append(RobotState.from_dict(json.loads(line)))
    return states


def cmd_imf(args):
    model = _load_model_arg(args.model)
    if args.all_frames:
        frames = [c.name for c in model.contact_frames]
    else:
        if args.frame is None:
            print("error: provide a frame name or --all-frames", file=sys.stderr)
            return EXIT_USAGE
        if args.frame not in model.contact_frame_map:
            print(
                f"error: unknown contact frame '{args.frame}'; available: "
                f"{[c.name for c in model.contact_frames]}",
                file=sys.stderr,
            )
            return EXIT_USAGE
        frames = [args.frame]

    if args.sweep:
        states = _load_state_lines(args.state)
        print("state_index,frame,xi,reward")
        for i, state in enumerate(states):
            fk = forward_kinematics(model, state)
            mm = mass_matrix(model, state, fk=fk)
            for frame in frames:
                try:
                    res = impact_mitigation(model, state, frame, fk=fk, mass=mm)
                    print(f"{i},{frame},{_fmt(res.xi)},{_fmt(res.reward)}")
                except SingularConfigurationError as exc:
                    print(f"state {i}, frame {frame}: {exc}", file=sys.stderr)
        return EXIT_OK

    state = _load_state_file(args.state, model)
    fk = forward_kinematics(model, state)
    mm = mass_matrix(model, state, fk=fk)
    out = []
    for frame in frames:
        try:
            out.append(impact_mitigation(model, state, frame, fk=fk, mass=mm).to_json_dict())
        except SingularConfigurationError as exc:
            out.append({"frame": frame, "error": str(exc)})
    _print_json(out)
    return EXIT_OK


def cmd_oracle_check(args):
    model = _load_model_arg(args.model)
    report = run_oracle_campaign(model, trials=args.trials, seed=args.seed)
    _print_json(report.to_json_dict())
    worst = max(report.max_rel_error_free, report.max_rel_error_locked)
    if report.failures or worst > ORACLE_TOLERANCE:
        print(
            f"oracle check failed: worst relative error {worst:.3e} "
            f"(tolerance {ORACLE_TOLERANCE:g}), {len(report.failures)} failure(s)",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


def _sample_imf_reward(model, sample, fk_cache):
    """Mean mitigation reward over the contact frames flagged in contact;
    0 when no frame is in contact.  (Per-frame values are what the library
    defines; the mean is this front-end's aggregation and is noted in the
    column name imf_mean.)"""
    in_contact = [c.name for c, flag in zip(model.contact_frames, sample.foot_contact) if flag]
    if not in_contact:
        return 0.0
    fk = forward_kinematics(model, sample.state)
    mm = mass_matrix(model, sample.state, fk=fk)
    vals = []
    for frame in in_contact:
        vals.append(impact_mitigation(model, sample.state, frame, fk=fk, mass=mm).reward)
    return float(np.mean(vals))


def cmd_rewards(args):
    model = _load_model_arg(args.model)
    _, samples = trajlog.read_log(args.trajectory, model=model)
    weights = rewards_mod.load_weights(args.weights) if args.weights else rewards_mod.default_weights()
    if args.fd_accel:
        samples = trajlog.finite_difference_accelerations(samples)

    imf_col = [None] * len(samples)
    if args.imf:
        imf_col = [_sample_imf_reward(model, s, None) for s in samples]

    summary = {"mode": args.mode, "steps": 0, "mean_total": 0.0}
    totals = []

    if args.mode == "handcrafted":
        names = list(rewards_mod.HANDCRAFTED_TERM_NAMES)
        cols = ["time"] + names + (["imf_mean"] if args.imf else []) + ["total"]
        print(",".join(cols))
        for i, s in enumerate(samples):
            terms = rewards_mod.handcrafted_terms(s, model, weights)
            imf_val = imf_col[i] if args.imf else 0.0
            total = rewards_mod.combined_handcrafted_reward(terms, imf_val, weights)
            row = [_fmt(s.time)] + [_fmt(terms[n].weighted) for n in names]
            if args.imf:
                row.append(_fmt(imf_val))
            row.append(_fmt(total))
            print(",".join(row))
            totals.append(total)
    else:  # amp
        net = None
        if args.disc:
            net = disc.load_checkpoint(args.disc)
        else:
            print("warning: no --disc checkpoint given; style column omitted", file=sys.stderr)
        # one row per transition (style scores a state pair)
        cols = ["time", "task"] + (["style"] if net else []) + (["imf_mean"] if args.imf else []) + ["total"]
        print(",".join(cols))
        for i in range(len(samples) - 1):
            s = samples[i]
            task = rewards_mod.task_reward(s, weights)
            style = None
            if net:
                pair = disc.assemble_amp_pair(model, s.state, samples[i + 1].state)
                style = rewards_mod.style_reward(disc.forward(net, pair))
            imf_val = imf_col[i] if args.imf else 0.0
            total = (
                weights.w_task * task
                + (weights.w_style * style if style is not None else 0.0)
                + (weights.w_imf * imf_val if args.imf else 0.0)
            )
            row = [_fmt(s.time), _fmt(task)]
            if net:
                row.append(_fmt(style))
            if args.imf:
                row.append(_fmt(imf_val))
            row.append(_fmt(total))
            print(",".join(row))
            totals.append(total)

    summary["steps"] = len(totals)
    summary["mean_total"] = float(np.mean(totals)) if totals else 0.0
    _print_json(summary, stream=sys.stderr)
    return EXIT_OK


def cmd_metrics(args):
    model = _load_model_arg(args.model) if args.model else None
    header, samples = trajlog.read_log(args.trajectory, model=model)
    if model is None:
        try:
            model = trajlog.resolve_model_reference(header.get("model", ""))
        except trajlog.TrajectoryLogError:
            model = None
    actuated = None
    if model is not None and model.n_act != model.n:
        actuated = model.actuated_indices
    report = metrics_mod.metrics_report(samples, robot_mass=args.mass, g=args.g, actuated_indices=actuated)
    _print_json(report.to_json_dict())
    if args.csv:
        print(report.csv_header())
        print(report.csv_row(fmt=_fmt))
    return EXIT_OK


def cmd_disc_train(args):
    ref = disc.load_pair_dataset(args.ref)
    pol = disc.load_pair_dataset(args.pol)
    if ref.shape[1] != pol.shape[1]:
        print(
            f"error: dataset dimensions differ (reference {ref.shape[1]}, policy {pol.shape[1]})",
            file=sys.stderr,
        )
        return EXIT_FAILURE

    with open(args.config, "r", encoding="utf-8") as fh:
        cfg_doc = json.load(fh)
    hidden = cfg_doc.get("hidden_layers", [1024, 512])
    slope = cfg_doc.get("leaky_slope", 0.01)
    config = disc.TrainConfig.from_dict(cfg_doc)
    if args.epochs is not None:
        config = disc.TrainConfig.from_dict({**cfg_doc, "epochs": args.epochs})

    net = disc.DiscriminatorNet.initialize(
        [ref.shape[1]] + list(hidden) + [1], seed=config.seed, leaky_slope=slope
    )
    trained, history = disc.train(net, ref, pol, config)
    disc.save_checkpoint(trained, args.out)

    if args.history:
        with open(args.history, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for i, loss in enumerate(history):
                fh.write(f"{i},{_fmt(loss)}\n")

    d_ref = disc.forward(trained, ref)
    d_pol = disc.forward(trained, pol)
    _print_json({
        "epochs": int(config.epochs),
        "final_loss": float(history[-1]) if len(history) else None,
        "mean_d_ref": float(np.mean(d_ref)),
        "mean_d_pol": float(np.mean(d_pol)),
        "mean_style_ref": float(np.mean([rewards_mod.style_reward(d) for d in d_ref])),
        "mean_style_pol": float(np.mean([rewards_mod.style_reward(d) for d in d_pol])),
        "checkpoint": args.out,
    })
    return EXIT_OK


def cmd_gradcheck(args):
    report = disc.gradient_check(seed=args.seed, trials=args.trials)
    _print_json(report)
    if report["max_rel_error"] > GRADCHECK_TOLERANCE:
        print(
            f"gradient check failed: max relative error {report['max_rel_error']:.3e} "
            f"(tolerance {GRADCHECK_TOLERANCE:g})",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="imfkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("model-validate", help="parse and validate a robot description")
    q.add_argument("model", help="model file path or bundled name")
    q.set_defaults(func=cmd_model_validate)

    q = sub.add_parser("imf", help="impact mitigation factor at a state")
    q.add_argument("model")
    q.add_argument("state", help="state JSON file (or JSON-lines file with --sweep)")
    q.add_argument("frame", nargs="?", default=None)
    q.add_argument("--all-frames", action="store_true")
    q.add_argument("--sweep", action="store_true", help="state file is JSON lines; emit CSV")
    q.set_defaults(func=cmd_imf)

    q = sub.add_parser("oracle-check", help="cross-validate impulse formulas against the KKT solve")
    q.add_argument("model")
    q.add_argument("--trials", type=_positive_int, default=1000)
    q.add_argument("--seed", type=int, default=42)
    q.set_defaults(func=cmd_oracle_check)

    q = sub.add_parser("rewards", help="evaluate a reward structure over a trajectory log")
    q.add_argument("model")
    q.add_argument("trajectory")
    q.add_argument("--weights", default=None, help="RewardWeights JSON file")
    q.add_argument("--mode", choices=("amp", "handcrafted"), default="handcrafted")
    q.add_argument("--imf", action="store_true", help="add the mitigation-reward column")
    q.add_argument("--disc", default=None, help="discriminator checkpoint for the style column")
    q.add_argument("--fd-accel", action="store_true",
                   help="recompute joint accelerations by central differences of logged velocities")
    q.set_defaults(func=cmd_rewards)

    q = sub.add_parser("metrics", help="power, cost of transport, velocity RMSE")
    q.add_argument("trajectory")
    q.add_argument("--mass", type=float, required=True, help="robot mass, kg")
    q.add_argument("--g", type=float, default=9.81)
    q.add_argument("--model", default=None, help="model (for actuated-joint mapping)")
    q.add_argument("--csv", action="store_true", help="also print the one-line CSV row")
    q.set_defaults(func=cmd_metrics)

    q = sub.add_parser("disc-train", help="train the discriminator on pair datasets")
    q.add_argument("ref", help="reference dataset (JSON lines)")
    q.add_argument("pol", help="policy dataset (JSON lines)")
    q.add_argument("config", help="training config JSON")
    q.add_argument("--out", required=True, help="checkpoint output path")
    q.add_argument("--history", default=None, help="loss-history CSV output path")
    q.add_argument("--epochs", type=_nonnegative_int, default=None, help="override config epochs")
    q.set_defaults(func=cmd_disc_train)

    q = sub.add_parser("gradcheck", help="finite-difference check of the loss gradients")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--trials", type=_positive_int, default=20)
    q.set_defaults(func=cmd_gradcheck)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UnknownFrameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModelError, trajlog.TrajectoryLogError, SingularConfigurationError,
            disc.TrainingDivergedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def entry():  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()
