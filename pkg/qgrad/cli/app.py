"""
Command line interface
...

Subcommands:
run     one experiment from a config file, trace CSV + JSON sidecar
sweep   the same experiment over a list of step sizes, plus a summary CSV
cover   covering cosine and properness of a direction set
bounds  step-size rules and iteration bounds from problem constants

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""
import argparse
import json
import logging
import sys
import qgrad.constants as constants
from qgrad.bounds.planner import (ProblemConstants, budget_plan, optimal_rate_plan, strongly_convex_plan,
                                  type1_plan)
from qgrad.cli.config import ExperimentConfig
from qgrad.cli.runner import cmd_run, cmd_sweep
from qgrad.exceptions import BoundsError, QgradError
from qgrad.quantization.cover import covering_cosine, is_proper_quantization
from qgrad.quantization.directions import bits_per_iteration, construct_set, load_set

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _add_experiment_arguments(parser):
    parser.add_argument("--config", help="INI config file or JSON sidecar to replay")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value, repeatable")
    parser.add_argument("--out", help="output directory, overrides run.out")


def build_parser():
    parser = argparse.ArgumentParser(prog="qgrad", description="Quantized gradient methods")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run one experiment")
    _add_experiment_arguments(run_parser)

    sweep_parser = commands.add_parser("sweep", help="run an experiment over step sizes")
    _add_experiment_arguments(sweep_parser)
    sweep_parser.add_argument("--gammas", type=float, nargs="+", default=list(constants.SWEEP_GAMMAS))
    sweep_parser.add_argument("--workers", type=int, default=1)

    cover_parser = commands.add_parser("cover", help="covering analysis of a direction set")
    source = cover_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--kind", choices=["sign", "minimal", "circular", "normal_basis", "normal-basis"])
    source.add_argument("--file", help="custom set file")
    cover_parser.add_argument("--dims", type=int)
    cover_parser.add_argument("--n", type=int, dest="count", help="directions of a circular set")
    cover_parser.add_argument("--numerical", action="store_true", help="skip closed forms")
    cover_parser.add_argument("--seed", type=int, default=constants.DEFAULT_SEED)
    cover_parser.add_argument("--json", action="store_true")

    bounds_parser = commands.add_parser("bounds", help="step sizes and iteration bounds")
    bounds_parser.add_argument("plan", choices=["type1", "rate", "strong", "budget"])
    bounds_parser.add_argument("--lipschitz", type=float, required=True)
    bounds_parser.add_argument("--cos-theta", type=float, default=1.0)
    bounds_parser.add_argument("--gap", type=float)
    bounds_parser.add_argument("--gap-bound", type=float)
    bounds_parser.add_argument("--grad-bound", type=float)
    bounds_parser.add_argument("--grad0-norm", type=float)
    bounds_parser.add_argument("--mu", type=float)
    bounds_parser.add_argument("--dims", type=int, default=1)
    bounds_parser.add_argument("--alpha", type=float, default=constants.DEFAULT_ALPHA)
    bounds_parser.add_argument("--eps", type=float)
    bounds_parser.add_argument("--gamma", type=float)
    bounds_parser.add_argument("--kappa", type=float)
    bounds_parser.add_argument("--iters", type=int)
    bounds_parser.add_argument("--bits", type=int)
    bounds_parser.add_argument("--constrained", action="store_true",
                               help="sign method with L_alpha on the orthant")
    bounds_parser.add_argument("--json", action="store_true")
    return parser


class CommandHandler(object):
    """
    A class to dispatch parsed arguments to the subcommands
    ...
    Attributes:
    out : file
        stream receiving reports
    err : file
        stream receiving error diagnostics, stderr by default
    """
    def __init__(self, out=None, err=None):
        self.out = sys.stdout if out is None else out
        self.err = sys.stderr if err is None else err

    def emit(self, text):
        self.out.write(text + "\n")

    def fail(self, message, code):
        self.err.write(f"{message}\n")
        return code

    def dispatch(self, args):
        return getattr(self, f"handle_{args.command}")(args)

    def load_config(self, args):
        overrides = list(args.overrides)
        if args.out is not None:
            overrides.append(f"run.out={args.out}")
        return ExperimentConfig.from_file(args.config, overrides)

    def handle_run(self, args):
        try:
            config = self.load_config(args)
        except QgradError as err:
            return self.fail(err, EXIT_INVALID)
        try:
            result = cmd_run(config)
        except (QgradError, OSError) as err:
            return self.fail(err, EXIT_RUNTIME)
        summary = result.trace.summary()
        self.emit(f"trace      = {result.trace_path}")
        self.emit(f"sidecar    = {result.sidecar_path}")
        self.emit(f"iterations = {summary['iterations']}")
        self.emit(f"hit        = {summary['hit_iteration']} ({summary['stop_reason']})")
        self.emit(f"final_f    = {summary['final_f']:.10g}")
        return EXIT_OK

    def handle_sweep(self, args):
        try:
            config = self.load_config(args)
            if not args.gammas:
                raise BoundsError("Error: a sweep needs at least one step size")
        except QgradError as err:
            return self.fail(err, EXIT_INVALID)
        try:
            result = cmd_sweep(config, args.gammas, workers=args.workers)
        except (QgradError, OSError) as err:
            return self.fail(err, EXIT_RUNTIME)
        self.emit(result.summary.to_string(index=False))
        self.emit(f"summary = {result.summary_path}")
        return EXIT_OK

    def handle_cover(self, args):
        try:
            if args.file is not None:
                quantization_set = load_set(args.file)
            else:
                quantization_set = construct_set(args.kind, dims=args.dims, count=args.count,
                                                 enumerate_elements=False)
            analysis = covering_cosine(quantization_set, numerical=args.numerical, seed=args.seed)
            certificate = is_proper_quantization(quantization_set)
        except OSError as err:
            return self.fail(f"Error: {err}", EXIT_INVALID)
        except QgradError as err:
            return self.fail(err, EXIT_INVALID)
        report = {
            "set": repr(quantization_set),
            "size": quantization_set.size,
            "bits": bits_per_iteration(quantization_set) if quantization_set.size > 1 else 0,
            "cos_star": analysis.cos_star,
            "theta_degrees": analysis.angle_degrees,
            "proper": analysis.proper,
            "margin": certificate.margin,
            "method": analysis.method.value,
            "witness": analysis.witness.coords.tolist(),
        }
        if args.json:
            self.emit(json.dumps(report, indent=2))
            return EXIT_OK
        width = max(len(key) for key in report)
        for key, value in report.items():
            if isinstance(value, float):
                value = f"{value:.6f}"
            self.emit(f"{key.ljust(width)} = {value}")
        return EXIT_OK

    def handle_bounds(self, args):
        try:
            consts = ProblemConstants(
                lipschitz=args.lipschitz,
                grad_bound=args.grad_bound,
                mu=args.mu,
                gap=args.gap,
                gap_bound=args.gap_bound,
                grad0_norm=args.grad0_norm,
                dims=args.dims,
                cos_theta=args.cos_theta,
                alpha=args.alpha,
                epsilon=args.eps,
            )
            if args.plan == "type1":
                report = type1_plan(consts, args.gamma, constrained=args.constrained, bits=args.bits)
            elif args.plan == "rate":
                if args.iters is None:
                    raise BoundsError("Error: the rate plan needs --iters")
                report = optimal_rate_plan(args.iters, consts, bits=args.bits)
            elif args.plan == "strong":
                report = strongly_convex_plan(consts, args.gamma, bits=args.bits)
            else:
                if args.gamma is None or args.kappa is None:
                    raise BoundsError("Error: the budget plan needs --gamma and --kappa")
                report = budget_plan(consts, args.gamma, args.kappa, bits=args.bits)
        except QgradError as err:
            return self.fail(err, EXIT_INVALID)
        if args.json:
            self.emit(json.dumps(report.to_dict(), indent=2))
        else:
            for line in report.lines():
                self.emit(line)
        return EXIT_OK


def main(argv=None, out=None, err=None):
    """Parse arguments, configure logging once and run a subcommand."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=constants.LOG_FORMAT, stream=sys.stderr)
    handler = CommandHandler(out, err)
    try:
        return handler.dispatch(args)
    except Exception:
        logger.exception("%s failed", args.command)
        return EXIT_RUNTIME
