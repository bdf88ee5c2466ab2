"""
Experiment runner
...

cmd_run executes one configured run and writes its CSV trace with a JSON
sidecar; cmd_sweep repeats the run over a list of step sizes on one shared
problem instance and adds a summary table of error floors.
"""
import concurrent.futures
import dataclasses
import json
import logging
import math
import os
import pandas as pd
import qgrad.constants as constants
from qgrad.exceptions import ConfigError
from qgrad.optimizer.domain import DomainKind
from qgrad.optimizer.engine import RunMethod, run

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class RunResult:
    """Trace of one run with the files written for it."""
    trace: object
    gamma: float
    trace_path: object = None
    sidecar_path: object = None


@dataclasses.dataclass
class SweepResult:
    members: list
    summary: pd.DataFrame
    summary_path: object = None


def _gamma_label(gamma):
    return format(gamma, "g")


def _prepare(config):
    """Build the shared instance, direction set and initial point."""
    oracle = config.build_oracle()
    quantization_set = config.build_set(oracle)
    x0 = None
    start = config.run["x0"]
    if start == "auto":
        start = "reference" if oracle.family in constants.WARM_START_FAMILIES else "zero"
    if start == "reference":
        x0 = oracle.reference_solution().x
        logger.info("warm start at the reference solution of the %s problem", oracle.family)
    return oracle, quantization_set, x0


def _execute(config, oracle, quantization_set, x0, gamma=None):
    schedule = config.build_schedule(gamma)
    stopping = config.build_stopping()
    return run(
        oracle,
        quantization_set,
        schedule,
        stopping=stopping,
        max_iter=config.run["max_iter"],
        record_x=config.run["record_x"],
        x0=x0,
        alpha=config.run["alpha"],
        method=RunMethod(config.quantizer["method"]),
    )


def _json_default(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def sidecar(config, trace, gamma=None):
    """Resolved config plus the final metrics of a trace."""
    data = config.to_dict()
    if gamma is not None:
        data["schedule"]["gamma" if data["schedule"]["kind"] == "constant" else "gamma0"] = gamma
    return {
        "config": data,
        "bits_per_iteration": trace.bits_per_iteration,
        "hit_iteration": trace.hit_iteration,
        "stop_reason": trace.stop_reason,
        "final": trace.summary(),
        "x_final": trace.x_final.tolist(),
        "primal": trace.primal,
    }


def write_outputs(config, trace, stem, gamma=None):
    """
    Summary:
    Write <stem>.csv and <stem>.json under run.out

    Return:
    paths : tuple
        (trace path, sidecar path)
    """
    out = config.run["out"]
    os.makedirs(out, exist_ok=True)
    trace_path = os.path.join(out, f"{stem}.csv")
    sidecar_path = os.path.join(out, f"{stem}.json")
    trace.to_csv(trace_path)
    with open(sidecar_path, "w", encoding="utf-8") as handle:
        json.dump(sidecar(config, trace, gamma), handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    logger.debug("wrote %s and %s", trace_path, sidecar_path)
    return trace_path, sidecar_path


def cmd_run(config, write=True):
    """
    Summary:
    Execute one configured run

    Parameters:
    config : ExperimentConfig
        validated configuration
    write : bool
        write the trace and sidecar under run.out

    Return:
    result : RunResult
    """
    oracle, quantization_set, x0 = _prepare(config)
    trace = _execute(config, oracle, quantization_set, x0)
    gamma = config.schedule["gamma"] if config.schedule["kind"] == "constant" else config.schedule["gamma0"]
    result = RunResult(trace, gamma)
    if write:
        result.trace_path, result.sidecar_path = write_outputs(config, trace, config.run["name"])
    return result


def _floor_metric(oracle):
    return "l_alpha" if oracle.domain.kind is DomainKind.NONNEGATIVE_ORTHANT else "grad_norm"


def cmd_sweep(config, gammas=None, workers=1, write=True):
    """
    Summary:
    Run one configuration for every step size in a list

    Parameters:
    config : ExperimentConfig
        validated configuration; gamma (or gamma0 of a power schedule) is replaced
    gammas : sequence of float or None
        step sizes, the standard sweep list by default
    workers : int
        threads running members concurrently
    write : bool
        write one trace per member and <name>-summary.csv

    Return:
    result : SweepResult
        summary rows gamma, floor over the last tenth of the run, final f,
        total bits and hit iteration, in list order
    """
    gammas = list(constants.SWEEP_GAMMAS if gammas is None else gammas)
    if not gammas:
        raise ConfigError("Error: a sweep needs at least one step size")
    if workers < 1:
        raise ConfigError(f"Error: workers must be at least 1, got {workers}")
    for gamma in gammas:
        config.build_schedule(gamma)
    oracle, quantization_set, x0 = _prepare(config)
    metric = _floor_metric(oracle)
    name = config.run["name"]

    def member(gamma):
        trace = _execute(config, oracle, quantization_set, x0, gamma)
        result = RunResult(trace, gamma)
        if write:
            stem = f"{name}-gamma{_gamma_label(gamma)}"
            result.trace_path, result.sidecar_path = write_outputs(config, trace, stem, gamma)
        return result

    if workers == 1:
        members = [member(gamma) for gamma in gammas]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(member, gammas))

    rows = []
    for result in members:
        trace = result.trace
        rows.append({
            "gamma": result.gamma,
            "floor": trace.floor(metric),
            "final_f": float(trace.f[-1]),
            "bits": int(trace.bits[-1]),
            "hit_iteration": trace.hit_iteration,
        })
    summary = pd.DataFrame(rows, columns=constants.SWEEP_COLUMNS)
    sweep = SweepResult(members, summary)
    if write:
        sweep.summary_path = os.path.join(config.run["out"], f"{name}-summary.csv")
        summary.to_csv(sweep.summary_path, index=False, float_format=constants.CSV_FLOAT_FORMAT, na_rep="")
    for row in rows:
        logger.info("gamma=%s floor(%s)=%.4g", _gamma_label(row["gamma"]), metric, row["floor"])
    floors = [row["floor"] for row in rows if not math.isnan(row["floor"])]
    if floors:
        logger.info("sweep of %d step sizes done, floors %.4g .. %.4g", len(rows), min(floors), max(floors))
    return sweep
