"""
Problem instance files
...

Instances are JSON objects with a "family" key; the remaining keys are the
family's own to_dict fields.
"""
import json
import logging
from qgrad.exceptions import ProblemError
from qgrad.problems.netflow import FlowNetwork, netflow_dual_oracle
from qgrad.problems.oracle import QuadraticOracle, ScalarBenchmarkOracle
from qgrad.problems.tasks import TaskAllocation, task_dual_oracle
from qgrad.problems.tcp import TcpNetwork, tcp_dual_oracle

logger = logging.getLogger(__name__)

FAMILIES = {
    "tcp": lambda data: tcp_dual_oracle(TcpNetwork.from_dict(data)),
    "flow": lambda data: netflow_dual_oracle(FlowNetwork.from_dict(data)),
    "tasks": lambda data: task_dual_oracle(TaskAllocation.from_dict(data)),
    "quadratic": QuadraticOracle.from_dict,
    "scalar_benchmark": ScalarBenchmarkOracle.from_dict,
}


def oracle_from_dict(data):
    """Rebuild the oracle of an instance dictionary."""
    family = data.get("family")
    if family not in FAMILIES:
        raise ProblemError(f"Error: unknown problem family {family!r}")
    try:
        return FAMILIES[family](data)
    except (KeyError, TypeError) as err:
        raise ProblemError(f"Error: malformed {family} instance: {err}") from err


def save_instance(oracle, path):
    """
    Summary:
    Write the instance behind an oracle to a JSON file

    Parameters:
    oracle : ObjectiveOracle
        any oracle of a serializable family
    path : str or Path
        target file
    """
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(oracle.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.debug("saved %s instance to %s", oracle.family, path)


def load_instance(path):
    """
    Summary:
    Read an instance file written by save_instance

    Parameters:
    path : str or Path

    Return:
    oracle : ObjectiveOracle
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as err:
        raise ProblemError(f"Error: cannot read instance file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ProblemError(f"Error: instance file {path} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ProblemError(f"Error: instance file {path} must hold a JSON object")
    return oracle_from_dict(data)
