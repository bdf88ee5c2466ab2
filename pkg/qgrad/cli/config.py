"""
Experiment configuration
...

An experiment is described by five INI sections, [problem], [quantizer],
[schedule], [stopping] and [run]. Values are typed against SCHEMA, command-line
overrides take the form section.key=value and the QGRAD_SEED environment
variable replaces run.seed. The resolved configuration is written as JSON next
to every trace and can be read back to replay the run.
"""
import configparser
import json
import logging
import os
import qgrad.constants as constants
from qgrad.exceptions import ConfigError, QgradError
from qgrad.optimizer.domain import Domain, DomainKind
from qgrad.optimizer.engine import RunMethod, StoppingKind, StoppingRule
from qgrad.optimizer.schedule import make_schedule
from qgrad.problems.instances import load_instance
from qgrad.problems.netflow import generate_flow, netflow_dual_oracle
from qgrad.problems.oracle import random_quadratic, scalar_benchmark_oracle
from qgrad.problems.tasks import generate_tasks, task_dual_oracle
from qgrad.problems.tcp import generate_tcp, tcp_dual_oracle
from qgrad.quantization.directions import SetKind, construct_set, load_set

logger = logging.getLogger(__name__)

NONE_WORDS = ("", "none", "null")


def _optional(convert):
    def parse(value):
        if value is None or (isinstance(value, str) and value.strip().lower() in NONE_WORDS):
            return None
        return convert(value)
    parse.__name__ = f"optional_{convert.__name__}"
    return parse


def _boolean(value):
    if isinstance(value, bool):
        return value
    key = str(value).strip().lower()
    if key not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(f"not a boolean: {value!r}")
    return configparser.ConfigParser.BOOLEAN_STATES[key]


def _text(value):
    return str(value).strip()


SCHEMA = {
    "problem": {
        "family": (_text, "tcp"),
        "file": (_optional(_text), None),
        "seed": (_optional(int), None),
        "sources": (int, constants.TCP_SOURCES),
        "links": (int, constants.TCP_LINKS),
        "density": (float, constants.TCP_DENSITY),
        "utility_scale": (float, constants.TCP_UTILITY_SCALE),
        "capacity": (float, constants.TCP_CAPACITY),
        "rate_lower": (float, constants.TCP_RATE_BOUNDS[0]),
        "rate_upper": (float, constants.TCP_RATE_BOUNDS[1]),
        "nodes": (int, constants.FLOW_NODES),
        "extra_edges": (int, constants.FLOW_EXTRA_EDGES),
        "machines": (int, constants.TASK_MACHINES),
        "tasks": (int, constants.TASK_COUNT),
        "cap": (float, constants.TASK_CAP),
        "demand": (float, constants.TASK_DEMAND),
        "dims": (int, 2),
        "domain": (_text, DomainKind.UNCONSTRAINED.value),
        "outer": (_text, constants.SCALAR_OUTER_BRANCHES[0]),
    },
    "quantizer": {
        "kind": (_text, SetKind.SIGN.value),
        "count": (_optional(int), None),
        "file": (_optional(_text), None),
        "method": (_text, RunMethod.QUANTIZED.value),
    },
    "schedule": {
        "kind": (_text, "constant"),
        "gamma": (_optional(float), 0.1),
        "gamma0": (_optional(float), None),
        "power": (_optional(float), None),
    },
    "stopping": {
        "kind": (_text, "none"),
        "epsilon": (_optional(float), None),
        "alpha": (float, constants.DEFAULT_ALPHA),
    },
    "run": {
        "max_iter": (int, constants.DEFAULT_MAX_ITER),
        "seed": (int, constants.DEFAULT_SEED),
        "record_x": (_boolean, False),
        "x0": (_text, "auto"),
        "alpha": (float, constants.DEFAULT_ALPHA),
        "out": (_text, "."),
        "name": (_text, "run"),
    },
}

FAMILIES = ("tcp", "flow", "tasks", "quadratic", "scalar_benchmark")
ORTHANT_FAMILIES = ("tcp", "scalar_benchmark")
INITIAL_POINTS = ("auto", "zero", "reference")


def _convert(section, key, value):
    if section not in SCHEMA:
        raise ConfigError(f"Error: unknown config section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"Error: unknown key {key!r} in section [{section}]")
    convert = SCHEMA[section][key][0]
    try:
        return convert(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Error: bad value {value!r} for {section}.{key}: {err}") from err


class ExperimentConfig(object):
    """
    A class to represent a validated experiment
    ...
    Attributes:
    problem, quantizer, schedule, stopping, run : dict
        typed values of each section, every key of SCHEMA present

    Methods:
    from_file(path, overrides)
        read an INI file or a JSON sidecar
    apply_overrides(pairs)
        set section.key=value strings
    validate()
        check every section against the module preconditions
    build_oracle(), build_set(oracle), build_schedule(gamma), build_stopping()
        the objects a run needs
    to_dict() / from_dict(data)
        JSON round trip
    """
    def __init__(self, sections=None):
        sections = sections or {}
        unknown = set(sections) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"Error: unknown config section [{sorted(unknown)[0]}]")
        for section, fields in SCHEMA.items():
            values = {key: default for key, (_, default) in fields.items()}
            for key, value in (sections.get(section) or {}).items():
                values[key] = _convert(section, key, value)
            setattr(self, section, values)

    @classmethod
    def from_ini(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise ConfigError(f"Error: malformed config: {err}") from err
        return cls({section: dict(parser.items(section)) for section in parser.sections()})

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("Error: a config must be a mapping of sections")
        return cls(data)

    @classmethod
    def from_file(cls, path=None, overrides=(), environ=None):
        """
        Summary:
        Load a config, apply overrides and the seed variable, then validate

        Parameters:
        path : str or None
            INI file, or a JSON sidecar (a "config" key is unwrapped); defaults only when None
        overrides : sequence of str
            section.key=value strings
        environ : mapping or None
            environment to read QGRAD_SEED from, os.environ by default

        Return:
        config : ExperimentConfig
        """
        if path is None:
            config = cls()
        else:
            try:
                with open(path, "r", encoding="utf-8") as handle:
                    text = handle.read()
            except OSError as err:
                raise ConfigError(f"Error: cannot read config file {path}: {err}") from err
            if str(path).endswith(".json"):
                try:
                    data = json.loads(text)
                except json.JSONDecodeError as err:
                    raise ConfigError(f"Error: config file {path} is not valid JSON: {err}") from err
                config = cls.from_dict(data.get("config", data) if isinstance(data, dict) else data)
            else:
                config = cls.from_ini(text)
        config.apply_overrides(overrides)
        environ = os.environ if environ is None else environ
        if environ.get(constants.SEED_ENV_VAR):
            config.run["seed"] = _convert("run", "seed", environ[constants.SEED_ENV_VAR])
        config.validate()
        return config

    def apply_overrides(self, pairs):
        for pair in pairs or ():
            name, sep, value = str(pair).partition("=")
            section, dot, key = name.strip().partition(".")
            if not sep or not dot:
                raise ConfigError(f"Error: override {pair!r} is not of the form section.key=value")
            converted = _convert(section, key.strip(), value)
            getattr(self, section)[key.strip()] = converted

    @property
    def instance_seed(self):
        seed = self.problem["seed"]
        return self.run["seed"] if seed is None else seed

    def problem_dims(self):
        family = self.problem["family"]
        if self.problem["file"] is not None:
            return self.build_oracle().dims
        return {
            "tcp": self.problem["links"],
            "flow": self.problem["nodes"] - 1,
            "tasks": self.problem["tasks"],
            "quadratic": self.problem["dims"],
            "scalar_benchmark": 1,
        }[family]

    def problem_is_orthant(self):
        if self.problem["file"] is not None:
            return self.build_oracle().domain.kind is DomainKind.NONNEGATIVE_ORTHANT
        family = self.problem["family"]
        if family == "quadratic":
            return self.problem["domain"] == DomainKind.NONNEGATIVE_ORTHANT.value
        return family in ORTHANT_FAMILIES

    def validate(self):
        """Raise ConfigError naming the first violated precondition."""
        problem, quantizer, run = self.problem, self.quantizer, self.run
        for section, key in (("problem", "file"), ("quantizer", "file")):
            path = getattr(self, section)[key]
            if path is not None and not os.path.isfile(path):
                raise ConfigError(f"Error: {section}.{key} {path!r} does not exist")
        if problem["file"] is None and problem["family"] not in FAMILIES:
            raise ConfigError(f"Error: problem.family must be one of {', '.join(FAMILIES)}, got {problem['family']!r}")
        if problem["domain"] not in (DomainKind.UNCONSTRAINED.value, DomainKind.NONNEGATIVE_ORTHANT.value):
            raise ConfigError(f"Error: problem.domain must be unconstrained or orthant, got {problem['domain']!r}")
        if problem["outer"] not in constants.SCALAR_OUTER_BRANCHES:
            raise ConfigError(f"Error: problem.outer must be one of {', '.join(constants.SCALAR_OUTER_BRANCHES)}, "
                              f"got {problem['outer']!r}")
        if run["x0"] not in INITIAL_POINTS:
            raise ConfigError(f"Error: run.x0 must be one of {', '.join(INITIAL_POINTS)}, got {run['x0']!r}")
        if run["max_iter"] < 0:
            raise ConfigError(f"Error: run.max_iter must be >= 0, got {run['max_iter']}")
        if not run["alpha"] > 0.0:
            raise ConfigError(f"Error: run.alpha must be positive, got {run['alpha']!r}")
        try:
            RunMethod(quantizer["method"])
            if quantizer["file"] is None and quantizer["method"] == RunMethod.QUANTIZED.value:
                kind = SetKind.parse(quantizer["kind"])
                if kind is SetKind.CIRCULAR and self.problem_dims() != 2:
                    raise ConfigError(f"Error: circular quantizers need a 2-dimensional problem, got N={self.problem_dims()}")
            self.build_schedule()
            rule = self.build_stopping()
        except ConfigError:
            raise
        except (QgradError, ValueError) as err:
            raise ConfigError(str(err)) from err
        if rule is not None and rule.kind is StoppingKind.L_ALPHA and not self.problem_is_orthant():
            raise ConfigError("Error: the l_alpha stopping rule needs a problem on the nonnegative orthant")
        if rule is not None and rule.kind is StoppingKind.GAP and problem["family"] in ("tcp", "tasks"):
            raise ConfigError(f"Error: the gap stopping rule needs a known f*, unavailable for {problem['family']}")

    def build_oracle(self):
        problem = self.problem
        if problem["file"] is not None:
            return load_instance(problem["file"])
        family, seed = problem["family"], self.instance_seed
        if family == "tcp":
            network = generate_tcp(seed, problem["sources"], problem["links"], problem["density"],
                                   problem["utility_scale"], problem["capacity"],
                                   (problem["rate_lower"], problem["rate_upper"]))
            return tcp_dual_oracle(network)
        if family == "flow":
            return netflow_dual_oracle(generate_flow(seed, problem["nodes"], problem["extra_edges"]))
        if family == "tasks":
            allocation = generate_tasks(seed, problem["machines"], problem["tasks"],
                                        demand=problem["demand"], cap=problem["cap"])
            return task_dual_oracle(allocation)
        if family == "quadratic":
            return random_quadratic(seed, problem["dims"], domain=Domain(DomainKind(problem["domain"])))
        return scalar_benchmark_oracle(outer=problem["outer"])

    def build_set(self, oracle):
        """The direction set of the run, None for the unquantized methods."""
        quantizer = self.quantizer
        if quantizer["method"] != RunMethod.QUANTIZED.value:
            return None
        if quantizer["file"] is not None:
            return load_set(quantizer["file"])
        kind = SetKind.parse(quantizer["kind"])
        if kind is SetKind.CIRCULAR:
            return construct_set(kind, count=quantizer["count"])
        return construct_set(kind, dims=oracle.dims, enumerate_elements=False)

    def build_schedule(self, gamma=None):
        """The step-size schedule, with gamma (or gamma0) replaced when given."""
        schedule = dict(self.schedule)
        if gamma is not None:
            schedule["gamma" if schedule["kind"] == "constant" else "gamma0"] = gamma
        return make_schedule(schedule["kind"], schedule["gamma"], schedule["gamma0"], schedule["power"])

    def build_stopping(self):
        stopping = self.stopping
        kind = stopping["kind"]
        if kind == "none":
            return None
        if kind == StoppingKind.GRAD_NORM.value:
            return StoppingRule.grad_norm(stopping["epsilon"])
        if kind == StoppingKind.L_ALPHA.value:
            return StoppingRule.l_alpha(stopping["epsilon"], stopping["alpha"])
        if kind == StoppingKind.GAP.value:
            return StoppingRule.gap(stopping["epsilon"])
        raise ConfigError(f"Error: stopping.kind must be none, grad_norm, l_alpha or gap, got {kind!r}")

    def to_dict(self):
        return {section: dict(getattr(self, section)) for section in SCHEMA}

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"ExperimentConfig({self.to_dict()!r})"
