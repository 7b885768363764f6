"""
Run configuration

A run config is flat `key = value` text with one `[section]` per module,
parsed with configparser and validated with pydantic. Environment variables
(read through python-dotenv) override the file; command-line flags override
both.

    [detector]      params_file, preset, eta0, eta0_sigma
    [window]        t_start, t_end, bin_width
    [matrix]        n_max, order, ap_order
    [eme]           alpha, epsilon, max_iter, raise_on_failure, nbar_exp, fit_method
    [charfit]       fit thresholds and histogram settings
    [sim]           source, pulse and record settings
    [uncertainty]   mc_samples, sources, progress
    [run]           seed, threads, log_level
    [output]        output paths, may use {out}, {seed} and {verb}
"""

import configparser
import io
import json
import os
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from spadrecon.charfit.schemas import CharacterizationReport, CharfitSettings
from spadrecon.core.schemas import DEFAULT_BIN_WIDTH, CycleWindow, DetectorParams
from spadrecon.eme.schemas import EmeConfig
from spadrecon.errors import ConfigError
from spadrecon.sim.schemas import SimSpec
from spadrecon.uncertainty.schemas import SOURCES
from spadrecon.utils.parameter_substitution import substitute_in_mapping

ENV_THREADS = "SPADRECON_THREADS"
ENV_SEED = "SPADRECON_SEED"
ENV_LOG_LEVEL = "SPADRECON_LOG_LEVEL"

NONE_TOKEN = "none"


class DetectorSection(BaseModel):
    """Where detector parameters come from"""
    params_file: Optional[str] = Field(None, description="DetectorParams or CharacterizationReport JSON")
    preset: Optional[str] = Field(None, description="SPAD1 or SPAD2 when no file is given")
    eta0: Optional[float] = Field(None, ge=0.0, le=1.0, description="Overrides the file's efficiency")
    eta0_sigma: Optional[float] = Field(None, ge=0.0)

    def load(self) -> DetectorParams:
        """
        Resolve detector parameters

        Raises:
            FileNotFoundError: If params_file does not exist
            ConfigError: If neither a file nor a preset is configured
        """
        if self.params_file:
            if not os.path.exists(self.params_file):
                raise FileNotFoundError(f"Detector file not found: {self.params_file}")
            try:
                with open(self.params_file, "r", encoding="utf-8") as handle:
                    data = json.load(handle)
                if "detector" in data:
                    report = CharacterizationReport.model_validate(data)
                    params = report.to_detector_params(self.eta0, self.eta0_sigma)
                else:
                    params = DetectorParams.model_validate(data)
            except (json.JSONDecodeError, ValidationError) as exc:
                raise ConfigError(f"Invalid detector file {self.params_file}: {exc}") from exc
        elif self.preset:
            try:
                params = DetectorParams.from_table(self.preset)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        else:
            raise ConfigError("Set [detector] params_file or preset")

        update = {}
        if self.eta0 is not None:
            update["eta0"] = self.eta0
        if self.eta0_sigma is not None:
            update["eta0_sigma"] = self.eta0_sigma
        return params.model_copy(update=update) if update else params


class WindowSection(BaseModel):
    t_start: float = Field(0.0, ge=0.0, description="Window start in the cycle, s")
    t_end: Optional[float] = Field(None, description="Window end in the cycle, s")
    bin_width: float = Field(DEFAULT_BIN_WIDTH, gt=0.0, description="Analysis bin width, s")

    def to_window(self) -> CycleWindow:
        if self.t_end is None:
            raise ConfigError("[window] t_end is required")
        try:
            return CycleWindow(t_start=self.t_start, t_end=self.t_end, bin_width=self.bin_width)
        except ValidationError as exc:
            raise ConfigError(f"Invalid [window]: {exc}") from exc


class MatrixSection(BaseModel):
    n_max: Optional[int] = Field(None, ge=0, description="Truncation; default from the click mean")
    order: Optional[int] = Field(None, ge=0, description="Recovery order o_R; default by doubling")
    ap_order: int = Field(2, ge=0, description="Afterpulse order o_a")


class EmeSection(EmeConfig):
    nbar_exp: Optional[float] = Field(None, gt=0.0, description="Calibrated mean photon number")
    fit_method: str = Field("least_squares", description="least_squares or likelihood")

    def solver(self) -> EmeConfig:
        return EmeConfig(**self.model_dump(include=set(EmeConfig.model_fields)))


class UncertaintySection(BaseModel):
    mc_samples: int = Field(1000, ge=2, description="Monte Carlo samples per run")
    sources: List[str] = Field(default_factory=lambda: list(SOURCES), description="Per-parameter breakdown")
    progress: bool = Field(False, description="tqdm progress bar")


class RunSection(BaseModel):
    seed: int = Field(0, ge=0)
    threads: int = Field(1, description="joblib workers (-1: all cores)")
    log_level: str = Field("INFO")


class OutputSection(BaseModel):
    out: str = Field("runs", description="Output directory")
    distribution: str = Field("{out}/distribution.json")
    metrics: str = Field("{out}/metrics.json")
    bars: str = Field("{out}/distribution_bars.txt")
    uncertainty: str = Field("{out}/uncertainty.json")
    uncertainty_bars: str = Field("{out}/uncertainty_bars.txt")
    characterization: str = Field("{out}/characterization.json")
    matrix_dir: str = Field("{out}/matrix")
    tags: str = Field("{out}/tags_{seed}.txt")
    histogram: str = Field("{out}/{verb}_histogram.txt")


class RunConfig(BaseModel):
    """Complete configuration of one command invocation"""
    detector: DetectorSection = Field(default_factory=DetectorSection)
    window: WindowSection = Field(default_factory=WindowSection)
    matrix: MatrixSection = Field(default_factory=MatrixSection)
    eme: EmeSection = Field(default_factory=EmeSection)
    charfit: CharfitSettings = Field(default_factory=CharfitSettings)
    sim: SimSpec = Field(default_factory=SimSpec)
    uncertainty: UncertaintySection = Field(default_factory=UncertaintySection)
    run: RunSection = Field(default_factory=RunSection)
    output: OutputSection = Field(default_factory=OutputSection)

    class Config:
        json_schema_extra = {
            "example": {
                "detector": {"preset": "SPAD1"},
                "window": {"t_start": 0.0, "t_end": 3e-6},
                "matrix": {"n_max": 20, "ap_order": 2},
                "run": {"seed": 7, "threads": 4}
            }
        }

    def output_paths(self, verb: str) -> OutputSection:
        """Output section with {out}, {seed} and {verb} substituted"""
        values = self.output.model_dump()
        parameters = {"out": values.pop("out"), "seed": self.run.seed, "verb": verb}
        resolved = substitute_in_mapping(values, parameters, strict=True)
        return OutputSection(out=parameters["out"], **resolved)


def _format_value(value: Any) -> str:
    if value is None:
        return NONE_TOKEN
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def _parse_value(raw: str) -> Any:
    text = raw.strip()
    if text.lower() == NONE_TOKEN or text == "":
        return None
    if text[0] in "[{":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Malformed list value {text!r}: {exc}") from exc
    return text


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    """
    Parse INI text into a RunConfig

    Raises:
        ConfigError: On syntax errors, unknown sections or keys, or invalid values
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"Cannot parse {source}: {exc}") from exc

    sections: Dict[str, Dict[str, Any]] = {}
    for section in parser.sections():
        if section not in RunConfig.model_fields:
            raise ConfigError(f"Unknown section [{section}] in {source}; known: {list(RunConfig.model_fields)}")
        model = RunConfig.model_fields[section].annotation
        values = {}
        for key, raw in parser.items(section):
            if key not in model.model_fields:
                raise ConfigError(f"Unknown key '{key}' in [{section}] of {source}")
            parsed = _parse_value(raw)
            if parsed is not None:
                values[key] = parsed
        sections[section] = values
    try:
        return RunConfig.model_validate(sections)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration in {source}: {exc}") from exc


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Load a run config file (defaults when path is None)

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If it is malformed
    """
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        return parse_run_config(handle.read(), source=path)


def dump_run_config(cfg: RunConfig, path: Optional[str] = None) -> str:
    """Serialize every field of every section; parse(dump(cfg)) == cfg"""
    parser = configparser.ConfigParser(interpolation=None)
    for section in RunConfig.model_fields:
        model = getattr(cfg, section)
        parser[section] = {key: _format_value(getattr(model, key)) for key in type(model).model_fields}
    buffer = io.StringIO()
    parser.write(buffer)
    text = buffer.getvalue()
    if path is not None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    return text


def apply_environment(cfg: RunConfig, dotenv_path: Optional[str] = None) -> RunConfig:
    """
    Override [run] settings from SPADRECON_THREADS, SPADRECON_SEED and
    SPADRECON_LOG_LEVEL (a .env file is loaded first when present)

    Raises:
        ConfigError: If a variable is not a valid value
    """
    load_dotenv(dotenv_path)
    update: Dict[str, Any] = {}
    for variable, key, convert in ((ENV_THREADS, "threads", int), (ENV_SEED, "seed", int),
                                   (ENV_LOG_LEVEL, "log_level", str.upper)):
        raw = os.getenv(variable)
        if raw is None or raw.strip() == "":
            continue
        try:
            update[key] = convert(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{variable}={raw!r} is not valid: {exc}") from exc
    if not update:
        return cfg
    return cfg.model_copy(update={"run": cfg.run.model_copy(update=update)})
