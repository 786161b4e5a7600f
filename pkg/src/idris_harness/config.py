"""Run configuration: one human-editable YAML file plus env secrets.

Only secrets come from the environment (PROVIDER_URL, PROVIDER_KEY); every
other knob lives in the config file, with CLI flags taking precedence.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .provider import (
    DEFAULT_RETRIES,
    LiveProvider,
    Provider,
    RecordingProvider,
    ReplayProvider,
)
from .refinement import (
    DEFAULT_COMPILE_TEST_LOOP_ITERATIONS,
    StrategyConfig,
    StrategyKind,
)
from .toolchain import (
    DEFAULT_COMPILE_TIMEOUT_S,
    DEFAULT_TEST_TIMEOUT_S,
    CommandAdapter,
    MockToolchain,
    ToolchainAdapter,
)

ENV_PROVIDER_URL = "PROVIDER_URL"
ENV_PROVIDER_KEY = "PROVIDER_KEY"

_DEFAULT_ITERATIONS = {
    StrategyKind.BASELINE: 1,
    StrategyKind.TEST_FEEDBACK: 5,
    StrategyKind.DOC_AUGMENTED: 1,
    StrategyKind.COMPILE_TEST_LOOP: DEFAULT_COMPILE_TEST_LOOP_ITERATIONS,
}

# Commands assume a flat exercise layout (modules importable from the
# workspace root). Tracks with other layouts override these templates in
# the config file's toolchain.adapters table.
_BUILTIN_ADAPTERS: dict[str, dict[str, Any]] = {
    "idris": {
        "compile": ["idris2", "--check", "{starter}"],
        "test": ["idris2", "--exec", "main", "{tests}"],
        "failure_split": "blocks",
    },
}


@dataclass(frozen=True)
class ProviderSettings:
    mode: str = "replay"  # "replay" | "live"
    fixture: str | None = None
    record_to: str | None = None
    endpoint: str | None = None
    model: str = "default"
    temperature: float | None = None
    retries: int = DEFAULT_RETRIES

    def __post_init__(self) -> None:
        if self.mode not in ("replay", "live"):
            raise ConfigError(f"provider mode must be replay or live, got {self.mode!r}")
        if self.mode == "replay" and not self.fixture:
            raise ConfigError("replay mode requires a fixture path")
        if self.mode == "live" and not (self.endpoint or os.environ.get(ENV_PROVIDER_URL)):
            raise ConfigError(f"live mode requires an endpoint (config or {ENV_PROVIDER_URL})")


@dataclass(frozen=True)
class ToolchainSettings:
    adapter: str = "mock"
    compile_timeout_s: float = DEFAULT_COMPILE_TIMEOUT_S
    test_timeout_s: float = DEFAULT_TEST_TIMEOUT_S
    adapters: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    corpus_root: Path
    strategy: StrategyConfig
    provider: ProviderSettings = ProviderSettings(fixture="replay.jsonl")
    toolchain: ToolchainSettings = ToolchainSettings()
    parallelism: int = 1
    slug_filter: tuple[str, ...] | None = None
    output_dir: Path = Path("out")
    retain_workspaces: bool = False
    require_deterministic: bool = False

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.require_deterministic and self.provider.mode != "replay":
            raise ConfigError("require_deterministic is only satisfiable in replay mode")


def strategy_from_mapping(data: Mapping[str, Any]) -> StrategyConfig:
    try:
        kind = StrategyKind(data.get("kind", "baseline"))
    except ValueError:
        valid = ", ".join(k.value for k in StrategyKind)
        raise ConfigError(f"unknown strategy kind {data.get('kind')!r}; expected one of {valid}") from None
    max_iterations = data.get("max_iterations", _DEFAULT_ITERATIONS[kind])
    return StrategyConfig(
        kind=kind,
        max_iterations=int(max_iterations),
        doc_source=data.get("doc_source"),
        passages=int(data.get("passages", 4)),
    )


def load_run_config(path: Path | str | None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Assemble the effective configuration from file plus CLI overrides."""
    raw: dict[str, Any] = {}
    if path is not None:
        cfg_path = Path(path)
        if not cfg_path.is_file():
            raise ConfigError(f"config file {cfg_path} does not exist")
        loaded = yaml.safe_load(cfg_path.read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {cfg_path} must hold a mapping")
        raw = loaded
    overrides = dict(overrides or {})

    strategy_data = dict(raw.get("strategy") or {})
    if overrides.get("strategy"):
        strategy_data["kind"] = overrides["strategy"]
    if overrides.get("max_iterations"):
        strategy_data["max_iterations"] = overrides["max_iterations"]
    strategy = strategy_from_mapping(strategy_data)

    provider_data = dict(raw.get("provider") or {})
    if overrides.get("replay"):
        provider_data["mode"] = "replay"
        provider_data["fixture"] = overrides["replay"]
    if overrides.get("model"):
        provider_data["model"] = overrides["model"]
    provider = ProviderSettings(
        mode=provider_data.get("mode", "replay"),
        fixture=provider_data.get("fixture"),
        record_to=provider_data.get("record_to"),
        endpoint=provider_data.get("endpoint"),
        model=provider_data.get("model", "default"),
        temperature=provider_data.get("temperature"),
        retries=int(provider_data.get("retries", DEFAULT_RETRIES)),
    )

    toolchain_data = dict(raw.get("toolchain") or {})
    if overrides.get("toolchain"):
        toolchain_data["adapter"] = overrides["toolchain"]
    toolchain = ToolchainSettings(
        adapter=toolchain_data.get("adapter", "mock"),
        compile_timeout_s=float(toolchain_data.get("compile_timeout_s", DEFAULT_COMPILE_TIMEOUT_S)),
        test_timeout_s=float(toolchain_data.get("test_timeout_s", DEFAULT_TEST_TIMEOUT_S)),
        adapters=toolchain_data.get("adapters") or {},
    )

    corpus_root = overrides.get("corpus") or raw.get("corpus_root")
    if not corpus_root:
        raise ConfigError("corpus_root is required (config key corpus_root or --corpus)")

    slugs = overrides.get("slugs") or raw.get("slugs")
    slug_filter = tuple(slugs) if slugs else None

    return RunConfig(
        corpus_root=Path(corpus_root),
        strategy=strategy,
        provider=provider,
        toolchain=toolchain,
        parallelism=int(overrides.get("parallelism") or raw.get("parallelism", 1)),
        slug_filter=slug_filter,
        output_dir=Path(overrides.get("out") or raw.get("output_dir", "out")),
        retain_workspaces=bool(raw.get("retain_workspaces", False)),
        require_deterministic=bool(raw.get("require_deterministic", False)),
    )


def build_provider(settings: ProviderSettings) -> Provider:
    if settings.mode == "replay":
        assert settings.fixture is not None
        return ReplayProvider(settings.fixture)
    endpoint = settings.endpoint or os.environ.get(ENV_PROVIDER_URL)
    assert endpoint  # validated at settings construction
    provider: Provider = LiveProvider(
        endpoint=endpoint,
        api_key=os.environ.get(ENV_PROVIDER_KEY),
        retries=settings.retries,
    )
    if settings.record_to:
        provider = RecordingProvider(provider, settings.record_to)
    return provider


def build_toolchain(settings: ToolchainSettings) -> ToolchainAdapter:
    if settings.adapter == "mock" and settings.adapter not in settings.adapters:
        return MockToolchain()
    spec = settings.adapters.get(settings.adapter) or _BUILTIN_ADAPTERS.get(settings.adapter)
    if spec is None:
        known = sorted({"mock", *(_BUILTIN_ADAPTERS), *settings.adapters})
        raise ConfigError(f"unknown toolchain adapter {settings.adapter!r}; known: {', '.join(known)}")
    try:
        return CommandAdapter(
            name=settings.adapter,
            compile_cmd=[str(a) for a in spec["compile"]],
            test_cmd=[str(a) for a in spec["test"]],
            failure_split=str(spec.get("failure_split", "blocks")),
            compile_timeout_s=settings.compile_timeout_s,
            test_timeout_s=settings.test_timeout_s,
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid adapter definition for {settings.adapter!r}: {exc}") from None
