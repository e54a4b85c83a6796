"""Run configuration: one YAML file describing a whole workflow.

Paths inside the file are resolved relative to the file itself, so a config
can travel with its fixtures. Credentials are deliberately not accepted
here; the API key comes from the environment only.

Layout::

    corpus: docs.jsonl            # jsonl file or directory of .txt files
    corpus_format: jsonl          # optional; inferred when omitted
    sample: {n: 100, seed: 13}    # optional subsampling
    templates:                    # optional; packaged defaults otherwise
      summarize: prompts/summarize.txt
    client:
      backend: replay             # http | record | replay
      base_url: http://localhost:8000
      cache: cache.jsonl
      model: default
      temperature: 0.7
      top_p: 0.95
      max_new_tokens: 1024
      parallelism: 1
    pipeline:
      grounding: normalized       # exact | normalized | off
      keep_empty: false
      max_doc_chars: null
    output_dir: out
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import Document, load_corpus, sample_corpus
from .llm import BACKENDS, GenerationParams, LLMClient
from .pipeline import STAGES, PromptTemplate, default_templates, load_template
from .validation import GROUNDING_POLICIES


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    corpus_path: Path | None = None
    corpus_format: str | None = None
    sample_n: int | None = None
    sample_seed: int = 0
    template_paths: dict[str, Path] = field(default_factory=dict)
    backend: str = "replay"
    base_url: str | None = None
    cache_path: Path | None = None
    model_name: str = "default"
    temperature: float = 0.7
    top_p: float = 0.95
    max_new_tokens: int = 1024
    parallelism: int = 1
    grounding: str = "normalized"
    keep_empty: bool = False
    max_doc_chars: int | None = None
    output_dir: Path = Path("out")


_TOP_KEYS = {"corpus", "corpus_format", "sample", "templates", "client",
             "pipeline", "output_dir"}
_CLIENT_KEYS = {"backend", "base_url", "cache", "model", "temperature",
                "top_p", "max_new_tokens", "parallelism"}
_PIPELINE_KEYS = {"grounding", "keep_empty", "max_doc_chars"}
_SAMPLE_KEYS = {"n", "seed"}


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    for secret in ("api_key", "apikey", "token", "secret"):
        if secret in section:
            raise ConfigError(f"{where} must not contain {secret!r}; "
                              "credentials belong in the environment")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    _check_keys(raw, _TOP_KEYS, "config")
    base = path.parent

    def resolve(p) -> Path:
        p = Path(str(p))
        return p if p.is_absolute() else base / p

    cfg = RunConfig()
    if raw.get("corpus") is not None:
        cfg.corpus_path = resolve(raw["corpus"])
    cfg.corpus_format = raw.get("corpus_format")
    if cfg.corpus_format not in (None, "jsonl", "text-directory"):
        raise ConfigError(f"unknown corpus_format {cfg.corpus_format!r}")

    sample = raw.get("sample") or {}
    _check_keys(sample, _SAMPLE_KEYS, "sample")
    cfg.sample_n = sample.get("n")
    cfg.sample_seed = int(sample.get("seed", 0))
    if cfg.sample_n is not None and int(cfg.sample_n) < 1:
        raise ConfigError("sample n must be >= 1")

    templates = raw.get("templates") or {}
    _check_keys(templates, set(STAGES), "templates")
    cfg.template_paths = {stage: resolve(p) for stage, p in templates.items()}
    for stage, p in cfg.template_paths.items():
        if not p.exists():
            raise ConfigError(f"template for stage {stage!r} not found: {p}")

    client = raw.get("client") or {}
    _check_keys(client, _CLIENT_KEYS, "client")
    cfg.backend = client.get("backend", cfg.backend)
    if cfg.backend not in BACKENDS:
        raise ConfigError(f"unknown backend {cfg.backend!r}")
    cfg.base_url = client.get("base_url")
    if client.get("cache") is not None:
        cfg.cache_path = resolve(client["cache"])
    cfg.model_name = str(client.get("model", cfg.model_name))
    cfg.temperature = float(client.get("temperature", cfg.temperature))
    cfg.top_p = float(client.get("top_p", cfg.top_p))
    cfg.max_new_tokens = int(client.get("max_new_tokens", cfg.max_new_tokens))
    cfg.parallelism = int(client.get("parallelism", cfg.parallelism))
    if cfg.parallelism < 1:
        raise ConfigError("parallelism must be >= 1")

    pipeline = raw.get("pipeline") or {}
    _check_keys(pipeline, _PIPELINE_KEYS, "pipeline")
    cfg.grounding = pipeline.get("grounding", cfg.grounding)
    if cfg.grounding not in GROUNDING_POLICIES:
        raise ConfigError(f"unknown grounding policy {cfg.grounding!r}")
    cfg.keep_empty = bool(pipeline.get("keep_empty", cfg.keep_empty))
    if pipeline.get("max_doc_chars") is not None:
        cfg.max_doc_chars = int(pipeline["max_doc_chars"])
        if cfg.max_doc_chars < 1:
            raise ConfigError("max_doc_chars must be >= 1")

    cfg.output_dir = resolve(raw.get("output_dir", "out"))
    return cfg


def build_templates(cfg: RunConfig) -> dict[str, PromptTemplate]:
    templates = default_templates()
    for stage, path in cfg.template_paths.items():
        templates[stage] = load_template(path, stage)
    return templates


def build_client(cfg: RunConfig) -> LLMClient:
    try:
        params = GenerationParams(temperature=cfg.temperature, top_p=cfg.top_p,
                                  max_new_tokens=cfg.max_new_tokens,
                                  model_name=cfg.model_name)
        return LLMClient(backend=cfg.backend, base_url=cfg.base_url,
                         cache_path=cfg.cache_path, params=params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_docs(cfg: RunConfig, seed: int | None = None) -> list[Document]:
    if cfg.corpus_path is None:
        raise ConfigError("config declares no corpus path")
    if not cfg.corpus_path.exists():
        raise ConfigError(f"corpus not found: {cfg.corpus_path}")
    docs = load_corpus(cfg.corpus_path, cfg.corpus_format)
    if cfg.sample_n is not None:
        docs = sample_corpus(docs, int(cfg.sample_n),
                             cfg.sample_seed if seed is None else seed)
    return docs
