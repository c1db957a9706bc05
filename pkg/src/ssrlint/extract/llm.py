"""Role extraction through a chat-completions endpoint with majority voting over cached samples."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import httpx

from ..errors import MalformedResponse, ServiceUnavailable
from ..ingest import ir
from .info import FUNC_LABELS, FUNC_ROLES, VAR_LABELS, VAR_ROLES, FuncRole, StakingInfo, validate

log = logging.getLogger(__name__)

TEMPLATE_VERSION = "v1"
PROMPT_KINDS = ("variables", "functions")


def default_cache_dir() -> Path:
    env = os.environ.get("SSRLINT_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ssrlint" / "llm"


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str = "default"
    api_key: str | None = field(default=None, repr=False)
    sample_count: int = 3
    timeout: float = 60.0
    cache_dir: Path = field(default_factory=default_cache_dir)
    max_source_chars: int = 48_000
    temperature: float = 0.7

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    @classmethod
    def from_env(cls, **overrides) -> LlmConfig:
        kw = {
            "endpoint": os.environ.get("SSRLINT_LLM_ENDPOINT", ""),
            "model": os.environ.get("SSRLINT_LLM_MODEL", "default"),
            "api_key": os.environ.get("SSRLINT_LLM_KEY") or None,
        }
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


def load_template(kind: str, version: str = TEMPLATE_VERSION) -> str:
    return resources.files("ssrlint.extract").joinpath("prompts", f"{kind}.{version}.txt").read_text(encoding="utf-8")


def render_prompt(kind: str, contract_name: str, source: str) -> str:
    return load_template(kind).replace("{contract_name}", contract_name).replace("{source}", source)


# --- cache -------------------------------------------------------------------

_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def cache_key(source_hash: str, model: str, kind: str, sample: int, contract: str) -> str:
    raw = json.dumps([source_hash, TEMPLATE_VERSION, model, kind, contract, sample])
    return hashlib.sha256(raw.encode()).hexdigest()


class ResponseCache:
    """One JSON file per key; writes go through a temp file and an atomic rename."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        p = self._path(key)
        try:
            return json.loads(p.read_text(encoding="utf-8"))["content"]
        except (OSError, ValueError, KeyError):
            return None

    def put(self, key: str, content: str) -> None:
        with _locks_guard:
            lock = _locks.setdefault(key, threading.Lock())
        with lock:
            p = self._path(key)
            p.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=p.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump({"content": content}, fh)
                os.replace(tmp, p)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise


# --- transport -----------------------------------------------------------------

def _redact(headers: dict) -> dict:
    return {k: ("***" if k.lower() == "authorization" else v) for k, v in headers.items()}


def complete(cfg: LlmConfig, system: str, user: str, client: httpx.Client | None = None) -> str:
    """One chat-completion round trip; returns the message text."""
    if not cfg.endpoint:
        raise ServiceUnavailable("no LLM endpoint configured (set SSRLINT_LLM_ENDPOINT)")
    headers = {"Content-Type": "application/json"}
    if cfg.api_key:
        headers["Authorization"] = f"Bearer {cfg.api_key}"
    body = {
        "model": cfg.model,
        "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
        "temperature": cfg.temperature,
    }
    log.debug("LLM request to %s headers=%s body=%s", cfg.endpoint, _redact(headers), json.dumps(body)[:2000])
    try:
        if client is not None:
            resp = client.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout)
        else:
            resp = httpx.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout)
    except httpx.HTTPError as e:
        raise ServiceUnavailable(f"LLM endpoint unreachable: {e}") from None
    if resp.status_code >= 500 or resp.status_code in (401, 403, 404, 429):
        raise ServiceUnavailable(f"LLM endpoint returned HTTP {resp.status_code}")
    log.debug("LLM response %s: %s", resp.status_code, resp.text[:2000])
    try:
        data = resp.json()
    except ValueError:
        return resp.text
    if isinstance(data, dict):
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            msg = choices[0].get("message") or {}
            if isinstance(msg, dict) and isinstance(msg.get("content"), str):
                return msg["content"]
            if isinstance(choices[0].get("text"), str):
                return choices[0]["text"]
        if isinstance(data.get("content"), str):
            return data["content"]
    return resp.text


def parse_json_answer(text: str) -> dict | None:
    """First JSON object in a reply, tolerating code fences and surrounding prose."""
    t = text.strip()
    t = re.sub(r"^```(?:json)?\s*|\s*```$", "", t)
    try:
        obj = json.loads(t)
        return obj if isinstance(obj, dict) else None
    except ValueError:
        pass
    start = t.find("{")
    while start >= 0:
        depth = 0
        for i in range(start, len(t)):
            if t[i] == "{":
                depth += 1
            elif t[i] == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(t[start : i + 1])
                        if isinstance(obj, dict):
                            return obj
                    except ValueError:
                        break
                    break
        start = t.find("{", start + 1)
    return None


def majority(values: list) -> object:
    """Most frequent value; ties go to the value seen first."""
    keys = [json.dumps(v, sort_keys=True) for v in values]
    counts = Counter(keys)
    best = max(counts.values())
    for k, v in zip(keys, values):
        if counts[k] == best:
            return v
    return None


def vote(samples: list[dict], fields: list[str]) -> dict:
    out = {}
    for f in fields:
        vals = [_canon(s.get(f, [])) for s in samples]
        out[f] = majority(vals)
    return out


def _canon(v):
    if isinstance(v, str):
        return [v] if v else []
    if isinstance(v, list):
        items = []
        for x in v:
            if isinstance(x, dict):
                items.append({"function": str(x.get("function", "")), "statement": str(x.get("statement", ""))})
            elif isinstance(x, str) and x:
                items.append(x)
        return items
    return []


# --- extraction --------------------------------------------------------------------

def contract_source(unit: ir.SourceUnit, contract: ir.ContractIR, budget: int) -> str:
    """Source handed to the model: the whole file when it fits, else the contract and its bases."""
    texts = [unit.sources[p] for p in unit.files if p in unit.sources] or list(unit.sources.values())
    whole = "\n".join(texts)
    if len(whole) <= budget or not whole:
        return whole[:budget] if whole else ""
    lines = whole.splitlines()
    starts = sorted((c.loc.line, c.name) for c in unit.contracts if c.loc.line)
    wanted = set(contract.linearization or [contract.name])
    chunks = []
    for i, (ln, name) in enumerate(starts):
        if name in wanted:
            end = starts[i + 1][0] - 1 if i + 1 < len(starts) else len(lines)
            chunks.append("\n".join(lines[ln - 1 : end]))
    return "\n".join(chunks)[:budget]


def _norm_stmt(s: str) -> str:
    return re.sub(r"\s+", "", s).rstrip(";")


def _statement_line(text: str, fn: ir.FunctionIR, unit: ir.SourceUnit) -> int:
    if not text:
        return 0
    src = unit.sources.get(fn.loc.file)
    if src is None:
        return 0
    needle = _norm_stmt(text)
    if not needle:
        return 0
    lines = src.splitlines()
    for i in range(max(fn.loc.line - 1, 0), len(lines)):
        if needle in _norm_stmt(lines[i]) or (len(_norm_stmt(lines[i])) > 8 and _norm_stmt(lines[i]) in needle):
            return i + 1
    return 0


def _sample(cfg, cache, kind, unit, contract, source, i, client) -> str:
    key = cache_key(unit.source_hash, cfg.model, kind, i, contract.name)
    hit = cache.get(key)
    if hit is not None:
        return hit
    text = complete(cfg, load_template("system"), render_prompt(kind, contract.name, source), client)
    cache.put(key, text)
    return text


def extract_llm(unit: ir.SourceUnit, contract: ir.ContractIR, cfg: LlmConfig, client: httpx.Client | None = None) -> StakingInfo:
    """Ask the model for variable and function roles, vote across samples, validate names."""
    cache = ResponseCache(cfg.cache_dir)
    source = contract_source(unit, contract, cfg.max_source_chars)
    answers: dict[str, dict] = {}
    for kind in PROMPT_KINDS:
        parsed = []
        for i in range(cfg.sample_count):
            obj = parse_json_answer(_sample(cfg, cache, kind, unit, contract, source, i, client))
            if obj is not None:
                parsed.append(obj)
        if not parsed:
            raise MalformedResponse(f"no usable JSON in {cfg.sample_count} {kind} sample(s) for {contract.name}")
        fields = list(VAR_LABELS.values()) if kind == "variables" else list(FUNC_LABELS.values())
        answers[kind] = vote(parsed, fields)

    info = StakingInfo(provenance=f"llm({cfg.model})")
    for role in VAR_ROLES:
        for name in answers["variables"].get(VAR_LABELS[role]) or []:
            if isinstance(name, str) and name not in info.var_roles[role]:
                info.var_roles[role].append(name.strip())
    for role in FUNC_ROLES:
        for item in answers["functions"].get(FUNC_LABELS[role]) or []:
            if isinstance(item, str):
                item = {"function": item, "statement": ""}
            fname = item.get("function", "").strip().split("(")[0]
            if not fname:
                continue
            fns = contract.functions_named(fname)
            line = _statement_line(item.get("statement", ""), fns[0], unit) if fns else 0
            fr = FuncRole(fname, line)
            if fr not in info.func_roles[role]:
                info.func_roles[role].append(fr)
    return validate(info, contract)
