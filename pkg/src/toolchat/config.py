"""Runtime settings, resolved from environment variables.

Everything has an offline default: the built-in catalog, the deterministic
embedder, mock adapters, and no remote endpoints.  Remote backends activate
only when their endpoint variables are set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    llm_endpoint: str = ""
    llm_model: str = "gpt-4"
    llm_api_key: str = ""
    llm_timeout: float = 60.0
    temperature: float = 0.0
    embed_endpoint: str = ""
    embed_model: str = "text-embedding-3-small"
    embed_api_key: str = ""
    embed_dim: int = 256
    catalog_path: str = ""
    vertex_map_path: str = ""
    shape_model_path: str = ""
    artifact_dir: str = "artifacts"
    persist_dir: str = ""
    step_timeout: float = 60.0

    @classmethod
    def from_env(cls, env: dict | None = None) -> "Settings":
        env = env if env is not None else os.environ
        get = env.get
        return cls(
            llm_endpoint=get("TOOLCHAT_LLM_ENDPOINT", ""),
            llm_model=get("TOOLCHAT_LLM_MODEL", "gpt-4"),
            llm_api_key=get("TOOLCHAT_LLM_API_KEY", ""),
            llm_timeout=float(get("TOOLCHAT_LLM_TIMEOUT", "60")),
            temperature=float(get("TOOLCHAT_TEMPERATURE", "0")),
            embed_endpoint=get("TOOLCHAT_EMBED_ENDPOINT", ""),
            embed_model=get("TOOLCHAT_EMBED_MODEL", "text-embedding-3-small"),
            embed_api_key=get("TOOLCHAT_EMBED_API_KEY", ""),
            embed_dim=int(get("TOOLCHAT_EMBED_DIM", "256")),
            catalog_path=get("TOOLCHAT_CATALOG", ""),
            vertex_map_path=get("TOOLCHAT_VERTEX_MAP", ""),
            shape_model_path=get("TOOLCHAT_SHAPE_MODEL", ""),
            artifact_dir=get("TOOLCHAT_ARTIFACT_DIR", "artifacts"),
            persist_dir=get("TOOLCHAT_PERSIST_DIR", ""),
            step_timeout=float(get("TOOLCHAT_STEP_TIMEOUT", "60")),
        )
