#!/usr/bin/env python3
"""
CodeFoundry - Generator Client Abstraction
Privileged clients serve compile-time generation; quarantined clients serve
bounded runtime extraction over untrusted input. Each call reports tokens.
"""

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict

from ..prompts import AssembledPrompt


class ClientRole(str, Enum):
    PRIVILEGED = "privileged"
    QUARANTINED = "quarantined"


@dataclass(frozen=True)
class Generation:
    """One client response with its declared token accounting"""

    text: str
    input_tokens: int = 0
    output_tokens: int = 0
    generator_id: str = ""

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens


def estimate_tokens(text: str) -> int:
    """Rough token count (about four characters per token)"""
    return max(1, (len(text) + 3) // 4) if text else 0


class GeneratorClient(ABC):
    """
    Abstract base class for generator clients.

    Subclasses implement `_generate`; `generate` counts calls so tests can
    assert the one-time-invocation and zero-token properties.
    """

    GENERATOR_ID = "abstract"

    def __init__(self, role: ClientRole = ClientRole.PRIVILEGED):
        self.role = ClientRole(role)
        self.call_count = 0
        self._lock = threading.Lock()

    @property
    def generator_id(self) -> str:
        return self.GENERATOR_ID

    def generate(self, prompt: AssembledPrompt) -> Generation:
        with self._lock:
            self.call_count += 1
        return self._generate(prompt)

    @abstractmethod
    def _generate(self, prompt: AssembledPrompt) -> Generation:
        pass

    def describe(self) -> Dict[str, Any]:
        return {
            "generator_id": self.generator_id,
            "role": self.role.value,
            "calls": self.call_count,
        }

    def close(self) -> None:
        """Release client resources"""
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return False
