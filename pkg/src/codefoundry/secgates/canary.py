#!/usr/bin/env python3
"""
CodeFoundry - Canary Tokens
Per-instance 128-bit markers injected into quarantined prompts. Their
appearance in any response or workflow output signals prompt leakage.
"""

import logging
import secrets
from dataclasses import dataclass, field
from typing import Dict

from ..errors import RandomnessUnavailable

LOG = logging.getLogger("CodeFoundry.secgates")

CANARY_PREFIX = "CFCANARY-"
CANARY_BYTES = 16


@dataclass(frozen=True)
class CanaryToken:
    value: str = field(repr=False)
    instance_id: str
    minted_at: int = 0

    def __str__(self) -> str:
        return f"CanaryToken(instance={self.instance_id}, minted_at={self.minted_at})"


def mint_canary(instance_id: str, minted_at: int = 0) -> CanaryToken:
    """
    Mint a fresh canary bound to one workflow instance.

    Raises:
        RandomnessUnavailable: the OS randomness source failed
    """
    try:
        value = CANARY_PREFIX + secrets.token_hex(CANARY_BYTES)
    except (NotImplementedError, OSError) as e:
        raise RandomnessUnavailable(f"Secure randomness unavailable: {e}") from None
    LOG.debug(f"Minted canary for instance {instance_id}")
    return CanaryToken(value=value, instance_id=instance_id, minted_at=minted_at)


@dataclass
class InstanceGateState:
    """Gate state owned by a single workflow instance"""

    instance_id: str
    canary: CanaryToken
    redactions: Dict[str, str] = field(default_factory=dict, repr=False)
