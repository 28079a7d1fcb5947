#!/usr/bin/env python3
"""
CodeFoundry - HTTP Generator Client
Posts prompt sections plus an output-grammar identifier to a generation
endpoint and reads back raw text with token counts.

Request body:
    {"model": ..., "role": ..., "output_grammar": ..., "sections": [{"label", "text"}]}
Response body:
    {"text": ..., "input_tokens": int, "output_tokens": int}
"""

import logging
from typing import Any, Dict, Optional

import requests
from requests.exceptions import RequestException

from ..errors import ClientUnavailable
from ..prompts import AssembledPrompt
from .base import ClientRole, GeneratorClient, Generation, estimate_tokens

LOG = logging.getLogger("CodeFoundry.generators.http")


class HttpGenerator(GeneratorClient):
    """Generator backed by a remote completion endpoint"""

    GENERATOR_ID = "http"

    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        model: str = "default",
        role: ClientRole = ClientRole.PRIVILEGED,
        timeout: float = 60.0,
        verify_ssl: bool = True,
        ca_bundle_path: Optional[str] = None,
    ):
        super().__init__(role)
        if not endpoint:
            raise ValueError("HTTP generator needs an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.session = requests.Session()
        self.session.headers.update({"Content-Type": "application/json"})
        if api_key:
            self.session.headers["Authorization"] = f"Bearer {api_key}"
        if verify_ssl:
            self.session.verify = ca_bundle_path or True
        else:
            self.session.verify = False
            LOG.warning(f"SSL verification disabled for generator endpoint {self.endpoint}")

    @property
    def generator_id(self) -> str:
        return f"http:{self.model}"

    def _payload(self, prompt: AssembledPrompt) -> Dict[str, Any]:
        return {
            "model": self.model,
            "role": self.role.value,
            "output_grammar": prompt.output_grammar,
            "sections": [{"label": label, "text": body} for label, body in prompt.sections],
        }

    def _generate(self, prompt: AssembledPrompt) -> Generation:
        try:
            resp = self.session.post(
                self.endpoint, json=self._payload(prompt), timeout=self.timeout
            )
            resp.raise_for_status()
            data = resp.json()
            if not isinstance(data, dict) or not isinstance(data.get("text"), str):
                raise ClientUnavailable("Generator endpoint returned no 'text' field")
            text = data["text"]
            input_tokens = int(data.get("input_tokens") or estimate_tokens(prompt.text))
            output_tokens = int(data.get("output_tokens") or estimate_tokens(text))
        except (RequestException, ValueError, TypeError) as e:
            LOG.warning(f"Generator endpoint {self.endpoint} failed: {type(e).__name__}")
            raise ClientUnavailable(f"Generator endpoint request failed: {e}") from None

        return Generation(
            text=text,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            generator_id=self.generator_id,
        )

    def close(self) -> None:
        """Close the requests session to prevent connection leaks"""
        try:
            self.session.close()
            LOG.debug(f"Closed generator session for {self.endpoint}")
        except Exception as e:
            LOG.debug(f"Error closing generator session: {e}")
