"""Gateway configuration: JSON file plus environment overrides.

File schema (all optional except transport and auth_token):

    {
      "transport": "tcp:127.0.0.1:4500",
      "auth_token": "at-least-sixteen-chars",
      "sim_pin": "0000",
      "mmsc_url": "http://mmsc.example/mms",
      "quirk_profiles_path": "quirks.json",
      "share_root": "/var/lib/cellgate/share",
      "share_owner": "default",
      "rtp_bind": "127.0.0.1:0",
      "surveillance": {"alert_number": "+33612345678", "enabled": true,
                       "message_template": "Motion detected at {time}"},
      "mms_deferred_retrieval": true,
      "sms_text_mode": false
    }

Environment: CELLGATE_CONFIG points at the file, CELLGATE_TOKEN overrides
auth_token.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

from .errors import CellgateError

MIN_TOKEN_LENGTH = 16


class ConfigError(CellgateError):
    pass


@dataclass
class SurveillanceConfig:
    alert_number: str = ""
    enabled: bool = False
    message_template: str = "Motion detected at {time}"

    def as_dict(self) -> dict:
        return {
            "alert_number": self.alert_number,
            "enabled": self.enabled,
            "message_template": self.message_template,
        }


@dataclass
class GatewayConfig:
    transport: str = "tcp:127.0.0.1:4500"
    auth_token: str = ""
    sim_pin: Optional[str] = None
    mmsc_url: Optional[str] = None
    quirk_profiles_path: Optional[str] = None
    share_root: str = ""
    share_owner: str = "default"
    rtp_bind: str = "127.0.0.1:0"
    surveillance: SurveillanceConfig = field(default_factory=SurveillanceConfig)
    mms_deferred_retrieval: bool = True
    sms_text_mode: bool = False

    def validate(self) -> None:
        if not self.transport:
            raise ConfigError("transport is required")
        if len(self.auth_token) < MIN_TOKEN_LENGTH:
            raise ConfigError(f"auth_token must be at least {MIN_TOKEN_LENGTH} characters")

    @property
    def rtp_bind_tuple(self) -> "tuple[str, int]":
        host, _, port = self.rtp_bind.rpartition(":")
        return (host or "127.0.0.1", int(port or 0))


def load_config(path: Optional[str] = None) -> GatewayConfig:
    path = path or os.environ.get("CELLGATE_CONFIG")
    raw: dict = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    config = GatewayConfig(
        transport=raw.get("transport", GatewayConfig.transport),
        auth_token=raw.get("auth_token", ""),
        sim_pin=raw.get("sim_pin"),
        mmsc_url=raw.get("mmsc_url"),
        quirk_profiles_path=raw.get("quirk_profiles_path"),
        share_root=raw.get("share_root", ""),
        share_owner=raw.get("share_owner", "default"),
        rtp_bind=raw.get("rtp_bind", "127.0.0.1:0"),
        mms_deferred_retrieval=raw.get("mms_deferred_retrieval", True),
        sms_text_mode=raw.get("sms_text_mode", False),
    )
    if isinstance(raw.get("surveillance"), dict):
        s = raw["surveillance"]
        config.surveillance = SurveillanceConfig(
            alert_number=s.get("alert_number", ""),
            enabled=bool(s.get("enabled", False)),
            message_template=s.get("message_template", SurveillanceConfig.message_template),
        )
    token_env = os.environ.get("CELLGATE_TOKEN")
    if token_env:
        config.auth_token = token_env
    if not config.share_root:
        config.share_root = os.path.join(tempfile.gettempdir(), "cellgate-share")
    config.validate()
    return config
