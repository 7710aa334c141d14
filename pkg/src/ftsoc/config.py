"""Protection configurations and simulation tunables."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, replace
from functools import cached_property


class Protection(str, enum.Enum):
    CFG0 = "cfg0"
    CFG1 = "cfg1"
    CFG2 = "cfg2"
    CFG3 = "cfg3"
    CFG4 = "cfg4"
    TMRG = "tmrg"

    @classmethod
    def parse(cls, name: str) -> "Protection":
        key = name.strip().lower().replace(" ", "").replace(".", "").replace("_", "")
        if key.isdigit():
            key = f"cfg{key}"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown configuration {name!r}") from None


ALL_CONFIGS = tuple(Protection)


@dataclass(frozen=True)
class SocConfig:
    protection: Protection = Protection.CFG0
    scrub_period: int = 1
    resync_latency: int = 64
    fix_queue_depth: int = 2
    uart_divider: int = 16
    gpio_pads: int = 32
    bank_words: int = 2048

    @classmethod
    def of(cls, protection, **kw) -> "SocConfig":
        if isinstance(protection, SocConfig):
            return replace(protection, **kw)
        if isinstance(protection, str):
            protection = Protection.parse(protection)
        return cls(protection=protection, **kw)

    @property
    def name(self) -> str:
        return self.protection.value

    @cached_property
    def ecc(self) -> bool:
        return self.protection in (Protection.CFG1, Protection.CFG2, Protection.CFG3, Protection.CFG4)

    @cached_property
    def tcls(self) -> bool:
        return self.protection in (Protection.CFG2, Protection.CFG3, Protection.CFG4)

    @cached_property
    def overlap(self) -> bool:
        return self.protection in (Protection.CFG3, Protection.CFG4)

    @cached_property
    def tmr_periph(self) -> bool:
        return self.protection is Protection.CFG4

    @cached_property
    def tmrg(self) -> bool:
        return self.protection is Protection.TMRG

    @cached_property
    def monitor(self) -> bool:
        return self.protection is not Protection.CFG0

    def with_(self, **kw) -> "SocConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protection"] = self.protection.value
        return d
