"""
Helper utility functions
"""
import hashlib
import json
import math
import os
import re
from typing import Any, Dict, List, Tuple


def thread_cap() -> int:
    """Worker count for thread pools, capped by FERMATLAB_THREADS"""
    default = os.cpu_count() or 1
    raw = os.getenv("FERMATLAB_THREADS", "").strip()
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def run_id(config: Dict[str, Any]) -> str:
    """Stable short hash of a config echo; identical configs share it"""
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def parse_complex(text: str) -> complex:
    """Parse '0.5', '-1+2j', '0.3-0.1i' or '(0.3,0.1)'"""
    s = text.strip().replace(" ", "")
    pair = re.fullmatch(r"\(?([-+0-9.eE]+),([-+0-9.eE]+)\)?", s)
    if pair:
        return complex(float(pair.group(1)), float(pair.group(2)))
    s = s.replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise ValueError(f"Could not parse complex number from {text!r}")


def parse_complex_list(text: str) -> List[complex]:
    """Semicolon or comma separated complex numbers; '(re,im)' pairs need semicolons"""
    text = text.strip()
    if not text:
        return []
    sep = ";" if ";" in text else ","
    return [parse_complex(part) for part in text.split(sep) if part.strip()]


def parse_int_list(text: str) -> List[int]:
    return [int(part) for part in re.split(r"[,\s]+", text.strip()) if part]


def parse_float_list(text: str) -> List[float]:
    return [float(part) for part in re.split(r"[,\s]+", text.strip()) if part]


def parse_range(text: str) -> Tuple[int, int]:
    """'3..12', '3-12' or '3:12' -> (3, 12), inclusive"""
    match = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|-|:)\s*(\d+)\s*", text)
    if not match:
        raise ValueError(f"Could not parse exponent range from {text!r}")
    return int(match.group(1)), int(match.group(2))


def log_plus(x: float) -> float:
    """log+ x = max(0, log x)"""
    return math.log(x) if x > 1.0 else 0.0
