import logging
import numpy as np
from typing import Any, Literal, TypeAlias, Union, get_args, get_origin

logger = logging.getLogger("mclgan")

StreamName: TypeAlias = Literal["init_generator", "init_discriminator", "real", "latent", "eval", "data", "kmeans"]
STREAM_IDS: dict[str, int] = {name: i for i, name in enumerate(get_args(StreamName))}
"""Every consumer of randomness draws from its own stream, so adding draws to one
stream never shifts the numbers another stream produces."""


def make_rng(seed: int, stream: Union[StreamName, int] = 0, *extra: int) -> np.random.Generator:
    """Seeded generator on numpy's Philox4x64-10 counter-based bit generator.

    The key is derived from (seed, stream, *extra) by numpy's SeedSequence, both of which
    are fixed, documented algorithms, so streams are identical across platforms.

    :param seed: Non-negative run seed.
    :param stream: Stream name (see STREAM_IDS) or integer stream id.
    :param extra: Further integers mixed into the key, e.g. the training step of an evaluation."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    stream_id = STREAM_IDS[stream] if isinstance(stream, str) else int(stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream_id, *extra])))


def box_muller(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Standard normal draws from pairs of uniforms (Box-Muller transform).

    Uses only rng.random(), so the stream is reproducible wherever Philox is."""
    n = int(np.prod(shape))
    n_pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(n_pairs)  # (0, 1], keeps the log finite
    u2 = rng.random(n_pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    normals = np.concatenate([radius * np.cos(2 * np.pi * u2), radius * np.sin(2 * np.pi * u2)])
    return normals[:n].reshape(shape)


# config value parsing


def parse_value(text: str, annotation: Any) -> Any:
    """Converts the text of a config value to the type given by a dataclass field annotation."""
    text = text.strip()
    origin = get_origin(annotation)
    args = get_args(annotation)
    if origin is Union:  # Optional[...]
        if text.lower() == "none":
            return None
        inner = [a for a in args if a is not type(None)]
        return parse_value(text, inner[0])
    if origin is tuple:
        if not text:
            return ()
        item_type = args[0] if args else str
        return tuple(parse_value(item, item_type) for item in text.split(","))
    if origin is Literal:
        if text not in args:
            raise ValueError(f"value {text!r} not in {args}")
        return text
    if annotation is bool:
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ValueError(f"cannot interpret {text!r} as boolean")
    if annotation is int:
        return int(text)
    if annotation is float:
        return float(text)
    return text


def format_value(value: Any) -> str:
    """Inverse of parse_value."""
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_key_values(path: str) -> dict[str, str]:
    """Reads a flat "key = value" file; '#' starts a comment."""
    entries: dict[str, str] = {}
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', found {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in entries:
                logger.warning("%s:%s: key %s given twice, using the last value", path, lineno, key)
            entries[key] = value
    return entries
