"""
Canonical JSON for persisted artifacts.

Sorted keys and fixed indentation: identical content always gives identical
bytes, so manifests and reports can be compared byte-for-byte.
"""

from pathlib import Path
from typing import Any, Union

import numpy as np
import orjson

from trajguard.exceptions import ReportError


class CanonicalJSON:
    """orjson with sorted keys; numpy scalars and arrays are accepted."""

    OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY

    @staticmethod
    def _default(obj: Any) -> Any:
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, Path):
            return str(obj)
        raise TypeError(f"Type {type(obj).__name__} is not JSON serializable")

    @classmethod
    def dumps(cls, obj: Any) -> bytes:
        """
        Serialize to canonical JSON bytes (trailing newline included).

        Raises:
            ReportError: unserializable content
        """
        try:
            return orjson.dumps(obj, default=cls._default, option=cls.OPTIONS) + b"\n"
        except TypeError as e:
            raise ReportError(f"Cannot serialize: {e}") from e

    @staticmethod
    def loads(data: Union[bytes, str]) -> Any:
        try:
            return orjson.loads(data)
        except orjson.JSONDecodeError as e:
            raise ReportError(f"Invalid JSON: {e}") from e

    @classmethod
    def write(cls, path: Union[str, Path], obj: Any) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(cls.dumps(obj))
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> Any:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise ReportError(f"Cannot read {path}: {e}") from e
        return cls.loads(data)
