"""
Shared Data Layer: namespaced key-value store with per-key versions.

The store itself performs no access control; the platform gates every call.
Values are copied on write; records handed out are shared and must be
treated as read-only.
"""

import copy
import hashlib
from bisect import bisect_left, insort
from typing import Dict, List, Optional, Tuple

from ric.types import SdlRecord


class SharedDataLayer:
    def __init__(self):
        self._records: Dict[Tuple[str, str], SdlRecord] = {}
        self._keys: Dict[str, List[str]] = {}

    def read(self, namespace: str, key: str) -> Optional[SdlRecord]:
        return self._records.get((namespace, key))

    def write(self, namespace: str, key: str, value: Dict, writer: str, tick: int) -> int:
        previous = self._records.get((namespace, key))
        version = previous.version + 1 if previous else 1
        if previous is None:
            insort(self._keys.setdefault(namespace, []), key)
        self._records[(namespace, key)] = SdlRecord(
            namespace=namespace,
            key=key,
            value=copy.deepcopy(value),
            writer=writer,
            version=version,
            tick=tick,
        )
        return version

    def scan(self, namespace: str, prefix: str = "", last: Optional[int] = None) -> List[SdlRecord]:
        """Records whose key starts with `prefix`, key-ordered; `last` keeps only the final n."""
        keys = self._keys.get(namespace, [])
        start = bisect_left(keys, prefix)
        stop = bisect_left(keys, prefix + "\U0010ffff", lo=start)
        matched = keys[start:stop]
        if last is not None:
            matched = matched[-last:] if last > 0 else []
        return [self._records[(namespace, key)] for key in matched]

    def count(self, namespace: str) -> int:
        return len(self._keys.get(namespace, []))

    def namespaces(self) -> List[str]:
        return sorted(self._keys)

    def digest(self) -> str:
        h = hashlib.sha256()
        for namespace in sorted(self._keys):
            for key in self._keys[namespace]:
                r = self._records[(namespace, key)]
                h.update(repr((namespace, key, r.writer, r.version, r.tick, sorted(r.value.items()))).encode())
        return h.hexdigest()
