"""Content-addressed certificate store.

Layout::

    root/
      index.json            key -> {"schema", "file", "input", "config"}
      objects/<key>.json    the certificate

The key is the content hash of (input, config, schema), so rerunning the
same computation lands on the same file. Loading re-verifies the stored
document and refuses anything that no longer checks out.
"""

from __future__ import annotations

from pathlib import Path

from .errors import InputError, VerificationError
from .serialization import content_hash, dumps, read_json, write_json
from .validation import validate_document


class CertificateStore:
    def __init__(self, root):
        self.root = Path(root)
        self.objects = self.root / "objects"
        self.index_path = self.root / "index.json"
        self.objects.mkdir(parents=True, exist_ok=True)
        self.index = read_json(self.index_path) if self.index_path.exists() else {}

    @staticmethod
    def key(input_doc, config, schema: str) -> str:
        return content_hash({"input": input_doc, "config": config, "schema": schema})

    def put(self, doc: dict, input_doc, config, window=None, matrix=None) -> str:
        """Verify and store ``doc``; returns its key."""
        res = validate_document(doc, window=window, matrix=matrix)
        if not res.passed:
            raise VerificationError("refusing to store a document that does not verify", messages=res.messages)
        k = self.key(input_doc, config, doc["schema"])
        path = self.objects / f"{k}.json"
        text = dumps(doc) + "\n"
        if path.exists() and path.read_text(encoding="utf-8") != text:
            raise VerificationError("stored object differs from a recomputation with the same key", key=k)
        path.write_text(text, encoding="utf-8")
        self.index[k] = {
            "schema": doc["schema"],
            "file": f"objects/{k}.json",
            "input": content_hash(input_doc),
            "config": config,
        }
        write_json(self.index, self.index_path)
        return k

    def get(self, key: str, window=None, matrix=None) -> dict:
        if key not in self.index:
            raise InputError(f"no object with key {key}")
        doc = read_json(self.root / self.index[key]["file"])
        res = validate_document(doc, window=window, matrix=matrix)
        if not res.passed:
            raise VerificationError(f"stored object {key[:12]} failed re-verification", messages=res.messages)
        return doc

    def __contains__(self, key) -> bool:
        return key in self.index

    def __len__(self) -> int:
        return len(self.index)

    def keys(self):
        return sorted(self.index)
