"""Content-addressed store for generated reasoning graphs.

Layout: ``<dir>/<digest>.mmd`` holds the canonical graph text and
``<dir>/<digest>.json`` the generator spec and usage.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .gateway import ModelSpec
from .pipeline import BraidArtifact


class CacheMiss(KeyError):
    pass


def cache_key(question_key: str, generator: ModelSpec, template_hash: str, masked: bool) -> str:
    blob = json.dumps(
        {"question": question_key, "generator": generator.to_dict(),
         "template": template_hash, "masked": bool(masked)},
        sort_keys=True, ensure_ascii=False,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _atomic_write(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class BraidCache:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)

    def key_for(self, artifact: BraidArtifact) -> str:
        return cache_key(artifact.question_key, artifact.generator,
                         artifact.prompt_template_hash, artifact.masked)

    def put(self, artifact: BraidArtifact) -> str:
        self.dir.mkdir(parents=True, exist_ok=True)
        key = self.key_for(artifact)
        # sidecar first so a visible .mmd always has its metadata
        _atomic_write(self.dir / f"{key}.json",
                      json.dumps(artifact.to_dict(), sort_keys=True, indent=2) + "\n")
        _atomic_write(self.dir / f"{key}.mmd", artifact.graph_text)
        return key

    def get(self, key: str) -> BraidArtifact:
        graph = self.dir / f"{key}.mmd"
        meta = self.dir / f"{key}.json"
        if not graph.exists() or not meta.exists():
            raise CacheMiss(key)
        with open(graph, encoding="utf-8", newline="") as fh:
            text = fh.read()
        return BraidArtifact.from_dict(json.loads(meta.read_text()), text)

    def __contains__(self, key: str) -> bool:
        return (self.dir / f"{key}.mmd").exists() and (self.dir / f"{key}.json").exists()

    def keys(self) -> list[str]:
        if not self.dir.exists():
            return []
        return sorted(p.stem for p in self.dir.glob("*.mmd") if p.with_suffix(".json").exists())

    def show(self, key: str) -> str:
        path = self.dir / f"{key}.mmd"
        if not path.exists():
            matches = [k for k in self.keys() if k.startswith(key)]
            if len(matches) != 1:
                raise CacheMiss(key)
            path = self.dir / f"{matches[0]}.mmd"
        return path.read_text(encoding="utf-8")

    def purge(self) -> int:
        n = 0
        for key in self.keys():
            (self.dir / f"{key}.mmd").unlink(missing_ok=True)
            (self.dir / f"{key}.json").unlink(missing_ok=True)
            n += 1
        return n
