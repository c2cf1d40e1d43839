"""
Run manifests: what a CLI command was asked to do, written before its outputs
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import pytz

from utils.errors import ConfigError

MANIFEST_SUFFIX = '.manifest.json'
MANIFEST_VERSION = 1


def utc_now() -> str:
    return datetime.now(pytz.utc).isoformat()


def manifest_path_for(output) -> Path:
    return Path(str(output) + MANIFEST_SUFFIX)


def file_digest(path) -> str:
    """sha256 of a file, or of every file under a directory in sorted order"""
    path = Path(path)
    digest = hashlib.sha256()
    files = sorted(p for p in path.rglob('*') if p.is_file()) if path.is_dir() else [path]
    for file in files:
        digest.update(str(file.relative_to(path) if path.is_dir() else file.name).encode('utf-8'))
        digest.update(file.read_bytes())
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    seed: int
    config: dict
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=utc_now)
    finished_at: Optional[str] = None
    digests: Dict[str, str] = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding='utf-8')
        return path

    def finish(self, path) -> Path:
        """Stamp completion time and output digests, then rewrite the manifest"""
        self.finished_at = utc_now()
        self.digests = {name: file_digest(p) for name, p in self.outputs.items() if Path(p).exists()}
        return self.write(path)

    @classmethod
    def read(cls, path) -> 'RunManifest':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Manifest not found: {path}")
        data = json.loads(path.read_text(encoding='utf-8'))
        if data.get('version') != MANIFEST_VERSION:
            raise ConfigError(f"Unsupported manifest version {data.get('version')} in {path}")
        return cls(**data)
