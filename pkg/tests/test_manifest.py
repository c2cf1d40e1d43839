import json

import pytest

from utils.errors import ConfigError
from utils.manifest import RunManifest, file_digest, manifest_path_for


def test_manifest_path():
    assert str(manifest_path_for('out/clip.wav')) == 'out/clip.wav.manifest.json'


def test_round_trip_and_digests(tmp_path):
    output = tmp_path / 'plan.json'
    manifest = RunManifest(command='plan', argv=['plan', '--output', str(output)], seed=3, config={'alpha': 0.2},
                           outputs={'output': str(output), 'missing': str(tmp_path / 'nope')})
    path = manifest.write(manifest_path_for(output))
    assert RunManifest.read(path).finished_at is None

    output.write_text('{}', encoding='utf-8')
    manifest.finish(path)
    loaded = RunManifest.read(path)
    assert loaded.digests == {'output': file_digest(output)}
    assert loaded.started_at.endswith('+00:00') and loaded.finished_at is not None
    assert loaded.argv == manifest.argv and loaded.seed == 3


def test_directory_digest_tracks_names_and_contents(tmp_path):
    for name in ('a', 'b'):
        (tmp_path / name).mkdir()
        (tmp_path / name / 'clip.wav').write_bytes(b'RIFF')
        (tmp_path / name / 'clips.csv').write_text('clip_id\n', encoding='utf-8')
    assert file_digest(tmp_path / 'a') == file_digest(tmp_path / 'b')
    (tmp_path / 'b' / 'clip.wav').write_bytes(b'RIFX')
    assert file_digest(tmp_path / 'a') != file_digest(tmp_path / 'b')


def test_unknown_version(tmp_path):
    path = tmp_path / 'm.json'
    path.write_text(json.dumps({'command': 'plan', 'argv': [], 'seed': 0, 'config': {}, 'version': 99}))
    with pytest.raises(ConfigError):
        RunManifest.read(path)


def test_missing_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        RunManifest.read(tmp_path / 'none.json')
