#!/usr/bin/env python3

import pytest

from corpusforge.config import (ConfigError, describe, load_blocklists,
                                load_config, load_rules)
from corpusforge.filter_cascade import Thresholds


def _write(tmp_path, text, name='forge.cfg'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_defaults():
    config = load_config(env={})
    assert config.thresholds == Thresholds()
    assert config.languages == ('hi', 'bn', 'ta', 'ml', 'te', 'mr', 'kn',
                                'gu', 'pa', 'or', 'as')
    assert config.inputs == ()
    assert config.lid_threshold == 0.65
    assert config.fetch.parallelism == 40
    assert config.fetch.cache_dir is None
    assert config.fetch_enabled
    assert config.url_canonicalize and not config.content_dedup
    assert config.rules_path is None and config.lid_model is None


def test_layering(tmp_path):
    path = _write(tmp_path, '[pipeline]\ninput = a.warc b/*.warc.gz\n'
                            'languages = hi bn\n'
                            '[thresholds]\npara_min_words = 5\n'
                            'doc_min_words = 20\n'
                            '[fetch]\nparallelism = 8\n')
    env = {'DOC_MIN_WORDS': '30', 'PARALLELISM': '16', 'HOME': '/root'}
    config = load_config(path, env=env,
                         overrides={('fetch', 'parallelism'): 2,
                                    ('pipeline', 'output_dir'): None})

    assert config.inputs == ('a.warc', 'b/*.warc.gz')
    assert config.languages == ('hi', 'bn')
    assert config.thresholds.para_min_words == 5
    assert config.thresholds.doc_min_words == 30
    assert config.fetch.parallelism == 2
    assert config.output_dir == 'forge_output'


def test_strict_8():
    config = load_config(env={}, overrides={('pipeline', 'strict_8'): True})
    assert config.thresholds.para_min_words == 8
    config = load_config(env={'STRICT_8': 'yes'})
    assert config.thresholds.para_min_words == 8


def test_list_sections_replace_builtins(tmp_path):
    path = _write(tmp_path, '[url_substrings]\ntracker\npixel\n'
                            '[boilerplate_phrases]\nClick here\n')
    config = load_config(path, env={})
    assert config.list_overrides['url_substrings'] == ('tracker', 'pixel')
    assert config.list_overrides['nsfw_substrings'] is None

    blocklists = load_blocklists(config)
    assert blocklists.url_substrings == {'tracker', 'pixel'}
    assert blocklists.boilerplate_phrases == {'click here'}
    assert 'porn' in blocklists.nsfw_substrings


@pytest.mark.parametrize('text', [
    '[thresholds]\nno_such_key = 1\n',
    '[extras]\nkey = 1\n',
    '[thresholds]\npara_min_words = many\n',
    '[thresholds]\npara_min_words = 2000\n',
    '[thresholds]\naspect_min = 0.3\n',
    '[thresholds]\nalt_min_words = 0\n',
    '[pipeline]\nstrict_8 = maybe\n',
    '[pipeline]\nlanguages = hi fr\n',
    '[pipeline]\nlanguages =\n',
    '[pipeline]\nlid_threshold = 1.5\n',
    '[pipeline]\nrules = /nonexistent/rules.txt\n',
    '[pipeline]\nlid_model = /nonexistent/lid.bin\n',
    '[fetch]\nparallelism = 0\n',
    '[fetch]\nretries = -1\n',
    'not a config file\n',
])
def test_invalid_config(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text), env={})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'absent.cfg'), env={})


def test_invalid_environment_value():
    with pytest.raises(ConfigError):
        load_config(env={'PARA_MIN_WORDS': 'four'})


def test_missing_stopword_list(tmp_path):
    (tmp_path / 'stopwords').mkdir()
    (tmp_path / 'stopwords' / 'hi.txt').write_text('के\n', encoding='utf-8')
    overrides = {('pipeline', 'data_dir'): str(tmp_path)}
    config = load_config(env={}, overrides={
        **overrides, ('pipeline', 'languages'): 'hi'})
    assert config.data_dir == str(tmp_path)
    with pytest.raises(ConfigError):
        load_config(env={}, overrides={
            **overrides, ('pipeline', 'languages'): 'hi bn'})


def test_rules(tmp_path):
    path = _write(tmp_path, 'ALLOW: p\nALLOW: div\nBLOCK: p\n',
                  name='rules.txt')
    config = load_config(env={}, overrides={('pipeline', 'rules'): path})
    with pytest.raises(ConfigError):
        load_rules(config)
    assert 'p' in load_rules(load_config(env={})).structural_allowlist


def test_describe():
    a = load_config(env={})
    b = load_config(env={}, overrides={('pipeline', 'output_dir'): '/tmp/x',
                                       ('fetch', 'parallelism'): 3})
    assert describe(a) == describe(b)
    c = load_config(env={}, overrides={('thresholds', 'doc_min_words'): 11})
    assert describe(c)['thresholds']['doc_min_words'] == 11
