# License: MIT

'''
Pipeline configuration.

Settings are layered: the shipped data/default.cfg, then the user's config
file, then environment variables named after a key in upper case, then
command-line overrides.  The result is validated and frozen into a
PipelineConfig.
'''

import logging
import os
from collections import namedtuple
from configparser import ConfigParser, Error as ConfigParserError

from corpusforge.dom_refine import PruneRules
from corpusforge.filter_cascade import (Blocklists, Thresholds,
                                        strict_thresholds,
                                        validate_thresholds)
from corpusforge.image_fetch import FetchSettings
from corpusforge.io_util import DATA_DIR, data_path
from corpusforge.lang_id import KNOWN_LANGUAGES


logger = logging.getLogger(__name__)

KEY_SECTIONS = ('pipeline', 'thresholds', 'fetch')
LIST_SECTIONS = ('url_substrings', 'filename_substrings', 'alt_blockwords',
                 'nsfw_substrings', 'boilerplate_phrases')

INT_KEYS = frozenset(['batch_size', 'workers', 'para_min_words',
                      'para_max_words', 'doc_min_words', 'doc_max_words',
                      'img_min_side_px', 'doc_min_images', 'doc_max_images',
                      'alt_min_words', 'line_min_words', 'char_ngram',
                      'word_ngram', 'parallelism', 'per_host', 'timeout_ms',
                      'retries', 'backoff_ms', 'max_bytes'])
FLOAT_KEYS = frozenset(['lid_threshold', 'char_rep_max', 'word_rep_max_para',
                        'word_rep_max_doc', 'common_word_min', 'aspect_min',
                        'aspect_max'])
BOOL_KEYS = frozenset(['url_canonicalize', 'content_dedup', 'strict_8',
                       'cap_url_dedup', 'audit_rejects', 'enabled'])
LIST_KEYS = frozenset(['input', 'languages'])


class ConfigError(ValueError):
    pass


PipelineConfig = namedtuple('PipelineConfig',
                            ['inputs', 'output_dir', 'languages',
                             'thresholds', 'rules_path', 'data_dir',
                             'list_overrides', 'fetch', 'fetch_enabled',
                             'batch_size', 'tokenizer', 'lid_threshold',
                             'lid_model', 'url_canonicalize',
                             'content_dedup', 'cap_url_dedup', 'workers',
                             'audit_rejects'])


def _new_parser():
    parser = ConfigParser(allow_no_value=True, delimiters=('=',),
                          strict=False, interpolation=None)
    parser.optionxform = str
    return parser


def _read(parser, path):
    try:
        with open(path, encoding='utf-8') as f:
            parser.read_file(f, source=path)
    except OSError as e:
        raise ConfigError('cannot read config file {}: {}'.format(path, e))
    except ConfigParserError as e:
        raise ConfigError('cannot parse config file {}: {}'.format(path, e))


def _convert(key, value):
    value = (value or '').strip()
    try:
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
        if key in BOOL_KEYS:
            lowered = value.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError('not a boolean')
    except ValueError:
        raise ConfigError('bad value for {}: {!r}'.format(key, value))
    if key in LIST_KEYS:
        return tuple(value.split())
    return value


def _raw_settings(config_path, env, overrides):
    defaults = _new_parser()
    _read(defaults, data_path('default.cfg'))
    settings = {section: dict(defaults[section]) for section in KEY_SECTIONS}
    lists = {name: None for name in LIST_SECTIONS}

    if config_path:
        user = _new_parser()
        _read(user, config_path)
        for section in user.sections():
            if section in KEY_SECTIONS:
                for key, value in user[section].items():
                    if key not in settings[section]:
                        raise ConfigError('unknown key {} in [{}]'
                                          .format(key, section))
                    settings[section][key] = value
            elif section in LIST_SECTIONS:
                lists[section] = tuple(user[section].keys())
            else:
                raise ConfigError('unknown section [{}] in {}'
                                  .format(section, config_path))

    for section, values in settings.items():
        for key in values:
            if key.upper() in env:
                logger.info('{} overridden from the environment'.format(key))
                values[key] = env[key.upper()]

    for (section, key), value in (overrides or {}).items():
        if value is not None:
            settings[section][key] = value

    converted = {section: {key: _convert(key, value)
                           for key, value in values.items()}
                 for section, values in settings.items()}
    return converted, lists


def load_config(config_path=None, env=None, overrides=None):
    '''
    Build a PipelineConfig.  `overrides` maps (section, key) to a value
    (already typed or as text) and takes precedence over everything else.
    Raises ConfigError when the result is invalid.
    '''
    if env is None:
        env = os.environ
    settings, lists = _raw_settings(config_path, env,
                                    {k: str(v) if not isinstance(v, str)
                                     else v
                                     for k, v in (overrides or {}).items()
                                     if v is not None})
    pipeline = settings['pipeline']
    fetch = settings['fetch']

    try:
        thresholds = validate_thresholds(Thresholds(**settings['thresholds']))
    except ValueError as e:
        raise ConfigError(str(e))
    if pipeline['strict_8']:
        thresholds = strict_thresholds(thresholds)

    languages = pipeline['languages']
    unknown = [lang for lang in languages if lang not in KNOWN_LANGUAGES]
    if not languages or unknown:
        raise ConfigError('unsupported languages: {}'
                          .format(' '.join(unknown) or '(none)'))

    rules_path = pipeline['rules'] or None
    if rules_path and not os.path.isfile(rules_path):
        raise ConfigError('rules file {} does not exist'.format(rules_path))
    data_dir = pipeline['data_dir'] or None
    for language in languages:
        stopword_path = data_path('stopwords', language + '.txt',
                                  data_dir=data_dir)
        if not os.path.isfile(stopword_path):
            raise ConfigError('stopword list {} does not exist'
                              .format(stopword_path))
    lid_model = pipeline['lid_model'] or None
    if lid_model and not os.path.isfile(lid_model):
        raise ConfigError('language model {} does not exist'
                          .format(lid_model))

    for name, value, minimum in (('batch_size', pipeline['batch_size'], 1),
                                 ('workers', pipeline['workers'], 1),
                                 ('parallelism', fetch['parallelism'], 1),
                                 ('per_host', fetch['per_host'], 0),
                                 ('retries', fetch['retries'], 0),
                                 ('timeout_ms', fetch['timeout_ms'], 1),
                                 ('max_bytes', fetch['max_bytes'], 1)):
        if value < minimum:
            raise ConfigError('{} must be at least {}'.format(name, minimum))
    if not 0.0 <= pipeline['lid_threshold'] <= 1.0:
        raise ConfigError('lid_threshold must be in [0, 1]')

    return PipelineConfig(
        inputs=pipeline['input'],
        output_dir=pipeline['output_dir'],
        languages=languages,
        thresholds=thresholds,
        rules_path=rules_path,
        data_dir=data_dir,
        list_overrides=lists,
        fetch=FetchSettings(parallelism=fetch['parallelism'],
                            per_host=fetch['per_host'],
                            timeout_ms=fetch['timeout_ms'],
                            retries=fetch['retries'],
                            backoff_ms=fetch['backoff_ms'],
                            max_bytes=fetch['max_bytes'],
                            user_agent=fetch['user_agent'],
                            cache_dir=fetch['cache_dir'] or None),
        fetch_enabled=fetch['enabled'],
        batch_size=pipeline['batch_size'],
        tokenizer=pipeline['tokenizer'],
        lid_threshold=pipeline['lid_threshold'],
        lid_model=lid_model,
        url_canonicalize=pipeline['url_canonicalize'],
        content_dedup=pipeline['content_dedup'],
        cap_url_dedup=pipeline['cap_url_dedup'],
        workers=pipeline['workers'],
        audit_rejects=pipeline['audit_rejects'])


def load_rules(config):
    try:
        return PruneRules.load(config.rules_path)
    except (OSError, ValueError) as e:
        raise ConfigError('bad rules file: {}'.format(e))


def load_blocklists(config):
    languages = tuple(sorted(set(KNOWN_LANGUAGES) | set(config.languages)))
    return Blocklists.load(languages, data_dir=config.data_dir,
                           **config.list_overrides)


def describe(config):
    '''
    The settings that determine output content, for the run manifest.
    '''
    return {'inputs': list(config.inputs),
            'languages': list(config.languages),
            'thresholds': dict(config.thresholds._asdict()),
            'rules': config.rules_path or os.path.join(DATA_DIR,
                                                       'prune_rules.txt'),
            'batch_size': config.batch_size,
            'tokenizer': config.tokenizer,
            'lid_threshold': config.lid_threshold,
            'lid_model': config.lid_model,
            'url_canonicalize': config.url_canonicalize,
            'content_dedup': config.content_dedup,
            'cap_url_dedup': config.cap_url_dedup,
            'fetch_enabled': config.fetch_enabled}
