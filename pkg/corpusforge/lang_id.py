# License: MIT

'''
Language identification for routing documents and script classification
for line-level cleaning.

The built-in classifier needs no model: it counts letter codepoints per
Unicode script block and maps the majority script to a language using
`data/script_blocks.txt`.  Any object with a `predict(text)` method
returning `(language, probability)` can be used in its place, e.g.
FastTextClassifier.
'''

import bisect
import enum
import logging
import unicodedata
from collections import Counter, namedtuple
from functools import lru_cache

from corpusforge.io_util import data_path, read_list_file


logger = logging.getLogger(__name__)

LanguageVerdict = namedtuple('LanguageVerdict', ['language', 'confidence'])

TARGET_LANGUAGES = ('hi', 'bn', 'ta', 'ml', 'te', 'mr', 'kn', 'gu', 'pa',
                    'or', 'as')
KNOWN_LANGUAGES = TARGET_LANGUAGES + ('en',)
OTHER = 'other'
LATIN = 'Latin'
DEFAULT_LID_THRESHOLD = 0.65


class EmptyInputError(ValueError):
    pass


class ScriptClass(enum.Enum):
    TargetScript = 'TargetScript'
    LatinOnly = 'LatinOnly'
    NumericSymbolic = 'NumericSymbolic'
    Mixed = 'Mixed'


def _is_letter(ch):
    return unicodedata.category(ch)[0] in ('L', 'M')


class ScriptTable(object):
    '''
    Codepoint ranges per script and the language each script stands for.
    '''

    def __init__(self, rows):
        self.script_order = []
        self.script_language = {}
        ranges = []
        for script, first, last, language in rows:
            if script not in self.script_language:
                self.script_order.append(script)
                self.script_language[script] = language
            elif self.script_language[script] != language:
                raise ValueError('script {} mapped to both {} and {}'
                                 .format(script, self.script_language[script],
                                         language))
            if language not in KNOWN_LANGUAGES:
                logger.warning('script {} maps to unknown language {}'
                               .format(script, language))
            ranges.append((first, last, script))
        ranges.sort()
        for (_, last, _), (first, _, _) in zip(ranges, ranges[1:]):
            assert last < first, 'overlapping script ranges'
        self._starts = [r[0] for r in ranges]
        self._ranges = ranges

    @classmethod
    def load(cls, path=None):
        rows = []
        for line in read_list_file(path or data_path('script_blocks.txt')):
            parts = line.split()
            if len(parts) != 4:
                raise ValueError('bad script block line: {!r}'.format(line))
            script, first, last, language = parts
            rows.append((script, int(first, 16), int(last, 16), language))
        return cls(rows)

    def script_of(self, ch):
        '''
        Returns the script name of a letter or mark, None if it is a mark
        outside every configured block (an inherited combining mark), and
        OTHER for letters of unlisted scripts.
        '''
        cp = ord(ch)
        idx = bisect.bisect_right(self._starts, cp) - 1
        if idx >= 0:
            first, last, script = self._ranges[idx]
            if first <= cp <= last:
                return script
        if unicodedata.category(ch).startswith('M'):
            return None
        if unicodedata.name(ch, '').startswith('LATIN'):
            return LATIN
        return OTHER

    def script_counts(self, text):
        counts = Counter()
        for ch in text:
            if not _is_letter(ch):
                continue
            script = self.script_of(ch)
            if script is not None:
                counts[script] += 1
        return counts

    def language_of(self, script):
        return self.script_language.get(script, OTHER)

    def is_target_script(self, script):
        return script in self.script_language and script != LATIN


@lru_cache(maxsize=None)
def default_script_table():
    return ScriptTable.load()


class ScriptFrequencyClassifier(object):
    '''
    The majority script block decides the language; the confidence is the
    majority block's share of all letter codepoints.
    '''

    def __init__(self, script_table=None):
        self.script_table = script_table or default_script_table()

    def predict(self, text):
        counts = self.script_table.script_counts(text)
        total = sum(counts.values())
        if not total:
            return OTHER, 0.0
        order = {script: i for i, script
                 in enumerate(self.script_table.script_order)}
        best = min(counts, key=lambda s: (-counts[s],
                                          order.get(s, len(order))))
        return self.script_table.language_of(best), counts[best] / total


class FastTextClassifier(object):
    '''
    Wraps a fastText language-identification model (labels like
    "__label__hi").  fastText is an optional dependency.
    '''

    def __init__(self, model_path):
        import fasttext
        self.model_path = model_path
        self.model = fasttext.load_model(model_path)

    def predict(self, text):
        labels, probabilities = self.model.predict(text.replace('\n', ' '))
        language = labels[0].replace('__label__', '')
        return language, float(probabilities[0])


def load_classifier(model_path=None):
    if model_path:
        logger.info('loading language identification model {}'
                    .format(model_path))
        return FastTextClassifier(model_path)
    return ScriptFrequencyClassifier()


def classify_document(text, model=None, languages=KNOWN_LANGUAGES):
    '''
    Returns a LanguageVerdict; languages outside `languages` are reported
    as "other" with the model's confidence.
    '''
    if not text.strip():
        raise EmptyInputError('empty input')
    if model is None:
        model = ScriptFrequencyClassifier()
    language, confidence = model.predict(text)
    confidence = min(max(float(confidence), 0.0), 1.0)
    if language not in languages:
        language = OTHER
    return LanguageVerdict(language, confidence)


def route_document(text, model=None, languages=TARGET_LANGUAGES,
                   threshold=DEFAULT_LID_THRESHOLD):
    '''
    Returns (verdict, accepted): accepted documents are in one of the
    target languages with at least `threshold` confidence.
    '''
    verdict = classify_document(text, model)
    accepted = verdict.language in languages \
        and verdict.confidence >= threshold
    return verdict, accepted


def classify_line_script(line, script_table=None):
    if script_table is None:
        script_table = default_script_table()
    scripts = set(script_table.script_counts(line))
    if not scripts:
        return ScriptClass.NumericSymbolic
    if scripts == {LATIN}:
        return ScriptClass.LatinOnly
    if len(scripts) == 1 and script_table.is_target_script(scripts.pop()):
        return ScriptClass.TargetScript
    return ScriptClass.Mixed
