# License: MIT

'''
The filter hierarchy: image nodes, then paragraphs (after line-level
cleaning), then whole documents.  Every rejection carries a Reason so it
can be written to the audit ledger.

Bounds are inclusive: a value is rejected only when it is strictly below a
minimum or strictly above a maximum.
'''

import enum
import logging
import math
from collections import Counter, namedtuple

from nltk.util import ngrams

from corpusforge.doc_assemble import (ACCEPTED_FORMATS, ImageSegment,
                                      TextSegment)
from corpusforge.io_util import data_path, read_list_file
from corpusforge.lang_id import KNOWN_LANGUAGES, ScriptClass, \
    classify_line_script
from corpusforge.text_util import count_words, normalize_token, tokenize


logger = logging.getLogger(__name__)


class Reason(enum.Enum):
    Ok = 'Ok'
    BadFormat = 'BadFormat'
    TooSmall = 'TooSmall'
    BadAspect = 'BadAspect'
    BlockedUrl = 'BlockedUrl'
    BlockedFilename = 'BlockedFilename'
    BlockedAltWord = 'BlockedAltWord'
    Nsfw = 'Nsfw'
    TooFewWords = 'TooFewWords'
    TooManyWords = 'TooManyWords'
    CharRepetition = 'CharRepetition'
    WordRepetition = 'WordRepetition'
    LowCommonWords = 'LowCommonWords'
    NoImages = 'NoImages'
    TooManyImages = 'TooManyImages'
    NsfwDocument = 'NsfwDocument'


Verdict = namedtuple('Verdict', ['accepted', 'reason'])

ACCEPT = Verdict(True, Reason.Ok)


def reject(reason):
    assert reason is not Reason.Ok
    return Verdict(False, reason)


Thresholds = namedtuple('Thresholds',
                        ['para_min_words', 'para_max_words',
                         'doc_min_words', 'doc_max_words',
                         'char_rep_max', 'word_rep_max_para',
                         'word_rep_max_doc', 'common_word_min',
                         'img_min_side_px', 'aspect_min', 'aspect_max',
                         'doc_min_images', 'doc_max_images',
                         'alt_min_words', 'line_min_words',
                         'char_ngram', 'word_ngram'],
                        defaults=(4, 1000, 10, 2000, 0.1, 0.1, 0.2, 0.1,
                                  150, 0.2, 5.0, 1, 30, 5, 4, 5, 2))

STRICT_PARA_MIN_WORDS = 8

RATIO_FIELDS = ('char_rep_max', 'word_rep_max_para', 'word_rep_max_doc',
                'common_word_min')


def validate_thresholds(th):
    '''
    Raise ValueError if the thresholds are inconsistent.
    '''
    problems = []
    if th.para_min_words > th.para_max_words:
        problems.append('para_min_words > para_max_words')
    if th.doc_min_words > th.doc_max_words:
        problems.append('doc_min_words > doc_max_words')
    if th.doc_min_images > th.doc_max_images:
        problems.append('doc_min_images > doc_max_images')
    if th.aspect_max <= 0 or \
            not math.isclose(th.aspect_min, 1.0 / th.aspect_max):
        problems.append('aspect_min must equal 1 / aspect_max')
    for name in RATIO_FIELDS:
        if not 0.0 <= getattr(th, name) <= 1.0:
            problems.append('{} must be in [0, 1]'.format(name))
    if th.char_ngram < 1 or th.word_ngram < 1:
        problems.append('n-gram sizes must be positive')
    if th.alt_min_words < 1 or th.line_min_words < 1:
        problems.append('alt_min_words and line_min_words must be positive')
    if th.img_min_side_px < 0 or th.doc_min_images < 0:
        problems.append('image bounds must not be negative')
    if problems:
        raise ValueError('invalid thresholds: {}'.format('; '.join(problems)))
    return th


def strict_thresholds(th):
    '''
    The stricter 8-word paragraph minimum.
    '''
    return th._replace(para_min_words=max(th.para_min_words,
                                          STRICT_PARA_MIN_WORDS))


DEFAULT_URL_SUBSTRINGS = ('logo', 'icon', 'banner', 'social', 'widget')
DEFAULT_FILENAME_SUBSTRINGS = ('default', 'placeholder')
DEFAULT_ALT_BLOCKWORDS = ('download', 'pdf', 'mp4', 'mp3', 'chapter',
                          'video', 'audio')


def _lowered(values):
    return frozenset(v.strip().lower() for v in values if v.strip())


class Blocklists(object):
    '''
    Substring lists for images and lines, plus per-language stopwords.
    Entries are stored lowercase and matched case-insensitively.
    '''

    def __init__(self, url_substrings=DEFAULT_URL_SUBSTRINGS,
                 filename_substrings=DEFAULT_FILENAME_SUBSTRINGS,
                 alt_blockwords=DEFAULT_ALT_BLOCKWORDS,
                 nsfw_substrings=(), boilerplate_phrases=(),
                 stopwords=None):
        self.url_substrings = _lowered(url_substrings)
        self.filename_substrings = _lowered(filename_substrings)
        self.alt_blockwords = _lowered(alt_blockwords)
        self.nsfw_substrings = _lowered(nsfw_substrings)
        self.boilerplate_phrases = _lowered(boilerplate_phrases)
        self.stopwords = {language: _lowered(words)
                          for language, words in (stopwords or {}).items()}

    @classmethod
    def load(cls, languages=KNOWN_LANGUAGES, data_dir=None, **overrides):
        '''
        Read the per-language nsfw, boilerplate and stopword files from
        the data directory.  Keyword arguments replace individual lists.
        '''
        lists = {'nsfw_substrings': [], 'boilerplate_phrases': []}
        stopwords = {}
        for language in languages:
            for name, directory in (('nsfw_substrings', 'nsfw'),
                                    ('boilerplate_phrases', 'boilerplate')):
                path = data_path(directory, language + '.txt',
                                 data_dir=data_dir)
                try:
                    lists[name].extend(read_list_file(path))
                except FileNotFoundError:
                    logger.debug('no {} list for {}'.format(directory,
                                                            language))
            path = data_path('stopwords', language + '.txt',
                             data_dir=data_dir)
            try:
                stopwords[language] = read_list_file(path)
            except FileNotFoundError:
                logger.warning('no stopword list for {}'.format(language))
        lists['stopwords'] = stopwords
        lists.update((k, v) for k, v in overrides.items() if v is not None)
        return cls(**lists)

    def stopwords_for(self, language):
        return self.stopwords.get(language, frozenset())


def _contains_any(text, substrings):
    text = text.lower()
    return any(s in text for s in substrings)


def filter_image_node(ref, th, bl):
    '''
    Checks run in order: format, minimum side, aspect ratio, URL, filename,
    alt-text blockwords.  Format and dimension checks are skipped while the
    values are unknown.
    '''
    if ref.format is not None and ref.format not in ACCEPTED_FORMATS:
        return reject(Reason.BadFormat)
    if ref.width_px is not None and ref.height_px is not None:
        if min(ref.width_px, ref.height_px) < th.img_min_side_px:
            return reject(Reason.TooSmall)
        aspect = ref.width_px / ref.height_px
        if aspect < th.aspect_min or aspect > th.aspect_max:
            return reject(Reason.BadAspect)
    if _contains_any(ref.src_url, bl.url_substrings):
        return reject(Reason.BlockedUrl)
    if _contains_any(ref.filename, bl.filename_substrings):
        return reject(Reason.BlockedFilename)
    if _contains_any(ref.filename, bl.alt_blockwords) \
            or _contains_any(ref.alt_text, bl.alt_blockwords):
        return reject(Reason.BlockedAltWord)
    return ACCEPT


def is_nsfw_image(ref, bl):
    return _contains_any(ref.filename, bl.nsfw_substrings) \
        or _contains_any(ref.alt_text, bl.nsfw_substrings)


def clean_paragraph(text, bl, th):
    '''
    Drop lines that are Latin-only or have no letters, lines shorter than
    `line_min_words`, and lines containing a boilerplate phrase.
    '''
    kept = []
    for line in text.split('\n'):
        if classify_line_script(line) in (ScriptClass.LatinOnly,
                                          ScriptClass.NumericSymbolic):
            continue
        if count_words(line) < th.line_min_words:
            continue
        if _contains_any(line, bl.boilerplate_phrases):
            continue
        kept.append(line)
    return '\n'.join(kept)


def _repetition_ratio(items, n):
    if n < 1:
        raise ValueError('n must be positive, got {}'.format(n))
    grams = Counter(ngrams(items, n))
    total = sum(grams.values())
    if not total:
        return 0.0
    return 1.0 - len(grams) / total


def char_repetition_ratio(text, n=5):
    return _repetition_ratio(text, n)


def word_repetition_ratio(text, n=2):
    return _repetition_ratio(tokenize(text), n)


def common_word_ratio(text, stopwords):
    '''
    Share of tokens (punctuation stripped, lowercased) that are stopwords.
    '''
    tokens = tokenize(text)
    if not tokens:
        return 0.0
    hits = sum(1 for token in tokens if normalize_token(token) in stopwords)
    return hits / len(tokens)


def _text_checks(text, th, stopwords, min_words, max_words, word_rep_max):
    n_words = count_words(text)
    if n_words < min_words:
        return reject(Reason.TooFewWords)
    if n_words > max_words:
        return reject(Reason.TooManyWords)
    if char_repetition_ratio(text, th.char_ngram) > th.char_rep_max:
        return reject(Reason.CharRepetition)
    if word_repetition_ratio(text, th.word_ngram) > word_rep_max:
        return reject(Reason.WordRepetition)
    if common_word_ratio(text, stopwords) < th.common_word_min:
        return reject(Reason.LowCommonWords)
    return ACCEPT


def filter_paragraph(text, th, stopwords):
    return _text_checks(text, th, stopwords, th.para_min_words,
                        th.para_max_words, th.word_rep_max_para)


FilterResult = namedtuple('FilterResult', ['document', 'verdict', 'dropped'])


def filter_document(doc, th, bl, stopwords=None):
    '''
    Returns a FilterResult: the filtered document (None when rejected), the
    document verdict, and a Counter of segment-level drops by reason.

    Images failing the image filter are dropped first; only the images that
    remain can mark the document as NSFW.  Paragraphs are then cleaned and
    filtered, and the document-level bounds are checked last.
    '''
    if stopwords is None:
        stopwords = bl.stopwords_for(doc.language.language)
    dropped = Counter()

    segments = []
    for segment in doc.segments:
        if isinstance(segment, ImageSegment):
            verdict = filter_image_node(segment.image, th, bl)
            if not verdict.accepted:
                dropped[verdict.reason.value] += 1
                continue
        segments.append(segment)

    for segment in segments:
        if isinstance(segment, ImageSegment) \
                and is_nsfw_image(segment.image, bl):
            dropped[Reason.Nsfw.value] += 1
            logger.debug('nsfw image {}, doc_id = {}'
                         .format(segment.image.src_url, doc.doc_id))
            return FilterResult(None, reject(Reason.NsfwDocument), dropped)

    kept = []
    for segment in segments:
        if isinstance(segment, ImageSegment):
            kept.append(segment)
            continue
        cleaned = clean_paragraph(segment.text, bl, th)
        verdict = filter_paragraph(cleaned, th, stopwords)
        if verdict.accepted:
            kept.append(TextSegment(cleaned))
        else:
            dropped[verdict.reason.value] += 1

    verdict = document_verdict(kept, th, stopwords)
    if not verdict.accepted:
        logger.debug('rejected ({}), doc_id = {}'
                     .format(verdict.reason.value, doc.doc_id))
        return FilterResult(None, verdict, dropped)

    filtered = doc._replace(segments=kept)
    assert document_verdict(filtered.segments, th, stopwords).accepted
    return FilterResult(filtered, ACCEPT, dropped)


def document_verdict(segments, th, stopwords):
    '''
    Document-level bounds: image count, then the text checks over the
    concatenated text segments.
    '''
    n_images = sum(1 for s in segments if isinstance(s, ImageSegment))
    if n_images < th.doc_min_images:
        return reject(Reason.NoImages)
    if n_images > th.doc_max_images:
        return reject(Reason.TooManyImages)
    text = '\n'.join(s.text for s in segments if isinstance(s, TextSegment))
    return _text_checks(text, th, stopwords, th.doc_min_words,
                        th.doc_max_words, th.word_rep_max_doc)
