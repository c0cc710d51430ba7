# License: MIT

'''
Image/alt-text caption pairs.

A pair is kept when the alt text has enough words and does not simply
repeat text from the page; its language is identified from the alt text
alone, so English captions of Hindi pages are labelled "en".
'''

import enum
import logging
from collections import namedtuple

from corpusforge.doc_assemble import ImageSegment, TextSegment
from corpusforge.lang_id import classify_document
from corpusforge.text_util import count_words, normalize_whitespace


logger = logging.getLogger(__name__)

LOW_MAX_SIDE = 200
HIGH_MIN_SIDE = 600


class Resolution(enum.Enum):
    Low = 'Low'
    Mid = 'Mid'
    High = 'High'


CaptionPair = namedtuple('CaptionPair', ['image_url', 'alt_text', 'language',
                                         'resolution_class', 'token_count',
                                         'doc_id'],
                         defaults=(None,))


def classify_resolution(width_px, height_px):
    '''
    Low if either side is under 200 px, High if both exceed 600 px, Mid
    otherwise.
    '''
    if width_px < 1 or height_px < 1:
        raise ValueError('image sides must be positive, got {}x{}'
                         .format(width_px, height_px))
    if width_px < LOW_MAX_SIDE or height_px < LOW_MAX_SIDE:
        return Resolution.Low
    if width_px > HIGH_MIN_SIDE and height_px > HIGH_MIN_SIDE:
        return Resolution.High
    return Resolution.Mid


def is_distinct(alt_text, page_texts):
    '''
    False if the alt text (whitespace-normalized) occurs inside any of the
    page's text segments.
    '''
    needle = normalize_whitespace(alt_text)
    return not any(needle in normalize_whitespace(text)
                   for text in page_texts)


def extract_pairs(doc, th, model=None):
    '''
    One CaptionPair per qualifying image segment of an accepted document.
    '''
    page_texts = [s.text for s in doc.segments if isinstance(s, TextSegment)]
    pairs = []
    for segment in doc.segments:
        if not isinstance(segment, ImageSegment):
            continue
        image = segment.image
        alt_text = normalize_whitespace(image.alt_text)
        n_words = count_words(alt_text)
        if n_words < th.alt_min_words:
            continue
        if not is_distinct(alt_text, page_texts):
            logger.debug('alt text repeats page text, doc_id = {}'
                         .format(doc.doc_id))
            continue
        resolution = None
        if image.width_px is not None and image.height_px is not None:
            resolution = classify_resolution(image.width_px, image.height_px)
        pairs.append(CaptionPair(image_url=image.src_url,
                                 alt_text=alt_text,
                                 language=classify_document(alt_text, model),
                                 resolution_class=resolution,
                                 token_count=n_words,
                                 doc_id=doc.doc_id))
    return pairs


def dedup_pairs(pairs, seen_urls=None):
    '''
    Keep the first pair per image URL.
    '''
    if seen_urls is None:
        seen_urls = set()
    for pair in pairs:
        if pair.image_url in seen_urls:
            continue
        seen_urls.add(pair.image_url)
        yield pair
