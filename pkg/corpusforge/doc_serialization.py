# License: MIT

'''
JSONL wire formats for interleaved documents, caption pairs and reject
ledger entries.  Every record is one compact UTF-8 JSON object per line,
with a fixed key order.

Schema version 1 (recorded as `schema_version` in the run manifest and
stats) appends one key to the base image segment record: `format`, the
image format name or null.  It comes last, after `caption`, so readers of
the base record can ignore it.  Parsing accepts records without it.
'''

import json
from datetime import date

from corpusforge.caption_extract import CaptionPair, Resolution
from corpusforge.doc_assemble import (ImageFormat, ImageRef, ImageSegment,
                                      InterleavedDocument, TextSegment)
from corpusforge.io_util import dump_json
from corpusforge.lang_id import LanguageVerdict


def _segment_to_dict(segment):
    if isinstance(segment, TextSegment):
        return {'type': 'text', 'text': segment.text}
    image = segment.image
    return {'type': 'image',
            'src': image.src_url,
            'alt': image.alt_text,
            'filename': image.filename,
            'w': image.width_px,
            'h': image.height_px,
            'caption': image.figcaption,
            'format': image.format.value if image.format else None}


def _segment_from_dict(data):
    if data['type'] == 'text':
        return TextSegment(data['text'])
    if data['type'] != 'image':
        raise ValueError('unknown segment type {!r}'.format(data['type']))
    image_format = data.get('format')
    return ImageSegment(ImageRef(
        src_url=data['src'],
        alt_text=data['alt'],
        filename=data['filename'],
        figcaption=data.get('caption'),
        width_px=data.get('w'),
        height_px=data.get('h'),
        format=ImageFormat(image_format) if image_format else None))


def serialize_document(doc):
    return dump_json({
        'id': doc.doc_id,
        'url': doc.source_url,
        'domain': doc.domain,
        'lang': doc.language.language,
        'lang_conf': doc.language.confidence,
        'date': doc.crawl_date.isoformat() if doc.crawl_date else None,
        'segments': [_segment_to_dict(s) for s in doc.segments],
    })


def parse_document(line):
    data = json.loads(line)
    return InterleavedDocument(
        doc_id=data['id'],
        source_url=data['url'],
        domain=data['domain'],
        crawl_date=date.fromisoformat(data['date']) if data['date'] else None,
        language=LanguageVerdict(data['lang'], data['lang_conf']),
        segments=[_segment_from_dict(s) for s in data['segments']])


def serialize_pair(pair):
    return dump_json({
        'url': pair.image_url,
        'alt': pair.alt_text,
        'lang': pair.language.language,
        'lang_conf': pair.language.confidence,
        'res_class': pair.resolution_class.value
        if pair.resolution_class else None,
        'tokens': pair.token_count,
    })


def parse_pair(line):
    data = json.loads(line)
    return CaptionPair(
        image_url=data['url'],
        alt_text=data['alt'],
        language=LanguageVerdict(data['lang'], data['lang_conf']),
        resolution_class=Resolution(data['res_class'])
        if data['res_class'] else None,
        token_count=data['tokens'])


def serialize_reject(doc_id, stage, reason, url=None):
    return dump_json({'doc_id': doc_id, 'stage': stage, 'reason': reason,
                      'url': url})
