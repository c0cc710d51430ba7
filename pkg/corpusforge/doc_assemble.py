# License: MIT

'''
Turn a pruned page into an interleaved sequence of text and image
segments.

Block-level elements close the current text segment, so every paragraph
becomes its own TextSegment; text inside one block is merged, and only
`br` elements produce line breaks within it.  Each usable `img` becomes an ImageSegment, and a figure caption
is attached to the closest preceding image of the same figure.
'''

import enum
import hashlib
import logging
import re
from collections import namedtuple
from urllib.parse import urljoin, urlsplit

from corpusforge.warc_ingest import canonicalize_url, url_host


logger = logging.getLogger(__name__)

HASH_ALGORITHM = 'blake2b-128'

BLOCK_TAGS = frozenset(['address', 'article', 'blockquote', 'body', 'dd',
                        'div', 'dl', 'dt', 'figcaption', 'figure', 'h1',
                        'h2', 'h3', 'h4', 'h5', 'h6', 'head', 'hr', 'html',
                        'li', 'main', 'ol', 'p', 'pre', 'section', 'table',
                        'tbody', 'td', 'tfoot', 'th', 'thead', 'title', 'tr',
                        'ul'])
SKIPPED_TAGS = frozenset(['head', 'video', 'audio', 'object', 'map'])


class EmptyAssemblyError(ValueError):
    pass


class ImageFormat(enum.Enum):
    JPG = 'JPG'
    JPEG = 'JPEG'
    PNG = 'PNG'
    WEBP = 'WEBP'
    Other = 'Other'


ACCEPTED_FORMATS = frozenset([ImageFormat.JPG, ImageFormat.JPEG,
                              ImageFormat.PNG, ImageFormat.WEBP])

_EXTENSION_FORMATS = {'jpg': ImageFormat.JPG,
                      'jpeg': ImageFormat.JPEG,
                      'png': ImageFormat.PNG,
                      'webp': ImageFormat.WEBP}

ImageRef = namedtuple('ImageRef', ['src_url', 'alt_text', 'filename',
                                   'figcaption', 'width_px', 'height_px',
                                   'format'],
                      defaults=('', '', None, None, None, None))
TextSegment = namedtuple('TextSegment', ['text'])
ImageSegment = namedtuple('ImageSegment', ['image'])
DocumentMeta = namedtuple('DocumentMeta', ['source_url', 'crawl_date',
                                           'language'])
InterleavedDocument = namedtuple('InterleavedDocument',
                                 ['doc_id', 'source_url', 'domain',
                                  'crawl_date', 'language', 'segments'])


def filename_of(src_url):
    '''
    Final path component of a URL, lowercased, without the query.
    '''
    path = urlsplit(src_url).path
    return path.rsplit('/', 1)[-1].lower()


def format_of(filename):
    '''
    Image format suggested by the file extension; None when there is no
    extension (the format is then only known after download).
    '''
    stem, dot, extension = filename.rpartition('.')
    if not dot or not stem or not extension:
        return None
    return _EXTENSION_FORMATS.get(extension.lower(), ImageFormat.Other)


def make_image_ref(src_url, alt_text='', figcaption=None):
    filename = filename_of(src_url)
    return ImageRef(src_url=src_url,
                    alt_text=alt_text,
                    filename=filename,
                    figcaption=figcaption,
                    format=format_of(filename))


def _largest_srcset_candidate(srcset):
    best_url, best_size = None, -1.0
    for candidate in srcset.split(','):
        parts = candidate.split()
        if not parts:
            continue
        size = 1.0
        if len(parts) > 1:
            descriptor = parts[1].lower()
            try:
                size = float(descriptor[:-1])
            except ValueError:
                continue
        if size > best_size:
            best_url, best_size = parts[0], size
    return best_url


def image_source(node):
    '''
    `src`, else the largest `srcset` candidate, else `data-src`.
    '''
    src = node.get('src', '').strip()
    if not src:
        src = _largest_srcset_candidate(node.get('srcset', '')) or ''
    if not src:
        src = node.get('data-src', '').strip()
    return src


def _resolve(base_url, src):
    if not src:
        return None
    try:
        url = urljoin(base_url, src)
        parts = urlsplit(url)
    except ValueError:
        return None
    if parts.scheme not in ('http', 'https') or not parts.hostname:
        return None
    return url


_SPACE_RUN = re.compile(r'\s+')


def normalize_segment_text(text):
    text = re.sub(r'[^\S\n]+', ' ', text)
    text = re.sub(r' ?\n ?', '\n', text)
    text = re.sub(r'\n{3,}', '\n\n', text)
    return text.strip()


def compute_doc_id(source_url, segments):
    digest = hashlib.blake2b(digest_size=16)
    digest.update(source_url.encode('utf-8'))
    for segment in segments:
        if isinstance(segment, TextSegment):
            digest.update(b'\x00t' + segment.text.encode('utf-8'))
        else:
            digest.update(b'\x00i' + segment.image.src_url.encode('utf-8'))
    return digest.hexdigest()


def _inline_text(node):
    if node.tag == 'br':
        return '\n'
    return _SPACE_RUN.sub(' ', node.text)


def _caption_text(node):
    return normalize_segment_text(''.join(
        _inline_text(n) for n in node.iter_nodes()
        if n.is_text() or n.tag == 'br'))


def linearize_segments(tree, base_url):
    '''
    The segment list of a pruned tree, in document order.
    '''
    segments = []
    pieces = []
    # One entry per open figure: index of its latest image segment.
    figures = []

    def flush():
        text = normalize_segment_text(''.join(pieces))
        pieces.clear()
        if text:
            segments.append(TextSegment(text))

    stack = [(tree, False)]
    while stack:
        node, closing = stack.pop()
        if closing:
            if node.tag in BLOCK_TAGS:
                flush()
            if node.tag == 'figure':
                figures.pop()
            continue

        if node.is_text() or node.tag == 'br':
            pieces.append(_inline_text(node))
            continue
        if node.is_comment() or node.tag in SKIPPED_TAGS:
            continue

        if node.tag == 'img':
            flush()
            src_url = _resolve(base_url, image_source(node))
            if src_url is None:
                logger.debug('skipping image without usable source in {}'
                             .format(base_url))
                continue
            alt_text = ' '.join(node.get('alt', '').split())
            segments.append(ImageSegment(make_image_ref(src_url, alt_text)))
            if figures:
                figures[-1] = len(segments) - 1
            continue

        if node.tag == 'figcaption' and figures and figures[-1] is not None:
            flush()
            caption = _caption_text(node)
            if caption:
                idx = figures[-1]
                image = segments[idx].image
                if image.figcaption:
                    caption = image.figcaption + '\n' + caption
                segments[idx] = ImageSegment(
                    image._replace(figcaption=caption))
            continue

        if node.tag in BLOCK_TAGS:
            flush()
        if node.tag == 'figure':
            figures.append(None)
        stack.append((node, True))
        stack.extend((child, False) for child in reversed(node.children))

    flush()
    return segments


def linearize(tree, base_url, meta):
    '''
    Build an InterleavedDocument from a pruned tree.  `meta` is a
    DocumentMeta (source URL, crawl date, language verdict).
    '''
    segments = linearize_segments(tree, base_url)
    if not segments:
        raise EmptyAssemblyError('empty after assembly')

    source_url = canonicalize_url(meta.source_url)
    return InterleavedDocument(doc_id=compute_doc_id(source_url, segments),
                               source_url=source_url,
                               domain=url_host(source_url),
                               crawl_date=meta.crawl_date,
                               language=meta.language,
                               segments=segments)

