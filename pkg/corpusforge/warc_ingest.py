# License: MIT

'''
Streaming access to WARC archives.

Records are framed by hand so that a malformed record can be skipped and a
corrupt gzip member can be stepped over without losing the rest of the
archive; header blocks are parsed with warcio.  Memory use is bounded by the
largest single record, independent of the archive length.
'''

import hashlib
import io
import logging
import zlib
from collections import Counter, namedtuple
from datetime import timezone
from urllib.parse import urlsplit, urlunsplit

from warcio.statusandheaders import (StatusAndHeadersParser,
                                     StatusAndHeadersParserException)
from warcio.timeutils import iso_date_to_datetime


logger = logging.getLogger(__name__)

WarcRecord = namedtuple('WarcRecord', ['target_url', 'capture_time',
                                       'http_status', 'content_type',
                                       'payload', 'truncated', 'charset'])

HTML_CONTENT_TYPES = frozenset(['text/html', 'application/xhtml+xml'])
DEFAULT_PORTS = {'http': 80, 'https': 443}

GZIP_MAGIC = b'\x1f\x8b\x08'
WARC_VERSIONS = ['WARC/1.0', 'WARC/1.1']
RECORD_SEPARATOR = b'\r\n\r\n'
MAX_HEADER_BYTES = 1024 * 1024
CHUNK_SIZE = 64 * 1024


class WarcFormatError(ValueError):
    pass


class InvalidUrlError(ValueError):
    pass


class _MalformedRecord(Exception):
    pass


def canonicalize_url(url):
    '''
    Lowercase the scheme and host, drop the fragment, a default port and an
    empty trailing "?".  Everything else (path, query, userinfo) is kept
    byte for byte.  The function is idempotent.
    '''
    try:
        parts = urlsplit(url.strip())
        port = parts.port
    except (ValueError, AttributeError) as e:
        raise InvalidUrlError('cannot parse URL: {!r}'.format(url)) from e

    scheme = parts.scheme.lower()
    host = parts.hostname
    if not scheme or not host:
        raise InvalidUrlError('not an absolute URL: {!r}'.format(url))

    if ':' in host:
        host = '[{}]'.format(host)
    netloc = host
    if port is not None and port != DEFAULT_PORTS.get(scheme):
        netloc = '{}:{}'.format(host, port)
    userinfo = parts.netloc.rpartition('@')[0] if '@' in parts.netloc \
        else ''
    if userinfo:
        netloc = '{}@{}'.format(userinfo, netloc)

    return urlunsplit((scheme, netloc, parts.path, parts.query, ''))


def url_host(url):
    '''
    The lowercased host of `url` without port or userinfo; raises
    InvalidUrlError for URLs without a host.
    '''
    try:
        host = urlsplit(url).hostname
    except (ValueError, AttributeError) as e:
        raise InvalidUrlError('cannot parse URL: {!r}'.format(url)) from e
    if not host:
        raise InvalidUrlError('URL has no host: {!r}'.format(url))
    return host


def is_absolute_url(url):
    try:
        parts = urlsplit(url)
        parts.port
    except ValueError:
        return False
    return bool(parts.scheme and parts.hostname)


class CandidateUrlSet(object):
    '''
    The set of canonical URLs admitted so far, with a per-language tally
    filled in by whoever classifies the admitted pages.
    '''

    def __init__(self, canonicalize=True):
        self.canonicalize = canonicalize
        self.canonical_urls = set()
        self.per_language_counts = Counter()

    def key(self, url):
        return canonicalize_url(url) if self.canonicalize else url

    def add(self, url):
        '''
        Returns True if the URL was not seen before.
        '''
        key = self.key(url)
        if key in self.canonical_urls:
            return False
        self.canonical_urls.add(key)
        return True

    def record_language(self, language):
        self.per_language_counts[language] += 1

    def __len__(self):
        return len(self.canonical_urls)

    def __contains__(self, url):
        return self.key(url) in self.canonical_urls


def payload_hash(payload):
    return hashlib.blake2b(payload, digest_size=16).hexdigest()


def dedup_records(records, url_set=None, content_dedup=False,
                  content_hashes=None, on_duplicate=None):
    '''
    Keep the first record per canonical URL (and, when `content_dedup` is
    set, per payload hash), preserving the order of the survivors.
    `on_duplicate` is called with each dropped record.
    '''
    if url_set is None:
        url_set = CandidateUrlSet()
    if content_hashes is None:
        content_hashes = set()

    for record in records:
        if record.target_url in url_set:
            if on_duplicate is not None:
                on_duplicate(record)
            continue
        if content_dedup:
            digest = payload_hash(record.payload)
            if digest in content_hashes:
                if on_duplicate is not None:
                    on_duplicate(record)
                continue
            content_hashes.add(digest)
        url_set.add(record.target_url)
        yield record


def _iter_plain_chunks(raw, head):
    if head:
        yield head
    while True:
        chunk = raw.read(CHUNK_SIZE)
        if not chunk:
            return
        yield chunk


class WarcReader(object):
    '''
    Iterates over the HTML response records of one archive.  Counters:

    - records_read: well-formed WARC records of any type
    - yielded: records returned to the caller
    - non_html_skipped: well-formed records that are not 2xx HTML responses
    - malformed_skipped: records dropped because their header or framing
      was broken
    - resyncs: corrupt gzip members stepped over
    '''

    def __init__(self, archive_stream, name=None):
        self.raw = archive_stream
        self.name = name or getattr(archive_stream, 'name', '<stream>')
        self.records_read = 0
        self.yielded = 0
        self.non_html_skipped = 0
        self.malformed_skipped = 0
        self.resyncs = 0
        # Bytes left over from a record already counted as malformed.
        self._in_malformed = False
        self._buffer = bytearray()
        self._chunks = None
        self._started = False
        self._warc_parser = StatusAndHeadersParser(WARC_VERSIONS, verify=True)
        self._http_parser = StatusAndHeadersParser([], verify=False)

    def counters(self):
        return {'records_read': self.records_read,
                'yielded': self.yielded,
                'non_html_skipped': self.non_html_skipped,
                'malformed_skipped': self.malformed_skipped,
                'resyncs': self.resyncs}

    # Decompression.

    def _iter_gzip_chunks(self, head):
        data = head
        decomp = zlib.decompressobj(16 + zlib.MAX_WBITS)
        member_fed = False
        while True:
            if not data:
                data = self.raw.read(CHUNK_SIZE)
                if not data:
                    if member_fed and not decomp.eof:
                        self.resyncs += 1
                        logger.warning('truncated gzip member at end of {}'
                                       .format(self.name))
                    return
            try:
                out = decomp.decompress(data)
            except zlib.error as e:
                self.resyncs += 1
                logger.warning('corrupt gzip member in {} ({}),'
                               ' resynchronizing'.format(self.name, e))
                # A record boundary may have been lost with the member.
                yield b'\r\n\r\n'
                data = self._seek_member(data, 1)
                decomp = zlib.decompressobj(16 + zlib.MAX_WBITS)
                member_fed = False
                continue
            member_fed = True
            if out:
                yield out
            if decomp.eof:
                data = decomp.unused_data
                decomp = zlib.decompressobj(16 + zlib.MAX_WBITS)
                member_fed = False
                if data and not data.startswith(GZIP_MAGIC[:len(data)]):
                    # Trailing padding between members.
                    data = self._seek_member(data, 0)
            else:
                data = b''

    def _seek_member(self, data, start):
        while True:
            idx = data.find(GZIP_MAGIC, start)
            if idx >= 0:
                return data[idx:]
            # Keep a short tail in case the magic straddles two chunks.
            tail = data[-(len(GZIP_MAGIC) - 1):]
            more = self.raw.read(CHUNK_SIZE)
            if not more:
                return b''
            data = tail + more
            start = 0

    def _open_chunks(self):
        head = self.raw.read(2)
        if head == GZIP_MAGIC[:2]:
            return self._iter_gzip_chunks(head)
        return _iter_plain_chunks(self.raw, head)

    # Buffered access to the decompressed stream.

    def _fill(self):
        try:
            chunk = next(self._chunks)
        except StopIteration:
            return False
        self._buffer.extend(chunk)
        return True

    def _readline(self, limit=MAX_HEADER_BYTES):
        while True:
            idx = self._buffer.find(b'\n')
            if idx >= 0:
                line = bytes(self._buffer[:idx + 1])
                del self._buffer[:idx + 1]
                return line
            if len(self._buffer) > limit:
                line = bytes(self._buffer)
                self._buffer.clear()
                return line
            if not self._fill():
                line = bytes(self._buffer)
                self._buffer.clear()
                return line

    def _read(self, n):
        while len(self._buffer) < n:
            if not self._fill():
                break
        data = bytes(self._buffer[:n])
        del self._buffer[:n]
        return data

    def _unread(self, data):
        self._buffer[:0] = data

    # Record framing.

    def _next_version_line(self):
        '''
        Skip to the next line that starts a WARC record.  Returns None at
        the end of the stream.
        '''
        skipped_garbage = False
        while True:
            line = self._readline()
            if not line:
                return None
            if line.startswith(b'WARC/1.'):
                if skipped_garbage and not self._in_malformed:
                    self.malformed_skipped += 1
                self._in_malformed = False
                return line
            if not line.strip():
                continue
            if not self._started:
                raise WarcFormatError('{} is not a WARC stream (starts with'
                                      ' {!r})'.format(self.name, line[:40]))
            skipped_garbage = True

    def _read_header_block(self, version_line):
        lines = [version_line]
        size = len(version_line)
        while True:
            line = self._readline()
            if not line:
                raise _MalformedRecord('end of stream inside header')
            lines.append(line)
            size += len(line)
            if not line.strip():
                return b''.join(lines)
            if size > MAX_HEADER_BYTES:
                raise _MalformedRecord('header block too large')

    def _resync_after(self, data):
        '''
        The declared length did not match the framing.  Put back whatever
        follows the next record start found inside the consumed bytes.
        '''
        idx = data.find(b'\nWARC/1.')
        if idx >= 0:
            self._unread(data[idx + 1:])

    def _next_raw_record(self):
        '''
        Returns (warc_headers, block) for the next well-formed record, or
        None at the end of the stream.
        '''
        while True:
            version_line = self._next_version_line()
            if version_line is None:
                return None
            self._started = True
            try:
                header_bytes = self._read_header_block(version_line)
                try:
                    headers = self._warc_parser.parse(io.BytesIO(header_bytes))
                except StatusAndHeadersParserException as e:
                    raise _MalformedRecord('bad header: {}'.format(e))
                try:
                    length = int(headers.get_header('Content-Length'))
                except (TypeError, ValueError):
                    raise _MalformedRecord('missing Content-Length')
                if length < 0:
                    raise _MalformedRecord('negative Content-Length')

                block = self._read(length)
                if len(block) < length:
                    raise _MalformedRecord('stream ended inside block')
                trailer = self._read(len(RECORD_SEPARATOR))
                if trailer != RECORD_SEPARATOR:
                    self._resync_after(block + trailer)
                    raise _MalformedRecord('block length does not match'
                                           ' Content-Length {}'.format(length))
            except _MalformedRecord as e:
                self.malformed_skipped += 1
                self._in_malformed = True
                logger.warning('skipping malformed record in {}: {}'
                               .format(self.name, e))
                continue

            self.records_read += 1
            return headers, block

    def _to_record(self, headers, block):
        '''
        Returns a WarcRecord for 2xx HTML responses, None for other
        well-formed records.  Raises _MalformedRecord on broken responses.
        '''
        if (headers.get_header('WARC-Type') or '').lower() != 'response':
            return None

        target_url = headers.get_header('WARC-Target-URI') or ''
        target_url = target_url.strip().strip('<>')
        if not is_absolute_url(target_url):
            raise _MalformedRecord('bad target URI {!r}'.format(target_url))
        try:
            capture_time = iso_date_to_datetime(headers.get_header('WARC-Date'))
        except (TypeError, ValueError, AttributeError):
            raise _MalformedRecord('bad WARC-Date')
        capture_time = capture_time.replace(tzinfo=timezone.utc)

        block_stream = io.BytesIO(block)
        try:
            http_headers = self._http_parser.parse(block_stream)
            http_status = int(http_headers.get_statuscode())
        except (StatusAndHeadersParserException, TypeError, ValueError):
            raise _MalformedRecord('bad HTTP header block')
        if not 100 <= http_status <= 599:
            raise _MalformedRecord('bad HTTP status {}'.format(http_status))

        content_type_header = http_headers.get_header('Content-Type') or ''
        mime, _, params = content_type_header.partition(';')
        mime = mime.strip().lower()
        charset = None
        for param in params.split(';'):
            name, _, value = param.partition('=')
            if name.strip().lower() == 'charset' and value.strip():
                charset = value.strip().strip('"\'').lower()

        if not 200 <= http_status <= 299 or mime not in HTML_CONTENT_TYPES:
            return None

        truncated = headers.get_header('WARC-Truncated') is not None
        return WarcRecord(target_url=target_url,
                          capture_time=capture_time,
                          http_status=http_status,
                          content_type=mime,
                          payload=block_stream.read(),
                          truncated=truncated,
                          charset=charset)

    def __iter__(self):
        self._chunks = self._open_chunks()
        while True:
            raw_record = self._next_raw_record()
            if raw_record is None:
                break
            try:
                record = self._to_record(*raw_record)
            except _MalformedRecord as e:
                self.records_read -= 1
                self.malformed_skipped += 1
                logger.warning('skipping malformed record in {}: {}'
                               .format(self.name, e))
                continue
            if record is None:
                self.non_html_skipped += 1
                continue
            self.yielded += 1
            yield record

        if not self._started:
            logger.info('{} contained no records'.format(self.name))


def iter_records(archive_stream):
    '''
    Yields the 2xx HTML response records of a WARC 1.0/1.1 stream, which
    may be plain or a sequence of gzip members.
    '''
    return iter(WarcReader(archive_stream))
